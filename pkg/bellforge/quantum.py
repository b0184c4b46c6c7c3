import cmath
from dataclasses import dataclass
from enum import Enum
import itertools
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ParameterError
from .messages import *

"""
Multiqubit pure states, dichotomic qubit observables and the behaviors they produce.

Conventions shared by the whole package:
- Basis states are ordered lexicographically with qubit 1 as the most significant bit.
- Outcome index 0 is the +1 outcome, projector (I + n.sigma)/2; index 1 is -1.
"""

NORM_TOLERANCE = 1e-12
PROBABILITY_TOLERANCE = 1e-12
NORMALIZATION_TOLERANCE = 1e-9

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (PAULI_X, PAULI_Y, PAULI_Z)


class StateFamily(Enum):
    GHZ = 'ghz'
    W = 'w'
    DICKE = 'dicke'
    LINEAR_CLUSTER = 'lcluster'
    RING_CLUSTER = 'rcluster'
    PRODUCT = 'product'


@dataclass(eq=False)
class StateVector:
    """
    Pure state of n_qubits qubits. amplitudes has length 2**n_qubits and unit norm.
    """
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)

        if (self.n_qubits < 1):
            raise ParameterError(TEMPLATE_INVALID_PARAMETER.substitute(
                name='n_qubits', value=self.n_qubits, reason='must be positive'))

        if (self.amplitudes.shape != (2 ** self.n_qubits,)):
            raise ParameterError(TEMPLATE_INVALID_PARAMETER.substitute(
                name='amplitudes', value=self.amplitudes.shape,
                reason=f'expected length {2 ** self.n_qubits}'))

        norm = np.vdot(self.amplitudes, self.amplitudes).real
        if (abs(norm - 1.0) > NORM_TOLERANCE):
            raise ParameterError(TEMPLATE_INVALID_PARAMETER.substitute(
                name='amplitudes', value=f'norm^2={norm}', reason='state must be normalized'))

    def __str__(self) -> str:
        return f"StateVector: [n_qubits={self.n_qubits}]"

    def tensor(self) -> np.ndarray:
        """Amplitudes reshaped to one axis of size 2 per qubit."""
        return self.amplitudes.reshape((2,) * self.n_qubits)


@dataclass(eq=False)
class Observable:
    """
    Dichotomic qubit observable n.sigma given by its unit Bloch vector.
    """
    bloch: np.ndarray

    def __post_init__(self):
        self.bloch = np.asarray(self.bloch, dtype=float)

        if (self.bloch.shape != (3,) or abs(np.linalg.norm(self.bloch) - 1.0) > NORM_TOLERANCE):
            raise ParameterError(TEMPLATE_INVALID_PARAMETER.substitute(
                name='bloch', value=self.bloch, reason='must be a unit 3-vector'))

    def __repr__(self) -> str:
        return f"Observable(bloch={self.bloch.tolist()})"

    @staticmethod
    def along(x: float, y: float, z: float) -> 'Observable':
        """Observable along the direction (x, y, z), normalized."""
        vector = np.array([x, y, z], dtype=float)
        return Observable(vector / np.linalg.norm(vector))

    def operator(self) -> np.ndarray:
        return sum(component * pauli for component, pauli in zip(self.bloch, PAULIS))

    def eigenbras(self) -> np.ndarray:
        """Returns a 2x2 matrix whose row r is the bra of the eigenvector for outcome index r.
        """
        nx, ny, nz = self.bloch
        theta = math.acos(max(-1.0, min(1.0, nz)))
        phase = cmath.exp(1j * math.atan2(ny, nx))
        c, s = math.cos(theta / 2), math.sin(theta / 2)

        kets = np.array([[c, phase * s], [s, -phase * c]], dtype=complex)
        return kets.conj()


@dataclass(eq=False)
class MeasurementSetup:
    """
    Per-party lists of observables; party i can choose among m_i settings.
    """
    per_party_settings: List[List[Observable]]

    def __post_init__(self):
        if (len(self.per_party_settings) == 0):
            raise ParameterError(TEMPLATE_INVALID_PARAMETER.substitute(
                name='per_party_settings', value=0, reason='at least one party is required'))

        for party, settings in enumerate(self.per_party_settings):
            if (len(settings) < 1):
                raise ParameterError(TEMPLATE_INVALID_PARAMETER.substitute(
                    name=f'settings of party {party + 1}', value=0, reason='must be at least 1'))

    @property
    def n_parties(self) -> int:
        return len(self.per_party_settings)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(len(settings) for settings in self.per_party_settings)


@dataclass(eq=False)
class Behavior:
    """
    Joint outcome probabilities p(r|s).

    probabilities has shape settings_shape + (2,) * n_parties: the first n_parties axes
    index the setting of each party, the last n_parties axes the outcome index.
    """
    probabilities: np.ndarray

    def __post_init__(self):
        probabilities = np.array(self.probabilities, dtype=float)
        n_parties = probabilities.ndim // 2

        if (probabilities.ndim == 0 or probabilities.ndim % 2 != 0
                or probabilities.shape[n_parties:] != (2,) * n_parties):
            raise ParameterError(TEMPLATE_INVALID_PARAMETER.substitute(
                name='probabilities', value=probabilities.shape,
                reason='expected settings axes followed by one outcome axis of size 2 per party'))

        if (probabilities.min() < -PROBABILITY_TOLERANCE or probabilities.max() > 1 + PROBABILITY_TOLERANCE):
            raise ParameterError(TEMPLATE_INVALID_PARAMETER.substitute(
                name='probabilities', value=f'[{probabilities.min()}, {probabilities.max()}]',
                reason='entries must lie in [0, 1]'))

        # Round-off below zero
        probabilities[probabilities < 0] = 0.0

        totals = probabilities.sum(axis=tuple(range(n_parties, 2 * n_parties)))
        if (np.abs(totals - 1.0).max() > NORMALIZATION_TOLERANCE):
            raise ParameterError(TEMPLATE_INVALID_PARAMETER.substitute(
                name='probabilities', value=f'max deviation {np.abs(totals - 1.0).max()}',
                reason='outcomes must sum to 1 for every setting combination'))

        self.probabilities = probabilities

    @property
    def n_parties(self) -> int:
        return self.probabilities.ndim // 2

    @property
    def settings_shape(self) -> Tuple[int, ...]:
        return self.probabilities.shape[:self.n_parties]

    def flat(self) -> np.ndarray:
        """Probabilities as a matrix, one row per setting combination and one column per
        outcome combination, both in lexicographic order."""
        return self.probabilities.reshape(int(np.prod(self.settings_shape)), 2 ** self.n_parties)

    @staticmethod
    def uniform(settings_shape: Sequence[int]) -> 'Behavior':
        """Behavior of white noise: every outcome equally likely."""
        n_parties = len(settings_shape)
        return Behavior(np.full(tuple(settings_shape) + (2,) * n_parties, 2.0 ** -n_parties))


class CorrelationTable:
    """
    Expectation values of products of +-1 outcomes.

    Stored as one extended tensor with an axis of size m_i + 1 per party: index 0 means
    the party does not take part in the product, index j > 0 means it measures setting j - 1.
    The all-zero entry is 1. Marginals are evaluated at setting 0 of the absent parties,
    which for non-signalling behaviors does not depend on that choice.
    """

    def __init__(self, extended: np.ndarray):
        self.extended = np.asarray(extended, dtype=float)

    def __repr__(self) -> str:
        return f"CorrelationTable(settings_shape={self.settings_shape})"

    @property
    def n_parties(self) -> int:
        return self.extended.ndim

    @property
    def settings_shape(self) -> Tuple[int, ...]:
        return tuple(size - 1 for size in self.extended.shape)

    def marginal(self, parties: Sequence[int]) -> np.ndarray:
        """Expectation of the product of outcomes of the given parties, indexed by their settings.

        Parameters
        ----------
        parties: Sequence[int]
            Zero-based party indices, non-empty
        """
        index = tuple(slice(1, None) if party in parties else 0 for party in range(self.n_parties))
        return self.extended[index]

    def as_dict(self) -> Dict[Tuple[int, ...], np.ndarray]:
        """Every non-empty subset of parties mapped to its expectation array."""
        table = {}
        for size in range(1, self.n_parties + 1):
            for subset in itertools.combinations(range(self.n_parties), size):
                table[subset] = self.marginal(subset)
        return table

    def full(self) -> np.ndarray:
        """Full correlators, all parties in the product."""
        return self.marginal(range(self.n_parties))

    @staticmethod
    def from_correlations(correlators) -> 'CorrelationTable':
        """Table with the given full correlators and vanishing marginals.

        Parameters
        ----------
        correlators: array-like
            One axis per party, indexed by setting
        """
        correlators = np.asarray(correlators, dtype=float)
        extended = np.zeros(tuple(size + 1 for size in correlators.shape))
        extended[(0,) * correlators.ndim] = 1.0
        extended[(slice(1, None),) * correlators.ndim] = correlators
        return CorrelationTable(extended)

    def apply(self, element) -> 'CorrelationTable':
        """Acts with a symmetry element: new party p is old party element.party_map[p],
        its setting j is old setting element.setting_maps[p][j] multiplied by element.signs[p][j].
        """
        table = np.transpose(self.extended, element.party_map)

        for party, (settings, signs) in enumerate(zip(element.setting_maps, element.signs)):
            index = [0] + [setting + 1 for setting in settings]
            factors = np.array([1.0] + list(signs))
            table = np.take(table, index, axis=party)
            shape = [1] * table.ndim
            shape[party] = len(index)
            table = table * factors.reshape(shape)

        return CorrelationTable(table)


def make_named_state(family: StateFamily, n_qubits: int, alpha: float = math.pi / 4, k: int = 1) -> StateVector:
    """Constructs one of the named multiqubit states.

    Parameters
    ----------
    family: StateFamily
        GHZ uses alpha, DICKE uses k; W is Dicke with k = 1
    n_qubits: int
        At least 2, at least 3 for RING_CLUSTER
    alpha: float
        GHZ angle in radians: cos(alpha)|0...0> + sin(alpha)|1...1>. Used as given.
    k: int
        Number of excitations of the Dicke state, 1 <= k <= n_qubits - 1

    Returns
    -------
    The normalized state. ParameterError is raised for invalid parameters.
    """
    if (n_qubits < 2):
        raise ParameterError(TEMPLATE_INVALID_PARAMETER.substitute(
            name='n_qubits', value=n_qubits, reason=f'{family.value} needs at least 2 qubits'))

    dim = 2 ** n_qubits
    amplitudes = np.zeros(dim, dtype=complex)

    if (family == StateFamily.GHZ):
        amplitudes[0] = math.cos(alpha)
        amplitudes[-1] = math.sin(alpha)

    elif (family in (StateFamily.W, StateFamily.DICKE)):
        excitations = 1 if family == StateFamily.W else k
        if (excitations < 1 or excitations > n_qubits - 1):
            raise ParameterError(TEMPLATE_INVALID_PARAMETER.substitute(
                name='k', value=excitations, reason=f'must lie in [1, {n_qubits - 1}]'))

        weights = _basis_bits(n_qubits).sum(axis=1)
        amplitudes[weights == excitations] = 1.0 / math.sqrt(math.comb(n_qubits, excitations))

    elif (family in (StateFamily.LINEAR_CLUSTER, StateFamily.RING_CLUSTER)):
        edges = [(i, i + 1) for i in range(n_qubits - 1)]
        if (family == StateFamily.RING_CLUSTER):
            if (n_qubits < 3):
                raise ParameterError(TEMPLATE_INVALID_PARAMETER.substitute(
                    name='n_qubits', value=n_qubits, reason='ring cluster needs at least 3 qubits'))
            edges.append((n_qubits - 1, 0))

        # Controlled-Z along every edge applied to |+>^N
        bits = _basis_bits(n_qubits)
        parity = sum(bits[:, i] & bits[:, j] for i, j in edges)
        amplitudes[:] = (-1.0) ** parity / math.sqrt(dim)

    elif (family == StateFamily.PRODUCT):
        amplitudes[0] = 1.0

    else:
        raise ParameterError(TEMPLATE_INVALID_PARAMETER.substitute(
            name='family', value=family, reason='unknown state family'))

    return StateVector(n_qubits, amplitudes)


def sample_random_pure_state(n_qubits: int, rng: np.random.Generator) -> StateVector:
    """Haar-random pure state: i.i.d. standard complex Gaussian amplitudes, normalized.
    """
    if (n_qubits < 1):
        raise ParameterError(TEMPLATE_INVALID_PARAMETER.substitute(
            name='n_qubits', value=n_qubits, reason='must be positive'))

    dim = 2 ** n_qubits
    amplitudes = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return StateVector(n_qubits, amplitudes / np.linalg.norm(amplitudes))


def sample_random_observable(rng: np.random.Generator) -> Observable:
    """Observable with a Bloch vector uniform on the unit sphere, which is the image of
    sigma_z under conjugation by a Haar-random qubit unitary.
    """
    while True:
        vector = rng.standard_normal(3)
        norm = np.linalg.norm(vector)
        if (norm > 1e-8):
            return Observable(vector / norm)


def sample_random_setup(shape: Sequence[int], rng: np.random.Generator) -> MeasurementSetup:
    """Fresh random observables for every party and setting, drawn in party-major order.
    """
    return MeasurementSetup([[sample_random_observable(rng) for _ in range(m)] for m in shape])


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random dim x dim unitary: QR decomposition of a complex Ginibre matrix with the
    phases of R's diagonal moved into Q.
    """
    ginibre = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(ginibre)
    diagonal = np.diag(r)
    return q * (diagonal / np.abs(diagonal))


def bloch_rotation(unitary: np.ndarray) -> np.ndarray:
    """Rotation R with U (n.sigma) U^dagger = (R n).sigma for a qubit unitary U."""
    rotation = np.empty((3, 3))
    for k, pauli_k in enumerate(PAULIS):
        for l, pauli_l in enumerate(PAULIS):
            rotation[k, l] = 0.5 * np.trace(pauli_k @ unitary @ pauli_l @ unitary.conj().T).real
    return rotation


def apply_local_unitary(state: StateVector, party: int, unitary: np.ndarray) -> StateVector:
    """Applies a single-qubit unitary to the zero-based qubit party."""
    tensor = np.tensordot(unitary, state.tensor(), axes=([1], [party]))
    tensor = np.moveaxis(tensor, 0, party)
    return StateVector(state.n_qubits, tensor.reshape(-1))


def compute_behavior(state: StateVector, setup: MeasurementSetup) -> Behavior:
    """Computes p(r|s) = <psi| tensor_i P_{r_i}(a_{s_i}) |psi> for every setting and outcome
    combination.

    Every projector is rank one, so the probabilities are the squared moduli of the
    amplitudes <e_{r_1}| ... <e_{r_N}| psi>, obtained by contracting one qubit at a time.

    Parameters
    ----------
    state: StateVector
        Pure state of N qubits
    setup: MeasurementSetup
        Observables for the same N parties

    Returns
    -------
    The complete Behavior. ParameterError is raised on a party count mismatch.
    """
    if (setup.n_parties != state.n_qubits):
        raise ParameterError(TEMPLATE_SHAPE_MISMATCH.substitute(
            parties=setup.n_parties, qubits=state.n_qubits))

    amplitudes = state.tensor()
    for observables in setup.per_party_settings:
        # Row 2*s + r is the bra for setting s, outcome r
        bras = np.concatenate([observable.eigenbras() for observable in observables])
        # Contracted axis goes to the back, so after N steps the party order is restored
        amplitudes = np.tensordot(amplitudes, bras, axes=([0], [1]))

    n_parties = setup.n_parties
    interleaved = []
    for m in setup.shape:
        interleaved.extend([m, 2])
    probabilities = (np.abs(amplitudes) ** 2).reshape(interleaved)
    probabilities = np.transpose(
        probabilities, list(range(0, 2 * n_parties, 2)) + list(range(1, 2 * n_parties, 2)))

    return Behavior(probabilities)


def expectation_values(behavior: Behavior) -> CorrelationTable:
    """Expectation of the product of +-1 outcomes for every non-empty subset of parties and
    every setting combination of that subset.
    """
    n_parties = behavior.n_parties
    interleaved_axes = []
    for party in range(n_parties):
        interleaved_axes.extend([party, n_parties + party])

    table = np.transpose(behavior.probabilities, interleaved_axes)
    table = table.reshape([2 * m for m in behavior.settings_shape])

    for m in behavior.settings_shape:
        table = np.tensordot(table, _correlator_weights(m), axes=([0], [0]))

    table = np.clip(table, -1.0, 1.0)
    table[(0,) * n_parties] = 1.0

    return CorrelationTable(table)


def _correlator_weights(m: int) -> np.ndarray:
    """Maps the (setting, outcome) axis of one party onto its extended correlator axis."""
    weights = np.zeros((2 * m, m + 1))
    weights[0:2, 0] = 1.0
    for setting in range(m):
        weights[2 * setting, setting + 1] = 1.0
        weights[2 * setting + 1, setting + 1] = -1.0
    return weights


def _basis_bits(n_qubits: int) -> np.ndarray:
    """Bit table of every basis index, qubit 1 in column 0 as the most significant bit."""
    indices = np.arange(2 ** n_qubits)
    return (indices[:, None] >> (n_qubits - 1 - np.arange(n_qubits))) & 1


@dataclass(frozen=True)
class StateSpec:
    """
    Parsed description of the state an experiment runs on, e.g. 'ghz:alpha=45', 'dicke:k=2',
    'w', 'lcluster', 'rcluster', 'product' or 'random'. The qubit count comes from the shape.
    """
    family: str
    alpha_degrees: float = 45.0
    k: int = 1

    FAMILIES = ('ghz', 'w', 'dicke', 'lcluster', 'rcluster', 'product', 'random')

    @staticmethod
    def parse(text: str) -> 'StateSpec':
        """Parses a state description. ParameterError is raised on malformed input."""
        name, _, parameters = text.strip().lower().partition(':')

        if (name not in StateSpec.FAMILIES):
            raise ParameterError(TEMPLATE_INVALID_PARAMETER.substitute(
                name='state', value=text, reason=f'family must be one of {", ".join(StateSpec.FAMILIES)}'))

        values = {}
        for item in filter(None, parameters.split(',')):
            key, _, value = item.partition('=')
            values[key.strip()] = value.strip()

        allowed = {'ghz': {'alpha'}, 'dicke': {'k'}}.get(name, set())
        if (not set(values) <= allowed):
            raise ParameterError(TEMPLATE_INVALID_PARAMETER.substitute(
                name='state', value=text, reason=f'unexpected parameters {sorted(set(values) - allowed)}'))

        try:
            return StateSpec(name, float(values.get('alpha', 45.0)), int(values.get('k', 1)))
        except ValueError as e:
            raise ParameterError(TEMPLATE_INVALID_PARAMETER.substitute(
                name='state', value=text, reason=str(e))) from e

    def describe(self) -> str:
        if (self.family == 'ghz'):
            return f"ghz:alpha={self.alpha_degrees:g}"
        if (self.family == 'dicke'):
            return f"dicke:k={self.k}"
        return self.family

    def validate(self, n_qubits: int):
        """Raises ParameterError if the family cannot be built on n_qubits qubits."""
        if (self.family != 'random'):
            self.build(n_qubits)
        elif (n_qubits < 1):
            raise ParameterError(TEMPLATE_INVALID_PARAMETER.substitute(
                name='n_qubits', value=n_qubits, reason='must be positive'))

    def build(self, n_qubits: int, rng: Optional[np.random.Generator] = None) -> StateVector:
        """Builds the state; family 'random' draws a Haar-random state from rng."""
        if (self.family == 'random'):
            if (rng is None):
                raise ParameterError(TEMPLATE_INVALID_PARAMETER.substitute(
                    name='rng', value=None, reason='random states need a random stream'))
            return sample_random_pure_state(n_qubits, rng)

        return make_named_state(StateFamily(self.family), n_qubits,
                                alpha=math.radians(self.alpha_degrees), k=self.k)
