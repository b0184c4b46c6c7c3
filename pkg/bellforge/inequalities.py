from dataclasses import dataclass
import itertools
import json
import logging
import math
import re
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

import bellforge.config as config
from .accumulators import GenuineSettingsTally
from .errors import ParameterError
from .messages import *
from .quantum import PAULIS, Behavior, CorrelationTable, StateVector, compute_behavior, sample_random_setup
from .visibility import VisibilityResult, critical_visibility, restrict_behavior

"""
Explicit Bell inequality families, their maxima over relabelings of settings, outcomes and
parties, and the diagnostics built on them.
"""

NO_FAMILY = 'none'

# Combinations of the non-last parties evaluated per vectorized block
_BLOCK_ENTRIES = 2 ** 22

_TERM = re.compile(r'([+-])\s*(\d*)\s*((?:[a-z]\d+\s*)+)')
_FACTOR = re.compile(r'([a-z])(\d+)')


@dataclass(eq=False)
class InequalityFamily:
    """
    One Bell inequality sum_t c_t <product of observables in t> <= bound, standing for every
    inequality obtained from it by relabeling settings, flipping outcomes and exchanging parties.

    terms holds (coefficient, settings) with one zero-based local setting per party, None when
    the party is absent from the term. labels holds the printed 1-based setting labels of every
    party, so that local setting j of party i is labels[i][j].
    """
    identifier: str
    terms: Tuple[Tuple[float, Tuple[Optional[int], ...]], ...]
    bound: float
    labels: Tuple[Tuple[int, ...], ...]

    def __repr__(self) -> str:
        return f"InequalityFamily({self.identifier}, shape={self.shape}, bound={self.bound:g})"

    @property
    def n_parties(self) -> int:
        return len(self.labels)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(len(labels) for labels in self.labels)

    @property
    def n_settings(self) -> int:
        return sum(self.shape)

    def coefficients(self) -> np.ndarray:
        """Coefficient tensor on the extended correlator axes (index 0 = party absent)."""
        tensor = np.zeros(tuple(k + 1 for k in self.shape))
        for coefficient, settings in self.terms:
            tensor[tuple(0 if s is None else s + 1 for s in settings)] += coefficient
        return tensor

    @staticmethod
    def parse(identifier: str, expression: str, bound: float,
              labels: Optional[Sequence[Sequence[int]]] = None) -> 'InequalityFamily':
        """Parses an expression such as 'a1b1 + a1b2 + a2b1 - a2b2'.

        Parties are the letters a, b, c, ... and settings their 1-based labels. By default the
        labels of a party are 1 .. highest label used.
        """
        expression = expression.strip()
        if (not expression.startswith(('+', '-'))):
            expression = '+' + expression

        parsed = []
        for sign, coefficient, product in _TERM.findall(expression):
            factors = [(ord(letter) - ord('a'), int(label)) for letter, label in _FACTOR.findall(product)]
            value = float(coefficient) if coefficient else 1.0
            parsed.append((value if sign == '+' else -value, dict(factors)))

        n_parties = max(max(factors) for _, factors in parsed) + 1
        if (labels is None):
            labels = [tuple(range(1, max(factors.get(party, 0) for _, factors in parsed) + 1))
                      for party in range(n_parties)]
        labels = tuple(tuple(party_labels) for party_labels in labels)

        terms = []
        for value, factors in parsed:
            settings = tuple(labels[party].index(factors[party]) if party in factors else None
                             for party in range(n_parties))
            terms.append((value, settings))

        return InequalityFamily(identifier, tuple(terms), float(bound), labels)


@dataclass(frozen=True)
class SymmetryElement:
    """
    Relabeling that embeds a family into a scenario: family party i is data party
    party_map[i], its setting j is data setting setting_maps[i][j], with outcomes flipped
    where signs[i][j] is -1.
    """
    party_map: Tuple[int, ...]
    setting_maps: Tuple[Tuple[int, ...], ...]
    signs: Tuple[Tuple[int, ...], ...]


F1 = InequalityFamily.parse('F1', 'a1b1 + a1b2 + a2b1 - a2b2', 2)

# Setting a2 is unused and b3 never appears: a genuine 4 x 5 inequality
F2 = InequalityFamily.parse(
    'F2',
    'a1b1 - a3b1 + a4b1 + a5b1 - a3b2 - a4b2 - a1b4 '
    '+ a3b4 - a4b4 + a5b4 - 2a1b5 - a3b5 + a4b5',
    6, labels=[(1, 3, 4, 5), (1, 2, 3, 4, 5)])

F3 = InequalityFamily.parse(
    'F3',
    'a1b1 + a2b1 - a4b1 - a5b1 - a1b3 + a2b3 - a4b3 '
    '+ a5b3 - a1b4 + a2b4 - 2a3b4 + a4b4 - a5b4 '
    '- a1b5 + a2b5 + 2a3b5 + a4b5 - a5b5',
    8)

F4 = InequalityFamily.parse(
    'F4',
    '- a1b1 - a2b1 - a3b1 + 2a4b1 + a5b1 + a1b2 '
    '+ a4b2 - a5b2 + a1b3 - a3b3 + a4b3 - a5b3 '
    '- a3b4 + a4b4 + 2a5b4 + 2a3b5 + a4b5 + a5b5 '
    '+ a2b4 + a3b2 + a1b4',
    10)

W333 = InequalityFamily.parse(
    'W333',
    'a1 + 5a2 - 5a3 + b1 - a1b1 - a2b1 + 3a3b1 + 3b2 + a1b2 '
    '- 2a3b2 + b3 + a1b3 + c1 - 2a1c1 - 2a2c1 + a3c1 + 2b1c1 '
    '+ 4a1b1c1 - a2b1c1 + a3b1c1 - 2b2c1 + 2a1b2c1 + 3a2b2c1 '
    '- 3a3b2c1 - 5b3c1 + 4a2b3c1 - 3a3b3c1 + a2c2 + a3c2 '
    '+ a1b1c2 - 3a2b1c2 - 2a3b1c2 - 3b2c2 - 3a3b2c2 + 3b3c2 '
    '+ a1b3c2 - 4a2b3c2 + 2c3 + a1c3 - 2a2c3 + a3c3 - 3b1c3 '
    '- 2a1b1c3 + a2b1c3 - 4a3b1c3 + 2b2c3 - 3a1b2c3 '
    '+ 3a2b2c3 + 2a3b2c3 - 3b3c3 - 3a3b3c3',
    23)

FAMILIES = {family.identifier: family for family in (F1, F2, F3, F4, W333)}


def family_to_json(family: InequalityFamily) -> str:
    """Audit form of a family: its terms with printed labels and its local bound."""
    terms = []
    for coefficient, settings in family.terms:
        terms.append({'coefficient': coefficient,
                      'settings': [None if s is None else family.labels[party][s]
                                   for party, s in enumerate(settings)]})

    return json.dumps({'identifier': family.identifier,
                       'bound': family.bound,
                       'shape': list(family.shape),
                       'labels': [list(labels) for labels in family.labels],
                       'terms': terms}, indent=2)


def family_from_json(text: str) -> InequalityFamily:
    data = json.loads(text)
    labels = tuple(tuple(party_labels) for party_labels in data['labels'])

    terms = []
    for term in data['terms']:
        settings = tuple(None if label is None else labels[party].index(label)
                         for party, label in enumerate(term['settings']))
        terms.append((float(term['coefficient']), settings))

    return InequalityFamily(data['identifier'], tuple(terms), float(data['bound']), labels)


def local_bound(family: InequalityFamily) -> float:
    """Maximum of the family functional over all deterministic +-1 assignments."""
    value = family.coefficients()
    for k in family.shape:
        assignments = 1 - 2 * ((np.arange(2 ** k)[:, None] >> np.arange(k)) & 1)
        extended = np.hstack([np.ones((2 ** k, 1)), assignments])
        value = np.tensordot(value, extended, axes=([0], [1]))
    return float(value.max())


def evaluate_family(family: InequalityFamily, corr: CorrelationTable,
                    element: Optional[SymmetryElement] = None) -> float:
    """Value of the family functional for one embedding. Without an element, the family's
    settings are the first settings of each party, in order."""
    if (element is not None):
        corr = corr.apply(element)
    window = tuple(slice(0, k + 1) for k in family.shape)
    return float((family.coefficients() * corr.extended[window]).sum())


def embeddable(family: InequalityFamily, corr: CorrelationTable) -> bool:
    if (family.n_parties != corr.n_parties):
        return False
    return any(all(k <= corr.settings_shape[p] for k, p in zip(family.shape, party_map))
               for party_map in itertools.permutations(range(corr.n_parties)))


def evaluate_family_max(family: InequalityFamily, corr: CorrelationTable) -> Tuple[float, SymmetryElement]:
    """Exact maximum of the family functional over every injection of its settings into the
    scenario's settings, every outcome flip and every party exchange the shapes allow.

    All parties but the last are enumerated; for the last one the best signs are the signs of
    its coefficients, which leaves an assignment problem solved by enumerating its injections.

    Parameters
    ----------
    family: InequalityFamily
        Family to evaluate
    corr: CorrelationTable
        Correlations with the same number of parties

    Returns
    -------
    (value, witness) where evaluate_family(family, corr, witness) == value.
    ParameterError is raised when the family does not embed into the scenario.
    """
    if (not embeddable(family, corr)):
        raise ParameterError(TEMPLATE_FAMILY_NOT_EMBEDDABLE.substitute(
            family=family.identifier, needed='x'.join(map(str, family.shape)),
            available='x'.join(map(str, corr.settings_shape))))

    coefficients = family.coefficients()
    best_value, best_element = -math.inf, None

    for party_map in itertools.permutations(range(corr.n_parties)):
        data_shape = tuple(corr.settings_shape[p] for p in party_map)
        if (any(k > m for k, m in zip(family.shape, data_shape))):
            continue

        table = np.transpose(corr.extended, party_map)
        value, setting_maps, signs = _maximize_embedding(coefficients, table, family.shape, data_shape)

        if (value > best_value):
            best_value = value
            best_element = SymmetryElement(tuple(party_map), setting_maps, signs)

    return best_value, best_element


def _injections(m: int, k: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(m), k)), dtype=np.int64).reshape(-1, k)


def _selection_matrices(injections: np.ndarray, sign_bits: np.ndarray, k: int, m: int) -> np.ndarray:
    """Matrices S[o, x, y] mapping family axis x onto data axis y with signs, one per option o."""
    n = len(injections)
    signs = 1 - 2 * ((sign_bits[:, None] >> np.arange(k)) & 1)

    selection = np.zeros((n, k + 1, m + 1))
    selection[:, 0, 0] = 1.0
    selection[np.arange(n)[:, None], np.arange(1, k + 1)[None, :], injections + 1] = signs
    return selection


def _maximize_embedding(coefficients: np.ndarray, table: np.ndarray,
                        family_shape: Tuple[int, ...], data_shape: Tuple[int, ...]):
    n_parties = len(family_shape)
    k_last, m_last = family_shape[-1], data_shape[-1]

    injections = [_injections(m, k) for k, m in zip(family_shape, data_shape)]
    option_counts = [len(injections[p]) * 2 ** family_shape[p] for p in range(n_parties - 1)]
    n_combinations = int(np.prod(option_counts)) if option_counts else 1

    last_injections = injections[-1]
    rows = np.arange(k_last)[None, :]
    block_size = max(1, _BLOCK_ENTRIES // (len(last_injections) * max(k_last, 1)))

    # einsum subscripts: family axes, data axes, one shared option axis
    family_axes = ''.join(chr(ord('a') + p) for p in range(n_parties))
    data_axes = ''.join(chr(ord('n') + p) for p in range(n_parties))
    operands = ','.join(f'z{family_axes[p]}{data_axes[p]}' for p in range(n_parties - 1))
    subscripts = f'{family_axes},{operands + "," if operands else ""}{data_axes}->z{family_axes[-1]}{data_axes[-1]}'

    best_value, best = -math.inf, None
    for start in range(0, n_combinations, block_size):
        combinations = np.arange(start, min(start + block_size, n_combinations))
        options = np.unravel_index(combinations, option_counts) if option_counts else ()

        selections = []
        for party, option in enumerate(options):
            k, m = family_shape[party], data_shape[party]
            selections.append(_selection_matrices(
                injections[party][option >> k], option & (2 ** k - 1), k, m))

        if (selections):
            reduced = np.einsum(subscripts, coefficients, *selections, table, optimize=True)
        else:
            reduced = (coefficients[:, None] * table[None, :])[None]

        # Best signs of the last party are the signs of its coefficients
        magnitudes = np.abs(reduced[:, 1:, 1:])
        totals = magnitudes[:, rows, last_injections].sum(axis=2)
        values = reduced[:, 0, 0] + totals.max(axis=1)

        index = int(np.argmax(values))
        if (values[index] > best_value):
            best_value = float(values[index])
            best = (combinations[index], index, int(np.argmax(totals[index])), reduced[index])

    combination, _, last_choice, reduced = best
    setting_maps, signs = [], []

    if (option_counts):
        for party, option in enumerate(np.unravel_index(combination, option_counts)):
            k = family_shape[party]
            setting_maps.append(tuple(int(s) for s in injections[party][int(option) >> k]))
            signs.append(tuple(1 - 2 * ((int(option) >> j) & 1) for j in range(k)))

    last_map = tuple(int(s) for s in last_injections[last_choice])
    setting_maps.append(last_map)
    signs.append(tuple(1 if reduced[j + 1, s + 1] >= 0 else -1 for j, s in enumerate(last_map)))

    return best_value, tuple(setting_maps), tuple(signs)


def per_inequality_strength(family: InequalityFamily, corr: CorrelationTable) -> float:
    """Strength of nonlocality seen by the family alone.

    White noise scales every expectation of a product of traceless observables by v, so the
    family stops being violated at v = bound / value.
    """
    value, _ = evaluate_family_max(family, corr)
    if (value <= family.bound):
        return 0.0
    return 1.0 - family.bound / value


def classify_strongest_family(corr: CorrelationTable,
                              families: Optional[Iterable[InequalityFamily]] = None) -> Tuple[str, float]:
    """Family with the highest per-inequality strength among those that embed.

    Ties go to the family with fewer settings. (NO_FAMILY, 0.0) is returned when no family
    is violated beyond CONFIG_VIOLATION_EPSILON. ParameterError is raised when none embeds.
    """
    if (families is None):
        families = FAMILIES.values()

    candidates = [family for family in families if embeddable(family, corr)]
    if (not candidates):
        raise ParameterError(TEMPLATE_FAMILY_NOT_EMBEDDABLE.substitute(
            family='any', needed='a known family', available='x'.join(map(str, corr.settings_shape))))

    best_family, best_strength = NO_FAMILY, 0.0
    for family in sorted(candidates, key=lambda family: family.n_settings):
        strength = per_inequality_strength(family, corr)
        if (strength > best_strength):
            best_family, best_strength = family.identifier, strength

    if (best_strength <= config.CONFIG_VIOLATION_EPSILON):
        return NO_FAMILY, 0.0

    return best_family, best_strength


def horodecki_strength(state: StateVector) -> float:
    """Strength reachable by a two-qubit pure state with optimal CHSH settings.

    With T_kl = <sigma_k x sigma_l> and u_1 >= u_2 the two largest eigenvalues of T^T T, the
    best CHSH value is 2 sqrt(u_1 + u_2), so v_crit = 1 / sqrt(u_1 + u_2).
    """
    if (state.n_qubits != 2):
        raise ParameterError(TEMPLATE_INVALID_PARAMETER.substitute(
            name='n_qubits', value=state.n_qubits, reason='closed form holds for two qubits'))

    amplitudes = state.amplitudes
    correlations = np.array([[np.vdot(amplitudes, np.kron(sigma_k, sigma_l) @ amplitudes).real
                              for sigma_l in PAULIS] for sigma_k in PAULIS])

    eigenvalues = np.linalg.eigvalsh(correlations.T @ correlations)
    total = eigenvalues[-1] + eigenvalues[-2]
    if (total <= 1.0):
        return 0.0
    return 1.0 - 1.0 / math.sqrt(total)


def is_genuine_multisetting(behavior: Behavior, full: Optional[VisibilityResult] = None) -> bool:
    """True when the behavior is nonlocal but every restriction to two settings per party
    (parties with fewer settings keep them all) admits a local model.

    Parameters
    ----------
    behavior: Behavior
        Behavior on the full scenario
    full: VisibilityResult
        Result of critical_visibility on behavior, computed here when omitted
    """
    if (full is None):
        full = critical_visibility(behavior)
    if (not full.violated):
        return False

    choices = [list(itertools.combinations(range(m), 2)) if m > 2 else [tuple(range(m))]
               for m in behavior.settings_shape]

    for kept in itertools.product(*choices):
        if (critical_visibility(restrict_behavior(behavior, kept)).violated):
            return False

    return True


def genuine_multisetting_fraction(state: StateVector, full_shape: Sequence[int], trials: int,
                                  rng: np.random.Generator) -> GenuineSettingsTally:
    """Share of violating random settings that need more than two settings for some party.

    Returns
    -------
    The tally; its fraction is 0 and no_violations is set when no trial was violated.
    """
    if (max(full_shape) < 3):
        raise ParameterError(TEMPLATE_INVALID_PARAMETER.substitute(
            name='full_shape', value=list(full_shape), reason='some party needs at least 3 settings'))

    tally = GenuineSettingsTally(scenario='x'.join(map(str, full_shape)))
    for _ in range(trials):
        behavior = compute_behavior(state, sample_random_setup(full_shape, rng))
        full = critical_visibility(behavior)
        tally.record(full.violated, full.violated and is_genuine_multisetting(behavior, full))

    logging.info(
        f"Genuine multisetting fraction: [shape={tally.scenario} trials={trials} violating={tally.violating} genuine={tally.genuine}]")

    return tally


def certificate_support(result: VisibilityResult, behavior: Behavior) -> Optional[Tuple[int, ...]]:
    """Number of settings per party that the dual certificate actually uses.

    The certificate is rewritten on correlators: p(r|s) = 2^-N sum over subsets S of
    prod_{i in S} r_i E_S(s_S), and E_S does not depend on the settings outside S, so the
    coefficient of E_S(t) sums the certificate over those settings. Terms of the empty subset
    (normalizations) are dropped. Returns None when the result has no certificate.
    """
    if (result.certificate is None):
        return None

    n_parties = behavior.n_parties
    shape = behavior.settings_shape
    certificate = result.certificate.reshape(tuple(shape) + (2,) * n_parties)

    # Outcome axis r -> (absent, present) weights: [1, 1] and [1, -1]
    weights = np.array([[1.0, 1.0], [1.0, -1.0]])
    coefficients = certificate
    for _ in range(n_parties):
        coefficients = np.tensordot(coefficients, weights, axes=([n_parties], [0]))

    tolerance = 1e-7 * max(1.0, np.abs(result.certificate).max())
    used = [np.zeros(m, dtype=bool) for m in shape]

    for pattern in itertools.product((0, 1), repeat=n_parties):
        present = [party for party in range(n_parties) if pattern[party]]
        if (not present):
            continue

        absent = tuple(party for party in range(n_parties) if not pattern[party])
        term = coefficients[(Ellipsis,) + pattern].sum(axis=absent, keepdims=True)
        significant = np.abs(term) > tolerance

        for party in present:
            others = tuple(axis for axis in range(n_parties) if axis != party)
            used[party] |= significant.any(axis=others).reshape(-1)

    return tuple(int(flags.sum()) for flags in used)
