import math
import unittest

from hypothesis import given
from hypothesis import settings
from hypothesis import strategies as st
import numpy as np

from bellforge.errors import ParameterError
from bellforge.inequalities import SymmetryElement
from bellforge.quantum import PAULI_X
from bellforge.quantum import Behavior
from bellforge.quantum import CorrelationTable
from bellforge.quantum import MeasurementSetup
from bellforge.quantum import Observable
from bellforge.quantum import StateFamily
from bellforge.quantum import StateSpec
from bellforge.quantum import StateVector
from bellforge.quantum import apply_local_unitary
from bellforge.quantum import bloch_rotation
from bellforge.quantum import compute_behavior
from bellforge.quantum import expectation_values
from bellforge.quantum import make_named_state
from bellforge.quantum import random_unitary
from bellforge.quantum import sample_random_observable
from bellforge.quantum import sample_random_pure_state
from bellforge.quantum import sample_random_setup

X = Observable.along(1, 0, 0)
Y = Observable.along(0, 1, 0)
Z = Observable.along(0, 0, 1)

SEEDS = st.integers(min_value=0, max_value=2 ** 32 - 1)


class StateTest(unittest.TestCase):

    def test_ghz_amplitudes(self):
        """Tests that GHZ(alpha) puts cos(alpha) on |0...0> and sin(alpha) on |1...1>
        """
        state = make_named_state(StateFamily.GHZ, 3, alpha=math.radians(30))

        self.assertAlmostEqual(state.amplitudes[0].real, math.cos(math.radians(30)))
        self.assertAlmostEqual(state.amplitudes[7].real, 0.5)
        self.assertEqual(np.count_nonzero(state.amplitudes), 2)

    def test_w_state(self):
        """Tests that the W state is the uniform superposition of single excitations
        """
        state = make_named_state(StateFamily.W, 3)

        nonzero = np.nonzero(state.amplitudes)[0]
        self.assertEqual(list(nonzero), [1, 2, 4])
        np.testing.assert_allclose(state.amplitudes[nonzero], 1 / math.sqrt(3))

    def test_dicke_state(self):
        """Tests that the Dicke state with two excitations on four qubits has six equal amplitudes
        """
        state = make_named_state(StateFamily.DICKE, 4, k=2)

        self.assertEqual(np.count_nonzero(state.amplitudes), 6)
        self.assertAlmostEqual(abs(state.amplitudes[0b0011]), 1 / math.sqrt(6))

        with self.assertRaises(ParameterError):
            make_named_state(StateFamily.DICKE, 4, k=4)

    def test_cluster_states(self):
        """Tests the signs of the linear and ring cluster states
        """
        linear = make_named_state(StateFamily.LINEAR_CLUSTER, 3)
        ring = make_named_state(StateFamily.RING_CLUSTER, 3)

        np.testing.assert_allclose(np.abs(linear.amplitudes), 1 / math.sqrt(8))
        # |011>: one linear edge (2, 3) is occupied
        self.assertLess(linear.amplitudes[0b011].real, 0)
        # |101>: only the ring edge (3, 1) is occupied
        self.assertGreater(linear.amplitudes[0b101].real, 0)
        self.assertLess(ring.amplitudes[0b101].real, 0)

        with self.assertRaises(ParameterError):
            make_named_state(StateFamily.RING_CLUSTER, 2)

    def test_state_vector_validation(self):
        """Tests that unnormalized amplitudes or a wrong length are rejected
        """
        with self.assertRaises(ParameterError):
            StateVector(2, np.ones(4))

        with self.assertRaises(ParameterError):
            StateVector(2, np.array([1, 0]))

    def test_random_state_is_normalized_and_seeded(self):
        """Tests that random states are normalized and reproducible from the generator
        """
        first = sample_random_pure_state(3, np.random.default_rng(5))
        second = sample_random_pure_state(3, np.random.default_rng(5))

        self.assertAlmostEqual(np.linalg.norm(first.amplitudes), 1.0)
        np.testing.assert_array_equal(first.amplitudes, second.amplitudes)


class ObservableTest(unittest.TestCase):

    def test_eigenbras_are_projectors(self):
        """Tests that the bra of outcome 0 projects onto the +1 eigenspace of n.sigma
        """
        observable = sample_random_observable(np.random.default_rng(1))
        bras = observable.eigenbras()

        plus = np.outer(bras[0].conj(), bras[0])
        minus = np.outer(bras[1].conj(), bras[1])

        np.testing.assert_allclose(plus, (np.eye(2) + observable.operator()) / 2, atol=1e-12)
        np.testing.assert_allclose(plus + minus, np.eye(2), atol=1e-12)

    def test_invalid_bloch_vector(self):
        """Tests that a non-unit Bloch vector is rejected
        """
        with self.assertRaises(ParameterError):
            Observable(np.array([1.0, 1.0, 0.0]))

    def test_random_setup_shape(self):
        """Tests that sample_random_setup draws one observable per party and setting
        """
        setup = sample_random_setup((3, 2), np.random.default_rng(0))

        self.assertEqual(setup.shape, (3, 2))
        self.assertEqual(setup.n_parties, 2)


class BehaviorTest(unittest.TestCase):

    def test_ghz_behavior(self):
        """Tests p(r|s) of the two-qubit GHZ state measured along z
        """
        state = make_named_state(StateFamily.GHZ, 2)
        behavior = compute_behavior(state, MeasurementSetup([[Z], [Z]]))

        np.testing.assert_allclose(behavior.probabilities[0, 0], [[0.5, 0.0], [0.0, 0.5]], atol=1e-12)

    def test_behavior_is_normalized(self):
        """Tests that every setting combination of a random behavior sums to 1
        """
        rng = np.random.default_rng(3)
        behavior = compute_behavior(sample_random_pure_state(3, rng), sample_random_setup((2, 3, 2), rng))

        self.assertEqual(behavior.probabilities.shape, (2, 3, 2, 2, 2, 2))
        np.testing.assert_allclose(behavior.probabilities.sum(axis=(3, 4, 5)), 1.0, atol=1e-12)
        self.assertEqual(behavior.flat().shape, (12, 8))

    def test_party_mismatch(self):
        """Tests that a setup with the wrong number of parties is rejected
        """
        state = make_named_state(StateFamily.GHZ, 3)

        with self.assertRaises(ParameterError):
            compute_behavior(state, MeasurementSetup([[Z], [Z]]))

    def test_behavior_validation(self):
        """Tests that unnormalized probabilities are rejected
        """
        with self.assertRaises(ParameterError):
            Behavior(np.full((1, 1, 2, 2), 0.3))

    @settings(max_examples=30, deadline=None)
    @given(SEEDS, st.sampled_from([(2, 2), (3, 2), (2, 2, 2), (2, 3, 2)]), st.data())
    def test_local_unitary_covariance(self, seed, shape, data):
        """Tests that rotating the state of one party equals rotating its observables back
        """
        party = data.draw(st.integers(min_value=0, max_value=len(shape) - 1))
        rng = np.random.default_rng(seed)
        state = sample_random_pure_state(len(shape), rng)
        setup = sample_random_setup(shape, rng)
        unitary = random_unitary(2, rng)
        rotation = bloch_rotation(unitary)

        rotated_state = apply_local_unitary(state, party, unitary)
        per_party = [list(observables) for observables in setup.per_party_settings]
        per_party[party] = [Observable(rotation.T @ o.bloch) for o in per_party[party]]

        np.testing.assert_allclose(compute_behavior(rotated_state, setup).probabilities,
                                   compute_behavior(state, MeasurementSetup(per_party)).probabilities, atol=1e-10)

    def test_random_unitary(self):
        """Tests that random_unitary returns a unitary matrix
        """
        unitary = random_unitary(4, np.random.default_rng(2))

        np.testing.assert_allclose(unitary @ unitary.conj().T, np.eye(4), atol=1e-12)

    def test_bloch_rotation_of_pauli_x(self):
        """Tests that conjugation by sigma_x flips the y and z axes
        """
        np.testing.assert_allclose(bloch_rotation(PAULI_X), np.diag([1.0, -1.0, -1.0]), atol=1e-12)


class CorrelationTableTest(unittest.TestCase):

    def test_ghz_correlators(self):
        """Tests the correlators of the Bell state along x, y and z
        """
        state = make_named_state(StateFamily.GHZ, 2)
        corr = expectation_values(compute_behavior(state, MeasurementSetup([[X, Y, Z], [X, Y, Z]])))

        np.testing.assert_allclose(corr.full(), np.diag([1.0, -1.0, 1.0]), atol=1e-12)
        np.testing.assert_allclose(corr.marginal([0]), 0.0, atol=1e-12)
        self.assertEqual(corr.extended[0, 0], 1.0)
        self.assertEqual(set(corr.as_dict()), {(0,), (1,), (0, 1)})

    @settings(max_examples=30, deadline=None)
    @given(SEEDS, st.sampled_from([(2, 2), (3, 4), (2, 2, 2), (3, 2, 2, 2)]))
    def test_all_absent_entry_is_one(self, seed, shape):
        """Tests that the empty product has expectation exactly 1
        """
        rng = np.random.default_rng(seed)
        behavior = compute_behavior(sample_random_pure_state(len(shape), rng), sample_random_setup(shape, rng))

        self.assertEqual(expectation_values(behavior).extended[(0,) * len(shape)], 1.0)

    @settings(max_examples=30, deadline=None)
    @given(SEEDS, st.sampled_from([(2, 2), (3, 3), (5, 5)]))
    def test_bell_state_marginals_vanish(self, seed, shape):
        """Tests that single-party expectations of the Bell state vanish for random settings
        """
        state = make_named_state(StateFamily.GHZ, 2)
        corr = expectation_values(compute_behavior(state, sample_random_setup(shape, np.random.default_rng(seed))))

        np.testing.assert_allclose(corr.marginal([0]), 0.0, atol=1e-9)
        np.testing.assert_allclose(corr.marginal([1]), 0.0, atol=1e-9)

    def test_product_state_marginals(self):
        """Tests that marginals of |00> along z are +1
        """
        state = make_named_state(StateFamily.PRODUCT, 2)
        corr = expectation_values(compute_behavior(state, MeasurementSetup([[Z, X], [Z]])))

        np.testing.assert_allclose(corr.marginal([0]), [1.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(corr.marginal([1]), [1.0], atol=1e-12)

    def test_apply_symmetry_element(self):
        """Tests that apply() exchanges parties, selects settings and flips signs
        """
        corr = CorrelationTable.from_correlations(np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]))
        element = SymmetryElement(party_map=(1, 0), setting_maps=((2, 0), (1,)), signs=((1, -1), (-1,)))

        moved = corr.apply(element)

        self.assertEqual(moved.settings_shape, (2, 1))
        # New party 0 is old party 1; entry (s0, s1) is old (s1, s0) times the signs
        np.testing.assert_allclose(moved.full(), [[-6.0], [4.0]])


class StateSpecTest(unittest.TestCase):

    def test_parse(self):
        """Tests parsing of state descriptions
        """
        self.assertEqual(StateSpec.parse('ghz:alpha=30'), StateSpec('ghz', 30.0, 1))
        self.assertEqual(StateSpec.parse('dicke:k=2').k, 2)
        self.assertEqual(StateSpec.parse('W').family, 'w')
        self.assertEqual(StateSpec.parse('ghz').describe(), 'ghz:alpha=45')

    def test_parse_errors(self):
        """Tests that unknown families and parameters are rejected
        """
        for text in ['bell', 'w:k=2', 'ghz:alpha=abc', 'dicke:k=1.5']:
            with self.assertRaises(ParameterError, msg=text):
                StateSpec.parse(text)

    def test_build(self):
        """Tests that build converts the GHZ angle from degrees and needs a stream for random states
        """
        state = StateSpec.parse('ghz:alpha=90').build(2)
        self.assertAlmostEqual(abs(state.amplitudes[3]), 1.0)

        with self.assertRaises(ParameterError):
            StateSpec.parse('random').build(2)

        self.assertEqual(StateSpec.parse('random').build(3, np.random.default_rng(0)).n_qubits, 3)

    def test_validate(self):
        """Tests that validate rejects families that cannot be built on the qubit count
        """
        StateSpec.parse('rcluster').validate(3)

        with self.assertRaises(ParameterError):
            StateSpec.parse('rcluster').validate(2)
