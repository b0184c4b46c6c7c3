import math
import unittest

import numpy as np

import bellforge.config as config
from bellforge.errors import ParameterError
from bellforge.experiments import collect_typicality
from bellforge.experiments import run_facet_relevance
from bellforge.experiments import run_genuine_settings
from bellforge.experiments import run_horodecki_average
from bellforge.experiments import run_strength_distribution
from bellforge.experiments import run_typicality

CHSH_STRENGTH = 1 - 1 / math.sqrt(2)


class StrengthDistributionTest(unittest.TestCase):

    def setUp(self):
        self.values = config.snapshot()
        config.CONFIG_CHUNK_SIZE = 10

    def tearDown(self):
        config.restore(self.values)

    def test_independent_of_workers(self):
        """Tests that one and two workers give identical histograms and summaries
        """
        single, single_summary = run_strength_distribution('ghz:alpha=45', (2, 2), 40, 3, workers=1)
        double, double_summary = run_strength_distribution('ghz:alpha=45', (2, 2), 40, 3, workers=2)

        np.testing.assert_array_equal(single.counts, double.counts)
        self.assertEqual(single.strength_sum, double.strength_sum)
        self.assertEqual(single_summary, double_summary)

    def test_independent_of_chunk_size(self):
        """Tests that the partition of trials into chunks does not change the result
        """
        small, _ = run_strength_distribution('w', (2, 2), 30, 5, workers=1)
        config.CONFIG_CHUNK_SIZE = 7
        odd, _ = run_strength_distribution('w', (2, 2), 30, 5, workers=1)

        np.testing.assert_array_equal(small.counts, odd.counts)
        self.assertEqual(small.strength_sum, odd.strength_sum)

    def test_two_qubit_cap(self):
        """Tests that no 2x2 draw on the Bell state exceeds the CHSH strength
        """
        histogram, summary = run_strength_distribution('ghz:alpha=45', (2, 2), 50, 1, workers=1)

        self.assertEqual(summary.trials, 50)
        self.assertLessEqual(summary.max_strength, CHSH_STRENGTH + 1e-6)
        self.assertEqual(histogram.counts.sum(), histogram.violating_trials)
        self.assertEqual(summary.scenario, 'ghz:alpha=45 2x2')

    def test_invalid_runs(self):
        """Tests that zero trials and mismatched shapes are rejected
        """
        with self.assertRaises(ParameterError):
            run_strength_distribution('ghz:alpha=45', (2, 2), 0, 1, workers=1)

        with self.assertRaises(ParameterError):
            run_strength_distribution('rcluster', (2, 2), 5, 1, workers=1)

        with self.assertRaises(ParameterError):
            run_strength_distribution('ghz', (2, 0), 5, 1, workers=1)


class TypicalityTest(unittest.TestCase):

    def test_typicality(self):
        """Tests a short typicality run and its consistency with the histogram
        """
        summary = run_typicality(2, (2, 2), 40, 7, workers=1)
        histogram = collect_typicality(2, (2, 2), 40, 7, workers=1)

        self.assertEqual(summary.trials, 40)
        self.assertAlmostEqual(summary.pv, histogram.violating_trials / 40)
        self.assertLessEqual(summary.max_strength, CHSH_STRENGTH + 1e-6)
        self.assertEqual(summary.scenario, 'random 2x2')

    def test_qubit_count_must_match(self):
        """Tests that the qubit count must equal the number of parties
        """
        with self.assertRaises(ParameterError):
            run_typicality(3, (2, 2), 10, 7, workers=1)


class FacetRelevanceTest(unittest.TestCase):

    def test_two_settings_only_f1(self):
        """Tests that every 2x2 violation is classified as F1
        """
        result = run_facet_relevance('ghz:alpha=45', (2, 2), 5, 11, workers=1)

        self.assertFalse(result.partial)
        self.assertEqual(result.tally.family_counts, {'F1': 5})
        self.assertEqual(result.tally.violations, 5)
        self.assertEqual(result.histogram.violating_trials, 5)
        self.assertEqual(result.trial_cap, config.CONFIG_FACET_TRIAL_CAP_FACTOR * 5)
        self.assertEqual(result.tally.two_setting_certificate_frequency(), 1.0)

    def test_stops_at_same_trial_for_any_workers(self):
        """Tests that the run stops at the same trial with one or two workers
        """
        single = run_facet_relevance('ghz:alpha=45', (2, 2), 4, 2, workers=1)
        double = run_facet_relevance('ghz:alpha=45', (2, 2), 4, 2, workers=2)

        self.assertEqual(single.summary, double.summary)

    def test_product_state_is_partial(self):
        """Tests that a local state hits the trial cap without violations
        """
        result = run_facet_relevance('product', (2, 2), 3, 0, workers=1, trial_cap=15)

        self.assertTrue(result.partial)
        self.assertEqual(result.tally.violations, 0)
        self.assertEqual(result.summary.trials, 15)

    def test_needs_f1(self):
        """Tests that scenarios without an F1 embedding are refused
        """
        with self.assertRaises(ParameterError):
            run_facet_relevance('ghz:alpha=45', (2, 2, 2), 3, 0, workers=1)

        with self.assertRaises(ParameterError):
            run_facet_relevance('ghz:alpha=45', (1, 3), 3, 0, workers=1)


class GenuineSettingsTest(unittest.TestCase):

    def test_product_state(self):
        """Tests that a local state reports no violations
        """
        histogram, summary, tally = run_genuine_settings('product', (3, 3), 4, 0, workers=1)

        self.assertTrue(tally.no_violations)
        self.assertEqual(tally.fraction, 0.0)
        self.assertEqual(summary.pv, 0.0)
        self.assertEqual(tally.trials, histogram.total_trials)

    def test_needs_three_settings(self):
        """Tests that 2x2 scenarios are refused
        """
        with self.assertRaises(ParameterError):
            run_genuine_settings('ghz', (2, 2), 4, 0, workers=1)


class HorodeckiAverageTest(unittest.TestCase):

    def test_short_run(self):
        """Tests that closed-form strengths stay below the CHSH strength
        """
        histogram, summary = run_horodecki_average(200, 4, workers=1)

        self.assertEqual(summary.trials, 200)
        self.assertLessEqual(summary.max_strength, CHSH_STRENGTH + 1e-9)
        self.assertGreater(summary.mean_strength, 0.0)
        self.assertGreater(summary.pv, 0.5)
