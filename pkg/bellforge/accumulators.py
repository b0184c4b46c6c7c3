from dataclasses import dataclass, field
from fractions import Fraction
import math
from typing import Dict

import numpy as np

import bellforge.config as config
from .errors import ParameterError
from .messages import *

"""
Mergeable Monte Carlo accumulators and the summaries computed from them.

Every accumulator carries the scenario it was collected for and merges only with
accumulators of the same scenario. Strength sums are exact rationals so that merging is
associative and commutative bit for bit, whatever the partitioning of trials.
"""


@dataclass(eq=False)
class StrengthHistogram:
    """
    Counts of violating trials by strength. Bin b (1-based) covers [(b - 1) w, b w), so
    bin_uppers() are the right edges. Non-violating trials are only counted in total_trials.
    """
    scenario: str
    bin_width: float = field(default_factory=lambda: config.CONFIG_BIN_WIDTH)
    counts: np.ndarray = None
    total_trials: int = 0
    violating_trials: int = 0
    strength_sum: Fraction = Fraction(0)
    max_strength: float = 0.0

    def __post_init__(self):
        if (not 0 < self.bin_width <= 1):
            raise ParameterError(TEMPLATE_INVALID_PARAMETER.substitute(
                name='bin_width', value=self.bin_width, reason='must lie in (0, 1]'))

        if (self.counts is None):
            self.counts = np.zeros(self.n_bins, dtype=np.int64)

    @property
    def n_bins(self) -> int:
        return int(math.ceil(round(1.0 / self.bin_width, 9)))

    def record(self, strength: float, violated: bool):
        """Adds one trial. strength is ignored unless the trial is violating."""
        self.total_trials += 1

        if (not violated):
            return

        self.violating_trials += 1
        self.strength_sum += Fraction(float(strength))
        self.max_strength = max(self.max_strength, float(strength))
        index = int(math.floor(round(strength / self.bin_width, 9)))
        self.counts[min(index, self.n_bins - 1)] += 1

    def merged(self, other: 'StrengthHistogram') -> 'StrengthHistogram':
        if (self.scenario != other.scenario or self.bin_width != other.bin_width):
            raise ParameterError(TEMPLATE_ACCUMULATOR_MISMATCH.substitute(
                left=f'{self.scenario} (bin width {self.bin_width})',
                right=f'{other.scenario} (bin width {other.bin_width})'))

        return StrengthHistogram(scenario=self.scenario,
                                 bin_width=self.bin_width,
                                 counts=self.counts + other.counts,
                                 total_trials=self.total_trials + other.total_trials,
                                 violating_trials=self.violating_trials + other.violating_trials,
                                 strength_sum=self.strength_sum + other.strength_sum,
                                 max_strength=max(self.max_strength, other.max_strength))

    def bin_uppers(self) -> np.ndarray:
        return np.arange(1, self.n_bins + 1) * self.bin_width

    def bin_centers(self) -> np.ndarray:
        return self.bin_uppers() - self.bin_width / 2

    def pdf(self) -> np.ndarray:
        """counts / (total_trials * bin_width); integrates to the violation probability."""
        if (self.total_trials == 0):
            return np.zeros(self.n_bins)
        return self.counts / (self.total_trials * self.bin_width)


@dataclass
class ExperimentSummary:
    """
    Violation probability, unconditional mean strength (non-violating trials count as 0)
    and their context.
    """
    pv: float
    pv_stderr: float
    mean_strength: float
    max_strength: float
    trials: int
    seed: int
    scenario: str

    @staticmethod
    def from_histogram(histogram: StrengthHistogram, seed: int) -> 'ExperimentSummary':
        trials = histogram.total_trials
        if (trials == 0):
            return ExperimentSummary(0.0, 0.0, 0.0, 0.0, 0, seed, histogram.scenario)

        pv = histogram.violating_trials / trials
        return ExperimentSummary(pv=pv,
                                 pv_stderr=math.sqrt(pv * (1 - pv) / trials),
                                 mean_strength=float(histogram.strength_sum / trials),
                                 max_strength=histogram.max_strength,
                                 trials=trials,
                                 seed=seed,
                                 scenario=histogram.scenario)


@dataclass(eq=False)
class FacetTally:
    """
    Strongest family per violating trial, plus the number of violating trials whose
    dual certificate touches at most two settings per party.
    """
    scenario: str
    family_counts: Dict[str, int] = field(default_factory=dict)
    violations: int = 0
    two_setting_certificates: int = 0

    def record(self, family: str, two_setting_certificate: bool):
        self.violations += 1
        self.family_counts[family] = self.family_counts.get(family, 0) + 1
        if (two_setting_certificate):
            self.two_setting_certificates += 1

    def merged(self, other: 'FacetTally') -> 'FacetTally':
        if (self.scenario != other.scenario):
            raise ParameterError(TEMPLATE_ACCUMULATOR_MISMATCH.substitute(
                left=self.scenario, right=other.scenario))

        counts = dict(self.family_counts)
        for family, count in other.family_counts.items():
            counts[family] = counts.get(family, 0) + count

        return FacetTally(self.scenario, counts, self.violations + other.violations,
                          self.two_setting_certificates + other.two_setting_certificates)

    def frequencies(self) -> Dict[str, dict]:
        """Per family: count, frequency among violations and its binomial standard error."""
        table = {}
        for family in sorted(self.family_counts):
            count = self.family_counts[family]
            frequency = count / self.violations
            table[family] = {'count': count,
                             'frequency': frequency,
                             'stderr': math.sqrt(frequency * (1 - frequency) / self.violations)}
        return table

    def two_setting_certificate_frequency(self) -> float:
        if (self.violations == 0):
            return 0.0
        return self.two_setting_certificates / self.violations


@dataclass(eq=False)
class GenuineSettingsTally:
    """
    Among violating trials, how many stay local under every restriction to two settings
    per party.
    """
    scenario: str
    trials: int = 0
    violating: int = 0
    genuine: int = 0

    def record(self, violated: bool, genuine: bool):
        self.trials += 1
        if (violated):
            self.violating += 1
            if (genuine):
                self.genuine += 1

    def merged(self, other: 'GenuineSettingsTally') -> 'GenuineSettingsTally':
        if (self.scenario != other.scenario):
            raise ParameterError(TEMPLATE_ACCUMULATOR_MISMATCH.substitute(
                left=self.scenario, right=other.scenario))

        return GenuineSettingsTally(self.scenario, self.trials + other.trials,
                                    self.violating + other.violating, self.genuine + other.genuine)

    @property
    def no_violations(self) -> bool:
        return self.violating == 0

    @property
    def fraction(self) -> float:
        """Genuine share of the violating trials; 0 when nothing was violated."""
        if (self.violating == 0):
            return 0.0
        return self.genuine / self.violating


def merge(*accumulators):
    """Merges accumulators of one type and scenario. Associative and commutative.

    ParameterError is raised for an empty call, mixed types or mismatched scenarios.
    """
    if (len(accumulators) == 0):
        raise ParameterError(TEMPLATE_INVALID_PARAMETER.substitute(
            name='accumulators', value=0, reason='nothing to merge'))

    result = accumulators[0]
    for accumulator in accumulators[1:]:
        if (type(accumulator) is not type(result)):
            raise ParameterError(TEMPLATE_ACCUMULATOR_MISMATCH.substitute(
                left=type(result).__name__, right=type(accumulator).__name__))
        result = result.merged(accumulator)

    return result
