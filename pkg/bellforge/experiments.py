import asyncio
from dataclasses import dataclass
import functools
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

import bellforge.config as config
from .accumulators import ExperimentSummary, FacetTally, GenuineSettingsTally, StrengthHistogram, merge
from .errors import ParameterError
from .inequalities import F1, NO_FAMILY, certificate_support, classify_strongest_family, embeddable, \
    horodecki_strength, is_genuine_multisetting
from .messages import *
from .quantum import CorrelationTable, StateSpec, compute_behavior, expectation_values, \
    sample_random_pure_state, sample_random_setup
from .runner import TrialPool, chunk_ranges, state_rng, trial_rng
from .visibility import critical_visibility

"""
Monte Carlo drivers: strength distributions of a fixed state, typicality over random states,
relevance of the known inequality families and the genuine multisetting share.

Trial i of a run draws everything it needs from trial_rng(seed, i), and the per-chunk
accumulators are merged exactly, so results depend on (seed, trials) only, not on the
number of workers.
"""

STRENGTH_DISTRIBUTION = 'strength-dist'
TYPICALITY = 'typicality'
FACET_RELEVANCE = 'facet-relevance'
GENUINE_SETTINGS = 'genuine-settings'
HORODECKI_AVERAGE = 'horodecki-average'


@dataclass(eq=False)
class FacetRelevanceResult:
    """
    Strongest family of every violating draw of a facet relevance run. partial is set when the
    trial cap was reached before min_violations violating draws were collected.
    """
    histogram: StrengthHistogram
    summary: ExperimentSummary
    tally: FacetTally
    min_violations: int
    trial_cap: int
    partial: bool


def scenario_label(state: str, shape: Sequence[int]) -> str:
    return f"{state} {'x'.join(map(str, shape))}"


def _check_run(trials: int, shape: Sequence[int]):
    if (trials < 1):
        raise ParameterError(TEMPLATE_INVALID_PARAMETER.substitute(
            name='trials', value=trials, reason='must be at least 1'))

    if (len(shape) < 1 or any(m < 1 for m in shape)):
        raise ParameterError(TEMPLATE_INVALID_PARAMETER.substitute(
            name='shape', value=list(shape), reason='every party needs at least one setting'))


def _run_chunks(function, trials: int, experiment: str, workers: Optional[int]) -> list:
    async def collect():
        async with TrialPool(workers) as pool:
            return await pool.map(function, chunk_ranges(trials), experiment)

    return asyncio.run(collect())


def _strength_chunk(spec: StateSpec, shape: Tuple[int, ...], seed: int, scenario: str, bin_width: float,
                    chunk: Tuple[int, int, int]) -> StrengthHistogram:
    _, first, stop = chunk
    state = spec.build(len(shape), state_rng(seed))
    histogram = StrengthHistogram(scenario, bin_width)

    for trial in range(first, stop):
        setup = sample_random_setup(shape, trial_rng(seed, trial))
        result = critical_visibility(compute_behavior(state, setup))
        histogram.record(result.strength, result.violated)

    return histogram


def run_strength_distribution(state_spec: str, shape: Sequence[int], trials: int, seed: int,
                              workers: Optional[int] = None,
                              bin_width: Optional[float] = None) -> Tuple[StrengthHistogram, ExperimentSummary]:
    """Strength distribution of one state under random settings.

    Parameters
    ----------
    state_spec: str
        State description such as 'ghz:alpha=45'; 'random' draws one state for the whole run
    shape: Sequence[int]
        Settings per party, one party per qubit
    trials: int
        Number of random setting draws, at least 1
    seed: int
        Root seed of the run

    Returns
    -------
    The merged histogram and its summary. ParameterError and CapacityError propagate.
    """
    shape = tuple(shape)
    _check_run(trials, shape)
    spec = StateSpec.parse(state_spec)
    spec.validate(len(shape))

    scenario = scenario_label(spec.describe(), shape)
    bin_width = bin_width or config.CONFIG_BIN_WIDTH

    logging.info(f"Experiment started: [experiment={STRENGTH_DISTRIBUTION} scenario={scenario} trials={trials} seed={seed}]")

    function = functools.partial(_strength_chunk, spec, shape, seed, scenario, bin_width)
    histogram = merge(*_run_chunks(function, trials, STRENGTH_DISTRIBUTION, workers))
    summary = ExperimentSummary.from_histogram(histogram, seed)

    logging.info(f"Experiment finished: [experiment={STRENGTH_DISTRIBUTION} pv={summary.pv:.6f} mean_strength={summary.mean_strength:.6f}]")

    return histogram, summary


def _typicality_chunk(shape: Tuple[int, ...], scenario: str, bin_width: float, seed: int,
                      chunk: Tuple[int, int, int]) -> StrengthHistogram:
    _, first, stop = chunk
    histogram = StrengthHistogram(scenario, bin_width)

    for trial in range(first, stop):
        rng = trial_rng(seed, trial)
        state = sample_random_pure_state(len(shape), rng)
        result = critical_visibility(compute_behavior(state, sample_random_setup(shape, rng)))
        histogram.record(result.strength, result.violated)

    return histogram


def collect_typicality(n_qubits: int, shape: Sequence[int], trials: int, seed: int,
                       workers: Optional[int] = None, bin_width: Optional[float] = None) -> StrengthHistogram:
    """Histogram of a typicality run, where every trial draws a fresh random state and fresh settings."""
    shape = tuple(shape)
    _check_run(trials, shape)
    if (n_qubits != len(shape)):
        raise ParameterError(TEMPLATE_SHAPE_MISMATCH.substitute(parties=len(shape), qubits=n_qubits))

    scenario = scenario_label('random', shape)
    logging.info(f"Experiment started: [experiment={TYPICALITY} scenario={scenario} trials={trials} seed={seed}]")

    function = functools.partial(_typicality_chunk, shape, scenario, bin_width or config.CONFIG_BIN_WIDTH, seed)
    return merge(*_run_chunks(function, trials, TYPICALITY, workers))


def run_typicality(n_qubits: int, shape: Sequence[int], trials: int, seed: int,
                   workers: Optional[int] = None) -> ExperimentSummary:
    """Typical violation probability (pv) and typical strength (mean_strength) of random states."""
    summary = ExperimentSummary.from_histogram(collect_typicality(n_qubits, shape, trials, seed, workers), seed)

    logging.info(f"Experiment finished: [experiment={TYPICALITY} pv={summary.pv:.6f} mean_strength={summary.mean_strength:.6f}]")

    return summary


def _facet_chunk(spec: StateSpec, shape: Tuple[int, ...], seed: int,
                 chunk: Tuple[int, int, int]) -> List[Tuple[float, bool, str, bool, bool]]:
    """One (strength, violated, family, two_setting_certificate, degenerate_certificate) record per trial."""
    _, first, stop = chunk
    state = spec.build(len(shape), state_rng(seed))
    records = []

    for trial in range(first, stop):
        behavior = compute_behavior(state, sample_random_setup(shape, trial_rng(seed, trial)))
        result = critical_visibility(behavior)

        if (not result.violated):
            records.append((result.strength, False, NO_FAMILY, False, False))
            continue

        family, _ = classify_strongest_family(expectation_values(behavior))
        support = certificate_support(result, behavior)
        records.append((result.strength, True, family, support is not None and max(support) <= 2,
                        result.dual_unique is False))

    return records


def run_facet_relevance(state_spec: str, shape: Sequence[int], min_violations: int, seed: int,
                        workers: Optional[int] = None, trial_cap: Optional[int] = None,
                        bin_width: Optional[float] = None) -> FacetRelevanceResult:
    """Collects violating draws until min_violations of them are classified by strongest family.

    Trials are consumed in index order and the run stops at the trial that completes
    min_violations, so the result does not depend on the number of workers. Trials computed
    in parallel beyond that point are discarded.

    Parameters
    ----------
    trial_cap: int
        Maximum number of trials, CONFIG_FACET_TRIAL_CAP_FACTOR * min_violations by default

    Returns
    -------
    FacetRelevanceResult, with partial set when the cap is reached first. ParameterError is
    raised when the shape does not embed F1.
    """
    shape = tuple(shape)
    if (min_violations < 1):
        raise ParameterError(TEMPLATE_INVALID_PARAMETER.substitute(
            name='min_violations', value=min_violations, reason='must be at least 1'))

    trial_cap = trial_cap or config.CONFIG_FACET_TRIAL_CAP_FACTOR * min_violations
    _check_run(trial_cap, shape)

    if (not embeddable(F1, CorrelationTable.from_correlations(np.zeros(shape)))):
        raise ParameterError(TEMPLATE_FAMILY_NOT_EMBEDDABLE.substitute(
            family=F1.identifier, needed='x'.join(map(str, F1.shape)), available='x'.join(map(str, shape))))

    spec = StateSpec.parse(state_spec)
    spec.validate(len(shape))
    scenario = scenario_label(spec.describe(), shape)

    logging.info(f"Experiment started: [experiment={FACET_RELEVANCE} scenario={scenario} min_violations={min_violations} trial_cap={trial_cap} seed={seed}]")

    histogram = StrengthHistogram(scenario, bin_width or config.CONFIG_BIN_WIDTH)
    tally = FacetTally(scenario)
    chunks = chunk_ranges(trial_cap)
    function = functools.partial(_facet_chunk, spec, shape, seed)
    degenerate = 0

    async def collect():
        nonlocal degenerate
        async with TrialPool(workers) as pool:
            for start in range(0, len(chunks), pool.workers):
                for records in await pool.map(function, chunks[start:start + pool.workers], FACET_RELEVANCE):
                    for strength, violated, family, two_setting, degenerate_certificate in records:
                        histogram.record(strength, violated)
                        if (violated):
                            tally.record(family, two_setting)
                            degenerate += degenerate_certificate
                        if (tally.violations >= min_violations):
                            return

                logging.info(f"Facet relevance progress: [trials={histogram.total_trials} violations={tally.violations}]")

    asyncio.run(collect())

    if (degenerate > 0):
        # The two-setting diagnostic of these draws depends on which optimal dual the solver returned
        logging.warning(f"Degenerate certificates: [count={degenerate} violations={tally.violations}]")

    partial = tally.violations < min_violations
    if (partial):
        logging.warning(TEMPLATE_PARTIAL_RESULT.substitute(
            cap=trial_cap, violations=tally.violations, required=min_violations))

    summary = ExperimentSummary.from_histogram(histogram, seed)
    logging.info(f"Experiment finished: [experiment={FACET_RELEVANCE} trials={summary.trials} violations={tally.violations} families={tally.family_counts}]")

    return FacetRelevanceResult(histogram, summary, tally, min_violations, trial_cap, partial)


def _genuine_chunk(spec: StateSpec, shape: Tuple[int, ...], seed: int, scenario: str, bin_width: float,
                   chunk: Tuple[int, int, int]) -> Tuple[StrengthHistogram, GenuineSettingsTally]:
    _, first, stop = chunk
    state = spec.build(len(shape), state_rng(seed))
    histogram = StrengthHistogram(scenario, bin_width)
    tally = GenuineSettingsTally(scenario)

    for trial in range(first, stop):
        behavior = compute_behavior(state, sample_random_setup(shape, trial_rng(seed, trial)))
        result = critical_visibility(behavior)
        histogram.record(result.strength, result.violated)
        tally.record(result.violated, result.violated and is_genuine_multisetting(behavior, result))

    return histogram, tally


def run_genuine_settings(state_spec: str, shape: Sequence[int], trials: int, seed: int,
                         workers: Optional[int] = None, bin_width: Optional[float] = None
                         ) -> Tuple[StrengthHistogram, ExperimentSummary, GenuineSettingsTally]:
    """Share of violating draws that no restriction to two settings per party reproduces."""
    shape = tuple(shape)
    _check_run(trials, shape)
    if (max(shape) < 3):
        raise ParameterError(TEMPLATE_INVALID_PARAMETER.substitute(
            name='shape', value=list(shape), reason='some party needs at least 3 settings'))

    spec = StateSpec.parse(state_spec)
    spec.validate(len(shape))
    scenario = scenario_label(spec.describe(), shape)

    logging.info(f"Experiment started: [experiment={GENUINE_SETTINGS} scenario={scenario} trials={trials} seed={seed}]")

    function = functools.partial(_genuine_chunk, spec, shape, seed, scenario, bin_width or config.CONFIG_BIN_WIDTH)
    results = _run_chunks(function, trials, GENUINE_SETTINGS, workers)

    histogram = merge(*[histogram for histogram, _ in results])
    tally = merge(*[tally for _, tally in results])
    summary = ExperimentSummary.from_histogram(histogram, seed)

    if (tally.no_violations):
        logging.warning(MESSAGE_NO_VIOLATIONS)
    logging.info(f"Experiment finished: [experiment={GENUINE_SETTINGS} violating={tally.violating} genuine={tally.genuine} fraction={tally.fraction:.6f}]")

    return histogram, summary, tally


def _horodecki_chunk(scenario: str, bin_width: float, seed: int, chunk: Tuple[int, int, int]) -> StrengthHistogram:
    _, first, stop = chunk
    histogram = StrengthHistogram(scenario, bin_width)

    for trial in range(first, stop):
        strength = horodecki_strength(sample_random_pure_state(2, trial_rng(seed, trial)))
        histogram.record(strength, strength > config.CONFIG_VIOLATION_EPSILON)

    return histogram


def run_horodecki_average(trials: int, seed: int, workers: Optional[int] = None,
                          bin_width: Optional[float] = None) -> Tuple[StrengthHistogram, ExperimentSummary]:
    """Mean of the closed-form two-qubit strength with optimal two-setting measurements over
    random pure states. No linear program is solved."""
    _check_run(trials, (2, 2))
    scenario = scenario_label('random', (2, 2))

    logging.info(f"Experiment started: [experiment={HORODECKI_AVERAGE} trials={trials} seed={seed}]")

    function = functools.partial(_horodecki_chunk, scenario, bin_width or config.CONFIG_BIN_WIDTH, seed)
    histogram = merge(*_run_chunks(function, trials, HORODECKI_AVERAGE, workers))
    summary = ExperimentSummary.from_histogram(histogram, seed)

    logging.info(f"Experiment finished: [experiment={HORODECKI_AVERAGE} mean_strength={summary.mean_strength:.6f}]")

    return histogram, summary
