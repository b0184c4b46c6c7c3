import argparse
from dataclasses import dataclass
import logging
import os
import sys
from typing import List, Optional, Tuple

import bellforge.config as config
from .accumulators import ExperimentSummary
from .errors import BellforgeError, ParameterError
from .experiments import FACET_RELEVANCE, GENUINE_SETTINGS, HORODECKI_AVERAGE, STRENGTH_DISTRIBUTION, \
    TYPICALITY, collect_typicality, run_facet_relevance, run_genuine_settings, run_horodecki_average, \
    run_strength_distribution
from .messages import *
from .output import FORMAT_CSV, FORMAT_JSON, ExperimentResult, write_output
from .quantum import StateSpec

"""
Provides the command line entry for the bellforge package.

    python -m bellforge.cli strength-dist --state ghz:alpha=45 --shape 3x3 --trials 10000 --seed 1
"""

SEED_VARIABLE = 'BELLFORGE_SEED'
SUBCOMMANDS = (STRENGTH_DISTRIBUTION, TYPICALITY, FACET_RELEVANCE, GENUINE_SETTINGS, HORODECKI_AVERAGE)


@dataclass
class RunConfig:
    """
    Parsed command line. bin_width and workers stay None unless given, so that the values
    from --config apply.
    """
    subcommand: str
    state: str
    shape: Tuple[int, ...]
    trials: int
    seed: int
    workers: Optional[int]
    bin_width: Optional[float]
    out: Optional[str]
    output_format: str
    config_path: Optional[str] = None
    min_violations: int = 300
    trial_cap: Optional[int] = None

    @property
    def n_qubits(self) -> int:
        return len(self.shape)

    @property
    def shape_text(self) -> str:
        return 'x'.join(map(str, self.shape))


def parse_shape(text: str) -> Tuple[int, ...]:
    """Parses '5x5' or '2x2x2x2' into per-party setting counts."""
    try:
        shape = tuple(int(part) for part in text.lower().split('x'))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid shape '{text}', expected e.g. 5x5 or 2x2x2")

    if (any(m < 1 for m in shape)):
        raise argparse.ArgumentTypeError(f"invalid shape '{text}', every party needs at least one setting")
    return shape


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid positive integer '{text}'")
    if (value < 1):
        raise argparse.ArgumentTypeError(f"invalid positive integer '{text}'")
    return value


def _bin_width(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid bin width '{text}'")
    if (not 0 < value <= 1):
        raise argparse.ArgumentTypeError(f"invalid bin width '{text}', must lie in (0, 1]")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--state', default='ghz:alpha=45',
                        help='ghz:alpha=45 | w | dicke:k=2 | lcluster | rcluster | product | random')
    common.add_argument('--shape', type=parse_shape, default=(2, 2),
                        help='settings per party, e.g. 5x5 or 2x2x2x2')
    common.add_argument('--trials', type=_positive_int, default=1000)
    common.add_argument('--seed', type=int, default=None,
                        help=f'root seed, falls back to ${SEED_VARIABLE} then 0')
    common.add_argument('--workers', type=_positive_int, default=None,
                        help='worker processes, defaults to the available CPUs')
    common.add_argument('--bin-width', type=_bin_width, default=None)
    common.add_argument('--out', metavar='path', default=None, help='output file, stdout by default')
    common.add_argument('--format', dest='output_format', choices=[FORMAT_JSON, FORMAT_CSV], default=FORMAT_JSON)
    common.add_argument('--config', metavar='path', dest='config_path',
                        required=False, help='path to the config.json file')

    parser = argparse.ArgumentParser(prog='bellforge')
    subparsers = parser.add_subparsers(dest='subcommand', required=True)

    subparsers.add_parser(STRENGTH_DISTRIBUTION, parents=[common],
                          help='strength distribution of one state under random settings')
    subparsers.add_parser(TYPICALITY, parents=[common],
                          help='violation probability and strength of random states')
    facet = subparsers.add_parser(FACET_RELEVANCE, parents=[common],
                                  help='strongest known inequality family of violating draws')
    facet.add_argument('--min-violations', type=_positive_int, default=300)
    facet.add_argument('--trial-cap', type=_positive_int, default=None)
    subparsers.add_parser(GENUINE_SETTINGS, parents=[common],
                          help='share of violations that need more than two settings')
    subparsers.add_parser(HORODECKI_AVERAGE, parents=[common],
                          help='closed-form two-qubit strength averaged over random states')

    return parser


def parse_args(argv: Optional[List[str]] = None) -> RunConfig:
    """Parses the command line. Malformed values end in an argparse usage error (exit status 2).

    Parameters
    ----------
    argv: List[str]
        Arguments without the program name, sys.argv[1:] when None
    """
    parser = build_parser()
    args = parser.parse_args(argv)

    seed = args.seed
    if (seed is None):
        try:
            seed = int(os.environ.get(SEED_VARIABLE, 0))
        except ValueError:
            parser.error(f"{SEED_VARIABLE} must be an integer")
    if (seed < 0):
        parser.error('seed must be non-negative')

    shape = args.shape
    if (args.subcommand == HORODECKI_AVERAGE):
        shape = (2, 2)

    if (args.subcommand not in (TYPICALITY, HORODECKI_AVERAGE)):
        try:
            StateSpec.parse(args.state).validate(len(shape))
        except ParameterError as e:
            parser.error(str(e))

    return RunConfig(subcommand=args.subcommand,
                     state=args.state,
                     shape=tuple(shape),
                     trials=args.trials,
                     seed=seed,
                     workers=args.workers,
                     bin_width=args.bin_width,
                     out=args.out,
                     output_format=args.output_format,
                     config_path=args.config_path,
                     min_violations=getattr(args, 'min_violations', 300),
                     trial_cap=getattr(args, 'trial_cap', None))


def run(run_config: RunConfig) -> ExperimentResult:
    """Runs the experiment named by the subcommand and collects what write_output needs."""
    seed = run_config.seed
    bin_width = run_config.bin_width or config.CONFIG_BIN_WIDTH
    params = {'state': run_config.state, 'shape': run_config.shape_text,
              'trials': run_config.trials, 'bin_width': bin_width}

    if (run_config.subcommand == STRENGTH_DISTRIBUTION):
        params['state'] = StateSpec.parse(run_config.state).describe()
        histogram, summary = run_strength_distribution(run_config.state, run_config.shape, run_config.trials,
                                                       seed, run_config.workers, bin_width)
        return ExperimentResult(run_config.subcommand, params, seed, histogram, summary)

    if (run_config.subcommand == TYPICALITY):
        params['state'] = 'random'
        histogram = collect_typicality(run_config.n_qubits, run_config.shape, run_config.trials,
                                       seed, run_config.workers, bin_width)
        return ExperimentResult(run_config.subcommand, params, seed, histogram,
                                ExperimentSummary.from_histogram(histogram, seed))

    if (run_config.subcommand == FACET_RELEVANCE):
        params['state'] = StateSpec.parse(run_config.state).describe()
        facet = run_facet_relevance(run_config.state, run_config.shape, run_config.min_violations, seed,
                                    run_config.workers, run_config.trial_cap, bin_width)
        del params['trials']
        params['min_violations'] = facet.min_violations
        params['trial_cap'] = facet.trial_cap

        warning = None
        if (facet.partial):
            warning = TEMPLATE_PARTIAL_RESULT.substitute(
                cap=facet.trial_cap, violations=facet.tally.violations, required=facet.min_violations)

        return ExperimentResult(run_config.subcommand, params, seed, facet.histogram, facet.summary,
                                partial=facet.partial, warning=warning,
                                extras={'families': {
                                    'violations': facet.tally.violations,
                                    'table': facet.tally.frequencies(),
                                    'two_setting_certificate_frequency': facet.tally.two_setting_certificate_frequency(),
                                }})

    if (run_config.subcommand == GENUINE_SETTINGS):
        params['state'] = StateSpec.parse(run_config.state).describe()
        histogram, summary, tally = run_genuine_settings(run_config.state, run_config.shape, run_config.trials,
                                                         seed, run_config.workers, bin_width)
        return ExperimentResult(run_config.subcommand, params, seed, histogram, summary,
                                extras={'genuine': {
                                    'violating': tally.violating,
                                    'genuine': tally.genuine,
                                    'fraction': tally.fraction,
                                    'no_violations': tally.no_violations,
                                }})

    params['state'] = 'random'
    histogram, summary = run_horodecki_average(run_config.trials, seed, run_config.workers, bin_width)
    return ExperimentResult(run_config.subcommand, params, seed, histogram, summary)


def main(argv: Optional[List[str]] = None) -> int:
    """Parses arguments, runs the experiment and writes its output.

    Returns
    -------
    The exit status: 0 on success, partial results included, 1 when the run fails.
    Usage errors exit with status 2 from within argparse.
    """
    run_config = parse_args(argv)

    if (run_config.config_path != None):
        # Load config into the config module
        config.load_config(run_config.config_path)

    # Setup logging
    logging.basicConfig(format='%(asctime)s %(levelname)s %(message)s',
                        level=config.CONFIG_LOG_LEVEL)

    try:
        write_output(run(run_config), run_config)
    except BellforgeError:
        logging.error(f"Experiment failed: [experiment={run_config.subcommand}]", exc_info=True)
        return 1
    except OSError:
        logging.error(f"Could not write output: [path={run_config.out}]", exc_info=True)
        return 1
    except KeyboardInterrupt:
        # User requested abort
        logging.warning("Received keyboard interrupt. Exiting")
        return 1

    return 0


if __name__ == '__main__':
    """main execution entry for the bellforge package
    """
    sys.exit(main())
