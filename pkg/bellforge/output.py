from dataclasses import dataclass, field
import json
import logging
import sys
from typing import Optional

from .accumulators import ExperimentSummary, StrengthHistogram

"""
Serializes finished experiments to JSON or to a CSV density table.
"""

SCHEMA_VERSION = 1
FORMAT_JSON = 'json'
FORMAT_CSV = 'csv'
CSV_HEADER = 'bin_upper,pdf'


@dataclass(eq=False)
class ExperimentResult:
    """
    Everything write_output needs from a finished run. extras holds experiment specific
    sections (families, genuine) in the order they are written.
    """
    experiment: str
    params: dict
    seed: int
    histogram: StrengthHistogram
    summary: ExperimentSummary
    partial: bool = False
    warning: Optional[str] = None
    extras: dict = field(default_factory=dict)


def to_json(result: ExperimentResult) -> str:
    document = {
        'schema_version': SCHEMA_VERSION,
        'experiment': result.experiment,
        'params': result.params,
        'seed': result.seed,
        'histogram': {
            'bin_width': result.histogram.bin_width,
            'counts': [int(count) for count in result.histogram.counts],
        },
        'pv': result.summary.pv,
        'pv_stderr': result.summary.pv_stderr,
        'mean_strength': result.summary.mean_strength,
        'max_strength': result.summary.max_strength,
        'trials': result.summary.trials,
    }

    if (result.partial):
        document['partial'] = True
        document['warning'] = result.warning
    document.update(result.extras)

    return json.dumps(document, indent=2) + '\n'


def to_csv(histogram: StrengthHistogram) -> str:
    """One row per bin of [0, 1], empty bins included. A histogram without violations gives the header only."""
    if (not histogram.counts.any()):
        return CSV_HEADER + '\n'

    lines = [CSV_HEADER]
    for upper, density in zip(histogram.bin_uppers(), histogram.pdf()):
        lines.append(f"{upper:.2f},{density:.6f}")

    return '\n'.join(lines) + '\n'


def write_output(result: ExperimentResult, config) -> str:
    """Writes the result in config.output_format to config.out, or to stdout when out is None or '-'.

    Parameters
    ----------
    result: ExperimentResult
        Finished experiment
    config: RunConfig
        Parsed command line; only out and output_format are used

    Returns
    -------
    The text written. OSError propagates when the path cannot be written.
    """
    if (config.output_format == FORMAT_CSV):
        text = to_csv(result.histogram)
    else:
        text = to_json(result)

    if (config.out is None or config.out == '-'):
        sys.stdout.write(text)
    else:
        with open(config.out, 'w', encoding='utf-8', newline='') as output_file:
            output_file.write(text)
        logging.info(f"Output written: [path={config.out} format={config.output_format}]")

    return text
