import json
import logging

"""
Serves as the global configuration for the bellforge package.
"""

CONFIG_LOG_LEVEL = logging.INFO
CONFIG_BIN_WIDTH = 0.01
CONFIG_VIOLATION_EPSILON = 1e-6
CONFIG_LP_TOLERANCE = 1e-9
CONFIG_LP_MAX_ITERATIONS = 100000
CONFIG_MAX_STRATEGIES = 2 ** 20
CONFIG_FACET_TRIAL_CAP_FACTOR = 100
CONFIG_CHUNK_SIZE = 250
# 0 means one worker per available CPU
CONFIG_WORKERS = 0

# JSON key -> module global
_KEYS = {
    'log_level': 'CONFIG_LOG_LEVEL',
    'bin_width': 'CONFIG_BIN_WIDTH',
    'violation_epsilon': 'CONFIG_VIOLATION_EPSILON',
    'lp_tolerance': 'CONFIG_LP_TOLERANCE',
    'lp_max_iterations': 'CONFIG_LP_MAX_ITERATIONS',
    'max_strategies': 'CONFIG_MAX_STRATEGIES',
    'facet_trial_cap_factor': 'CONFIG_FACET_TRIAL_CAP_FACTOR',
    'chunk_size': 'CONFIG_CHUNK_SIZE',
    'workers': 'CONFIG_WORKERS',
}


def load_config(config_file: str):
    """Loads JSON config file into the global variables in this module.

    Parameters
    ----------
    config_file: str
        Configuration file path
    """
    with open(config_file) as config_file:
        data = json.load(config_file)

    restore({_KEYS[key]: value for key, value in data.items() if key in _KEYS})


def snapshot() -> dict:
    """Returns the current value of every CONFIG_* global, keyed by global name.
    """
    return {name: globals()[name] for name in _KEYS.values()}


def restore(values: dict):
    """Applies values previously captured by snapshot(). Used as the worker process
    initializer so that pool workers see the parent's configuration.

    Parameters
    ----------
    values: dict
        Mapping of CONFIG_* global name to value
    """
    for name, value in values.items():
        if (name in _KEYS.values()):
            globals()[name] = value
