import asyncio
from concurrent.futures import ProcessPoolExecutor
import logging
import os
from typing import Any, Callable, List, Optional, Sequence, Tuple

import numpy as np

import bellforge.config as config
from .errors import ParameterError
from .messages import *

"""
Runs chunks of Monte Carlo trials on a pool of worker processes and provides the random
streams that make the results independent of how trials are scheduled.
"""


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Random stream of one trial. Distinct (seed, trial) pairs give independent streams."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0, trial)))


def state_rng(seed: int) -> np.random.Generator:
    """Random stream for the one state shared by every trial of a run."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))


def chunk_ranges(trials: int, chunk_size: Optional[int] = None, start: int = 0) -> List[Tuple[int, int, int]]:
    """Splits trial indices start .. trials - 1 into (chunk, first, stop) triples.

    Chunk boundaries are multiples of chunk_size, so they do not depend on the number of workers.
    """
    chunk_size = chunk_size or config.CONFIG_CHUNK_SIZE
    if (chunk_size < 1):
        raise ParameterError(TEMPLATE_INVALID_PARAMETER.substitute(
            name='chunk_size', value=chunk_size, reason='must be positive'))

    return [(first // chunk_size, first, min(first + chunk_size, trials))
            for first in range(start, trials, chunk_size)]


def resolve_workers(workers: Optional[int] = None) -> int:
    """Number of worker processes to use; 0 or None falls back to CONFIG_WORKERS, then to the CPU count."""
    if (not workers):
        workers = config.CONFIG_WORKERS
    if (not workers):
        workers = os.cpu_count() or 1
    if (workers < 1):
        raise ParameterError(TEMPLATE_INVALID_PARAMETER.substitute(
            name='workers', value=workers, reason='must be positive'))
    return workers


class TrialPool:
    """
    Schedules chunk functions on a process pool from an asyncio event loop.

    Worker processes start with the parent's configuration. With a single worker, chunks
    run inline in the calling thread and no process is started. Chunk functions and their
    arguments must be picklable, i.e. module-level functions or functools.partial of them.

    Usage:

        async with TrialPool(workers) as pool:
            results = await pool.map(function, chunks, 'typicality')
    """

    def __init__(self, workers: Optional[int] = None):
        self.workers = resolve_workers(workers)
        self.executor = None

    async def __aenter__(self) -> 'TrialPool':
        if (self.workers > 1):
            self.executor = ProcessPoolExecutor(max_workers=self.workers,
                                                initializer=config.restore,
                                                initargs=(config.snapshot(),))
        return self

    async def __aexit__(self, exc_type, exc, tb):
        if (self.executor is not None):
            self.executor.shutdown(wait=True)
            self.executor = None

    async def map(self, function: Callable[[Any], Any], chunks: Sequence[Any], experiment: str) -> List[Any]:
        """Runs function on every chunk.

        Parameters
        ----------
        function: Callable
            Picklable function of one chunk
        chunks: Sequence
            Chunk descriptors, each starting with its chunk number
        experiment: str
            Name used in the log

        Returns
        -------
        The results in the order of chunks. The first failing chunk's exception is re-raised
        after it is logged.
        """
        if (self.executor is None):
            return [await self.run_chunk(function, chunk, experiment) for chunk in chunks]

        return await asyncio.gather(
            *[self.run_chunk(function, chunk, experiment) for chunk in chunks]
        )

    async def run_chunk(self, function: Callable[[Any], Any], chunk: Any, experiment: str) -> Any:
        try:
            if (self.executor is None):
                result = function(chunk)
            else:
                result = await asyncio.get_running_loop().run_in_executor(self.executor, function, chunk)
        except:
            logging.error(TEMPLATE_CHUNK_ERROR.substitute(
                chunk=chunk[0], experiment=experiment), exc_info=True)
            raise

        logging.info(f"Chunk complete: [experiment={experiment} chunk={chunk[0]} trials={chunk[2] - chunk[1]}]")
        return result
