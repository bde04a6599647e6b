"""Deterministic, parallel-safe random number streams.

Every stochastic operation takes a single integer master seed.  Work is cut
into fixed-size chunks and each chunk gets an independent generator derived
from ``SeedSequence(master_seed, spawn_key=(purpose, *labels, chunk_index))``.
A trial's randomness is therefore a pure function of the master seed, the
stream labels and the trial index, so chunks may be computed serially, out of
order, or on a thread pool and the assembled result is bit-identical.

CHUNK is frozen: changing it changes every generated dataset.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

CHUNK = 4096

# Purpose tags keep unrelated streams (trials vs. schedules) from colliding.
PURPOSE_TRIALS = 1
PURPOSE_STREAMS = 2


def chunk_generator(master_seed: int, labels: tuple[int, ...], chunk_index: int) -> np.random.Generator:
    """Independent generator for one chunk of one labelled stream."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(*labels, chunk_index))
    return np.random.Generator(np.random.PCG64(seq))


def n_chunks(n: int) -> int:
    return (n + CHUNK - 1) // CHUNK


def map_chunks(fn, n: int, workers: int = 1) -> list:
    """Apply ``fn(chunk_index, start, stop)`` to every chunk of an n-item range.

    Results come back ordered by chunk index regardless of execution order,
    which is what makes thread fan-out safe.
    """
    bounds = [(c, c * CHUNK, min(n, (c + 1) * CHUNK)) for c in range(n_chunks(n))]
    if workers <= 1:
        return [fn(*b) for b in bounds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda b: fn(*b), bounds))
