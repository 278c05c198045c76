"""Counter-based random streams and order-independent parallel maps.

Every random quantity in the package is drawn from a Philox generator whose
128-bit key is ``(seed, stream)``.  Work item ``i`` of a computation always
uses stream ``i``, so results do not depend on how items are scheduled.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar, Union

import numpy as np

T = TypeVar("T")

StreamId = Union[int, tuple[int, int]]

_MASK64 = (1 << 64) - 1
THREADS_ENV = "BETHE_LAB_THREADS"


def stream_rng(seed: StreamId, stream: int = 0) -> np.random.Generator:
    """Generator for stream ``stream`` under global ``seed``.

    ``seed`` may itself be a ``(seed, stream)`` pair, in which case
    ``stream`` is added to the pair's stream index.
    """
    if isinstance(seed, tuple):
        seed, base = seed
        stream = base + stream
    if seed < 0 or stream < 0:
        raise ValueError("seed and stream must be nonnegative")
    key = ((int(seed) & _MASK64) << 64) | (int(stream) & _MASK64)
    return np.random.Generator(np.random.Philox(key=key))


def resolve_threads(threads: int | None = None) -> int:
    """Worker count: explicit value, then ``BETHE_LAB_THREADS``, then CPUs."""
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        if env:
            threads = int(env)
        else:
            threads = os.cpu_count() or 1
    if threads < 1:
        raise ValueError("threads must be >= 1")
    return threads


def parallel_map(fn: Callable[[int], T], n: int, threads: int | None = None) -> list[T]:
    """Evaluate ``fn(i)`` for ``i in range(n)``; results are in index order."""
    threads = min(resolve_threads(threads), max(n, 1))
    if threads == 1 or n <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n)))


def mean_and_stderr(values: Sequence[float]) -> tuple[float, float]:
    """Compensated mean and standard error of the mean.

    ``math.fsum`` is exactly rounded, so the result is independent of the
    order in which the values were produced.
    """
    n = len(values)
    if n == 0:
        raise ValueError("no values")
    mean = math.fsum(values) / n
    if n == 1:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)
