"""Scheduling-independent chunked evaluation, reduction and seeding."""

from __future__ import annotations

import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

#: rows per chunk; fixed so that results never depend on the worker count
CHUNK_SIZE = 1 << 14


def chunk_bounds(total: int, chunk: int = CHUNK_SIZE) -> list[tuple[int, int]]:
    return [(lo, min(lo + chunk, total)) for lo in range(0, total, chunk)]


def map_chunks(fn: Callable[[int, int], object], total: int, threads: int = 1,
               chunk: int = CHUNK_SIZE) -> list:
    """Apply ``fn(lo, hi)`` to fixed chunks of ``range(total)``; results in chunk order."""
    bounds = chunk_bounds(total, chunk)
    if threads <= 1 or len(bounds) <= 1:
        return [fn(lo, hi) for lo, hi in bounds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda b: fn(*b), bounds))


def chunk_sum(values: np.ndarray) -> tuple[float, float]:
    """Pairwise sum in extended precision, split into a float64 (hi, lo) pair."""
    s = np.sum(np.asarray(values, dtype=np.longdouble))
    hi = float(s)
    return hi, float(s - np.longdouble(hi))


def combine_sums(parts: Sequence[tuple[float, float]]) -> float:
    """Correctly rounded total of the chunk partial sums."""
    return math.fsum(x for pair in parts for x in pair)


def experiment_id(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


def replicate_rng(master_seed: int, exp_id: int, replicate: int) -> np.random.Generator:
    """Independent stream for one replicate; a pure function of its key."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(exp_id, replicate))
    return np.random.default_rng(ss)
