"""Deterministic chunked evaluation over elements.

Chunk boundaries depend only on the element count, never on the worker
count, and results are concatenated in chunk order, so the output is
bit-identical for any number of threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

CHUNK = 2048


def chunk_bounds(n: int, chunk: int = CHUNK) -> list[tuple[int, int]]:
    return [(a, min(a + chunk, n)) for a in range(0, n, chunk)]


def map_chunks(func: Callable[[slice], tuple], n: int, workers: int = 1, chunk: int = CHUNK) -> list:
    """Apply ``func(slice)`` to each fixed chunk; results in chunk order."""
    slices = [slice(a, b) for a, b in chunk_bounds(n, chunk)]
    if workers <= 1 or len(slices) <= 1:
        return [func(s) for s in slices]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, slices))


def concat_chunks(parts: list, n_outputs: int) -> tuple:
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(n_outputs))
