"""Deterministic chunked execution over ensemble members.

Chunk boundaries depend only on the ensemble size, never on the worker
count, and results come back in chunk order. Any reduction done on the
concatenated output is therefore bit-identical for every ``workers``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

T = TypeVar("T")

CHUNK = 16384


def default_workers() -> int:
    return os.cpu_count() or 1


def chunk_slices(size: int, chunk: int = CHUNK) -> list[slice]:
    return [slice(i, min(i + chunk, size)) for i in range(0, size, chunk)] or [slice(0, 0)]


def chunked_map(fn: Callable[[slice], T], size: int, workers: int = 1, chunk: int = CHUNK) -> list[T]:
    slices = chunk_slices(size, chunk)
    if workers <= 1 or len(slices) == 1:
        return [fn(sl) for sl in slices]
    # numpy ufuncs release the GIL, so threads give real overlap here
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, slices))
