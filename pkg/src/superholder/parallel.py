"""Bounded worker pool for replicate-parallel work.

Compiled kernels release the GIL, so a thread pool is enough.  Results are
always returned in replicate order, whatever the completion order was.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)


def map_ordered(fn: Callable[[int], T], indices: Sequence[int], workers: int | None = None) -> list[T]:
    workers = workers or 1
    if workers <= 1 or len(indices) <= 1:
        return [fn(i) for i in indices]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, indices))
