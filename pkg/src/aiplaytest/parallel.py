"""Order-preserving process-pool map used by every parallel stage."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def pmap(fn: Callable[[T], R], items: Iterable[T], workers: int = 1) -> list[R]:
    """``list(map(fn, items))``, spread over ``workers`` processes.

    Results come back in input order, so output never depends on pool size.
    """
    items = list(items)
    workers = max(1, min(int(workers), len(items) or 1))
    if workers == 1:
        return [fn(x) for x in items]
    chunksize = max(1, len(items) // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunksize))


def default_workers() -> int:
    return os.cpu_count() or 1
