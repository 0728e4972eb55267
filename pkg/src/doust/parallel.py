"""Process-level parallel map for independent repetitions.

Worker count comes from an explicit argument, the DOUST_WORKERS environment
variable, or the CPU count, in that order. Each worker pins its BLAS pools
to one thread so processes do not oversubscribe each other.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

_BLAS_LIMIT_HANDLE = None


def worker_count(explicit: int | None = None) -> int:
    if explicit is not None:
        return max(1, int(explicit))
    env = os.environ.get("DOUST_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def _limit_blas_threads():
    global _BLAS_LIMIT_HANDLE
    try:
        from threadpoolctl import threadpool_limits

        _BLAS_LIMIT_HANDLE = threadpool_limits(limits=1)
    except ImportError:
        pass


def parallel_map(fn, items, workers: int | None = None) -> list:
    """Order-preserving map over items, forked across processes when more
    than one worker is requested."""
    items = list(items)
    n_workers = worker_count(workers)
    if n_workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(
        max_workers=min(n_workers, len(items)), initializer=_limit_blas_threads
    ) as pool:
        return list(pool.map(fn, items))
