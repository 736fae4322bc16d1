"""Order-preserving parallel map whose results do not depend on worker count."""

from __future__ import annotations

import os
from typing import Callable, Iterable, Optional

from joblib import Parallel, delayed
from threadpoolctl import threadpool_limits

ENV_THREADS = "HOTINFER_THREADS"


def resolve_n_jobs(n_jobs: Optional[int] = None) -> int:
    """Explicit value, else ``$HOTINFER_THREADS``, else the CPU count."""
    if n_jobs is None:
        env = os.environ.get(ENV_THREADS)
        if env:
            try:
                n_jobs = int(env)
            except ValueError:
                raise ValueError(f"{ENV_THREADS} must be an integer, got {env!r}") from None
        else:
            n_jobs = os.cpu_count() or 1
    n_jobs = int(n_jobs)
    if n_jobs < 1:
        raise ValueError("number of workers must be >= 1")
    return n_jobs


def _single_blas(func, item):
    # BLAS reductions may be split differently across threads; pin to one
    with threadpool_limits(limits=1):
        return func(item)


def parallel_map(func: Callable, items: Iterable, n_jobs: Optional[int] = None,
                 backend: str = "threading") -> list:
    """``[func(x) for x in items]``, optionally fanned out over workers.

    Every call runs with single-threaded BLAS, so each result is computed
    identically whatever ``n_jobs`` is.
    """
    items = list(items)
    n_jobs = resolve_n_jobs(n_jobs)
    if n_jobs == 1 or len(items) <= 1 or backend == "threading":
        # BLAS thread limits are process-wide, so one limit covers all threads
        with threadpool_limits(limits=1):
            if n_jobs == 1 or len(items) <= 1:
                return [func(x) for x in items]
            return Parallel(n_jobs=min(n_jobs, len(items)), backend=backend)(
                delayed(func)(x) for x in items
            )
    return Parallel(n_jobs=min(n_jobs, len(items)), backend=backend)(
        delayed(_single_blas)(func, x) for x in items
    )
