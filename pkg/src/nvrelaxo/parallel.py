"""Ordered map over independent work units, optionally in worker processes.

Work is always cut into the same units regardless of ``workers`` and results
come back in unit order, so any reduction done by the caller is identical for
every worker count.
"""

import os
from concurrent.futures import ProcessPoolExecutor

WORKERS_ENV = "NV_RELAXO_WORKERS"


def default_workers() -> int:
    value = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(value))
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {value!r}") from None


def ordered_map(fn, units, workers: int | None = None) -> list:
    units = list(units)
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(units) <= 1:
        return [fn(u) for u in units]
    with ProcessPoolExecutor(max_workers=min(workers, len(units))) as pool:
        return list(pool.map(fn, units))
