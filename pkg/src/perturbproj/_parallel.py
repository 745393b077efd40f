"""Thread-count selection and an order-preserving parallel map.

Trial work is numpy-bound, so threads (not processes) are the right pool; the
GIL releases inside BLAS and the per-trial streams make results independent of
scheduling. Results always come back in input order, and PP_THREADS=1 gives a
plain sequential loop.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count() -> int:
    """Thread count from PP_THREADS, else the machine's CPU count."""
    raw = os.environ.get("PP_THREADS", "").strip()
    if raw:
        try:
            v = int(raw)
        except ValueError:
            raise ValueError(f"PP_THREADS must be an integer, got {raw!r}")
        if v < 1:
            raise ValueError(f"PP_THREADS must be >= 1, got {v}")
        return v
    return os.cpu_count() or 1


def parallel_map(fn, items, workers: int = None) -> list:
    """Map fn over items, preserving order; sequential when workers == 1."""
    items = list(items)
    if workers is None:
        workers = worker_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
