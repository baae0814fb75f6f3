"""Bounded worker pool controlled by the WAVEX_THREADS environment variable."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count() -> int:
    """Configured pool size; defaults to 1 (fully serial)."""
    try:
        n = int(os.environ.get("WAVEX_THREADS", "1"))
    except ValueError:
        return 1
    return max(1, n)


def thread_map(fn, items):
    """Apply ``fn`` over ``items`` preserving order.

    Work is assigned deterministically (chunked by index), so results do
    not depend on the pool size.
    """
    items = list(items)
    n = worker_count()
    if n <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
