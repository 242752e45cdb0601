"""Ordered parallel map capped by the ``FBTL_THREADS`` environment variable."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def thread_cap() -> int:
    raw = os.environ.get("FBTL_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


def map_ordered(fn, items, workers: int | None = None) -> list:
    """``[fn(x) for x in items]``, possibly on a thread pool; order is preserved."""
    items = list(items)
    workers = min(workers or thread_cap(), thread_cap(), max(1, len(items)))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
