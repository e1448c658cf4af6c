"""Deterministic chunked parallel map."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

CHUNK = 8


def chunks(items, size: int = CHUNK):
    items = list(items)
    return [items[i:i + size] for i in range(0, len(items), size)]


def chunked_map(worker, items, threads: int = 1, size: int = CHUNK):
    """Apply ``worker(chunk) -> list`` to fixed-size chunks and concatenate.

    Chunk boundaries depend only on ``size``, never on ``threads``, so any
    state a worker carries across the items of one chunk (warm starts,
    caches) is the same for every thread count and results are identical.
    """
    parts = chunks(items, size)
    if threads <= 1 or len(parts) <= 1:
        results = [worker(c) for c in parts]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(worker, parts))
    return [r for part in results for r in part]
