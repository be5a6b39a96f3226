"""Deterministic map helper for embarrassingly parallel replicate work.

Results are collected in submission order and every task derives its own
RNG stream from explicit seeds, so output is identical for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor


def pmap(fn, items, workers: int = 1) -> list:
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
