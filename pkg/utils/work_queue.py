"""
Frame-level work queue.

Runs a synchronous per-frame function over a list of items, optionally on a
thread pool, and always returns results in input order so reductions done by
the caller are identical for serial and parallel runs.
"""

import asyncio
from typing import Callable, List, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


async def map_frames(fn: Callable[[T], R], items: Sequence[T], workers: int = 1) -> List[R]:
    if workers <= 1:
        return [fn(item) for item in items]

    semaphore = asyncio.Semaphore(workers)

    async def run(item: T) -> R:
        async with semaphore:
            return await asyncio.to_thread(fn, item)

    return list(await asyncio.gather(*(run(item) for item in items)))
