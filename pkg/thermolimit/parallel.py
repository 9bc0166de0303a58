"""Bounded fan-out of independent work items.

Replica batches, group samples and per-size sweeps are independent; they
run on worker threads bounded by an ``asyncio.Semaphore`` and are
gathered back in input order, so every reduction downstream sees the
same sequence no matter how many threads ran.

Key functions:
    gather_ordered: Async fan-out with a concurrency limit.
    run_ordered: Synchronous wrapper used by library code.
"""

import asyncio
from typing import Callable, List, Sequence, TypeVar

import structlog

logger = structlog.get_logger("thermolimit.harness")

T = TypeVar("T")
R = TypeVar("R")


async def gather_ordered(
    fn: Callable[[T], R], items: Sequence[T], threads: int = 1
) -> List[R]:
    """Apply ``fn`` to every item on at most ``threads`` worker threads.

    Returns:
        Results in the order of ``items``.
    """
    semaphore = asyncio.Semaphore(max(1, threads))

    async def _worker(item: T) -> R:
        async with semaphore:
            return await asyncio.to_thread(fn, item)

    return list(await asyncio.gather(*(_worker(item) for item in items)))


def run_ordered(fn: Callable[[T], R], items: Sequence[T], threads: int = 1) -> List[R]:
    """Synchronous :func:`gather_ordered`.

    Runs inline when ``threads`` is 1 or there is a single item, and also
    when called from inside a running event loop.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    try:
        asyncio.get_running_loop()
    except RuntimeError:
        return asyncio.run(gather_ordered(fn, items, threads))
    logger.debug("run_ordered_inline", reason="event loop already running", items=len(items))
    return [fn(item) for item in items]
