import logging
from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor

from config import settings

logger = logging.getLogger(__name__)


def parallel_map(fn: Callable, items: Iterable, *, threads: int | None = None) -> list:
    """Map ``fn`` over ``items`` with a bounded thread pool.

    Results come back in input order, so reductions over them are deterministic.
    """
    items = list(items)
    threads = settings.THREADS if threads is None else threads
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    workers = min(threads, len(items))
    logger.debug("parallel_map: %d items on %d workers", len(items), workers)
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, items))
