import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def map_ordered(fn: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None) -> List[R]:
    """
    Apply ``fn`` to every item on a thread pool and return results in input order.

    numpy releases the GIL inside its vectorised kernels, which is where the
    simulations spend their time. ``threads`` of 1 (or None with a single
    item) runs inline.
    """
    work = list(items)
    if not work:
        return []
    if threads is None:
        from settings import AppSettings

        threads = AppSettings().pool_size()
    threads = max(1, min(int(threads), len(work)))

    if threads == 1:
        return [fn(item) for item in work]

    logger.info("[Pool] map_ordered", extra={"items": len(work), "threads": threads})
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(fn, work))
