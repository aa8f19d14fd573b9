from __future__ import annotations

from typing import Callable, Iterable, Iterator, Sequence, TypeVar
from concurrent.futures import ThreadPoolExecutor

T = TypeVar("T")
R = TypeVar("R")


def chunks(n: int, size: int) -> Iterator[slice]:
    for start in range(0, n, size):
        yield slice(start, min(start + size, n))


def parallel_map(
    fn: Callable[[T], R],
    items: Iterable[T],
    threads: int | None = None,
) -> list[R]:
    """
    Map over items with at most `threads` workers (config.threads by default).
    Results come back in input order.
    """
    from .. import config

    items = list(items)
    if threads is None:
        threads = config.threads
    threads = max(1, min(int(threads), len(items)))

    if threads == 1:
        return [fn(itemi) for itemi in items]

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
