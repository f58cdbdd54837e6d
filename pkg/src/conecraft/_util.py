"""Small shared helpers: lossless number formatting and ordered parallel maps."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")

_DEFAULT_THREADS: int | None = None


def set_default_threads(n: int | None) -> None:
    global _DEFAULT_THREADS
    _DEFAULT_THREADS = n


def default_threads() -> int:
    return _DEFAULT_THREADS or os.cpu_count() or 1


def ordered_map(fn: Callable[[T], R], items: Iterable[T], threads: int | None = None) -> list[R]:
    """``[fn(x) for x in items]`` evaluated on a thread pool.

    Results come back in input order, so any reduction done afterwards is
    independent of the thread count.
    """
    items = list(items)
    threads = threads or default_threads()
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def fmt(x: float) -> str:
    """17 significant digits: round-trips any 64-bit float."""
    return format(float(x), ".17g")
