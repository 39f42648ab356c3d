"""Order-preserving process pool map."""

from __future__ import annotations

import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def default_jobs() -> int:
    return os.cpu_count() or 1


def pmap(fn: Callable[[T], R], items: Iterable[T], jobs: int = 1) -> list[R]:
    """``[fn(x) for x in items]``, optionally spread over ``jobs`` processes.

    Results come back in input order, so serial and parallel runs agree.
    ``fn`` must be picklable (a module-level function or a partial of one).
    """
    items = list(items)
    if jobs <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    try:
        ctx = multiprocessing.get_context("fork")
    except ValueError:
        ctx = None
    with ProcessPoolExecutor(max_workers=min(jobs, len(items)), mp_context=ctx) as ex:
        return list(ex.map(fn, items))


def chunk_ranges(total: int, jobs: int, per_job: int = 4) -> list[tuple[int, int]]:
    """Split ``range(total)`` into contiguous (start, stop) pieces."""
    if total == 0:
        return []
    pieces = max(1, min(total, jobs * per_job))
    step = -(-total // pieces)
    return [(a, min(a + step, total)) for a in range(0, total, step)]
