"""Deterministic sharding. Work is cut into a fixed number of shards that
does not depend on the thread count; each shard gets its own counter-based
generator and results are combined in shard order."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

_threads: int | None = None


def set_threads(n: int | None) -> None:
    global _threads
    if n is not None and n < 1:
        raise ValueError("thread count must be positive")
    _threads = n


def thread_count() -> int:
    if _threads is not None:
        return _threads
    env = os.environ.get("PNLAB_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            n = 0
        if n > 0:
            return n
    return os.cpu_count() or 1


def shard_rngs(seed: int, nshards: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(nshards)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def shard_sizes(total: int, nshards: int) -> list[int]:
    base, extra = divmod(total, nshards)
    return [base + (i < extra) for i in range(nshards)]


def pmap(fn: Callable[..., T], items: Sequence, threads: int | None = None) -> list[T]:
    """Map preserving order; thread count only affects scheduling."""
    threads = threads or thread_count()
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))
