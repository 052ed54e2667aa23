import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def resolve_threads(threads: int | None) -> int:
    """Explicit value, else FORGE_THREADS, else 1."""
    if threads is None:
        env = os.environ.get("FORGE_THREADS")
        threads = int(env) if env else 1
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    return threads


def ordered_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1,
                chunksize: int = 64) -> list[R]:
    """Map preserving input order; results are identical for any thread count.

    ``fn`` must be picklable (module-level) when threads > 1.
    """
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items, chunksize=max(1, chunksize)))
