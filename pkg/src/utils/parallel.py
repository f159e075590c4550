"""Deterministic chunked parallel map.

Work over ``n_items`` indices is split into contiguous chunks of a fixed size
that does not depend on the worker count. Each chunk is processed by one
worker and the results are returned in chunk order, so any reduction done by
the caller over the returned list has a fixed order and the output is
bit-identical for 1 or N workers.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, TypeVar

from src.utils.logging_config import ProgressLogger

logger = logging.getLogger(__name__)

T = TypeVar("T")

DEFAULT_CHUNK_SIZE = 65536


def chunk_bounds(n_items: int, chunk_size: int) -> List[range]:
    if chunk_size < 1:
        raise ValueError(f"chunk size must be positive, got {chunk_size}")
    return [range(start, min(start + chunk_size, n_items)) for start in range(0, n_items, chunk_size)]


def chunked_map(fn: Callable[[range], T], n_items: int, chunk_size: int = DEFAULT_CHUNK_SIZE,
                workers: int = 1, progress: Optional[ProgressLogger] = None,
                label: str = "chunk") -> List[T]:
    """Apply fn to every contiguous chunk of range(n_items), results in chunk order.

    Args:
        fn: Pure function of an index range; must not mutate shared state.
        n_items: Total number of indices.
        chunk_size: Indices per chunk (fixes the partition independently of workers).
        workers: Thread count; 1 runs inline.
        progress: Optional progress logger updated once per finished chunk.
        label: Name used in progress messages and thread names.
    """
    chunks = chunk_bounds(n_items, chunk_size)
    if progress is not None:
        progress.total = max(len(chunks), 1)
    results: List[Optional[T]] = [None] * len(chunks)

    if workers <= 1 or len(chunks) <= 1:
        for i, chunk in enumerate(chunks):
            results[i] = fn(chunk)
            if progress is not None:
                progress.update(i + 1, f"{label} {i + 1}/{len(chunks)}")
        return results

    logger.debug(f"Running {len(chunks)} {label}s of up to {chunk_size} items on {workers} workers")
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix=f"Parallel_{label}") as executor:
        futures = [executor.submit(fn, chunk) for chunk in chunks]
        for i, future in enumerate(futures):
            results[i] = future.result()
            if progress is not None:
                progress.update(i + 1, f"{label} {i + 1}/{len(chunks)}")
    return results
