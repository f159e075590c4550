"""Tests for the deterministic chunked parallel map."""

import threading

import pytest

# Add project root to allow imports
import sys, os
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../..')))

from src.utils.logging_config import create_progress_logger
from src.utils.parallel import chunk_bounds, chunked_map


def test_chunk_bounds_cover_range():
    assert chunk_bounds(10, 4) == [range(0, 4), range(4, 8), range(8, 10)]
    assert chunk_bounds(0, 4) == []


def test_chunk_bounds_reject_empty_chunks():
    with pytest.raises(ValueError):
        chunk_bounds(10, 0)


@pytest.mark.parametrize("workers", [1, 2, 5])
def test_results_come_back_in_chunk_order(workers):
    results = chunked_map(lambda chunk: list(chunk), 23, chunk_size=5, workers=workers)
    assert results == [list(range(i, min(i + 5, 23))) for i in range(0, 23, 5)]


def test_float_reduction_is_independent_of_workers():
    values = [1.0 / (i + 1) ** 1.5 for i in range(10000)]

    def partial_sum(chunk):
        return sum(values[i] for i in chunk)

    serial = sum(chunked_map(partial_sum, len(values), chunk_size=97, workers=1))
    threaded = sum(chunked_map(partial_sum, len(values), chunk_size=97, workers=4))
    assert serial == threaded


def test_worker_threads_are_named_after_label():
    names = chunked_map(lambda chunk: threading.current_thread().name, 8, chunk_size=2, workers=2, label="pullback")
    assert all(name.startswith("Parallel_pullback") for name in names)


def test_progress_reaches_total(caplog):
    progress = create_progress_logger("tests.parallel", total=1, prefix="Chunks")
    with caplog.at_level("INFO", logger="tests.parallel"):
        chunked_map(lambda chunk: None, 9, chunk_size=3, workers=1, progress=progress)
    assert progress.total == 3
    assert progress.last_percent == 100
    assert "Chunks" in caplog.text
