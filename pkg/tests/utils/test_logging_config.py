"""Tests for the logging helpers."""

import io
import logging

import pytest

# Add project root to allow imports
import sys, os
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../..')))

from src.utils.logging_config import ANSI_ESCAPE_REGEX, EnhancedFormatter, ProgressLogger, setup_logging


@pytest.fixture
def restore_root_logger():
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield root
    root.handlers[:] = handlers
    root.setLevel(level)


def make_record(name, level, message, exc_info=None):
    return logging.LogRecord(name, level, __file__, 1, message, None, exc_info)


@pytest.mark.parametrize("name, component", [
    ("src.density.propagation", "density"),
    ("src.harmonic.wigner", "harmonic"),
    ("src.orchestration.pipeline_orchestrator", "orchestration"),
    ("somewhere.else", "utils"),
])
def test_component_for_logger_name(name, component):
    assert EnhancedFormatter.component_for(name) == component


def test_plain_output_has_no_ansi_codes():
    formatter = EnhancedFormatter(color_enabled=False)
    line = formatter.format(make_record("src.density.propagation", logging.WARNING,
                                        "Escaped mass 2.5e-03 in density_k10.bin"))
    assert not ANSI_ESCAPE_REGEX.search(line)
    assert "WARNING" in line
    assert "[🌫️ propagation]" in line
    assert "Escaped mass 2.5e-03 in density_k10.bin" in line


def test_colored_output_highlights_numbers():
    line = EnhancedFormatter().format(make_record("src.app", logging.INFO, "wrote 3 file(s)"))
    assert ANSI_ESCAPE_REGEX.search(line)
    assert ANSI_ESCAPE_REGEX.sub("", line).endswith("wrote 3 file(s)")


def test_exception_traceback_is_appended():
    try:
        raise RuntimeError("solver diverged")
    except RuntimeError:
        record = make_record("src.dynamics.integrator", logging.ERROR, "failed", sys.exc_info())
    line = EnhancedFormatter(color_enabled=False).format(record)
    assert "Traceback:" in line
    assert "RuntimeError: solver diverged" in line


def test_setup_logging_writes_to_stream(restore_root_logger):
    stream = io.StringIO()
    setup_logging(level="DEBUG", color_enabled=False, stream=stream)
    logging.getLogger("src.geometry.so3").debug("renormalized 4 rotations")
    assert restore_root_logger.level == logging.DEBUG
    assert len(restore_root_logger.handlers) == 1
    assert "renormalized 4 rotations" in stream.getvalue()


def test_setup_logging_with_plain_format(restore_root_logger):
    stream = io.StringIO()
    setup_logging(level=logging.INFO, log_format="%(levelname)s:%(message)s", stream=stream)
    logging.getLogger("src.app").info("hello")
    assert "INFO:hello" in stream.getvalue()


def test_progress_logger_rate_limits(caplog):
    logger = logging.getLogger("tests.progress")
    progress = ProgressLogger(logger, total=4, prefix="Steps")
    with caplog.at_level(logging.INFO, logger="tests.progress"):
        for i in range(1, 5):
            progress.update(i, f"step {i}")
    messages = [r.getMessage() for r in caplog.records if r.name == "tests.progress"]
    assert 1 <= len(messages) <= 4
    assert "100%" in messages[-1]
