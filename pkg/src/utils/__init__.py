"""
Utilities module for the attitude density propagator.
"""

from .logging_config import EnhancedFormatter, ProgressLogger, create_progress_logger, get_logger, setup_logging
from .parallel import DEFAULT_CHUNK_SIZE, chunk_bounds, chunked_map

__all__ = [
    # Logging
    'EnhancedFormatter',
    'ProgressLogger',
    'create_progress_logger',
    'get_logger',
    'setup_logging',

    # Deterministic parallel map
    'DEFAULT_CHUNK_SIZE',
    'chunk_bounds',
    'chunked_map',
]
