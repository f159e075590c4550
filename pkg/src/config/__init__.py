"""
Configuration package for the attitude density propagator.
"""

from .settings import (DEFAULTS, GridConfig, InitialDensityConfig, MeasurementConfig, RunConfig, Settings,
                       TrajectoryConfig, env_name, load_run_config)

__all__ = [
    'DEFAULTS',
    'GridConfig',
    'InitialDensityConfig',
    'MeasurementConfig',
    'RunConfig',
    'Settings',
    'TrajectoryConfig',
    'env_name',
    'load_run_config',
]
