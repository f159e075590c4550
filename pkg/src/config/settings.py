"""
Centralized configuration management for the attitude density propagator.

A run is described by a flat text file of ``dotted.key = value`` lines.
Values are layered: built-in defaults, then the config file, then
``SO3PROP_*`` environment variables, then explicit overrides (CLI flags).
The merged values are parsed into a frozen :class:`RunConfig`.
"""

import hashlib
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np

from src.core.exceptions import ConfigurationError, ValidationError
from src.core.models import (Euler313, GaussianParams, MeasurementModel, PendulumParams, RigidBodyState,
                             StepConfig, VonMisesSo3Params)
from src.geometry.so3 import euler313_to_rotation

logger = logging.getLogger(__name__)

ENV_PREFIX = "SO3PROP_"
BETA_RULES = ("simpson", "exact")
# Keys that do not change any computed value; left out of the config hash.
UNHASHED_KEYS = ("output.dir", "run.workers")

# Canonical defaults; the rendering of this mapping (after overrides) is what gets hashed.
DEFAULTS: Dict[str, str] = {
    "pendulum.J.diag": "0.13, 0.28, 0.17",
    "pendulum.J": "",
    "pendulum.mass": "1.0",
    "pendulum.rho": "0, 0, 0.3",
    "pendulum.g": "9.81",
    "integrator.h": "0.01",
    "integrator.newton_tol": "1e-14",
    "integrator.newton_max_iter": "50",
    "grid.attitude": "25, 25, 25",
    "grid.velocity": "9, 9, 9",
    "grid.velocity_sigmas": "6",
    "grid.beta_rule": "simpson",
    "grid.sphere": "65, 129",
    "grid.circle_nodes": "64",
    "grid.track_mean": "true",
    "spectrum.bandlimit": "10",
    "initial.mean_attitude_euler": "0, 0, 0",
    "initial.kappa": "8",
    "initial.mean_omega": "4.14, 4.14, 4.14",
    "initial.sigma": "0.1414",
    "initial.covariance": "",
    "measurement.reference": "1, 0, 0",
    "measurement.sigma_direction": "0.05",
    "measurement.sigma_omega": "0.05",
    "measurement.times": "0.1, 0.2, 0.3, 0.4, 0.5",
    "measurement.seed": "0",
    "trajectory.initial_attitude_euler": "0, 0, 0",
    "trajectory.initial_omega": "4.14, 4.14, 4.14",
    "trajectory.duration": "10",
    "output.dir": "output",
    "run.snapshot_times": "0, 0.1, 0.2, 0.4, 1.0",
    "run.workers": "4",
    "run.chunk_size": "65536",
    "run.renormalize": "false",
}


def _floats(value: str, count: Optional[int] = None) -> Tuple[float, ...]:
    items = tuple(float(v) for v in value.replace(";", ",").split(",") if v.strip())
    if count is not None and len(items) != count:
        raise ValueError(f"expected {count} comma-separated numbers, got {len(items)}")
    return items


def _ints(value: str, count: int) -> Tuple[int, ...]:
    items = tuple(int(v) for v in value.split(",") if v.strip())
    if len(items) != count:
        raise ValueError(f"expected {count} comma-separated integers, got {len(items)}")
    return items


def _odd_ints(value: str) -> Tuple[int, ...]:
    items = _ints(value, 3)
    if any(n < 3 or n % 2 == 0 for n in items):
        raise ValueError(f"grid sizes must be odd and at least 3, got {items}")
    return items


def _bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _positive_int(value: str) -> int:
    n = int(value)
    if n < 1:
        raise ValueError(f"must be a positive integer, got {n}")
    return n


def _beta_rule(value: str) -> str:
    rule = value.strip().lower()
    if rule not in BETA_RULES:
        raise ValueError(f"must be one of {BETA_RULES}, got {value!r}")
    return rule


def _times(value: str) -> Tuple[float, ...]:
    times = _floats(value)
    if not times:
        raise ValueError("at least one time is required")
    if times[0] < 0.0 or any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError(f"times must be non-negative and strictly increasing, got {times}")
    return times


def _optional_matrix(value: str) -> Optional[Tuple[float, ...]]:
    return _floats(value, 9) if value.strip() else None


PARSERS: Dict[str, Callable[[str], Any]] = {
    "pendulum.J.diag": lambda v: _floats(v, 3),
    "pendulum.J": _optional_matrix,
    "pendulum.mass": float,
    "pendulum.rho": lambda v: _floats(v, 3),
    "pendulum.g": float,
    "integrator.h": float,
    "integrator.newton_tol": float,
    "integrator.newton_max_iter": _positive_int,
    "grid.attitude": _odd_ints,
    "grid.velocity": _odd_ints,
    "grid.velocity_sigmas": float,
    "grid.beta_rule": _beta_rule,
    "grid.sphere": lambda v: _ints(v, 2),
    "grid.circle_nodes": _positive_int,
    "grid.track_mean": _bool,
    "spectrum.bandlimit": int,
    "initial.mean_attitude_euler": lambda v: _floats(v, 3),
    "initial.kappa": float,
    "initial.mean_omega": lambda v: _floats(v, 3),
    "initial.sigma": float,
    "initial.covariance": _optional_matrix,
    "measurement.reference": lambda v: _floats(v, 3),
    "measurement.sigma_direction": float,
    "measurement.sigma_omega": float,
    "measurement.times": _times,
    "measurement.seed": int,
    "trajectory.initial_attitude_euler": lambda v: _floats(v, 3),
    "trajectory.initial_omega": lambda v: _floats(v, 3),
    "trajectory.duration": float,
    "output.dir": str,
    "run.snapshot_times": _times,
    "run.workers": _positive_int,
    "run.chunk_size": _positive_int,
    "run.renormalize": _bool,
}


def env_name(key: str) -> str:
    """Environment variable that overrides ``key``, e.g. run.workers -> SO3PROP_RUN_WORKERS."""
    return ENV_PREFIX + key.replace(".", "_").upper()


@dataclass(frozen=True)
class GridConfig:
    """Grid resolutions for the attitude, velocity and sphere discretizations."""
    attitude: Tuple[int, int, int] = (25, 25, 25)
    velocity: Tuple[int, int, int] = (9, 9, 9)
    velocity_sigmas: float = 6.0
    beta_rule: str = "simpson"
    sphere: Tuple[int, int] = (65, 129)
    circle_nodes: int = 64
    track_mean: bool = True


@dataclass(frozen=True, eq=False)
class InitialDensityConfig:
    """von Mises attitude factor times Gaussian angular-velocity factor."""
    von_mises: VonMisesSo3Params
    gaussian: GaussianParams


@dataclass(frozen=True, eq=False)
class MeasurementConfig:
    model: MeasurementModel
    times: Tuple[float, ...]
    seed: int = 0


@dataclass(frozen=True, eq=False)
class TrajectoryConfig:
    initial_state: RigidBodyState
    duration: float


@dataclass(frozen=True, eq=False)
class RunConfig:
    """Fully validated description of one CLI run."""
    pendulum: PendulumParams
    step: StepConfig
    grid: GridConfig
    bandlimit: int
    initial: InitialDensityConfig
    measurement: MeasurementConfig
    trajectory: TrajectoryConfig
    output_dir: Path
    snapshot_times: Tuple[float, ...]
    workers: int
    chunk_size: int
    renormalize: bool
    values: Mapping[str, str] = field(default_factory=dict)

    def steps_for(self, t: float) -> int:
        """Step index for a time in seconds (nearest multiple of h)."""
        k = int(round(t / self.step.h))
        if abs(k * self.step.h - t) > 1e-9 * max(1.0, abs(t)):
            logger.warning(f"Time {t} s is not a multiple of h={self.step.h}; using step {k} (t={k * self.step.h:g} s)")
        return k

    @property
    def snapshot_steps(self) -> List[int]:
        return [self.steps_for(t) for t in self.snapshot_times]

    def rendered(self, exclude: Tuple[str, ...] = ()) -> str:
        """Canonical sorted ``key = value`` rendering of every setting."""
        return "".join(f"{key} = {self.values[key]}\n" for key in sorted(self.values) if key not in exclude)

    def config_hash(self) -> str:
        """SHA-256 of the rendering without output location and worker count."""
        return hashlib.sha256(self.rendered(UNHASHED_KEYS).encode("utf-8")).hexdigest()


class Settings:
    """Loads and layers raw configuration values, then builds the RunConfig."""

    def __init__(self, config_file: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None,
                 environ: Optional[Mapping[str, str]] = None):
        """
        Initialize settings from defaults, an optional config file, the environment and overrides.

        Args:
            config_file: Path to a ``dotted.key = value`` file (optional)
            overrides: Dotted keys to values, applied last (CLI flags)
            environ: Environment mapping (defaults to os.environ)
        """
        self.values: Dict[str, str] = dict(DEFAULTS)

        if config_file:
            self._load_config_file(config_file)

        self._load_from_env(os.environ if environ is None else environ)

        for key, value in (overrides or {}).items():
            if value is not None:
                self._set(key, value if isinstance(value, str) else _render(value))

        self.run = self._build()

    def _set(self, key: str, value: str):
        if key not in DEFAULTS:
            raise ConfigurationError(key, "unknown configuration key")
        self.values[key] = value.strip()

    def _load_config_file(self, config_file: str):
        """Load configuration from a dotted-key text file."""
        config_path = Path(config_file)
        if not config_path.exists():
            raise ConfigurationError(None, f"configuration file {config_file} not found")

        with open(config_path, 'r') as f:
            for number, line in enumerate(f, start=1):
                line = line.split('#', 1)[0].strip()
                if not line:
                    continue
                if '=' not in line:
                    raise ConfigurationError(None, f"{config_file}:{number}: expected 'key = value'")
                key, value = line.split('=', 1)
                self._set(key.strip(), value.strip().strip('"\''))
        logger.info(f"Loaded configuration from {config_file}")

    def _load_from_env(self, environ: Mapping[str, str]):
        """Apply SO3PROP_* environment overrides."""
        known = {env_name(key): key for key in DEFAULTS}
        for name, value in environ.items():
            if not name.startswith(ENV_PREFIX):
                continue
            if name not in known:
                logger.warning(f"Ignoring unknown environment variable {name}")
                continue
            self._set(known[name], value)
            logger.debug(f"Configuration: {known[name]} overridden from {name}")

    def _parse(self, key: str) -> Any:
        try:
            return PARSERS[key](self.values[key])
        except (ValueError, TypeError) as e:
            raise ConfigurationError(key, f"cannot parse {self.values[key]!r}: {e}") from e

    def _section(self, key: str, build: Callable[[], Any]) -> Any:
        """Run a model constructor and report its validation errors against ``key``."""
        try:
            return build()
        except ValidationError as e:
            raise ConfigurationError(key, str(e)) from e

    def _build(self) -> RunConfig:
        v = {key: self._parse(key) for key in DEFAULTS}

        J = np.reshape(v["pendulum.J"], (3, 3)) if v["pendulum.J"] else np.diag(v["pendulum.J.diag"])
        pendulum = self._section("pendulum", lambda: PendulumParams(
            J=J, m=v["pendulum.mass"], rho=v["pendulum.rho"], g=v["pendulum.g"]))
        step = self._section("integrator", lambda: StepConfig(
            h=v["integrator.h"], newton_tol=v["integrator.newton_tol"],
            newton_max_iter=v["integrator.newton_max_iter"]))

        if v["grid.velocity_sigmas"] <= 0.0:
            raise ConfigurationError("grid.velocity_sigmas", "must be positive")
        if v["grid.circle_nodes"] < 8:
            raise ConfigurationError("grid.circle_nodes", "at least 8 circle nodes are required")
        if min(v["grid.sphere"]) < 3:
            raise ConfigurationError("grid.sphere", "sphere grid needs at least 3 nodes per axis")
        grid = GridConfig(attitude=v["grid.attitude"], velocity=v["grid.velocity"],
                          velocity_sigmas=v["grid.velocity_sigmas"], beta_rule=v["grid.beta_rule"],
                          sphere=v["grid.sphere"], circle_nodes=v["grid.circle_nodes"],
                          track_mean=v["grid.track_mean"])
        if v["spectrum.bandlimit"] < 0:
            raise ConfigurationError("spectrum.bandlimit", "must be non-negative")

        covariance = (np.reshape(v["initial.covariance"], (3, 3)) if v["initial.covariance"]
                      else v["initial.sigma"] ** 2 * np.eye(3))
        initial = InitialDensityConfig(
            von_mises=self._section("initial.kappa", lambda: VonMisesSo3Params(
                mean=self._rotation("initial.mean_attitude_euler", v), kappa=v["initial.kappa"])),
            gaussian=self._section("initial.covariance", lambda: GaussianParams(
                mean=v["initial.mean_omega"], covariance=covariance)))

        if v["measurement.sigma_direction"] <= 0.0 or v["measurement.sigma_omega"] <= 0.0:
            raise ConfigurationError("measurement.sigma_direction", "noise standard deviations must be positive")
        if np.linalg.norm(v["measurement.reference"]) == 0.0:
            raise ConfigurationError("measurement.reference", "reference direction must be non-zero")
        measurement = MeasurementConfig(
            model=MeasurementModel.isotropic(v["measurement.reference"], v["measurement.sigma_direction"],
                                             v["measurement.sigma_omega"]),
            times=v["measurement.times"], seed=v["measurement.seed"])

        if v["trajectory.duration"] < 0.0:
            raise ConfigurationError("trajectory.duration", "must be non-negative")
        trajectory = TrajectoryConfig(
            initial_state=RigidBodyState(R=self._rotation("trajectory.initial_attitude_euler", v),
                                         omega=v["trajectory.initial_omega"]),
            duration=v["trajectory.duration"])

        return RunConfig(pendulum=pendulum, step=step, grid=grid, bandlimit=v["spectrum.bandlimit"],
                         initial=initial, measurement=measurement, trajectory=trajectory,
                         output_dir=Path(v["output.dir"]), snapshot_times=v["run.snapshot_times"],
                         workers=v["run.workers"], chunk_size=v["run.chunk_size"],
                         renormalize=v["run.renormalize"], values=dict(self.values))

    def _rotation(self, key: str, v: Dict[str, Any]) -> np.ndarray:
        return self._section(key, lambda: euler313_to_rotation(Euler313(*v[key])))


def _render(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple, np.ndarray)):
        return ", ".join(repr(float(x)) if isinstance(x, float) else str(x) for x in value)
    return str(value)


def load_run_config(config_file: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None,
                    environ: Optional[Mapping[str, str]] = None) -> RunConfig:
    """Validated RunConfig from defaults, file, environment and overrides, in that order."""
    return Settings(config_file=config_file, overrides=overrides, environ=environ).run
