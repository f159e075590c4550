"""Parameter and state dataclasses shared by the propagator modules.

Rotations are plain ``(3, 3)`` float arrays (or stacks ``(..., 3, 3)``) and
vectors are ``(3,)`` arrays; the dataclasses below validate them once on
construction and store read-only copies.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from src.core.exceptions import NotARotation, NotUnit, ValidationError

Vec3 = NDArray[np.float64]
RotationMatrix = NDArray[np.float64]

ROTATION_TOLERANCE = 1e-12


def _frozen_array(value, shape, name: str) -> NDArray[np.float64]:
    arr = np.array(value, dtype=np.float64)
    if arr.shape != shape:
        raise ValidationError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


def _check_spd(matrix: NDArray[np.float64], name: str) -> None:
    if not np.allclose(matrix, matrix.T, rtol=0.0, atol=1e-12):
        raise ValidationError(f"{name} must be symmetric")
    if np.min(np.linalg.eigvalsh(matrix)) <= 0.0:
        raise ValidationError(f"{name} must be positive-definite")


def rotation_defect(R: RotationMatrix) -> float:
    """Largest of ||R^T R - I||_F and |det R - 1|."""
    R = np.asarray(R, dtype=np.float64)
    ortho = np.linalg.norm(np.swapaxes(R, -1, -2) @ R - np.eye(3), axis=(-2, -1))
    det = np.abs(np.linalg.det(R) - 1.0)
    return float(np.max(np.maximum(ortho, det)))


@dataclass(frozen=True)
class Euler313:
    """3-1-3 Euler angles, R = Rz(alpha) Rx(beta) Rz(gamma)."""
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        two_pi = 2.0 * np.pi
        if not (0.0 <= self.alpha < two_pi and 0.0 <= self.gamma < two_pi):
            raise ValidationError(f"alpha, gamma must lie in [0, 2pi), got {self.alpha}, {self.gamma}")
        if not 0.0 <= self.beta <= np.pi:
            raise ValidationError(f"beta must lie in [0, pi], got {self.beta}")

    def as_tuple(self):
        return (self.alpha, self.beta, self.gamma)


@dataclass(frozen=True, eq=False)
class PendulumParams:
    """Physical parameters of the 3D pendulum. ``J_d`` is always derived from ``J``."""
    J: NDArray[np.float64]
    m: float
    rho: Vec3
    g: float

    def __post_init__(self):
        object.__setattr__(self, "J", _frozen_array(self.J, (3, 3), "J"))
        object.__setattr__(self, "rho", _frozen_array(self.rho, (3,), "rho"))
        _check_spd(self.J, "J")
        if self.m <= 0.0:
            raise ValidationError(f"mass must be positive, got {self.m}")

    @property
    def J_d(self) -> NDArray[np.float64]:
        return 0.5 * np.trace(self.J) * np.eye(3) - self.J

    @property
    def J_inv(self) -> NDArray[np.float64]:
        return np.linalg.inv(self.J)

    @classmethod
    def default(cls) -> "PendulumParams":
        return cls(J=np.diag([0.13, 0.28, 0.17]), m=1.0, rho=[0.0, 0.0, 0.3], g=9.81)


@dataclass(frozen=True)
class StepConfig:
    h: float = 0.01
    newton_tol: float = 1e-14
    newton_max_iter: int = 50

    def __post_init__(self):
        if self.h <= 0.0:
            raise ValidationError(f"step size h must be positive, got {self.h}")
        if self.newton_tol <= 0.0:
            raise ValidationError(f"newton_tol must be positive, got {self.newton_tol}")
        if self.newton_max_iter < 1:
            raise ValidationError(f"newton_max_iter must be at least 1, got {self.newton_max_iter}")


@dataclass(frozen=True, eq=False)
class RigidBodyState:
    """Attitude R (body to inertial) and body angular velocity omega (rad/s)."""
    R: RotationMatrix
    omega: Vec3

    def __post_init__(self):
        object.__setattr__(self, "R", _frozen_array(self.R, (3, 3), "R"))
        object.__setattr__(self, "omega", _frozen_array(self.omega, (3,), "omega"))
        defect = rotation_defect(self.R)
        if defect > 1e-9:
            raise NotARotation(defect)

    def distance(self, other: "RigidBodyState") -> float:
        """Max-norm distance between two states (matrix entries and velocity)."""
        return float(max(np.max(np.abs(self.R - other.R)), np.max(np.abs(self.omega - other.omega))))


@dataclass(frozen=True, eq=False)
class VonMisesSo3Params:
    """Matrix von Mises attitude factor exp(kappa/2 (tr(R_mean^T R) - 1))."""
    mean: RotationMatrix
    kappa: float

    def __post_init__(self):
        object.__setattr__(self, "mean", _frozen_array(self.mean, (3, 3), "mean rotation"))
        if rotation_defect(self.mean) > 1e-9:
            raise NotARotation(rotation_defect(self.mean))
        if self.kappa <= 0.0:
            raise ValidationError(f"kappa must be positive, got {self.kappa}")


@dataclass(frozen=True, eq=False)
class GaussianParams:
    """Gaussian angular-velocity factor with mean (rad/s) and covariance (rad^2/s^2)."""
    mean: Vec3
    covariance: NDArray[np.float64]

    def __post_init__(self):
        object.__setattr__(self, "mean", _frozen_array(self.mean, (3,), "mean angular velocity"))
        object.__setattr__(self, "covariance", _frozen_array(self.covariance, (3, 3), "covariance"))
        _check_spd(self.covariance, "covariance")

    @property
    def sigmas(self) -> Vec3:
        return np.sqrt(np.diag(self.covariance))


@dataclass(frozen=True, eq=False)
class MeasurementModel:
    """Direction-to-known-object plus angular-velocity sensor, H(R, W) = [R^T a; W]."""
    reference: Vec3
    direction_covariance: NDArray[np.float64]
    omega_covariance: NDArray[np.float64]

    def __post_init__(self):
        object.__setattr__(self, "reference", _frozen_array(self.reference, (3,), "reference direction"))
        norm = float(np.linalg.norm(self.reference))
        if abs(norm - 1.0) > 1e-12:
            raise NotUnit(norm)
        object.__setattr__(self, "direction_covariance",
                           _frozen_array(self.direction_covariance, (3, 3), "direction covariance"))
        object.__setattr__(self, "omega_covariance",
                           _frozen_array(self.omega_covariance, (3, 3), "omega covariance"))
        _check_spd(self.direction_covariance, "direction covariance")
        _check_spd(self.omega_covariance, "omega covariance")

    @classmethod
    def isotropic(cls, reference, sigma_direction: float, sigma_omega: float) -> "MeasurementModel":
        ref = np.asarray(reference, dtype=np.float64)
        return cls(reference=ref / np.linalg.norm(ref),
                   direction_covariance=sigma_direction ** 2 * np.eye(3),
                   omega_covariance=sigma_omega ** 2 * np.eye(3))


@dataclass(frozen=True, eq=False)
class Measurement:
    """Stacked observation z = [direction; angular velocity] taken at step index k."""
    z: NDArray[np.float64]
    k: int
    label: Optional[str] = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "z", _frozen_array(self.z, (6,), "measurement"))
        if self.k < 0:
            raise ValidationError(f"measurement step index must be non-negative, got {self.k}")
