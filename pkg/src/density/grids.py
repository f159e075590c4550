"""Velocity grids and sampled joint densities on SO(3) x R^3."""

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray

from src.core.exceptions import ValidationError
from src.harmonic.quadrature import So3Quadrature, simpson_weights

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class VelocityGrid:
    """Equispaced box [lower, upper] in angular velocity (rad/s) with Simpson weights per axis."""
    axes: Tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]
    weights: Tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]

    @classmethod
    def build(cls, lower: Sequence[float], upper: Sequence[float], counts: Sequence[int]) -> "VelocityGrid":
        if len(lower) != 3 or len(upper) != 3 or len(counts) != 3:
            raise ValidationError("velocity grid needs three bounds and three node counts")
        axes, weights = [], []
        for lo, hi, n in zip(lower, upper, counts):
            if hi <= lo:
                raise ValidationError(f"velocity box upper bound {hi} must exceed lower bound {lo}")
            axes.append(np.linspace(lo, hi, n))
            weights.append(simpson_weights(n, hi - lo))
        return cls(tuple(axes), tuple(weights))

    @classmethod
    def centered(cls, center: Sequence[float], half_widths: Sequence[float],
                 counts: Sequence[int]) -> "VelocityGrid":
        center = np.asarray(center, dtype=np.float64)
        half_widths = np.asarray(half_widths, dtype=np.float64)
        return cls.build(center - half_widths, center + half_widths, counts)

    @property
    def shape(self) -> Tuple[int, int, int]:
        return tuple(len(a) for a in self.axes)

    @property
    def lower(self) -> NDArray[np.float64]:
        return np.array([a[0] for a in self.axes])

    @property
    def upper(self) -> NDArray[np.float64]:
        return np.array([a[-1] for a in self.axes])

    @property
    def center(self) -> NDArray[np.float64]:
        return 0.5 * (self.lower + self.upper)

    @property
    def half_widths(self) -> NDArray[np.float64]:
        return 0.5 * (self.upper - self.lower)

    @property
    def spacing(self) -> NDArray[np.float64]:
        return np.array([a[1] - a[0] for a in self.axes])

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    @property
    def node_weights(self) -> NDArray[np.float64]:
        wx, wy, wz = self.weights
        return wx[:, None, None] * wy[None, :, None] * wz[None, None, :]

    def nodes(self) -> NDArray[np.float64]:
        """All velocity nodes, shape (Nx, Ny, Nz, 3)."""
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    def contains(self, omega) -> NDArray[np.bool_]:
        omega = np.asarray(omega, dtype=np.float64)
        return np.all((omega >= self.lower) & (omega <= self.upper), axis=-1)

    def integrate(self, values) -> NDArray[np.float64]:
        """Simpson integral over the three leading axes."""
        return np.tensordot(self.node_weights, np.asarray(values), axes=([0, 1, 2], [0, 1, 2]))

    def recentered(self, center: Sequence[float]) -> "VelocityGrid":
        """Same node counts and half-widths around a new center."""
        return VelocityGrid.centered(center, self.half_widths, self.shape)


@dataclass(frozen=True, eq=False)
class DensityGrid:
    """Joint density sampled on attitude x velocity nodes.

    ``values`` has shape (N_alpha, N_beta, N_gamma, Nx, Ny, Nz). ``k`` is the
    time-step index of the snapshot and ``escaped_mass`` the mass estimate
    lost when backward images left the velocity box.
    """
    quadrature: So3Quadrature
    velocity: VelocityGrid
    values: NDArray[np.float64]
    k: int = 0
    escaped_mass: float = 0.0
    normalizer: Optional[float] = field(default=None)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        expected = self.quadrature.shape + self.velocity.shape
        if values.shape != expected:
            raise ValidationError(f"density values have shape {values.shape}, expected {expected}")
        if np.any(values < 0.0):
            raise ValidationError(f"density has negative values (min {values.min():.3e})")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def shape(self):
        return self.values.shape

    @property
    def node_weights(self) -> NDArray[np.float64]:
        """Joint quadrature weights (normalized Haar x velocity Simpson), same shape as values."""
        return self.quadrature.weights[..., None, None, None] * self.velocity.node_weights

    def total_mass(self) -> float:
        return float(np.sum(self.node_weights * self.values))

    def normalized(self) -> "DensityGrid":
        """Copy scaled so that the quadrature integral is exactly 1."""
        mass = self.total_mass()
        if mass <= 0.0:
            raise ValidationError("cannot normalize a density with zero mass")
        return replace(self, values=self.values / mass)

    def attitude_values(self) -> NDArray[np.float64]:
        """Velocity integral at each attitude node, shape (N_alpha, N_beta, N_gamma)."""
        return np.tensordot(self.values, self.velocity.node_weights, axes=([3, 4, 5], [0, 1, 2]))

    def velocity_marginal(self) -> NDArray[np.float64]:
        """Haar integral at each velocity node, shape (Nx, Ny, Nz)."""
        return self.quadrature.integrate(self.values)

    def with_values(self, values, k: Optional[int] = None, escaped_mass: float = 0.0,
                    velocity: Optional[VelocityGrid] = None) -> "DensityGrid":
        return DensityGrid(self.quadrature, velocity or self.velocity, values,
                           self.k if k is None else k, escaped_mass, self.normalizer)

    def time(self, h: float) -> float:
        return self.k * h
