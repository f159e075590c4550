"""Attitude marginals and per-axis sphere marginals.

The sphere marginal of body axis i is the density of the direction R e_i:

    p_i(r) = 1/(4 pi) * 1/(2 pi) int p_R(R_i(r) exp(theta hat(e_i))) d theta

where R_i(r) is any rotation with R_i(r) e_i = r. With this normalization a
uniform attitude gives p_i = 1/(4 pi) and p_i integrates to 1 over the
unit sphere.
"""

import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from src.core.exceptions import ValidationError
from src.density.grids import DensityGrid
from src.density.interpolation import AttitudeInterpolator
from src.geometry.so3 import E, coset_representatives, exp_so3
from src.harmonic.quadrature import So3Quadrature, simpson_weights

logger = logging.getLogger(__name__)

FOUR_PI = 4.0 * np.pi
MIN_CIRCLE_NODES = 8


@dataclass(frozen=True, eq=False)
class AttitudeMarginal:
    """Velocity-integrated density at every attitude node."""
    quadrature: So3Quadrature
    values: NDArray[np.float64]

    def total_mass(self) -> float:
        return float(np.sum(self.quadrature.weights * self.values))


@dataclass(frozen=True, eq=False)
class SphereGrid:
    """Closed equiangular colatitude x longitude grid with Simpson area weights."""
    colatitude: NDArray[np.float64]
    longitude: NDArray[np.float64]

    @classmethod
    def build(cls, n_lat: int = 65, n_lon: int = 129) -> "SphereGrid":
        return cls(np.linspace(0.0, np.pi, n_lat), np.linspace(0.0, 2.0 * np.pi, n_lon))

    @property
    def shape(self):
        return (len(self.colatitude), len(self.longitude))

    def directions(self) -> NDArray[np.float64]:
        """Unit vectors at every node, shape (n_lat, n_lon, 3)."""
        theta, phi = np.meshgrid(self.colatitude, self.longitude, indexing="ij")
        return np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=-1)

    @property
    def area_weights(self) -> NDArray[np.float64]:
        w_lat = simpson_weights(len(self.colatitude), np.pi) * np.sin(self.colatitude)
        w_lon = simpson_weights(len(self.longitude), 2.0 * np.pi)
        return w_lat[:, None] * w_lon[None, :]


@dataclass(frozen=True, eq=False)
class SphereMarginal:
    axis: int
    grid: SphereGrid
    values: NDArray[np.float64]

    def integral(self) -> float:
        return float(np.sum(self.grid.area_weights * self.values))


def attitude_marginal(d: DensityGrid) -> AttitudeMarginal:
    """Integrate the velocity out of a joint density."""
    return AttitudeMarginal(d.quadrature, np.maximum(d.attitude_values(), 0.0))


def sphere_marginal_at(a: AttitudeMarginal, axis: int, directions, n_theta: int = 64) -> NDArray[np.float64]:
    """Sphere marginal of body axis ``axis`` (1..3) at arbitrary unit directions (N, 3)."""
    if n_theta < MIN_CIRCLE_NODES:
        raise ValidationError(f"circle quadrature needs at least {MIN_CIRCLE_NODES} nodes, got {n_theta}")
    directions = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
    base = coset_representatives(axis, directions)
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    circle = exp_so3(theta[:, None] * E[axis - 1][None, :])
    rotations = np.einsum("nij,tjk->ntik", base, circle)
    interpolator = AttitudeInterpolator(a.quadrature, a.values)
    values = interpolator(rotations)
    return np.maximum(values.mean(axis=1), 0.0) / FOUR_PI


def sphere_marginal(a: AttitudeMarginal, axis: int, grid: SphereGrid, n_theta: int = 64) -> SphereMarginal:
    """Sphere marginal of one body axis on a latitude/longitude grid."""
    directions = grid.directions().reshape(-1, 3)
    values = sphere_marginal_at(a, axis, directions, n_theta).reshape(grid.shape)
    marginal = SphereMarginal(axis, grid, values)
    logger.debug(f"Sphere marginal axis {axis} on {grid.shape} nodes integrates to {marginal.integral():.6f}")
    return marginal


def mean_direction(s: SphereMarginal) -> NDArray[np.float64]:
    """Mass-normalized first moment of the marginal (a vector of length <= 1)."""
    w = s.grid.area_weights * s.values
    return np.tensordot(w, s.grid.directions(), axes=([0, 1], [0, 1])) / np.sum(w)


def circular_variance(s: SphereMarginal) -> float:
    """1 - |mean resultant|: 0 for a point mass, 1 for a uniform marginal."""
    return float(1.0 - np.linalg.norm(mean_direction(s)))
