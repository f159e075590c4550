"""Multilinear interpolation of a DensityGrid at arbitrary states.

The grid is linear in (alpha, beta, gamma, Wx, Wy, Wz). The alpha and gamma
axes include the duplicate node at 2 pi, so interpolation wraps periodically
without padding; beta is clamped to [0, pi].
"""

import logging
from typing import Tuple

import numpy as np
from numpy.typing import NDArray
from scipy.interpolate import RegularGridInterpolator

from src.density.grids import DensityGrid
from src.geometry.so3 import TWO_PI, euler_angles

logger = logging.getLogger(__name__)


class DensityInterpolator:
    """Evaluates a density grid off its nodes; exact at nodes and non-negative everywhere."""

    def __init__(self, density: DensityGrid):
        q = density.quadrature
        points = (q.alpha, q.beta, q.gamma) + tuple(density.velocity.axes)
        self._lower = np.array([p[0] for p in points])
        self._upper = np.array([p[-1] for p in points])
        self._interpolator = RegularGridInterpolator(points, density.values, method="linear",
                                                     bounds_error=False, fill_value=None)

    def coordinates(self, R, omega) -> NDArray[np.float64]:
        """Six interpolation coordinates per state, shape (N, 6)."""
        R = np.asarray(R, dtype=np.float64).reshape(-1, 3, 3)
        omega = np.asarray(omega, dtype=np.float64).reshape(-1, 3)
        alpha, beta, gamma = euler_angles(R)
        return np.column_stack([alpha, beta, gamma, omega])

    def __call__(self, R, omega) -> Tuple[NDArray[np.float64], NDArray[np.bool_]]:
        """Interpolated values and an inside-the-velocity-box mask.

        States outside the box are evaluated at their image clamped into the
        box; callers decide what to do with them.
        """
        coords = self.coordinates(R, omega)
        inside = np.all((coords[:, 3:] >= self._lower[3:]) & (coords[:, 3:] <= self._upper[3:]), axis=-1)
        coords[:, 0] = np.mod(coords[:, 0], TWO_PI)
        coords[:, 2] = np.mod(coords[:, 2], TWO_PI)
        coords = np.clip(coords, self._lower, self._upper)
        values = np.maximum(self._interpolator(coords), 0.0)
        return values, inside


class AttitudeInterpolator:
    """Trilinear interpolation of a function sampled on the attitude nodes only."""

    def __init__(self, quadrature, values):
        points = (quadrature.alpha, quadrature.beta, quadrature.gamma)
        self._upper = np.array([p[-1] for p in points])
        self._interpolator = RegularGridInterpolator(points, np.asarray(values, dtype=np.float64),
                                                     method="linear", bounds_error=False, fill_value=None)

    def __call__(self, R) -> NDArray[np.float64]:
        R = np.asarray(R, dtype=np.float64)
        alpha, beta, gamma = euler_angles(R.reshape(-1, 3, 3))
        coords = np.column_stack([np.mod(alpha, TWO_PI), beta, np.mod(gamma, TWO_PI)])
        coords = np.clip(coords, 0.0, self._upper)
        return self._interpolator(coords).reshape(R.shape[:-2])
