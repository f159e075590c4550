"""Quadrature rules on SO(3) in 3-1-3 Euler angles.

Nodes form a closed equiangular grid: alpha_j = gamma_j = 2 pi j / (N - 1)
and beta_j = pi j / (N - 1), with odd N per axis. Two rules share the grid:

* ``simpson``: composite Simpson in alpha, beta and gamma with the Haar factor.
* ``exact``: trapezoid in the periodic angles and Clenshaw-Curtis weights in
  cos(beta), exact for band-limited integrands up to the aliasing guard.

Per-node weights are normalized to sum to 1; the unnormalized Haar sum is
kept in ``raw_total`` as a quadrature diagnostic.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import simpson, trapezoid

from src.core.exceptions import BandlimitTooHighForGrid, ValidationError
from src.geometry.so3 import euler_matrices, haar_weight

logger = logging.getLogger(__name__)

BETA_RULES = ("simpson", "exact")


def simpson_weights(n: int, length: float) -> NDArray[np.float64]:
    """Composite Simpson weights for n (odd) equispaced nodes spanning length."""
    if n < 3 or n % 2 == 0:
        raise ValidationError(f"Simpson's rule needs an odd node count of at least 3, got {n}")
    return simpson(np.eye(n), dx=length / (n - 1), axis=-1)


def trapezoid_weights(n: int, length: float) -> NDArray[np.float64]:
    return trapezoid(np.eye(n), dx=length / (n - 1), axis=-1)


def clenshaw_curtis_weights(n: int) -> NDArray[np.float64]:
    """Weights for int_{-1}^{1} g(x) dx on the nodes x_j = cos(j pi / (n - 1))."""
    order = n - 1
    if order < 1:
        raise ValidationError(f"Clenshaw-Curtis needs at least 2 nodes, got {n}")
    j = np.arange(n)
    weights = np.empty(n)
    for idx in j:
        total = 1.0
        for k in range(1, order // 2 + 1):
            b = 1.0 if 2 * k == order else 2.0
            total -= b / (4.0 * k * k - 1.0) * np.cos(2.0 * k * idx * np.pi / order)
        c = 1.0 if idx in (0, order) else 2.0
        weights[idx] = c / order * total
    return weights


@dataclass(frozen=True, eq=False)
class So3Quadrature:
    """Separable quadrature grid on SO(3).

    ``w_alpha``, ``w_beta`` and ``w_gamma`` are the per-axis factors of the
    unnormalized weights (``w_beta`` includes sin(beta) / (8 pi^2) for the
    Simpson rule); ``weights`` is their normalized outer product.
    """
    rule: str
    alpha: NDArray[np.float64]
    beta: NDArray[np.float64]
    gamma: NDArray[np.float64]
    w_alpha: NDArray[np.float64]
    w_beta: NDArray[np.float64]
    w_gamma: NDArray[np.float64]
    raw_total: float

    @classmethod
    def build(cls, n_alpha: int, n_beta: int, n_gamma: int, rule: str = "simpson") -> "So3Quadrature":
        for name, n in (("alpha", n_alpha), ("beta", n_beta), ("gamma", n_gamma)):
            if n < 3 or n % 2 == 0:
                raise ValidationError(f"node count along {name} must be odd and at least 3, got {n}")
        if rule not in BETA_RULES:
            raise ValidationError(f"unknown quadrature rule '{rule}', expected one of {BETA_RULES}")

        two_pi = 2.0 * np.pi
        alpha = np.linspace(0.0, two_pi, n_alpha)
        beta = np.linspace(0.0, np.pi, n_beta)
        gamma = np.linspace(0.0, two_pi, n_gamma)

        if rule == "simpson":
            w_alpha = simpson_weights(n_alpha, two_pi)
            w_gamma = simpson_weights(n_gamma, two_pi)
            w_beta = simpson_weights(n_beta, np.pi) * haar_weight(beta)
        else:
            w_alpha = trapezoid_weights(n_alpha, two_pi)
            w_gamma = trapezoid_weights(n_gamma, two_pi)
            w_beta = clenshaw_curtis_weights(n_beta) / (8.0 * np.pi ** 2)

        raw_total = float(w_alpha.sum() * w_beta.sum() * w_gamma.sum())
        logger.debug(f"Built {rule} SO(3) quadrature {n_alpha}x{n_beta}x{n_gamma}, "
                     f"raw Haar total {raw_total:.12f}")
        return cls(rule, alpha, beta, gamma, w_alpha, w_beta, w_gamma, raw_total)

    @property
    def shape(self) -> Tuple[int, int, int]:
        return (len(self.alpha), len(self.beta), len(self.gamma))

    @property
    def weights(self) -> NDArray[np.float64]:
        w = self.w_alpha[:, None, None] * self.w_beta[None, :, None] * self.w_gamma[None, None, :]
        return w / self.raw_total

    @property
    def quadrature_defect(self) -> float:
        """|raw Haar total - 1|, the integration error for the constant function."""
        return abs(self.raw_total - 1.0)

    def rotations(self) -> NDArray[np.float64]:
        """All node rotations, shape (N_alpha, N_beta, N_gamma, 3, 3)."""
        a, b, g = np.meshgrid(self.alpha, self.beta, self.gamma, indexing="ij")
        return euler_matrices(a, b, g)

    def integrate(self, values) -> NDArray[np.float64]:
        """Haar integral over the three leading axes of values."""
        values = np.asarray(values)
        return np.tensordot(self.weights, values, axes=([0, 1, 2], [0, 1, 2]))

    def check_bandlimit(self, bandlimit: int) -> None:
        """Aliasing guard for transforms of bandlimit L.

        Raises:
            BandlimitTooHighForGrid: If N_beta < 2L + 1.
        """
        n_alpha, n_beta, n_gamma = self.shape
        if n_beta < 2 * bandlimit + 1:
            raise BandlimitTooHighForGrid(bandlimit, n_beta)
        for name, n in (("alpha", n_alpha), ("gamma", n_gamma)):
            exact_below = (n - 1) / 2 if self.rule == "simpson" else n - 1
            if 2 * bandlimit >= exact_below:
                logger.warning(f"{self.rule} rule along {name} with {n} nodes is not exact for "
                               f"frequency {2 * bandlimit}; spectra carry quadrature error")
        if self.rule == "simpson" and bandlimit > 0:
            logger.warning("Simpson beta rule is not exact for band-limited integrands; "
                           "use the 'exact' rule for round-trip accuracy")
