"""Initial densities: matrix von Mises attitude factor times a Gaussian in angular velocity."""

import logging
from typing import Sequence, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy.special import ndtr
from scipy.stats import multivariate_normal

from src.core.exceptions import BoxTooSmall
from src.core.models import GaussianParams, VonMisesSo3Params
from src.density.grids import DensityGrid, VelocityGrid
from src.harmonic.quadrature import So3Quadrature

logger = logging.getLogger(__name__)

TAIL_MASS_LIMIT = 1e-6


def von_mises_factor(R, vm: VonMisesSo3Params) -> NDArray[np.float64]:
    """exp(kappa / 2 (tr(R_mean^T R) - 1)) for rotation(s) R."""
    R = np.asarray(R, dtype=np.float64)
    trace = np.einsum("ij,...ij->...", vm.mean, R)
    return np.exp(0.5 * vm.kappa * (trace - 1.0))


def gaussian_factor(omega, gp: GaussianParams) -> NDArray[np.float64]:
    """Unnormalized exp(-1/2 (W - mean)^T Sigma^-1 (W - mean))."""
    dist = multivariate_normal(mean=gp.mean, cov=gp.covariance)
    log_norm = 0.5 * np.linalg.slogdet(2.0 * np.pi * gp.covariance)[1]
    return np.exp(dist.logpdf(omega) + log_norm)


def gaussian_tail_mass(gp: GaussianParams, velocity: VelocityGrid) -> float:
    """Union bound on the Gaussian mass outside the velocity box, per-axis normal tails."""
    sigmas = gp.sigmas
    below = ndtr((velocity.lower - gp.mean) / sigmas)
    above = ndtr(-(velocity.upper - gp.mean) / sigmas)
    return float(min(np.sum(below + above), 1.0))


def default_velocity_grid(gp: GaussianParams, counts: Sequence[int], n_sigmas: float = 6.0) -> VelocityGrid:
    """Box mean +- n_sigmas standard deviations per axis."""
    return VelocityGrid.centered(gp.mean, n_sigmas * gp.sigmas, counts)


def init_density(vm: VonMisesSo3Params, gp: GaussianParams, quadrature: So3Quadrature,
                 velocity: VelocityGrid) -> Tuple[DensityGrid, float]:
    """Sample and normalize the product density on the grid.

    Returns:
        The normalized DensityGrid and the scaling constant c that makes the
        quadrature integral of c * exp(...) * exp(...) equal to 1.

    Raises:
        BoxTooSmall: If the Gaussian mass outside the velocity box exceeds 1e-6.
    """
    tail = gaussian_tail_mass(gp, velocity)
    if tail > TAIL_MASS_LIMIT:
        logger.error(f"Velocity box [{velocity.lower}, {velocity.upper}] truncates {tail:.3e} of the Gaussian")
        raise BoxTooSmall(tail)

    attitude = von_mises_factor(quadrature.rotations(), vm)
    nodes = velocity.nodes()
    speed = gaussian_factor(nodes.reshape(-1, 3), gp).reshape(velocity.shape)
    values = attitude[:, :, :, None, None, None] * speed[None, None, None, :, :, :]

    attitude_mass = float(np.sum(quadrature.weights * attitude))
    velocity_mass = float(np.sum(velocity.node_weights * speed))
    c = 1.0 / (attitude_mass * velocity_mass)
    density = DensityGrid(quadrature, velocity, values * c, k=0, normalizer=c)
    logger.info(f"Initialized density kappa={vm.kappa} on {quadrature.shape} x {velocity.shape} nodes, "
                f"c={c:.6e}, Haar quadrature defect {quadrature.quadrature_defect:.2e}")
    return density, c
