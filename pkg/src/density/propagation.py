"""Density propagation by pull-back along the backward discrete flow.

Along a Hamiltonian flow the density is constant on trajectories, so the
density after k steps is p_k(R, W) = p_0(F^-k(R, W)). Each output node is
mapped backward with the inverse integrator and the initial grid is
interpolated there.
"""

import logging
import weakref
from typing import Optional, Tuple

import numpy as np
from numpy.typing import NDArray

from src.core.exceptions import OutOfSupport
from src.core.models import PendulumParams, StepConfig
from src.density.grids import DensityGrid, VelocityGrid
from src.density.interpolation import DensityInterpolator
from src.dynamics.integrator import backward_flow_batch, flow_batch
from src.utils.logging_config import ProgressLogger
from src.utils.parallel import DEFAULT_CHUNK_SIZE, chunked_map

logger = logging.getLogger(__name__)

TRACKING_SAMPLES = 4096

_interpolators: "weakref.WeakKeyDictionary[DensityGrid, DensityInterpolator]" = weakref.WeakKeyDictionary()


def interpolator_for(d: DensityGrid) -> DensityInterpolator:
    """Interpolator of d, built once and kept for as long as d is alive."""
    interpolator = _interpolators.get(d)
    if interpolator is None:
        interpolator = _interpolators[d] = DensityInterpolator(d)
    return interpolator


def evaluate(d: DensityGrid, R, omega) -> float:
    """Interpolated density at a single state.

    Raises:
        OutOfSupport: If omega lies outside the velocity box.
    """
    values, inside = interpolator_for(d)(np.asarray(R)[None], np.asarray(omega)[None])
    if not inside[0]:
        raise OutOfSupport(tuple(np.asarray(omega, dtype=float)))
    return float(values[0])


def pullback(d: DensityGrid, R, omega, p: PendulumParams, c: StepConfig,
             k_steps: int) -> Tuple[NDArray[np.float64], NDArray[np.bool_]]:
    """Values of the k-step propagated density at arbitrary states.

    Returns:
        (values, inside): values of d at the backward images (0 where the image
        leaves the velocity box) and the mask of images inside the box.
    """
    R_back, omega_back = backward_flow_batch(np.asarray(R).reshape(-1, 3, 3),
                                             np.asarray(omega).reshape(-1, 3), p, c, k_steps)
    values, inside = interpolator_for(d)(R_back, omega_back)
    return np.where(inside, values, 0.0), inside


def propagate(d: DensityGrid, p: PendulumParams, c: StepConfig, k_steps: int, workers: int = 1,
              chunk_size: int = DEFAULT_CHUNK_SIZE, target_velocity: Optional[VelocityGrid] = None,
              renormalize: bool = False, progress: Optional[ProgressLogger] = None) -> DensityGrid:
    """Propagate a density k_steps forward.

    Args:
        d: Density at step index d.k.
        p: Pendulum parameters.
        c: Integrator settings.
        k_steps: Number of LGVI steps (>= 0).
        workers: Worker threads; the output does not depend on this.
        chunk_size: Nodes per work chunk.
        target_velocity: Velocity grid of the output (defaults to d's grid).
        renormalize: Rescale the result to unit mass after propagation.
        progress: Optional progress logger, updated per chunk.

    Returns:
        DensityGrid at step d.k + k_steps carrying the escaped-mass estimate.
    """
    if k_steps < 0:
        raise ValueError(f"number of steps must be non-negative, got {k_steps}")
    target = target_velocity or d.velocity
    if k_steps == 0 and target is d.velocity:
        return d

    interpolator = interpolator_for(d)
    rotations = d.quadrature.rotations().reshape(-1, 3, 3)
    omegas = target.nodes().reshape(-1, 3)
    n_vel = len(omegas)
    weights = (d.quadrature.weights.reshape(-1, 1) * target.node_weights.reshape(1, -1)).ravel()
    n_nodes = len(rotations) * n_vel

    def pull_chunk(chunk: range):
        idx = np.arange(chunk.start, chunk.stop)
        att, vel = np.divmod(idx, n_vel)
        R_back, omega_back = backward_flow_batch(rotations[att], omegas[vel], p, c, k_steps)
        values, inside = interpolator(R_back, omega_back)
        escaped = float(np.sum(weights[idx][~inside] * values[~inside]))
        return np.where(inside, values, 0.0), escaped

    logger.info(f"Propagating {n_nodes} nodes by {k_steps} steps (h={c.h}) on {workers} worker(s)")
    parts = chunked_map(pull_chunk, n_nodes, chunk_size, workers, progress, label="pullback")
    values = np.concatenate([part[0] for part in parts]).reshape(d.quadrature.shape + target.shape)
    escaped = sum(part[1] for part in parts)

    result = d.with_values(values, k=d.k + k_steps, escaped_mass=escaped, velocity=target)
    mass = result.total_mass()
    logger.info(f"Propagated to step {result.k}: mass {mass:.6f}, escaped mass {escaped:.3e}")
    if escaped > 1e-3:
        logger.warning(f"Escaped mass {escaped:.3e} exceeds 1e-3; consider a wider velocity box")
    if renormalize:
        result = result.normalized()
        logger.info("Renormalized propagated density to unit mass")
    return result


def tracked_velocity_grid(d: DensityGrid, p: PendulumParams, c: StepConfig, k_steps: int, n_sigmas: float,
                          n_samples: int = TRACKING_SAMPLES, seed: int = 0) -> VelocityGrid:
    """Velocity box for step d.k + k_steps that follows the flowed density.

    Grid nodes drawn with probability proportional to their quadrature mass
    are flowed forward. The box is centred on their mean angular velocity and
    each half-width is the larger of d's and n_sigmas sample standard
    deviations, so a density that spreads in velocity stays inside the box.
    The node counts of d's box are kept.
    """
    if k_steps == 0:
        return d.velocity
    mass = (d.node_weights * d.values).ravel()
    picks = np.random.default_rng(seed).choice(mass.size, size=n_samples, p=mass / mass.sum())
    att, vel = np.divmod(picks, int(np.prod(d.velocity.shape)))
    R0 = d.quadrature.rotations().reshape(-1, 3, 3)[att]
    omega0 = d.velocity.nodes().reshape(-1, 3)[vel]
    _, omega = flow_batch(R0, omega0, p, c, k_steps)

    center = omega.mean(axis=0)
    half_widths = np.maximum(d.velocity.half_widths, n_sigmas * omega.std(axis=0))
    grid = VelocityGrid.centered(center, half_widths, d.velocity.shape)
    uncovered = 1.0 - float(np.mean(grid.contains(omega)))
    logger.debug(f"Velocity box for step {d.k + k_steps}: centre {np.round(center, 4)}, "
                 f"half-widths {np.round(half_widths, 4)}, {uncovered:.2%} of samples outside")
    return grid
