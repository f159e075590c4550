"""Bayesian measurement updates on propagated densities.

Measurements are z = H(R, W) + v with H(R, W) = [R^T a; W] and Gaussian v
with block-diagonal covariance. The posterior at a measurement epoch is the
node-wise product of the propagated prior and the likelihood, normalized by
the quadrature evidence c.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import block_diag
from scipy.stats import multivariate_normal

from src.core.exceptions import DegenerateUpdate, ValidationError
from src.core.models import Measurement, MeasurementModel, PendulumParams, RigidBodyState, StepConfig
from src.density.grids import DensityGrid
from src.density.propagation import propagate
from src.dynamics.integrator import flow
from src.utils.logging_config import create_progress_logger
from src.utils.parallel import DEFAULT_CHUNK_SIZE

logger = logging.getLogger(__name__)

MIN_EVIDENCE = 1e-300


@dataclass(frozen=True, eq=False)
class UpdateResult:
    density: DensityGrid
    evidence: float
    log_evidence: float


@dataclass(frozen=True, eq=False)
class EstimationSnapshot:
    """Density after the epoch at step ``k``; evidence is None for pure propagation."""
    k: int
    density: DensityGrid
    evidence: Optional[float] = None
    log_evidence: Optional[float] = None
    label: Optional[str] = None


def measurement_function(R, omega, model: MeasurementModel) -> NDArray[np.float64]:
    """H(R, W) = [R^T a; W], shape (..., 6)."""
    R = np.asarray(R, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.float64)
    direction = np.einsum("...ij,i->...j", R, model.reference)
    return np.concatenate([direction, np.broadcast_to(omega, direction.shape)], axis=-1)


def noise_covariance(model: MeasurementModel) -> NDArray[np.float64]:
    return block_diag(model.direction_covariance, model.omega_covariance)


def likelihood(model: MeasurementModel, z: Measurement, R, omega) -> float:
    """Gaussian density of z - H(R, W) under the block covariance."""
    residual = z.z - measurement_function(R, omega, model)
    return float(multivariate_normal(mean=np.zeros(6), cov=noise_covariance(model)).pdf(residual))


def log_likelihood_grid(model: MeasurementModel, z: Measurement, d: DensityGrid) -> NDArray[np.float64]:
    """Log-likelihood at every node of d.

    The block-diagonal noise factors into a direction term on the attitude
    nodes and an angular-velocity term on the velocity nodes.
    """
    rotations = d.quadrature.rotations()
    predicted = np.einsum("...ij,i->...j", rotations, model.reference)
    direction = multivariate_normal(mean=z.z[:3], cov=model.direction_covariance).logpdf(predicted)
    speed = multivariate_normal(mean=z.z[3:], cov=model.omega_covariance).logpdf(d.velocity.nodes())
    direction = np.reshape(direction, d.quadrature.shape)
    speed = np.reshape(speed, d.velocity.shape)
    return direction[:, :, :, None, None, None] + speed[None, None, None, :, :, :]


def update_with_log_likelihood(prior: DensityGrid, log_lik) -> UpdateResult:
    """Multiply the prior by exp(log_lik) node-wise and normalize by the quadrature evidence.

    Raises:
        DegenerateUpdate: If the evidence is below 1e-300.
    """
    log_lik = np.asarray(log_lik, dtype=np.float64)
    shift = float(np.max(log_lik))
    scaled = prior.values * np.exp(log_lik - shift)
    scaled_evidence = float(np.sum(prior.node_weights * scaled))
    if scaled_evidence <= 0.0 or not np.isfinite(shift):
        raise DegenerateUpdate(0.0)
    log_evidence = np.log(scaled_evidence) + shift
    evidence = float(np.exp(log_evidence))
    if log_evidence < np.log(MIN_EVIDENCE):
        logger.error(f"Measurement inconsistent with prior support (log evidence {log_evidence:.3f})")
        raise DegenerateUpdate(evidence)
    posterior = prior.with_values(scaled / scaled_evidence, escaped_mass=prior.escaped_mass)
    return UpdateResult(posterior, evidence, float(log_evidence))


def bayes_update(prior: DensityGrid, model: MeasurementModel, z: Measurement) -> UpdateResult:
    """Posterior density for one measurement; the evidence c is returned alongside."""
    result = update_with_log_likelihood(prior, log_likelihood_grid(model, z, prior))
    logger.info(f"Bayes update at step {prior.k}: evidence {result.evidence:.6e} "
                f"(log {result.log_evidence:.4f})")
    return result


def estimate_cycle(prior: DensityGrid, p: PendulumParams, c: StepConfig, model: MeasurementModel,
                   measurements: Sequence[Measurement], horizon: Optional[int] = None,
                   workers: int = 1, chunk_size: int = DEFAULT_CHUNK_SIZE,
                   recenter: bool = False) -> List[EstimationSnapshot]:
    """Alternate propagation and Bayes updates over time-ordered measurements.

    Args:
        prior: Density at step prior.k.
        p: Pendulum parameters.
        c: Integrator settings.
        model: Measurement model.
        measurements: Measurements with non-decreasing step indices >= prior.k.
        horizon: Optional final step index; the density is propagated there
            without further updates after the last measurement.
        workers: Worker threads for propagation.
        chunk_size: Nodes per propagation chunk.
        recenter: Move the velocity box before each propagation so it is centred
            on the angular velocity of the current mode flowed forward.

    Returns:
        One snapshot per measurement epoch, plus one for the horizon if given.
    """
    steps = [m.k for m in measurements]
    if any(b < a for a, b in zip(steps, steps[1:])):
        raise ValidationError("measurements must be ordered by step index")
    if steps and steps[0] < prior.k:
        raise ValidationError(f"first measurement at step {steps[0]} precedes the prior at step {prior.k}")

    progress = create_progress_logger(__name__, total=max(len(measurements), 1), prefix="Estimation",
                                      unit="epochs")
    snapshots: List[EstimationSnapshot] = []
    current = prior
    for i, m in enumerate(measurements):
        current = _advance(current, p, c, m.k - current.k, workers, chunk_size, recenter)
        update = bayes_update(current, model, m)
        current = update.density
        snapshots.append(EstimationSnapshot(m.k, current, update.evidence, update.log_evidence, m.label))
        progress.update(i + 1, f"epoch k={m.k}")

    if horizon is not None and (not snapshots or horizon > current.k):
        if horizon < current.k:
            raise ValidationError(f"horizon {horizon} precedes the last epoch at step {current.k}")
        current = _advance(current, p, c, horizon - current.k, workers, chunk_size, recenter)
        snapshots.append(EstimationSnapshot(current.k, current))
    return snapshots


def _advance(d: DensityGrid, p: PendulumParams, c: StepConfig, k_steps: int, workers: int, chunk_size: int,
             recenter: bool) -> DensityGrid:
    target = None
    if recenter and k_steps > 0:
        mode = flow(posterior_mode(d), p, c, k_steps)
        target = d.velocity.recentered(mode.omega)
    return propagate(d, p, c, k_steps, workers=workers, chunk_size=chunk_size, target_velocity=target)


def posterior_mode(d: DensityGrid) -> RigidBodyState:
    """State at the node with the largest density value."""
    flat = int(np.argmax(d.values))
    a, b, g, x, y, z = np.unravel_index(flat, d.shape)
    R = d.quadrature.rotations()[a, b, g]
    omega = np.array([d.velocity.axes[0][x], d.velocity.axes[1][y], d.velocity.axes[2][z]])
    return RigidBodyState(R=R, omega=omega)


def simulate_measurements(truth: RigidBodyState, p: PendulumParams, c: StepConfig, model: MeasurementModel,
                          steps: Sequence[int], rng: Optional[np.random.Generator] = None) -> List[Measurement]:
    """Noisy measurements of a trajectory started at ``truth`` (step 0) at the given step indices."""
    rng = np.random.default_rng() if rng is None else rng
    cov = noise_covariance(model)
    measurements = []
    state, k = truth, 0
    for target in sorted(steps):
        state = flow(state, p, c, target - k)
        k = target
        clean = measurement_function(state.R, state.omega, model)
        measurements.append(Measurement(z=clean + rng.multivariate_normal(np.zeros(6), cov), k=target))
    return measurements
