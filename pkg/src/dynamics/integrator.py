"""Lie group variational integrator for the 3D pendulum.

One step maps (R_k, W_k) to (R_{k+1}, W_{k+1}):

    h hat(J W_k + h/2 M_k) = F_k J_d - J_d F_k^T
    R_{k+1} = R_k F_k
    J W_{k+1} = F_k^T J W_k + h/2 F_k^T M_k + h/2 M_{k+1}

The implicit equation for F_k is solved by Newton iteration in exponential
coordinates F = exp(f). With a = sin|f|/|f| and b = (1 - cos|f|)/|f|^2 its
vector form is

    a J f + b (f x J f) = h (J W_k + h/2 M_k)

so each iteration needs only elementwise arithmetic and a 3x3 solve by
cofactors. All solvers work on stacks of states; scalar helpers wrap a
single RigidBodyState.
"""

import logging
from typing import Optional, Tuple

import numpy as np
from numpy.typing import NDArray

from src.core.exceptions import NoConvergence
from src.core.models import PendulumParams, RigidBodyState, StepConfig
from src.dynamics.pendulum import gravity_moments
from src.geometry.so3 import exp_so3, hat, renormalize, rodrigues_coefficients, rodrigues_derivatives

logger = logging.getLogger(__name__)

SQRT2 = np.sqrt(2.0)


def _residual(f: NDArray[np.float64], target: NDArray[np.float64], J: NDArray[np.float64]):
    theta = np.linalg.norm(f, axis=-1)
    a, b = rodrigues_coefficients(theta)
    Jf = f @ J.T
    fxJf = np.cross(f, Jf)
    r = a[..., None] * Jf + b[..., None] * fxJf - target
    return r, theta, a, b, Jf, fxJf


def _newton_step(f, r, theta, a, b, Jf, fxJf, J: NDArray[np.float64]) -> NDArray[np.float64]:
    da, db = rodrigues_derivatives(theta)
    outer = da[..., None, None] * Jf[..., :, None] + db[..., None, None] * fxJf[..., :, None]
    jac = (outer * f[..., None, :] + a[..., None, None] * J
           + b[..., None, None] * (hat(f) @ J - hat(Jf)))
    rows = jac[..., 0, :], jac[..., 1, :], jac[..., 2, :]
    cof = np.cross(rows[1], rows[2]), np.cross(rows[2], rows[0]), np.cross(rows[0], rows[1])
    det = np.sum(rows[0] * cof[0], axis=-1)
    step = cof[0] * r[..., 0:1] + cof[1] * r[..., 1:2] + cof[2] * r[..., 2:3]
    return -step / det[..., None]


def solve_implicit_F_batch(a, p: PendulumParams, h: float, tol: float = 1e-14,
                           max_iter: int = 50) -> NDArray[np.float64]:
    """Solve h hat(a) = F J_d - J_d F^T for a stack of a vectors, shape (N, 3).

    Converged entries are frozen while the rest keep iterating, so every
    entry's result is independent of the batch it was solved in. An entry
    converges once its Frobenius residual ||F J_d - J_d F^T - h hat(a)||_F
    is at most tol.

    Raises:
        NoConvergence: If any entry's residual is still above tol (or not
            finite) after max_iter iterations.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    J = p.J
    target = h * a
    f = target @ p.J_inv.T
    r, theta, ca, cb, Jf, fxJf = _residual(f, target, J)
    err = SQRT2 * np.linalg.norm(r, axis=-1)
    active = ~(err <= tol)

    iterations = 0
    with np.errstate(divide="ignore", invalid="ignore"):
        while np.any(active) and iterations < max_iter:
            iterations += 1
            delta = _newton_step(f, r, theta, ca, cb, Jf, fxJf, J)
            f = np.where(active[:, None], f + delta, f)
            r, theta, ca, cb, Jf, fxJf = _residual(f, target, J)
            err = SQRT2 * np.linalg.norm(r, axis=-1)
            active = ~(err <= tol)

    if np.any(active):
        worst = float(np.max(np.where(np.isfinite(err[active]), err[active], np.inf)))
        logger.error(f"Implicit solve failed for {int(np.sum(active))} of {len(a)} states "
                     f"(worst residual {worst:.3e})")
        raise NoConvergence(max_iter, worst)
    logger.debug(f"Implicit solve converged for {len(a)} states in {iterations} Newton iterations")
    return exp_so3(f)


def solve_implicit_F(a, p: PendulumParams, h: float, tol: float = 1e-14,
                     max_iter: int = 50) -> NDArray[np.float64]:
    """Single-vector form of :func:`solve_implicit_F_batch`."""
    return solve_implicit_F_batch(np.asarray(a, dtype=np.float64)[None, :], p, h, tol, max_iter)[0]


def step_batch(R, omega, p: PendulumParams, c: StepConfig) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
    """One LGVI step for stacks R (N, 3, 3) and omega (N, 3)."""
    R = np.asarray(R, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.float64)
    a = omega @ p.J.T + 0.5 * c.h * gravity_moments(R, p)
    F = solve_implicit_F_batch(a, p, c.h, c.newton_tol, c.newton_max_iter)
    R_next = R @ F
    momentum = np.einsum("...ji,...j->...i", F, a) + 0.5 * c.h * gravity_moments(R_next, p)
    return R_next, momentum @ p.J_inv.T


def inverse_step_batch(R, omega, p: PendulumParams, c: StepConfig) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Exact inverse of :func:`step_batch`.

    With b = J W_{k+1} - h/2 M_{k+1} = F^T a, the implicit equation becomes
    h hat(-b) = G J_d - J_d G^T for G = F^T, which is solved with the forward
    solver. Then R_k = R_{k+1} G and J W_k = F b - h/2 M_k.
    """
    R = np.asarray(R, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.float64)
    b = omega @ p.J.T - 0.5 * c.h * gravity_moments(R, p)
    G = solve_implicit_F_batch(-b, p, c.h, c.newton_tol, c.newton_max_iter)
    R_prev = R @ G
    a = np.einsum("...ij,...j->...i", np.swapaxes(G, -1, -2), b)
    momentum = a - 0.5 * c.h * gravity_moments(R_prev, p)
    return R_prev, momentum @ p.J_inv.T


def flow_batch(R, omega, p: PendulumParams, c: StepConfig, k: int):
    if k < 0:
        raise ValueError(f"number of steps must be non-negative, got {k}")
    R = np.array(R, dtype=np.float64)
    omega = np.array(omega, dtype=np.float64)
    for _ in range(k):
        R, omega = step_batch(R, omega, p, c)
    return R, omega


def backward_flow_batch(R, omega, p: PendulumParams, c: StepConfig, k: int):
    if k < 0:
        raise ValueError(f"number of steps must be non-negative, got {k}")
    R = np.array(R, dtype=np.float64)
    omega = np.array(omega, dtype=np.float64)
    for _ in range(k):
        R, omega = inverse_step_batch(R, omega, p, c)
    return R, omega


def _single(fn, s: RigidBodyState, *args) -> RigidBodyState:
    R, omega = fn(s.R[None], s.omega[None], *args)
    return RigidBodyState(R=R[0], omega=omega[0])


def step(s: RigidBodyState, p: PendulumParams, c: StepConfig) -> RigidBodyState:
    return _single(step_batch, s, p, c)


def inverse_step(s: RigidBodyState, p: PendulumParams, c: StepConfig) -> RigidBodyState:
    return _single(inverse_step_batch, s, p, c)


def flow(s: RigidBodyState, p: PendulumParams, c: StepConfig, k: int) -> RigidBodyState:
    """k-fold composition of :func:`step`; k = 0 returns the state unchanged."""
    return _single(flow_batch, s, p, c, k)


def backward_flow(s: RigidBodyState, p: PendulumParams, c: StepConfig, k: int) -> RigidBodyState:
    """k-fold composition of :func:`inverse_step`."""
    return _single(backward_flow_batch, s, p, c, k)


def trajectory(s: RigidBodyState, p: PendulumParams, c: StepConfig, n_steps: int,
               renormalize_threshold: Optional[float] = None):
    """States 0..n_steps along the forward flow, as stacked arrays (n+1, 3, 3) and (n+1, 3).

    With ``renormalize_threshold`` set, the attitude is projected back onto
    SO(3) after any step that leaves its orthogonality defect above it.
    """
    Rs = np.empty((n_steps + 1, 3, 3))
    omegas = np.empty((n_steps + 1, 3))
    Rs[0], omegas[0] = s.R, s.omega
    R, omega = s.R[None], s.omega[None]
    for k in range(1, n_steps + 1):
        R, omega = step_batch(R, omega, p, c)
        if renormalize_threshold is not None:
            R = renormalize(R, renormalize_threshold)
        Rs[k], omegas[k] = R[0], omega[0]
    return Rs, omegas
