"""Continuous 3D pendulum model: gravity moment, energy and equations of motion."""

import logging
from typing import Tuple

import numpy as np
from numpy.typing import NDArray

from src.core.models import PendulumParams, RigidBodyState
from src.geometry.so3 import coset_representative, hat

logger = logging.getLogger(__name__)


def gravity_moments(R, p: PendulumParams) -> NDArray[np.float64]:
    """Batched m g rho x (R^T e3); the third row of R is R^T e3."""
    R = np.asarray(R, dtype=np.float64)
    return p.m * p.g * np.cross(p.rho, R[..., 2, :])


def gravity_moment(R, p: PendulumParams) -> NDArray[np.float64]:
    return gravity_moments(R, p)


def energies(R, omega, p: PendulumParams) -> NDArray[np.float64]:
    """Batched E = 1/2 W^T J W - m g e3^T R rho."""
    R = np.asarray(R, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.float64)
    kinetic = 0.5 * np.einsum("...i,ij,...j->...", omega, p.J, omega)
    potential = -p.m * p.g * (R[..., 2, :] @ p.rho)
    return kinetic + potential


def energy(s: RigidBodyState, p: PendulumParams) -> float:
    return float(energies(s.R, s.omega, p))


def vector_field(R, omega, p: PendulumParams) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Right-hand side of the continuous equations.

    Args:
        R: Attitude(s), shape (..., 3, 3).
        omega: Body angular velocity, shape (..., 3).
        p: Pendulum parameters.

    Returns:
        (R_dot, omega_dot) with R_dot = R hat(omega) and
        J omega_dot = J omega x omega + m g rho x R^T e3.
    """
    R = np.asarray(R, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.float64)
    R_dot = R @ hat(omega)
    momentum = omega @ p.J.T
    omega_dot = (np.cross(momentum, omega) + gravity_moments(R, p)) @ p.J_inv.T
    return R_dot, omega_dot


def hanging_equilibrium(p: PendulumParams) -> NDArray[np.float64]:
    """An attitude with R^T e3 = rho / ||rho||."""
    direction = np.asarray(p.rho) / np.linalg.norm(p.rho)
    # rows of R are the inertial axes in body coordinates; row 3 must equal the direction
    return coset_representative(3, direction).T
