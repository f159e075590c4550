"""Rotation-group algebra on SO(3).

All functions accept a single vector ``(3,)`` / matrix ``(3, 3)`` or a stack
``(..., 3)`` / ``(..., 3, 3)`` and broadcast over the leading axes.
"""

import logging
from typing import Optional, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import polar
from scipy.spatial.transform import Rotation as ScipyRotation

from src.core.exceptions import NotSkew, NotUnit
from src.core.models import Euler313, rotation_defect

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
SKEW_TOLERANCE = 1e-9
UNIT_TOLERANCE = 1e-12
RENORMALIZE_THRESHOLD = 1e-12
# Below this angle the Rodrigues coefficients switch to their Taylor series.
SMALL_ANGLE = 1e-4
# The derivative formulas cancel more digits and switch to series earlier.
DERIVATIVE_SERIES_ANGLE = 1e-2
# Euler sin(beta) below this is treated as gimbal lock.
GIMBAL_LOCK_TOLERANCE = 1e-12

E = np.eye(3)


def hat(x) -> NDArray[np.float64]:
    """Skew-symmetric matrix with hat(x) @ y == cross(x, y)."""
    x = np.asarray(x, dtype=np.float64)
    S = np.zeros(x.shape[:-1] + (3, 3))
    S[..., 0, 1] = -x[..., 2]
    S[..., 0, 2] = x[..., 1]
    S[..., 1, 0] = x[..., 2]
    S[..., 1, 2] = -x[..., 0]
    S[..., 2, 0] = -x[..., 1]
    S[..., 2, 1] = x[..., 0]
    return S


def vee(S) -> NDArray[np.float64]:
    """Inverse of :func:`hat`.

    Raises:
        NotSkew: If ``||S + S^T||_F`` exceeds 1e-9 for any matrix in the stack.
    """
    S = np.asarray(S, dtype=np.float64)
    defect = np.linalg.norm(S + np.swapaxes(S, -1, -2), axis=(-2, -1))
    worst = float(np.max(defect)) if defect.size else 0.0
    if worst > SKEW_TOLERANCE:
        raise NotSkew(worst)
    return _vee_unchecked(S)


def _vee_unchecked(S: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.stack([S[..., 2, 1], S[..., 0, 2], S[..., 1, 0]], axis=-1)


def vee_antisymmetric(A) -> NDArray[np.float64]:
    """vee of the skew part A - A^T, for arbitrary square input."""
    A = np.asarray(A, dtype=np.float64)
    return _vee_unchecked(A - np.swapaxes(A, -1, -2))


def rodrigues_coefficients(theta) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
    """a = sin(t)/t and b = (1 - cos(t))/t^2, so that exp(hat(x)) = I + a hat(x) + b hat(x)^2."""
    theta = np.asarray(theta, dtype=np.float64)
    small = theta < SMALL_ANGLE
    safe = np.where(small, 1.0, theta)
    t2 = theta * theta
    a = np.where(small, 1.0 - t2 / 6.0 + t2 * t2 / 120.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - t2 / 24.0 + t2 * t2 / 720.0, 2.0 * (np.sin(0.5 * safe) / safe) ** 2)
    return a, b


def rodrigues_derivatives(theta) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
    """a'(t)/t and b'(t)/t for the coefficients of :func:`rodrigues_coefficients`."""
    theta = np.asarray(theta, dtype=np.float64)
    small = theta < DERIVATIVE_SERIES_ANGLE
    safe = np.where(small, 1.0, theta)
    t2 = theta * theta
    sin, cos = np.sin(safe), np.cos(safe)
    one_minus_cos = 2.0 * np.sin(0.5 * safe) ** 2
    da = np.where(small, -1.0 / 3.0 + t2 / 30.0, (safe * cos - sin) / safe ** 3)
    db = np.where(small, -1.0 / 12.0 + t2 / 180.0, (safe * sin - 2.0 * one_minus_cos) / safe ** 4)
    return da, db


def exp_so3(x) -> NDArray[np.float64]:
    """Matrix exponential of hat(x) by the Rodrigues formula."""
    x = np.asarray(x, dtype=np.float64)
    theta = np.linalg.norm(x, axis=-1)
    a, b = rodrigues_coefficients(theta)
    K = hat(x)
    return E + a[..., None, None] * K + b[..., None, None] * (K @ K)


def _tie_break_sign(n: NDArray[np.float64]) -> NDArray[np.float64]:
    """Flip each axis so that its first nonzero component is positive."""
    nonzero = np.abs(n) > 1e-12
    first = np.argmax(nonzero, axis=-1)
    lead = np.take_along_axis(n, first[..., None], axis=-1)[..., 0]
    return np.where(lead < 0.0, -1.0, 1.0)


def log_so3(R) -> NDArray[np.float64]:
    """Rotation vector of R with norm in [0, pi].

    At angle exactly pi the axis sign is fixed so that the first nonzero
    component is positive.
    """
    R = np.asarray(R, dtype=np.float64)
    w = 0.5 * _vee_unchecked(R - np.swapaxes(R, -1, -2))
    s = np.linalg.norm(w, axis=-1)
    c = np.clip(0.5 * (np.trace(R, axis1=-2, axis2=-1) - 1.0), -1.0, 1.0)
    theta = np.arctan2(s, c)

    small = theta < SMALL_ANGLE
    safe_s = np.where(s > 0.0, s, 1.0)
    factor = np.where(small, 1.0 + theta * theta / 6.0, theta / safe_s)
    result = factor[..., None] * w

    near_pi = c < -0.5
    if np.any(near_pi):
        B = 0.5 * (R + np.swapaxes(R, -1, -2))
        denom = np.where(near_pi, 1.0 - c, 1.0)
        nn = (B - c[..., None, None] * E) / denom[..., None, None]
        diag = np.diagonal(nn, axis1=-2, axis2=-1)
        j = np.argmax(diag, axis=-1)
        column = np.take_along_axis(nn, j[..., None, None], axis=-1)[..., 0]
        pivot = np.sqrt(np.maximum(np.take_along_axis(diag, j[..., None], axis=-1), 1e-300))
        n = column / pivot
        n = n / np.linalg.norm(n, axis=-1, keepdims=True)
        dot = np.sum(n * w, axis=-1)
        sign = np.where(s > 1e-14, np.where(dot < 0.0, -1.0, 1.0), _tie_break_sign(n))
        result = np.where(near_pi[..., None], (sign * theta)[..., None] * n, result)
    return result


def euler_matrices(alpha, beta, gamma) -> NDArray[np.float64]:
    """Batched R = Rz(alpha) Rx(beta) Rz(gamma); broadcasts the three angle arrays."""
    alpha, beta, gamma = np.broadcast_arrays(*(np.asarray(v, dtype=np.float64) for v in (alpha, beta, gamma)))
    ca, sa = np.cos(alpha), np.sin(alpha)
    cb, sb = np.cos(beta), np.sin(beta)
    cg, sg = np.cos(gamma), np.sin(gamma)
    R = np.empty(alpha.shape + (3, 3))
    R[..., 0, 0] = ca * cg - sa * cb * sg
    R[..., 0, 1] = -ca * sg - sa * cb * cg
    R[..., 0, 2] = sa * sb
    R[..., 1, 0] = sa * cg + ca * cb * sg
    R[..., 1, 1] = -sa * sg + ca * cb * cg
    R[..., 1, 2] = -ca * sb
    R[..., 2, 0] = sb * sg
    R[..., 2, 1] = sb * cg
    R[..., 2, 2] = cb
    return R


def euler_angles(R) -> Tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """Batched inverse of :func:`euler_matrices`.

    At gimbal lock (beta in {0, pi}) gamma is 0 and alpha carries the free angle.
    """
    R = np.asarray(R, dtype=np.float64)
    sb = np.hypot(R[..., 2, 0], R[..., 2, 1])
    beta = np.arctan2(sb, R[..., 2, 2])
    locked = sb < GIMBAL_LOCK_TOLERANCE
    alpha = np.where(locked, np.arctan2(R[..., 1, 0], R[..., 0, 0]), np.arctan2(R[..., 0, 2], -R[..., 1, 2]))
    gamma = np.where(locked, 0.0, np.arctan2(R[..., 2, 0], R[..., 2, 1]))
    return _wrap_angle(alpha), beta, _wrap_angle(gamma)


def _wrap_angle(angle: NDArray[np.float64]) -> NDArray[np.float64]:
    wrapped = np.mod(angle, TWO_PI)
    return np.where(wrapped >= TWO_PI, 0.0, wrapped)


def euler313_to_rotation(e: Euler313) -> NDArray[np.float64]:
    return euler_matrices(e.alpha, e.beta, e.gamma)


def rotation_to_euler313(R) -> Euler313:
    alpha, beta, gamma = euler_angles(R)
    return Euler313(float(alpha), float(beta), float(gamma))


def haar_weight(beta):
    """Haar density sin(beta) / (8 pi^2) in 3-1-3 Euler angles."""
    return np.sin(beta) / (8.0 * np.pi ** 2)


def coset_representative(i: int, r) -> NDArray[np.float64]:
    """A rotation whose i-th column (1-based axis index) equals the unit vector r.

    For r == e_i this is the identity; for r == -e_i it is the half-turn about
    e_{i+1 mod 3}.

    Raises:
        NotUnit: If r is not of unit length within 1e-12.
    """
    r = np.asarray(r, dtype=np.float64)
    norm = float(np.linalg.norm(r))
    if abs(norm - 1.0) > UNIT_TOLERANCE:
        raise NotUnit(norm)
    return coset_representatives(i, r[None, :])[0]


def coset_representatives(i: int, directions) -> NDArray[np.float64]:
    """Vectorized :func:`coset_representative` over unit directions of shape (N, 3)."""
    if i not in (1, 2, 3):
        raise ValueError(f"axis index must be 1, 2 or 3, got {i}")
    directions = np.asarray(directions, dtype=np.float64)
    e_i = E[i - 1]
    axis = np.cross(e_i, directions)
    s = np.linalg.norm(axis, axis=-1)
    c = directions @ e_i
    theta = np.arctan2(s, c)
    degenerate = s < 1e-15
    unit_axis = axis / np.where(degenerate, 1.0, s)[..., None]
    result = exp_so3(theta[..., None] * unit_axis)
    antipodal = degenerate & (c < 0.0)
    if np.any(antipodal):
        result[antipodal] = exp_so3(np.pi * E[i % 3])
    result[degenerate & (c >= 0.0)] = E
    return result


def orthogonality_defect(R) -> NDArray[np.float64]:
    """||R^T R - I||_F per matrix."""
    R = np.asarray(R, dtype=np.float64)
    return np.linalg.norm(np.swapaxes(R, -1, -2) @ R - E, axis=(-2, -1))


def renormalize(R, threshold: float = RENORMALIZE_THRESHOLD) -> NDArray[np.float64]:
    """Project drifted matrices back onto SO(3) by polar decomposition."""
    R = np.array(R, dtype=np.float64)
    flat = R.reshape(-1, 3, 3)
    drifted = np.flatnonzero(orthogonality_defect(flat) > threshold)
    for idx in drifted:
        u, _ = polar(flat[idx])
        if np.linalg.det(u) < 0.0:
            u = -u
        flat[idx] = u
    if drifted.size:
        logger.debug(f"Renormalized {drifted.size} rotation(s) with drift above {threshold:.1e}")
    return flat.reshape(R.shape)


def rotation_angle(A, B) -> NDArray[np.float64]:
    """Geodesic distance (radians) between A and B."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    return np.linalg.norm(log_so3(np.swapaxes(A, -1, -2) @ B), axis=-1)


def random_rotations(n: int, rng: Optional[np.random.Generator] = None) -> NDArray[np.float64]:
    """n Haar-distributed rotations, shape (n, 3, 3)."""
    rng = np.random.default_rng() if rng is None else rng
    return ScipyRotation.random(n, random_state=rng).as_matrix().reshape(n, 3, 3)


def is_rotation(R, tolerance: float = 1e-9) -> bool:
    return rotation_defect(R) <= tolerance
