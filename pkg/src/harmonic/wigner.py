"""Wigner-d functions and the irreducible unitary representations of SO(3).

Matrices are indexed by m, n in [-l, l], stored ascending so that entry
[m + l, n + l] holds d^l_{mn}. With R = Rz(alpha) Rx(beta) Rz(gamma) the
representation

    U^l_{mn}(R) = i^(m - n) exp(-i (m alpha + n gamma)) d^l_{mn}(cos beta)

is unitary and multiplicative. Higher degrees come from an ascending
three-term recursion in l seeded by the closed-form sum at l = max(|m|, |n|).
"""

import logging
from dataclasses import dataclass
from typing import List

import numpy as np
from cachetools import LRUCache, cached
from cachetools.keys import hashkey
from numpy.typing import NDArray
from scipy.special import gammaln

from src.geometry.so3 import euler_angles

logger = logging.getLogger(__name__)

_table_cache = LRUCache(maxsize=32)
_I_POWERS = np.array([1.0, 1.0j, -1.0, -1.0j])


@dataclass(frozen=True, eq=False)
class WignerTable:
    """d^l(cos beta) for l = 0..L at a set of beta nodes; ``d[l]`` has shape (N_beta, 2l+1, 2l+1)."""
    bandlimit: int
    beta: NDArray[np.float64]
    d: List[NDArray[np.float64]]

    def degree(self, l: int) -> NDArray[np.float64]:
        return self.d[l]


def _seed(l: int, m: int, n: int, beta: NDArray[np.float64]) -> NDArray[np.float64]:
    """Closed-form d^l_{mn}(beta) by the factorial sum with log-gamma terms."""
    # closed-form sum written for the transposed index order
    row, col = n, m
    c = np.cos(beta / 2.0)
    s = np.sin(beta / 2.0)
    log_num = 0.5 * (gammaln(l + row + 1) + gammaln(l - row + 1) + gammaln(l + col + 1) + gammaln(l - col + 1))
    total = np.zeros_like(beta)
    for k in range(max(0, col - row), min(l + col, l - row) + 1):
        log_den = gammaln(l + col - k + 1) + gammaln(k + 1) + gammaln(l - row - k + 1) + gammaln(k + row - col + 1)
        sign = -1.0 if (k + row - col) % 2 else 1.0
        total += sign * np.exp(log_num - log_den) * c ** (2 * l + col - row - 2 * k) * s ** (2 * k + row - col)
    return total


def _compute_table(bandlimit: int, beta: NDArray[np.float64]) -> WignerTable:
    cos_beta = np.cos(beta)
    d = [np.zeros((len(beta), 2 * l + 1, 2 * l + 1)) for l in range(bandlimit + 1)]
    for m in range(-bandlimit, bandlimit + 1):
        for n in range(-bandlimit, bandlimit + 1):
            l0 = max(abs(m), abs(n))
            prev = np.zeros_like(beta)
            curr = _seed(l0, m, n, beta)
            d[l0][:, m + l0, n + l0] = curr
            for j in range(l0 + 1, bandlimit + 1):
                lower = j - 1
                coupling = 0.0 if lower == 0 else m * n / (j * lower)
                scale = j * (2 * j - 1) / np.sqrt((j * j - m * m) * (j * j - n * n))
                back = 0.0
                if lower > 0:
                    back = np.sqrt((lower * lower - m * m) * (lower * lower - n * n)) / (lower * (2 * j - 1))
                nxt = scale * ((cos_beta - coupling) * curr - back * prev)
                d[j][:, m + j, n + j] = nxt
                prev, curr = curr, nxt
    for table in d:
        table.setflags(write=False)
    return WignerTable(bandlimit, beta, d)


@cached(cache=_table_cache, key=lambda bandlimit, beta: hashkey(bandlimit, beta.tobytes()))
def _cached_table(bandlimit: int, beta: NDArray[np.float64]) -> WignerTable:
    logger.debug(f"Computing Wigner-d table L={bandlimit} on {len(beta)} beta nodes")
    return _compute_table(bandlimit, beta)


def wigner_table(bandlimit: int, beta) -> WignerTable:
    """Wigner-d matrices for l <= bandlimit at every beta in the array (LRU cached)."""
    if bandlimit < 0:
        raise ValueError(f"bandlimit must be non-negative, got {bandlimit}")
    beta = np.ascontiguousarray(np.atleast_1d(np.asarray(beta, dtype=np.float64)))
    return _cached_table(bandlimit, beta)


def wigner_d(bandlimit: int, beta: float) -> List[NDArray[np.float64]]:
    """All d^l(cos beta), l = 0..bandlimit, at a single beta."""
    table = wigner_table(bandlimit, np.array([beta]))
    return [d_l[0] for d_l in table.d]


def _phase_factors(l: int) -> NDArray[np.complex128]:
    """i^(m - n) over the (m, n) index grid."""
    k = np.arange(-l, l + 1)
    return _I_POWERS[(k[:, None] - k[None, :]) % 4]


def irrep_matrices(l: int, alpha, beta, gamma) -> NDArray[np.complex128]:
    """U^l at Euler angles given as equal-length arrays, shape (N, 2l+1, 2l+1)."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=np.float64))
    beta = np.atleast_1d(np.asarray(beta, dtype=np.float64))
    gamma = np.atleast_1d(np.asarray(gamma, dtype=np.float64))
    k = np.arange(-l, l + 1)
    d = wigner_table(l, beta).d[l]
    left = np.exp(-1j * k[None, :] * alpha[:, None])
    right = np.exp(-1j * k[None, :] * gamma[:, None])
    return _phase_factors(l) * left[:, :, None] * d * right[:, None, :]


def irrep(l: int, R) -> NDArray[np.complex128]:
    """U^l(R) for a single rotation matrix."""
    alpha, beta, gamma = euler_angles(R)
    return irrep_matrices(l, alpha, beta, gamma)[0]
