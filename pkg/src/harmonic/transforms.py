"""Forward and inverse Fourier transforms on SO(3).

    P^l = int f(R) U^l(R^-1) dR            (forward)
    f(R) = sum_l (2l + 1) tr(P^l U^l(R))   (inverse)

Both directions are separable in the Euler angles: the alpha and gamma sums
are complex exponential contractions and the beta sum runs against the
Wigner-d table. Samples may carry trailing batch axes (one transform per
trailing index), which is how per-velocity-node spectra are produced.
"""

import logging
from dataclasses import dataclass
from typing import List

import numpy as np
from numpy.typing import NDArray

from src.core.exceptions import ValidationError
from src.geometry.so3 import euler_angles
from src.harmonic.quadrature import So3Quadrature
from src.harmonic.wigner import _phase_factors, irrep_matrices, wigner_table

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class So3Spectrum:
    """Fourier coefficients P^l, l = 0..L; ``coefficients[l]`` has shape batch + (2l+1, 2l+1)."""
    bandlimit: int
    coefficients: List[NDArray[np.complex128]]

    def __post_init__(self):
        if len(self.coefficients) != self.bandlimit + 1:
            raise ValidationError(f"spectrum of bandlimit {self.bandlimit} needs {self.bandlimit + 1} "
                                  f"coefficient blocks, got {len(self.coefficients)}")
        for l, block in enumerate(self.coefficients):
            if block.shape[-2:] != (2 * l + 1, 2 * l + 1):
                raise ValidationError(f"coefficient block l={l} has shape {block.shape[-2:]}, "
                                      f"expected {(2 * l + 1, 2 * l + 1)}")

    @property
    def batch_shape(self):
        return self.coefficients[0].shape[:-2]

    def __getitem__(self, index) -> "So3Spectrum":
        """Spectrum of one batch entry (or a sub-batch)."""
        return So3Spectrum(self.bandlimit, [block[index] for block in self.coefficients])

    @classmethod
    def constant(cls, value: float, bandlimit: int = 0) -> "So3Spectrum":
        blocks = [np.zeros((2 * l + 1, 2 * l + 1), dtype=np.complex128) for l in range(bandlimit + 1)]
        blocks[0][0, 0] = value
        return cls(bandlimit, blocks)


def _angle_exponentials(angles: NDArray[np.float64], bandlimit: int, sign: float) -> NDArray[np.complex128]:
    k = np.arange(-bandlimit, bandlimit + 1)
    return np.exp(sign * 1j * angles[:, None] * k[None, :])


def forward_transform(samples, quadrature: So3Quadrature, bandlimit: int) -> So3Spectrum:
    """Fourier spectrum of samples on the quadrature nodes.

    Args:
        samples: Array of shape (N_alpha, N_beta, N_gamma) + batch.
        quadrature: Node grid and weights.
        bandlimit: Highest degree L to compute.

    Returns:
        So3Spectrum whose blocks have shape batch + (2l+1, 2l+1).

    Raises:
        BandlimitTooHighForGrid: If N_beta < 2L + 1.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.shape[:3] != quadrature.shape:
        raise ValidationError(f"samples of shape {samples.shape[:3]} do not match grid {quadrature.shape}")
    quadrature.check_bandlimit(bandlimit)

    ea = _angle_exponentials(quadrature.alpha, bandlimit, 1.0) * quadrature.w_alpha[:, None]
    eg = _angle_exponentials(quadrature.gamma, bandlimit, 1.0) * quadrature.w_gamma[:, None]
    # inner[b, ..., n, m] = sum_{a, g} w_a w_g f e^{i n alpha} e^{i m gamma}
    inner = np.einsum("abg...,an,gm->b...nm", samples, ea, eg, optimize=True)
    table = wigner_table(bandlimit, quadrature.beta)
    wb = quadrature.w_beta / quadrature.raw_total

    blocks = []
    for l in range(bandlimit + 1):
        window = slice(bandlimit - l, bandlimit + l + 1)
        part = inner[..., window, window]
        # P_{mn} = i^{m-n} sum_b w_b d^l_{nm}(beta_b) inner[b, n, m]
        p = np.einsum("b,bnm,b...nm->...mn", wb, table.d[l], part, optimize=True)
        blocks.append(_phase_factors(l) * p)
    logger.debug(f"Forward transform L={bandlimit} over {quadrature.shape} nodes, batch {samples.shape[3:]}")
    return So3Spectrum(bandlimit, blocks)


def synthesize(spectrum: So3Spectrum, quadrature: So3Quadrature) -> NDArray[np.float64]:
    """Inverse transform evaluated at every quadrature node, shape (N_alpha, N_beta, N_gamma) + batch."""
    L = spectrum.bandlimit
    table = wigner_table(L, quadrature.beta)
    batch = spectrum.batch_shape
    # G[b, ..., n, m] = sum_l (2l+1) P^l_{mn} i^{n-m} d^l_{nm}(beta_b)
    G = np.zeros((len(quadrature.beta),) + batch + (2 * L + 1, 2 * L + 1), dtype=np.complex128)
    for l, block in enumerate(spectrum.coefficients):
        window = slice(L - l, L + l + 1)
        phased = np.swapaxes(block, -1, -2) * _phase_factors(l)
        G[..., window, window] += (2 * l + 1) * np.einsum("bnm,...nm->b...nm", table.d[l], phased)
    ea = _angle_exponentials(quadrature.alpha, L, -1.0)
    eg = _angle_exponentials(quadrature.gamma, L, -1.0)
    values = np.einsum("an,b...nm,gm->abg...", ea, G, eg, optimize=True)
    return values.real


def inverse_transform(spectrum: So3Spectrum, R) -> NDArray[np.float64]:
    """Truncated Peter-Weyl sum at rotation(s) R.

    For a single rotation and unbatched spectrum this is a scalar. The imaginary
    residual is logged at DEBUG as a realness diagnostic.
    """
    R = np.asarray(R, dtype=np.float64)
    single = R.ndim == 2
    alpha, beta, gamma = euler_angles(R.reshape(-1, 3, 3))
    total = 0.0
    for l, block in enumerate(spectrum.coefficients):
        U = irrep_matrices(l, alpha, beta, gamma)
        # tr(P U) = sum_{m,n} P_{mn} U_{nm}, for every rotation r and batch entry
        total = total + (2 * l + 1) * np.einsum("...mn,rnm->r...", block, U)
    imaginary = float(np.max(np.abs(np.imag(total)))) if np.size(total) else 0.0
    if imaginary > 1e-9:
        logger.debug(f"Inverse transform imaginary residual {imaginary:.3e}")
    values = np.real(total)
    return values[0] if single else values


def spectral_energy(spectrum: So3Spectrum) -> NDArray[np.float64]:
    """(2l + 1) ||P^l||_F^2 per degree, summed over batch entries."""
    return np.array([(2 * l + 1) * float(np.sum(np.abs(block) ** 2))
                     for l, block in enumerate(spectrum.coefficients)])
