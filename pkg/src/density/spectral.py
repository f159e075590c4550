"""Spectral views of a DensityGrid.

The primary representation is one SO(3) spectrum per velocity node. The
optional velocity DFT turns those into P^l(theta) on the dual grid of the
velocity nodes:

    P^l(theta_k) = dW sum_j P^l(W_j) exp(-i theta_k . W_j)

with dW the product of node spacings; the inverse is exact.
"""

import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from numpy.typing import NDArray
from scipy.interpolate import RegularGridInterpolator

from src.core.exceptions import OutOfSupport
from src.density.grids import DensityGrid, VelocityGrid
from src.harmonic.transforms import So3Spectrum, forward_transform, inverse_transform
from src.utils.parallel import chunked_map

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class VelocitySpectrum:
    """P^l(theta) on the DFT dual grid; ``coefficients[l]`` has shape (Nx, Ny, Nz, 2l+1, 2l+1)."""
    bandlimit: int
    theta: Tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]
    origin: NDArray[np.float64]
    spacing: NDArray[np.float64]
    coefficients: List[NDArray[np.complex128]]


def attitude_spectrum(d: DensityGrid, bandlimit: int, workers: int = 1) -> So3Spectrum:
    """Forward SO(3) transform at every velocity node; blocks have shape (Nx, Ny, Nz, 2l+1, 2l+1).

    Work is split by the first velocity axis and merged in index order.

    Raises:
        BandlimitTooHighForGrid: If the attitude grid cannot resolve the bandlimit.
    """
    d.quadrature.check_bandlimit(bandlimit)
    nx = d.velocity.shape[0]

    def transform_slab(chunk: range) -> So3Spectrum:
        return forward_transform(d.values[:, :, :, chunk.start:chunk.stop], d.quadrature, bandlimit)

    slabs = chunked_map(transform_slab, nx, chunk_size=1, workers=workers, label="spectrum")
    blocks = [np.concatenate([slab.coefficients[l] for slab in slabs], axis=0) for l in range(bandlimit + 1)]
    logger.info(f"Computed attitude spectra L={bandlimit} at {np.prod(d.velocity.shape)} velocity nodes")
    return So3Spectrum(bandlimit, blocks)


def velocity_transform(spectrum: So3Spectrum, velocity: VelocityGrid) -> VelocitySpectrum:
    """DFT of per-node spectra over the velocity grid."""
    spacing = velocity.spacing
    origin = velocity.lower
    theta = tuple(2.0 * np.pi * np.fft.fftfreq(n, dx) for n, dx in zip(velocity.shape, spacing))
    phase = _origin_phase(theta, origin)
    scale = float(np.prod(spacing))
    blocks = []
    for block in spectrum.coefficients:
        transformed = np.fft.fftn(block, axes=(0, 1, 2))
        blocks.append(scale * phase[..., None, None] * transformed)
    return VelocitySpectrum(spectrum.bandlimit, theta, origin, spacing, blocks)


def inverse_velocity_transform(vs: VelocitySpectrum) -> So3Spectrum:
    """Exact inverse of :func:`velocity_transform`."""
    phase = _origin_phase(vs.theta, vs.origin)
    scale = float(np.prod(vs.spacing))
    blocks = [np.fft.ifftn(block / (scale * phase[..., None, None]), axes=(0, 1, 2))
              for block in vs.coefficients]
    return So3Spectrum(vs.bandlimit, blocks)


def _origin_phase(theta, origin) -> NDArray[np.complex128]:
    tx, ty, tz = np.meshgrid(*theta, indexing="ij")
    return np.exp(-1j * (tx * origin[0] + ty * origin[1] + tz * origin[2]))


def reconstruct(spectra: So3Spectrum, velocity: VelocityGrid, R, omega) -> float:
    """Density at (R, omega) from per-velocity-node spectra.

    The Peter-Weyl sum is evaluated at R for every velocity node and the
    result is trilinearly interpolated in omega (exact at nodes).

    Raises:
        OutOfSupport: If omega lies outside the velocity box.
    """
    omega = np.asarray(omega, dtype=np.float64)
    if not velocity.contains(omega):
        raise OutOfSupport(tuple(omega))
    node_values = inverse_transform(spectra, np.asarray(R, dtype=np.float64))
    interpolator = RegularGridInterpolator(velocity.axes, node_values, method="linear")
    return float(interpolator(omega[None])[0])
