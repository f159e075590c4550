"""Binary density and spectrum files.

Density file (little-endian)::

    8 bytes   magic b"SO3DGRID"
    uint32    format version
    uint32    header length n
    n bytes   UTF-8 JSON header, keys sorted (grid descriptors, step index,
              escaped mass, normalizer, config hash, tool version)
    float64   values, C order over (alpha, beta, gamma, Wx, Wy, Wz)

Spectrum file (little-endian)::

    8 bytes   magic b"SO3SPECT"
    uint32    format version
    uint32    header length n
    n bytes   UTF-8 JSON header, keys sorted (bandlimit L, batch shape,
              step index, config hash, tool version)
    complex   for every batch entry (C order) and l = 0..L, the
              (2l+1) x (2l+1) matrix row-major as (real, imag) float64 pairs
"""

import io
import json
import logging
import struct
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from src.core.exceptions import FormatError
from src.density.grids import DensityGrid, VelocityGrid
from src.harmonic.quadrature import So3Quadrature
from src.harmonic.transforms import So3Spectrum

logger = logging.getLogger(__name__)

DENSITY_MAGIC = b"SO3DGRID"
DENSITY_FORMAT_VERSION = 1
SPECTRUM_MAGIC = b"SO3SPECT"
SPECTRUM_FORMAT_VERSION = 1


def density_to_bytes(d: DensityGrid, metadata: Optional[Dict[str, str]] = None) -> bytes:
    header = {
        "quadrature": {"rule": d.quadrature.rule, "shape": list(d.quadrature.shape)},
        "velocity": {"lower": d.velocity.lower.tolist(), "upper": d.velocity.upper.tolist(),
                     "shape": list(d.velocity.shape)},
        "k": d.k,
        "escaped_mass": d.escaped_mass,
        "normalizer": d.normalizer,
        "metadata": dict(metadata or {}),
    }
    encoded = json.dumps(header, sort_keys=True).encode("utf-8")
    buffer = io.BytesIO()
    buffer.write(DENSITY_MAGIC)
    buffer.write(struct.pack("<II", DENSITY_FORMAT_VERSION, len(encoded)))
    buffer.write(encoded)
    buffer.write(np.ascontiguousarray(d.values, dtype="<f8").tobytes())
    return buffer.getvalue()


def write_density(d: DensityGrid, path, metadata: Optional[Dict[str, str]] = None) -> Path:
    path = Path(path)
    path.write_bytes(density_to_bytes(d, metadata))
    logger.info(f"Wrote density snapshot k={d.k} to {path}")
    return path


def _read_header(raw: bytes, path: Path, magic: bytes, version_expected: int, kind: str):
    if raw[:8] != magic:
        raise FormatError(str(path), f"not a {kind} file (bad magic)")
    try:
        version, header_len = struct.unpack_from("<II", raw, 8)
        if version != version_expected:
            raise FormatError(str(path), f"unsupported format version {version}")
        header = json.loads(raw[16:16 + header_len].decode("utf-8"))
    except (struct.error, UnicodeDecodeError, ValueError) as e:
        raise FormatError(str(path), f"malformed header: {e}") from e
    return header, raw[16 + header_len:]


def read_density(path) -> DensityGrid:
    """Parse a density file.

    Raises:
        FormatError: On a wrong magic, version, header or payload size.
    """
    path = Path(path)
    header, payload = _read_header(path.read_bytes(), path, DENSITY_MAGIC, DENSITY_FORMAT_VERSION, "density")
    try:
        quadrature = So3Quadrature.build(*header["quadrature"]["shape"], rule=header["quadrature"]["rule"])
        vel = header["velocity"]
        velocity = VelocityGrid.build(vel["lower"], vel["upper"], vel["shape"])
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(str(path), f"malformed header: {e}") from e

    shape = quadrature.shape + velocity.shape
    if len(payload) != 8 * int(np.prod(shape)):
        raise FormatError(str(path), f"payload holds {len(payload)} bytes, expected {8 * int(np.prod(shape))}")
    values = np.frombuffer(payload, dtype="<f8").reshape(shape).astype(np.float64)
    return DensityGrid(quadrature, velocity, values, k=int(header["k"]),
                       escaped_mass=float(header["escaped_mass"]), normalizer=header.get("normalizer"))


def read_density_metadata(path) -> Dict[str, str]:
    path = Path(path)
    header, _ = _read_header(path.read_bytes(), path, DENSITY_MAGIC, DENSITY_FORMAT_VERSION, "density")
    return header.get("metadata", {})


def spectrum_to_bytes(spectrum: So3Spectrum, metadata: Optional[Dict[str, str]] = None) -> bytes:
    batch = spectrum.batch_shape
    header = {"bandlimit": spectrum.bandlimit, "batch_shape": list(batch), "metadata": dict(metadata or {})}
    encoded = json.dumps(header, sort_keys=True).encode("utf-8")
    buffer = io.BytesIO()
    buffer.write(SPECTRUM_MAGIC)
    buffer.write(struct.pack("<II", SPECTRUM_FORMAT_VERSION, len(encoded)))
    buffer.write(encoded)
    n_entries = int(np.prod(batch)) if batch else 1
    flat = [block.reshape((n_entries,) + block.shape[-2:]) for block in spectrum.coefficients]
    for entry in range(n_entries):
        for block in flat:
            buffer.write(np.ascontiguousarray(block[entry], dtype="<c16").tobytes())
    return buffer.getvalue()


def write_spectrum(spectrum: So3Spectrum, path, metadata: Optional[Dict[str, str]] = None) -> Path:
    path = Path(path)
    path.write_bytes(spectrum_to_bytes(spectrum, metadata))
    logger.info(f"Wrote spectrum L={spectrum.bandlimit} batch {spectrum.batch_shape} to {path}")
    return path


def read_spectrum(path) -> So3Spectrum:
    """Parse a spectrum file.

    Raises:
        FormatError: On a wrong magic, version, header or payload size.
    """
    path = Path(path)
    header, payload = _read_header(path.read_bytes(), path, SPECTRUM_MAGIC, SPECTRUM_FORMAT_VERSION, "spectrum")
    try:
        bandlimit = int(header["bandlimit"])
        batch = tuple(int(n) for n in header["batch_shape"])
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(str(path), f"malformed header: {e}") from e
    n_entries = int(np.prod(batch)) if batch else 1
    sizes = [(2 * l + 1) ** 2 for l in range(bandlimit + 1)]
    expected = 16 * n_entries * sum(sizes)
    if len(payload) != expected:
        raise FormatError(str(path), f"payload holds {len(payload)} bytes, expected {expected}")
    data = np.frombuffer(payload, dtype="<c16").reshape(n_entries, sum(sizes))
    blocks, start = [], 0
    for l, size in enumerate(sizes):
        part = data[:, start:start + size].reshape(batch + (2 * l + 1, 2 * l + 1))
        blocks.append(part.astype(np.complex128))
        start += size
    return So3Spectrum(bandlimit, blocks)


def read_spectrum_metadata(path) -> Dict[str, str]:
    path = Path(path)
    header, _ = _read_header(path.read_bytes(), path, SPECTRUM_MAGIC, SPECTRUM_FORMAT_VERSION, "spectrum")
    return header.get("metadata", {})


def format_spectrum_text(spectrum: So3Spectrum, max_entries: int = 1,
                         metadata: Optional[Dict[str, str]] = None) -> str:
    """Human-readable dump of the first ``max_entries`` spectra, metadata as ``# key: value`` lines."""
    output = io.StringIO()
    batch = spectrum.batch_shape
    n_entries = int(np.prod(batch)) if batch else 1
    output.write(f"# SO(3) spectrum, bandlimit {spectrum.bandlimit}, batch {batch}\n")
    for key, value in sorted((metadata or {}).items()):
        output.write(f"# {key}: {value}\n")
    flat = [block.reshape((n_entries,) + block.shape[-2:]) for block in spectrum.coefficients]
    for entry in range(min(max_entries, n_entries)):
        index = np.unravel_index(entry, batch) if batch else ()
        output.write(f"\n## entry {tuple(int(i) for i in index)}\n")
        for l, block in enumerate(flat):
            output.write(f"l = {l}\n")
            for row in block[entry]:
                output.write("  " + "  ".join(f"{v.real:+.6e}{v.imag:+.6e}j" for v in row) + "\n")
    return output.getvalue()
