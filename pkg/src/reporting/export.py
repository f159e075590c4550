"""Module for formatting and exporting propagation results as CSV and text."""

import io
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.core.exceptions import FormatError
from src.core.models import Measurement
from src.marginals.sphere import SphereGrid, SphereMarginal

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
SPHERE_COLUMNS = ["colatitude", "longitude", "x", "y", "z", "density"]
TRAJECTORY_COLUMNS = (["t"] + [f"R{i}{j}" for i in range(1, 4) for j in range(1, 4)]
                      + ["omega_x", "omega_y", "omega_z", "energy", "orthogonality_defect"])
MEASUREMENT_COLUMNS = ["k", "z1", "z2", "z3", "z4", "z5", "z6"]


def _header_text(metadata: Optional[Dict[str, str]]) -> str:
    """'# key: value' comment lines in sorted key order."""
    return "".join(f"# {key}: {value}\n" for key, value in sorted((metadata or {}).items()))


def _write_frame(frame: pd.DataFrame, path, metadata: Optional[Dict[str, str]]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as handle:
        handle.write(_header_text(metadata))
        frame.to_csv(handle, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def read_metadata(path) -> Dict[str, str]:
    """Parse the leading '# key: value' lines of an exported CSV."""
    metadata = {}
    with Path(path).open() as handle:
        for line in handle:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition(":")
            metadata[key.strip()] = value.strip()
    return metadata


def sphere_frame(s: SphereMarginal) -> pd.DataFrame:
    """One row per sphere node, colatitude-major order."""
    theta, phi = np.meshgrid(s.grid.colatitude, s.grid.longitude, indexing="ij")
    directions = s.grid.directions()
    return pd.DataFrame({
        "colatitude": theta.ravel(),
        "longitude": phi.ravel(),
        "x": directions[..., 0].ravel(),
        "y": directions[..., 1].ravel(),
        "z": directions[..., 2].ravel(),
        "density": s.values.ravel(),
    }, columns=SPHERE_COLUMNS)


def export_sphere(s: SphereMarginal, path, metadata: Optional[Dict[str, str]] = None) -> Path:
    """Write a sphere marginal as CSV; OSErrors propagate unchanged."""
    meta = {"axis": str(s.axis), "grid": f"{s.grid.shape[0]}x{s.grid.shape[1]}"}
    meta.update(metadata or {})
    path = _write_frame(sphere_frame(s), path, meta)
    logger.info(f"Exported axis-{s.axis} sphere marginal to {path}")
    return path


def read_sphere(path) -> SphereMarginal:
    """Parse a file written by :func:`export_sphere`.

    Raises:
        FormatError: If columns are missing or the grid is not a full lat x lon product.
    """
    metadata = read_metadata(path)
    frame = pd.read_csv(path, comment="#", float_precision="round_trip")
    if list(frame.columns) != SPHERE_COLUMNS:
        raise FormatError(str(path), f"expected columns {SPHERE_COLUMNS}, got {list(frame.columns)}")
    colatitude = np.unique(frame["colatitude"].to_numpy())
    longitude = np.unique(frame["longitude"].to_numpy())
    if len(colatitude) * len(longitude) != len(frame):
        raise FormatError(str(path), "rows do not form a colatitude x longitude grid")
    grid = SphereGrid(colatitude, longitude)
    values = frame["density"].to_numpy().reshape(grid.shape)
    return SphereMarginal(int(metadata.get("axis", 0)), grid, values)


def export_density_slice(values, quadrature, path, metadata: Optional[Dict[str, str]] = None) -> Path:
    """Attitude-node values (e.g. one velocity node or the attitude marginal) as CSV."""
    a, b, g = np.meshgrid(quadrature.alpha, quadrature.beta, quadrature.gamma, indexing="ij")
    frame = pd.DataFrame({"alpha": a.ravel(), "beta": b.ravel(), "gamma": g.ravel(),
                          "density": np.asarray(values).ravel()})
    return _write_frame(frame, path, metadata)


def export_trajectory(path, times, rotations, omegas, energies, defects,
                      metadata: Optional[Dict[str, str]] = None) -> Path:
    """Per-step rows (t, R row-major, omega, energy, orthogonality defect)."""
    data = np.column_stack([np.asarray(times), np.asarray(rotations).reshape(-1, 9), np.asarray(omegas),
                            np.asarray(energies), np.asarray(defects)])
    path = _write_frame(pd.DataFrame(data, columns=TRAJECTORY_COLUMNS), path, metadata)
    logger.info(f"Exported trajectory with {len(data)} rows to {path}")
    return path


def export_evidence(path, rows: Sequence[Tuple[int, float, float]],
                    metadata: Optional[Dict[str, str]] = None) -> Path:
    frame = pd.DataFrame(list(rows), columns=["k", "evidence", "log_evidence"])
    return _write_frame(frame, path, metadata)


def read_measurements(path) -> List[Measurement]:
    """Read measurements from CSV with columns k, z1..z6 (rows sorted by k on return).

    Raises:
        FormatError: On missing columns or unparsable values.
    """
    try:
        frame = pd.read_csv(path, comment="#", float_precision="round_trip")
    except pd.errors.ParserError as e:
        raise FormatError(str(path), str(e)) from e
    missing = [c for c in MEASUREMENT_COLUMNS if c not in frame.columns]
    if missing:
        raise FormatError(str(path), f"missing columns {missing}")
    try:
        ks = frame["k"].astype(int).to_numpy()
        zs = frame[MEASUREMENT_COLUMNS[1:]].astype(float).to_numpy()
    except (ValueError, TypeError) as e:
        raise FormatError(str(path), f"unparsable value: {e}") from e
    measurements = [Measurement(z=z, k=int(k), label=f"row{i}") for i, (k, z) in enumerate(zip(ks, zs))]
    return sorted(measurements, key=lambda m: m.k)


def export_measurements(measurements: Sequence[Measurement], path,
                        metadata: Optional[Dict[str, str]] = None) -> Path:
    frame = pd.DataFrame([[m.k] + list(m.z) for m in measurements], columns=MEASUREMENT_COLUMNS)
    return _write_frame(frame, path, metadata)


def format_run_summary(title: str, metadata: Dict[str, str], rows: Sequence[Dict[str, object]]) -> str:
    """Plain-text run manifest: header fields then one line per snapshot.

    Args:
        title: Run title (e.g. the subcommand).
        metadata: Tool version, config hash and similar.
        rows: Per-snapshot dicts; keys become columns in first-seen order.

    Returns:
        The report text.
    """
    output = io.StringIO()
    output.write(f"# {title}\n\n")
    for key, value in sorted(metadata.items()):
        output.write(f"{key}: {value}\n")
    output.write("\n")
    if rows:
        frame = pd.DataFrame(list(rows))
        output.write(frame.to_string(index=False, float_format=lambda v: f"{v:.6e}"))
        output.write("\n")
    else:
        output.write("- No snapshots.\n")
    return output.getvalue()
