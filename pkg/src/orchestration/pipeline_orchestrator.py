"""Orchestrates the propagate / estimate / trajectory / transform / marginal pipelines."""

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from src import TOOL_NAME, __version__
from src.config.settings import RunConfig
from src.core.models import Measurement
from src.density.grids import DensityGrid, VelocityGrid
from src.density.initialization import default_velocity_grid, init_density
from src.density.propagation import propagate, tracked_velocity_grid
from src.density.spectral import attitude_spectrum
from src.dynamics.integrator import trajectory
from src.dynamics.pendulum import energies
from src.estimation.bayes import estimate_cycle, posterior_mode, simulate_measurements
from src.geometry.so3 import RENORMALIZE_THRESHOLD, orthogonality_defect, rotation_to_euler313
from src.harmonic.quadrature import So3Quadrature
from src.harmonic.transforms import spectral_energy
from src.marginals.sphere import SphereGrid, attitude_marginal, circular_variance, sphere_marginal
from src.reporting.export import (export_density_slice, export_evidence, export_measurements, export_sphere,
                                  export_trajectory, format_run_summary, read_measurements)
from src.reporting.serialization import format_spectrum_text, read_density, write_density, write_spectrum
from src.utils.logging_config import create_progress_logger, get_logger

logger = get_logger(__name__)


@dataclass
class RunSummary:
    """Files written by one pipeline run and the per-snapshot diagnostics."""
    command: str
    output_dir: Path
    files: List[Path] = field(default_factory=list)
    rows: List[Dict[str, object]] = field(default_factory=list)


def output_metadata(config: RunConfig) -> Dict[str, str]:
    """Header fields attached to every output file."""
    return {"tool": TOOL_NAME, "version": __version__, "config_hash": config.config_hash()}


def build_quadrature(config: RunConfig) -> So3Quadrature:
    return So3Quadrature.build(*config.grid.attitude, rule=config.grid.beta_rule)


def build_initial_density(config: RunConfig) -> Tuple[DensityGrid, float]:
    """Initial density on the configured grids; the velocity box spans mean +- velocity_sigmas sigma."""
    quadrature = build_quadrature(config)
    velocity = default_velocity_grid(config.initial.gaussian, config.grid.velocity, config.grid.velocity_sigmas)
    return init_density(config.initial.von_mises, config.initial.gaussian, quadrature, velocity)


def snapshot_velocity(config: RunConfig, initial: DensityGrid, k: int) -> VelocityGrid:
    """Output velocity box for step k: the initial box, or one that follows the flowed density if tracking."""
    if not config.grid.track_mean or k == 0:
        return initial.velocity
    return tracked_velocity_grid(initial, config.pendulum, config.step, k, config.grid.velocity_sigmas)


def snapshot_diagnostics(d: DensityGrid, config: RunConfig, sphere_grid: SphereGrid) -> Tuple[Dict[str, object], list]:
    """Mass, escaped mass and per-axis circular variance of a snapshot, plus its sphere marginals."""
    marginal = attitude_marginal(d)
    spheres = [sphere_marginal(marginal, axis, sphere_grid, config.grid.circle_nodes) for axis in (1, 2, 3)]
    row: Dict[str, object] = {
        "k": d.k,
        "t": d.time(config.step.h),
        "mass": d.total_mass(),
        "escaped_mass": d.escaped_mass,
    }
    for s in spheres:
        row[f"circvar_axis{s.axis}"] = circular_variance(s)
    return row, spheres


def _write_snapshot(d: DensityGrid, config: RunConfig, out: Path, summary: RunSummary,
                    sphere_grid: SphereGrid, extra: Optional[Dict[str, object]] = None):
    meta = output_metadata(config)
    meta["k"] = str(d.k)
    summary.files.append(write_density(d, out / f"density_k{d.k}.bin", meta))
    row, spheres = snapshot_diagnostics(d, config, sphere_grid)
    for s in spheres:
        summary.files.append(export_sphere(s, out / f"axis{s.axis}_t{d.k}.csv", meta))
    row.update(extra or {})
    summary.rows.append(row)
    logger.info(f"Snapshot k={d.k}: mass {row['mass']:.6f}, escaped {d.escaped_mass:.3e}, "
                f"axis-3 circular variance {row['circvar_axis3']:.4f}")


def _write_summary(config: RunConfig, summary: RunSummary) -> RunSummary:
    meta = output_metadata(config)
    path = summary.output_dir / "summary.txt"
    path.write_text(format_run_summary(summary.command, meta, summary.rows))
    summary.files.append(path)
    return summary


def _prepare_output(config: RunConfig) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_propagate(config: RunConfig) -> RunSummary:
    """
    Initialize the density and write a snapshot for every configured time.

    Each snapshot is pulled back from the initial grid with its total step
    count, so interpolation errors do not compound across snapshots.

    Args:
        config: Validated run configuration

    Returns:
        RunSummary listing density, sphere-marginal and summary files
    """
    start_time = time.time()
    out = _prepare_output(config)
    summary = RunSummary("propagate", out)
    sphere_grid = SphereGrid.build(*config.grid.sphere)

    initial, c = build_initial_density(config)
    logger.info(f"🚀 Propagating density on {initial.shape} nodes to {len(config.snapshot_times)} snapshot(s)")

    steps = config.snapshot_steps
    progress = create_progress_logger(__name__, total=len(steps), prefix="Snapshots",
                                      unit="snapshots")
    for i, k in enumerate(steps):
        target = snapshot_velocity(config, initial, k)
        chunk_progress = create_progress_logger(__name__, total=1, prefix=f"Pull-back k={k}",
                                                unit="chunks")
        d = propagate(initial, config.pendulum, config.step, k, workers=config.workers,
                      chunk_size=config.chunk_size, target_velocity=target, renormalize=config.renormalize,
                      progress=chunk_progress)
        _write_snapshot(d, config, out, summary, sphere_grid)
        progress.update(i + 1, f"snapshot t={config.snapshot_times[i]:g} s")

    logger.info(f"✨ Propagation finished in {time.time() - start_time:.2f} seconds (normalizer c={c:.6e})")
    return _write_summary(config, summary)


def load_or_simulate_measurements(config: RunConfig, measurements_path: Optional[str],
                                  out: Path) -> List[Measurement]:
    """Measurements from CSV, or synthetic ones along the configured trajectory."""
    if measurements_path:
        measurements = read_measurements(measurements_path)
        logger.info(f"Loaded {len(measurements)} measurement(s) from {measurements_path}")
        return measurements

    steps = [config.steps_for(t) for t in config.measurement.times]
    rng = np.random.default_rng(config.measurement.seed)
    measurements = simulate_measurements(config.trajectory.initial_state, config.pendulum, config.step,
                                         config.measurement.model, steps, rng)
    export_measurements(measurements, out / "measurements.csv", output_metadata(config))
    logger.info(f"Simulated {len(measurements)} measurement(s) at steps {steps} (seed {config.measurement.seed})")
    return measurements


def cmd_estimate(config: RunConfig, measurements_path: Optional[str] = None,
                 measurements: Optional[List[Measurement]] = None) -> RunSummary:
    """
    Propagate the initial density through the measurement epochs with Bayes updates.

    Args:
        config: Validated run configuration
        measurements_path: CSV with columns k, z1..z6
        measurements: Measurements given directly; simulated when neither this nor a CSV is given

    Returns:
        RunSummary with posterior snapshots, evidence CSV and summary
    """
    start_time = time.time()
    out = _prepare_output(config)
    summary = RunSummary("estimate", out)
    sphere_grid = SphereGrid.build(*config.grid.sphere)

    if measurements:
        measurements = sorted(measurements, key=lambda m: m.k)
        logger.info(f"Using {len(measurements)} measurement(s) given on the command line")
    else:
        measurements = load_or_simulate_measurements(config, measurements_path, out)
        if not measurements_path:
            summary.files.append(out / "measurements.csv")
    prior, _ = build_initial_density(config)
    logger.info(f"🚀 Estimating over {len(measurements)} epoch(s) on {prior.shape} nodes")

    snapshots = estimate_cycle(prior, config.pendulum, config.step, config.measurement.model, measurements,
                               workers=config.workers, chunk_size=config.chunk_size,
                               recenter=config.grid.track_mean)
    evidence_rows = []
    for snap in snapshots:
        mode = posterior_mode(snap.density)
        euler = rotation_to_euler313(mode.R)
        extra = {"evidence": snap.evidence, "mode_alpha": euler.alpha, "mode_beta": euler.beta,
                 "mode_gamma": euler.gamma}
        _write_snapshot(snap.density, config, out, summary, sphere_grid, extra)
        if snap.evidence is not None:
            evidence_rows.append((snap.k, snap.evidence, snap.log_evidence))

    summary.files.append(export_evidence(out / "evidence.csv", evidence_rows, output_metadata(config)))
    logger.info(f"✨ Estimation finished in {time.time() - start_time:.2f} seconds")
    return _write_summary(config, summary)


def cmd_trajectory(config: RunConfig) -> RunSummary:
    """Single LGVI trajectory with energy and orthogonality diagnostics.

    Attitudes whose orthogonality defect drifts above RENORMALIZE_THRESHOLD are
    projected back onto SO(3), so the reported defect stays at that level.
    """
    out = _prepare_output(config)
    summary = RunSummary("trajectory", out)
    n_steps = config.steps_for(config.trajectory.duration)
    s0 = config.trajectory.initial_state

    logger.info(f"Integrating {n_steps} steps at h={config.step.h} from omega={s0.omega}")
    Rs, omegas = trajectory(s0, config.pendulum, config.step, n_steps, renormalize_threshold=RENORMALIZE_THRESHOLD)
    energy = energies(Rs, omegas, config.pendulum)
    defects = orthogonality_defect(Rs)
    times = np.arange(n_steps + 1) * config.step.h

    summary.files.append(export_trajectory(out / "trajectory.csv", times, Rs, omegas, energy, defects,
                                           output_metadata(config)))
    scale = max(abs(float(energy[0])), 1e-300)
    row = {"steps": n_steps,
           "max_relative_energy_error": float(np.max(np.abs(energy - energy[0]))) / scale,
           "max_orthogonality_defect": float(np.max(defects))}
    summary.rows.append(row)
    logger.info(f"Energy relative deviation {row['max_relative_energy_error']:.3e}, "
                f"orthogonality defect {row['max_orthogonality_defect']:.3e}")
    return _write_summary(config, summary)


def cmd_transform(config: RunConfig, density_path: str) -> RunSummary:
    """Write the attitude spectra of a stored density at every velocity node."""
    out = _prepare_output(config)
    summary = RunSummary("transform", out)
    d = read_density(density_path)
    meta = output_metadata(config)
    meta["k"] = str(d.k)
    spectrum = attitude_spectrum(d, config.bandlimit, workers=config.workers)
    summary.files.append(write_spectrum(spectrum, out / f"spectrum_k{d.k}.bin", meta))

    text_path = out / f"spectrum_k{d.k}.txt"
    text_path.write_text(format_spectrum_text(spectrum, metadata=meta))
    summary.files.append(text_path)

    energy = spectral_energy(spectrum)
    tail = float(energy[-1] / max(float(np.sum(energy)), 1e-300))
    summary.rows.append({"k": d.k, "bandlimit": config.bandlimit, "tail_energy_fraction": tail})
    logger.info(f"Spectrum L={config.bandlimit} at step {d.k}: top-degree energy fraction {tail:.3e}")
    return _write_summary(config, summary)


def cmd_marginal(config: RunConfig, density_path: str) -> RunSummary:
    """Write the three sphere marginals and the attitude marginal of a stored density."""
    out = _prepare_output(config)
    summary = RunSummary("marginal", out)
    d = read_density(density_path)
    sphere_grid = SphereGrid.build(*config.grid.sphere)
    meta = output_metadata(config)
    meta["k"] = str(d.k)
    row, spheres = snapshot_diagnostics(d, config, sphere_grid)
    for s in spheres:
        summary.files.append(export_sphere(s, out / f"axis{s.axis}_t{d.k}.csv", meta))
        row[f"integral_axis{s.axis}"] = s.integral()
    summary.files.append(export_density_slice(d.attitude_values(), d.quadrature, out / f"attitude_t{d.k}.csv", meta))
    summary.rows.append(row)
    return _write_summary(config, summary)
