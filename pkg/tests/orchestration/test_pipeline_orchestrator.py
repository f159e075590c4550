"""End-to-end tests of the pipelines on small grids."""

import numpy as np
import pandas as pd
import pytest

# Add project root to allow imports
import sys, os
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../..')))

from src import TOOL_NAME, __version__
from src.config.settings import load_run_config
from src.harmonic.quadrature import So3Quadrature
from src.orchestration import pipeline_orchestrator
from src.reporting.export import read_measurements, read_metadata, read_sphere
from src.reporting.serialization import read_density, read_density_metadata, read_spectrum, read_spectrum_metadata

SMALL_GRIDS = {
    "grid.attitude": "5, 5, 5",
    "grid.velocity": "3, 3, 3",
    "grid.sphere": "9, 17",
    "grid.circle_nodes": "8",
    "spectrum.bandlimit": "2",
    "initial.kappa": "4",
    "initial.sigma": "0.3",
    "measurement.sigma_direction": "0.3",
    "measurement.sigma_omega": "0.3",
    "measurement.times": "0.01, 0.02",
    "run.snapshot_times": "0, 0.02",
    "run.chunk_size": "500",
    "trajectory.duration": "0.05",
}


def small_config(out, **extra):
    overrides = dict(SMALL_GRIDS, **{"output.dir": str(out)})
    overrides.update(extra)
    return load_run_config(overrides=overrides, environ={})


@pytest.fixture(scope="module")
def propagated(tmp_path_factory):
    out = tmp_path_factory.mktemp("propagate")
    config = small_config(out, **{"run.workers": "2"})
    return config, pipeline_orchestrator.cmd_propagate(config)


def test_propagate_writes_every_snapshot(propagated):
    config, summary = propagated
    out = summary.output_dir
    for k in (0, 2):
        assert (out / f"density_k{k}.bin").exists()
        for axis in (1, 2, 3):
            assert (out / f"axis{axis}_t{k}.csv").exists()
    assert (out / "summary.txt").exists()
    assert [row["k"] for row in summary.rows] == [0, 2]
    assert summary.rows[0]["mass"] == pytest.approx(1.0, abs=1e-12)
    assert len(summary.files) == 9


def test_outputs_carry_config_hash(propagated):
    config, summary = propagated
    out = summary.output_dir
    assert read_density_metadata(out / "density_k2.bin")["config_hash"] == config.config_hash()
    assert read_metadata(out / "axis3_t2.csv")["config_hash"] == config.config_hash()
    assert config.config_hash() in (out / "summary.txt").read_text()


def test_snapshot_velocity_box_follows_the_density(propagated):
    config, summary = propagated
    initial = read_density(summary.output_dir / "density_k0.bin")
    moved = read_density(summary.output_dir / "density_k2.bin")
    assert moved.k == 2
    assert moved.velocity.shape == initial.velocity.shape
    assert np.all(moved.velocity.half_widths >= initial.velocity.half_widths)
    assert not np.allclose(moved.velocity.center, initial.velocity.center)


@pytest.mark.parametrize("workers", ["1", "4", "8"])
def test_propagate_is_independent_of_workers(tmp_path, propagated, workers):
    _, serial = propagated
    threaded = pipeline_orchestrator.cmd_propagate(small_config(tmp_path, **{"run.workers": workers}))
    assert [f.name for f in serial.files] == [f.name for f in threaded.files]
    for a, b in zip(serial.files, threaded.files):
        assert a.read_bytes() == b.read_bytes(), a.name
    assert serial.rows == threaded.rows


def test_transform_of_stored_density(tmp_path, propagated):
    _, summary = propagated
    config = small_config(tmp_path)
    result = pipeline_orchestrator.cmd_transform(config, str(summary.output_dir / "density_k2.bin"))
    spectrum = read_spectrum(tmp_path / "spectrum_k2.bin")
    assert spectrum.bandlimit == 2
    assert spectrum.batch_shape == (3, 3, 3)
    text = (tmp_path / "spectrum_k2.txt").read_text()
    assert text.startswith("# SO(3) spectrum")
    assert f"# config_hash: {config.config_hash()}\n" in text
    assert read_spectrum_metadata(tmp_path / "spectrum_k2.bin") == {"tool": TOOL_NAME, "version": __version__,
                                                                 "config_hash": config.config_hash(), "k": "2"}
    assert 0.0 <= result.rows[0]["tail_energy_fraction"] <= 1.0


def test_marginal_of_stored_density(tmp_path, propagated):
    _, summary = propagated
    result = pipeline_orchestrator.cmd_marginal(small_config(tmp_path), str(summary.output_dir / "density_k0.bin"))
    s = read_sphere(tmp_path / "axis1_t0.csv")
    assert s.axis == 1
    assert s.grid.shape == (9, 17)
    assert np.all(s.values >= 0.0)
    assert set(result.rows[0]) >= {"integral_axis1", "integral_axis2", "integral_axis3", "circvar_axis3"}
    attitude = pd.read_csv(tmp_path / "attitude_t0.csv", comment="#", float_precision="round_trip")
    weights = So3Quadrature.build(5, 5, 5).weights.ravel()
    assert np.sum(weights * attitude["density"].to_numpy()) == pytest.approx(1.0, abs=1e-12)


def test_estimate_with_simulated_measurements(tmp_path):
    summary = pipeline_orchestrator.cmd_estimate(small_config(tmp_path))
    measurements = read_measurements(tmp_path / "measurements.csv")
    assert [m.k for m in measurements] == [1, 2]
    evidence = pd.read_csv(tmp_path / "evidence.csv", comment="#")
    assert evidence["k"].tolist() == [1, 2]
    assert np.all(evidence["evidence"] > 0.0)
    assert [row["k"] for row in summary.rows] == [1, 2]
    for row in summary.rows:
        assert row["mass"] == pytest.approx(1.0, abs=1e-12)
    assert (tmp_path / "density_k2.bin").exists()


def test_estimate_reads_measurement_file(tmp_path):
    source = tmp_path / "given.csv"
    source.write_text("k,z1,z2,z3,z4,z5,z6\n1,1,0,0,4.14,4.14,4.14\n")
    out = tmp_path / "run"
    summary = pipeline_orchestrator.cmd_estimate(small_config(out), str(source))
    assert not (out / "measurements.csv").exists()
    assert [row["k"] for row in summary.rows] == [1]


def test_trajectory_diagnostics(tmp_path):
    summary = pipeline_orchestrator.cmd_trajectory(small_config(tmp_path))
    frame = pd.read_csv(tmp_path / "trajectory.csv", comment="#")
    assert len(frame) == 6
    assert frame["t"].iloc[-1] == pytest.approx(0.05)
    row = summary.rows[0]
    assert row["steps"] == 5
    assert row["max_relative_energy_error"] < 1e-3
    assert row["max_orthogonality_defect"] < 1e-12
