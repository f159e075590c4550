"""Tests for layered run configuration."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

# Add project root to allow imports
import sys, os
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../..')))

from src.config.settings import DEFAULTS, env_name, load_run_config
from src.core.exceptions import ConfigurationError


def test_defaults_build_a_run_config():
    config = load_run_config(environ={})
    assert config.step.h == 0.01
    assert config.grid.attitude == (25, 25, 25)
    assert config.grid.velocity == (9, 9, 9)
    assert config.grid.beta_rule == "simpson"
    assert config.grid.track_mean is True
    assert config.bandlimit == 10
    assert config.initial.von_mises.kappa == 8.0
    assert_allclose(config.pendulum.J, np.diag([0.13, 0.28, 0.17]))
    assert_allclose(config.initial.gaussian.covariance, 0.1414 ** 2 * np.eye(3))
    assert config.snapshot_steps == [0, 10, 20, 40, 100]
    assert config.workers == 4
    assert config.renormalize is False


def test_config_file_values(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("# small run\n"
                    "grid.attitude = 9, 9, 9   # coarse\n"
                    "grid.beta_rule = exact\n"
                    "initial.kappa = 2.5\n"
                    "pendulum.J = 0.2, 0, 0, 0, 0.3, 0, 0, 0, 0.4\n"
                    "output.dir = \"results\"\n")
    config = load_run_config(str(path), environ={})
    assert config.grid.attitude == (9, 9, 9)
    assert config.grid.beta_rule == "exact"
    assert config.initial.von_mises.kappa == 2.5
    assert_allclose(config.pendulum.J, np.diag([0.2, 0.3, 0.4]))
    assert str(config.output_dir) == "results"


def test_layering_order(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("run.workers = 2\nrun.chunk_size = 100\n")
    environ = {env_name("run.workers"): "3", env_name("run.chunk_size"): "200"}
    config = load_run_config(str(path), overrides={"run.workers": "4"}, environ=environ)
    assert config.workers == 4
    assert config.chunk_size == 200


def test_env_name():
    assert env_name("run.workers") == "SO3PROP_RUN_WORKERS"
    assert env_name("pendulum.J.diag") == "SO3PROP_PENDULUM_J_DIAG"


def test_unknown_environment_variable_is_ignored(caplog):
    config = load_run_config(environ={"SO3PROP_NOT_A_KEY": "1", "HOME": "/tmp"})
    assert config.workers == 4
    assert "SO3PROP_NOT_A_KEY" in caplog.text


def test_unknown_key_is_rejected(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("grid.nodes = 5\n")
    with pytest.raises(ConfigurationError) as exc:
        load_run_config(str(path), environ={})
    assert exc.value.field == "grid.nodes"


def test_malformed_line_is_rejected(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("grid.attitude 9, 9, 9\n")
    with pytest.raises(ConfigurationError):
        load_run_config(str(path), environ={})


def test_missing_file_is_rejected(tmp_path):
    with pytest.raises(ConfigurationError):
        load_run_config(str(tmp_path / "missing.conf"), environ={})


@pytest.mark.parametrize("key, value", [
    ("grid.attitude", "8, 9, 9"),
    ("grid.velocity", "9, 9"),
    ("integrator.h", "fast"),
    ("run.workers", "0"),
    ("run.snapshot_times", "0.2, 0.1"),
    ("grid.beta_rule", "gauss"),
    ("grid.track_mean", "maybe"),
])
def test_bad_values_name_their_field(key, value):
    with pytest.raises(ConfigurationError) as exc:
        load_run_config(overrides={key: value}, environ={})
    assert exc.value.field == key


@pytest.mark.parametrize("key, value, field", [
    ("integrator.h", "-0.01", "integrator"),
    ("pendulum.mass", "0", "pendulum"),
    ("initial.kappa", "-1", "initial.kappa"),
    ("initial.sigma", "0", "initial.covariance"),
    ("grid.circle_nodes", "4", "grid.circle_nodes"),
    ("measurement.sigma_omega", "0", "measurement.sigma_direction"),
])
def test_invalid_models_name_their_section(key, value, field):
    with pytest.raises(ConfigurationError) as exc:
        load_run_config(overrides={key: value}, environ={})
    assert exc.value.field == field


def test_hash_is_stable_and_sensitive():
    first = load_run_config(environ={})
    second = load_run_config(environ={})
    changed = load_run_config(overrides={"initial.kappa": "9"}, environ={})
    assert first.config_hash() == second.config_hash()
    assert first.config_hash() != changed.config_hash()
    elsewhere = load_run_config(overrides={"run.workers": "8", "output.dir": "elsewhere"}, environ={})
    assert first.config_hash() == elsewhere.config_hash()
    assert len(first.config_hash()) == 64


def test_rendered_covers_every_key():
    rendered = load_run_config(environ={}).rendered()
    assert rendered.count("\n") == len(DEFAULTS)
    assert "grid.track_mean = true\n" in rendered


def test_steps_for_rounds_to_nearest_step(caplog):
    config = load_run_config(environ={})
    assert config.steps_for(0.25) == 25
    assert config.steps_for(0.123) == 12
    assert "not a multiple" in caplog.text


def test_overrides_accept_python_values():
    config = load_run_config(overrides={"run.workers": 2, "grid.attitude": (5, 5, 5), "run.renormalize": True},
                             environ={})
    assert config.workers == 2
    assert config.grid.attitude == (5, 5, 5)
    assert config.renormalize is True
