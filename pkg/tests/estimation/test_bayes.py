"""Tests for Bayesian measurement updates and the estimation cycle."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

# Add project root to allow imports
import sys, os
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../..')))

from src.core.exceptions import DegenerateUpdate, ValidationError
from src.core.models import (GaussianParams, Measurement, MeasurementModel, PendulumParams, RigidBodyState,
                             StepConfig, VonMisesSo3Params)
from src.density.initialization import default_velocity_grid, init_density
from src.dynamics.integrator import flow
from src.estimation.bayes import (bayes_update, estimate_cycle, likelihood, log_likelihood_grid,
                                  measurement_function, posterior_mode, simulate_measurements,
                                  update_with_log_likelihood)
from src.geometry.so3 import exp_so3, rotation_angle
from src.harmonic.quadrature import So3Quadrature
from src.marginals.sphere import SphereGrid, attitude_marginal, circular_variance, sphere_marginal


def make_prior(kappa, sigma, attitude=(9, 9, 9), velocity=(3, 3, 3)):
    vm = VonMisesSo3Params(mean=np.eye(3), kappa=kappa)
    gp = GaussianParams(mean=[0.0, 0.0, 0.0], covariance=sigma ** 2 * np.eye(3))
    d, _ = init_density(vm, gp, So3Quadrature.build(*attitude), default_velocity_grid(gp, velocity))
    return d


@pytest.fixture(scope="module")
def prior():
    return make_prior(8.0, 0.3)


@pytest.fixture
def model():
    return MeasurementModel.isotropic([1.0, 0.0, 0.0], 0.1, 0.2)


def test_measurement_function(model):
    z = measurement_function(np.eye(3), [0.1, 0.2, 0.3], model)
    assert_allclose(z, [1.0, 0.0, 0.0, 0.1, 0.2, 0.3])
    R = exp_so3([0.0, 0.0, np.pi / 2])
    assert_allclose(measurement_function(R, np.zeros(3), model)[:3], R.T @ [1.0, 0.0, 0.0], atol=1e-15)


def test_likelihood_peak_value(model):
    z = Measurement(z=[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], k=0)
    peak = (2.0 * np.pi) ** -3 / (0.1 ** 3 * 0.2 ** 3)
    assert likelihood(model, z, np.eye(3), np.zeros(3)) == pytest.approx(peak, rel=1e-12)


def test_log_likelihood_grid_matches_pointwise(prior, model):
    z = Measurement(z=[0.9, 0.1, 0.0, 0.05, 0.0, -0.05], k=0)
    grid = log_likelihood_grid(model, z, prior)
    R = prior.quadrature.rotations()[3, 4, 5]
    omega = prior.velocity.nodes()[0, 1, 2]
    assert grid[3, 4, 5, 0, 1, 2] == pytest.approx(np.log(likelihood(model, z, R, omega)), abs=1e-9)


def test_flat_likelihood_leaves_prior_unchanged(prior):
    result = update_with_log_likelihood(prior, np.zeros(prior.shape))
    assert result.evidence == pytest.approx(1.0, abs=1e-12)
    assert_allclose(result.density.values, prior.values, rtol=1e-12)


def test_posterior_has_unit_mass(prior, model):
    z = Measurement(z=[1.0, 0.05, 0.0, 0.0, 0.0, 0.0], k=0)
    result = bayes_update(prior, model, z)
    assert result.density.total_mass() == pytest.approx(1.0, abs=1e-12)
    assert result.log_evidence == pytest.approx(np.log(result.evidence))


def test_consistent_measurement_has_higher_evidence(prior, model):
    consistent = Measurement(z=[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], k=0)
    turned = exp_so3([0.0, 0.0, 0.5]).T @ [1.0, 0.0, 0.0]
    rotated = Measurement(z=np.concatenate([turned, np.zeros(3)]), k=0)
    assert bayes_update(prior, model, consistent).evidence > bayes_update(prior, model, rotated).evidence


def test_impossible_measurement_is_degenerate(prior):
    with pytest.raises(DegenerateUpdate):
        update_with_log_likelihood(prior, np.full(prior.shape, -1e4))
    with pytest.raises(DegenerateUpdate):
        update_with_log_likelihood(prior, np.full(prior.shape, -np.inf))


def test_direction_measurement_sharpens_axis_marginal():
    prior = make_prior(1.0, 0.3)
    model = MeasurementModel.isotropic([0.0, 0.0, 1.0], 0.2, 0.2)
    posterior = bayes_update(prior, model, Measurement(z=[0.0, 0.0, 1.0, 0.0, 0.0, 0.0], k=0)).density
    sphere = SphereGrid.build(17, 33)
    before = circular_variance(sphere_marginal(attitude_marginal(prior), 3, sphere, 16))
    after = circular_variance(sphere_marginal(attitude_marginal(posterior), 3, sphere, 16))
    assert after < before


def test_measurements_must_be_ordered(prior, model):
    p, c = PendulumParams.default(), StepConfig()
    out_of_order = [Measurement(z=np.zeros(6), k=3), Measurement(z=np.zeros(6), k=1)]
    with pytest.raises(ValidationError):
        estimate_cycle(prior, p, c, model, out_of_order)
    with pytest.raises(ValidationError):
        estimate_cycle(prior.with_values(prior.values, k=5), p, c, model, [Measurement(z=np.zeros(6), k=2)])


def test_horizon_without_measurements(prior, model):
    snapshots = estimate_cycle(prior, PendulumParams.default(), StepConfig(), model, [], horizon=2)
    assert len(snapshots) == 1
    assert snapshots[0].k == 2
    assert snapshots[0].evidence is None


def test_simulated_measurements_are_reproducible(model):
    truth = RigidBodyState(R=np.eye(3), omega=[0.3, -0.2, 0.1])
    p, c = PendulumParams.default(), StepConfig()
    first = simulate_measurements(truth, p, c, model, [4, 2], np.random.default_rng(7))
    second = simulate_measurements(truth, p, c, model, [2, 4], np.random.default_rng(7))
    assert [m.k for m in first] == [2, 4]
    for a, b in zip(first, second):
        assert_allclose(a.z, b.z)


def test_posterior_mode_is_a_grid_state(prior):
    mode = posterior_mode(prior)
    assert rotation_angle(mode.R, np.eye(3)) == pytest.approx(0.0, abs=1e-6)
    assert_allclose(mode.omega, 0.0, atol=1e-15)


def test_estimation_recovers_resting_truth():
    truth = RigidBodyState(R=np.eye(3), omega=np.zeros(3))
    p, c = PendulumParams.default(), StepConfig(h=0.01)
    model = MeasurementModel.isotropic([1.0, 0.0, 0.0], 0.05, 0.05)
    measurements = simulate_measurements(truth, p, c, model, [2], np.random.default_rng(11))
    prior = make_prior(4.0, 0.3, attitude=(13, 13, 13), velocity=(5, 5, 5))

    snapshots = estimate_cycle(prior, p, c, model, measurements, workers=2, chunk_size=50000)
    assert len(snapshots) == 1
    posterior = snapshots[0].density
    assert posterior.k == 2
    assert posterior.total_mass() == pytest.approx(1.0, abs=1e-12)
    assert np.isfinite(snapshots[0].log_evidence)

    mode = posterior_mode(posterior)
    assert rotation_angle(mode.R, truth.R) < 0.6
    assert_allclose(mode.omega, 0.0, atol=1e-12)


@pytest.mark.slow
def test_estimation_follows_spinning_truth():
    # a stable spin about the major axis turns the body by pi/12 per step
    c = StepConfig(h=0.05)
    spin = np.sin(np.pi / 12) / c.h
    body = PendulumParams(J=np.diag([0.13, 0.17, 0.28]), m=1.0, rho=[0.0, 0.0, 0.0], g=9.81)
    truth = RigidBodyState(R=np.eye(3), omega=[0.0, 0.0, spin])
    model = MeasurementModel.isotropic([1.0, 0.0, 0.0], 0.05, 0.05)
    measurements = simulate_measurements(truth, body, c, model, [2, 4, 6, 8, 10], np.random.default_rng(5))

    vm = VonMisesSo3Params(mean=np.eye(3), kappa=4.0)
    gp = GaussianParams(mean=[0.0, 0.0, spin], covariance=0.09 * np.eye(3))
    prior, _ = init_density(vm, gp, So3Quadrature.build(13, 13, 13), default_velocity_grid(gp, (5, 5, 5)))
    snapshots = estimate_cycle(prior, body, c, model, measurements, workers=4, recenter=True)
    assert [s.k for s in snapshots] == [2, 4, 6, 8, 10]

    final = flow(truth, body, c, 10)
    mode = posterior_mode(snapshots[-1].density)
    assert rotation_angle(final.R, np.eye(3)) > 2.0
    assert rotation_angle(mode.R, final.R) < 0.3
    assert np.linalg.norm(mode.omega - final.omega) < 0.5
