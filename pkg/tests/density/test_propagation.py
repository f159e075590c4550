"""Tests for density propagation by pull-back along the backward flow."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

# Add project root to allow imports
import sys, os
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../..')))

from src.core.exceptions import OutOfSupport
from src.core.models import GaussianParams, PendulumParams, StepConfig, VonMisesSo3Params
from src.density import propagation
from src.density.grids import DensityGrid, VelocityGrid
from src.density.initialization import default_velocity_grid, gaussian_factor, init_density, von_mises_factor
from src.density.propagation import evaluate, propagate, pullback, tracked_velocity_grid
from src.dynamics.integrator import backward_flow_batch, flow_batch
from src.geometry.so3 import random_rotations
from src.harmonic.quadrature import So3Quadrature
from src.marginals.sphere import SphereGrid, attitude_marginal, circular_variance, sphere_marginal


@pytest.fixture(scope="module")
def pendulum():
    return PendulumParams.default()


@pytest.fixture(scope="module")
def step_config():
    return StepConfig(h=0.01)


@pytest.fixture(scope="module")
def small_density():
    vm = VonMisesSo3Params(mean=np.eye(3), kappa=2.0)
    gp = GaussianParams(mean=[0.0, 0.0, 0.0], covariance=0.25 * np.eye(3))
    d, _ = init_density(vm, gp, So3Quadrature.build(5, 5, 5), default_velocity_grid(gp, (5, 5, 5)))
    return d


def test_zero_steps_is_identity(small_density, pendulum, step_config):
    assert propagate(small_density, pendulum, step_config, 0) is small_density


def test_negative_steps_rejected(small_density, pendulum, step_config):
    with pytest.raises(ValueError):
        propagate(small_density, pendulum, step_config, -1)


def test_step_index_advances(small_density, pendulum, step_config):
    d = propagate(small_density, pendulum, step_config, 2)
    assert d.k == 2
    assert d.shape == small_density.shape
    assert np.all(d.values >= 0.0)


def test_worker_count_does_not_change_output(small_density, pendulum, step_config):
    serial = propagate(small_density, pendulum, step_config, 3, workers=1, chunk_size=1000)
    threaded = propagate(small_density, pendulum, step_config, 3, workers=4, chunk_size=1000)
    assert np.array_equal(serial.values, threaded.values)
    assert serial.escaped_mass == threaded.escaped_mass


def test_value_is_constant_along_trajectories(small_density, pendulum, step_config):
    q = small_density.quadrature
    R0 = q.rotations()[1, 2, 3]
    omega0 = small_density.velocity.nodes()[2, 1, 3]
    R3, omega3 = flow_batch(R0[None], omega0[None], pendulum, step_config, 3)
    values, inside = pullback(small_density, R3, omega3, pendulum, step_config, 3)
    assert inside[0]
    assert values[0] == pytest.approx(small_density.values[1, 2, 3, 2, 1, 3], rel=1e-8)


def test_grid_values_match_pointwise_pullback(small_density, pendulum, step_config):
    d = propagate(small_density, pendulum, step_config, 2)
    R = small_density.quadrature.rotations()[2, 1, 0]
    omegas = small_density.velocity.nodes()[:, 2, 2]
    values, _ = pullback(small_density, np.repeat(R[None], len(omegas), axis=0), omegas,
                         pendulum, step_config, 2)
    assert_allclose(d.values[2, 1, 0, :, 2, 2], values, rtol=1e-12, atol=1e-300)


def test_shifted_box_reports_escaped_mass(small_density, pendulum, step_config):
    target = small_density.velocity.recentered([1.5, 0.0, 0.0])
    d = propagate(small_density, pendulum, step_config, 1, target_velocity=target)
    assert d.escaped_mass > 0.0
    # the outermost nodes at Wx = 4.5 pull back from beyond the initial box at Wx = 3
    assert np.all(d.values[:, :, :, -1] == 0.0)


def test_renormalize_restores_unit_mass(small_density, pendulum, step_config):
    target = small_density.velocity.recentered([1.5, 0.0, 0.0])
    d = propagate(small_density, pendulum, step_config, 1, target_velocity=target, renormalize=True)
    assert d.total_mass() == pytest.approx(1.0, abs=1e-12)


def test_evaluate_at_node(small_density):
    R = small_density.quadrature.rotations()[2, 2, 2]
    omega = small_density.velocity.nodes()[1, 2, 3]
    assert evaluate(small_density, R, omega) == pytest.approx(small_density.values[2, 2, 2, 1, 2, 3], rel=1e-10)


def test_evaluate_outside_box_raises(small_density):
    with pytest.raises(OutOfSupport):
        evaluate(small_density, np.eye(3), [10.0, 0.0, 0.0])


def test_interpolator_is_built_once_per_density(small_density, monkeypatch):
    built = []
    original = propagation.DensityInterpolator
    monkeypatch.setattr(propagation, "DensityInterpolator", lambda d: built.append(d) or original(d))
    fresh = small_density.with_values(small_density.values.copy())
    for omega in ([0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [0.0, -0.5, 0.25]):
        evaluate(fresh, np.eye(3), omega)
    pullback(fresh, np.eye(3)[None], np.zeros((1, 3)), PendulumParams.default(), StepConfig(h=0.01), 1)
    assert built == [fresh]
    assert propagation.interpolator_for(fresh) is propagation.interpolator_for(fresh)


# --- Tracked velocity box ---

def test_tracked_box_at_step_zero_is_unchanged(small_density, pendulum, step_config):
    assert tracked_velocity_grid(small_density, pendulum, step_config, 0, 6.0) is small_density.velocity


def test_tracked_box_widens_with_velocity_spread(small_density, pendulum, step_config):
    # gravity torques from the spread-out attitudes fan the angular velocities out in x and y
    box = tracked_velocity_grid(small_density, pendulum, step_config, 20, 6.0)
    assert box.shape == small_density.velocity.shape
    assert np.all(box.half_widths >= small_density.velocity.half_widths)
    assert np.all(box.half_widths[:2] > small_density.velocity.half_widths[:2])


def test_tracked_box_is_deterministic(small_density, pendulum, step_config):
    first = tracked_velocity_grid(small_density, pendulum, step_config, 5, 6.0)
    second = tracked_velocity_grid(small_density, pendulum, step_config, 5, 6.0)
    assert_allclose(first.lower, second.lower, rtol=0.0, atol=0.0)
    assert_allclose(first.upper, second.upper, rtol=0.0, atol=0.0)


# --- Conservation and convergence ---

def gentle_pendulum():
    return PendulumParams(J=np.diag([0.13, 0.28, 0.17]), m=1.0, rho=[0.0, 0.0, 0.3], g=1.0)


@pytest.mark.slow
def test_mass_is_conserved_over_a_tenth_of_a_second(step_config):
    vm = VonMisesSo3Params(mean=np.eye(3), kappa=2.0)
    gp = GaussianParams(mean=[0.0, 0.0, 0.0], covariance=0.25 * np.eye(3))
    d0, _ = init_density(vm, gp, So3Quadrature.build(9, 9, 9), default_velocity_grid(gp, (11, 11, 11), 5.5))
    d10 = propagate(d0, gentle_pendulum(), step_config, 10, workers=4)
    assert d10.time(step_config.h) == pytest.approx(0.1)
    assert d10.total_mass() == pytest.approx(1.0, abs=0.05)
    assert d10.escaped_mass < 1e-3


def smooth_density(attitude_nodes, velocity_nodes):
    """exp(kappa/2 (tr R - 1)) exp(-|W|^2 / (2 s^2)) sampled without normalization on a +-1 box."""
    q = So3Quadrature.build(attitude_nodes, attitude_nodes, attitude_nodes)
    velocity = VelocityGrid.build([-1.0] * 3, [1.0] * 3, [velocity_nodes] * 3)
    attitude = von_mises_factor(q.rotations(), SMOOTH_VM)
    speed = gaussian_factor(velocity.nodes().reshape(-1, 3), SMOOTH_GP).reshape(velocity.shape)
    return DensityGrid(q, velocity, attitude[:, :, :, None, None, None] * speed[None, None, None])


SMOOTH_VM = VonMisesSo3Params(mean=np.eye(3), kappa=0.5)
SMOOTH_GP = GaussianParams(mean=[0.0, 0.0, 0.0], covariance=2.25 * np.eye(3))


@pytest.mark.slow
def test_pullback_error_falls_at_second_order_under_refinement(step_config):
    rng = np.random.default_rng(41)
    R = random_rotations(2000, rng)
    omega = rng.uniform(-0.6, 0.6, size=(2000, 3))
    p = gentle_pendulum()
    R_back, omega_back = backward_flow_batch(R, omega, p, step_config, 10)
    exact = von_mises_factor(R_back, SMOOTH_VM) * gaussian_factor(omega_back, SMOOTH_GP)

    errors = []
    for attitude_nodes, velocity_nodes in ((9, 5), (17, 9)):
        values, inside = pullback(smooth_density(attitude_nodes, velocity_nodes), R, omega, p, step_config, 10)
        assert np.all(inside)
        errors.append(np.mean(np.abs(values - exact)))
    assert errors[1] < errors[0]
    assert errors[0] / errors[1] >= 3.0


def axis3_circular_variance(d, sphere_grid):
    return circular_variance(sphere_marginal(attitude_marginal(d), 3, sphere_grid, 32))


@pytest.mark.slow
def test_attitude_spread_grows_for_free_body_with_uncertain_rate():
    body = PendulumParams(J=0.2 * np.eye(3), m=1.0, rho=[0.0, 0.0, 0.0], g=9.81)
    c = StepConfig(h=0.02)
    vm = VonMisesSo3Params(mean=np.eye(3), kappa=2.0)
    gp = GaussianParams(mean=[0.0, 0.0, 0.0], covariance=4.0 * np.eye(3))
    d0, _ = init_density(vm, gp, So3Quadrature.build(9, 9, 9), default_velocity_grid(gp, (7, 7, 7), 5.5))
    sphere_grid = SphereGrid.build(33, 65)

    spread = [axis3_circular_variance(propagate(d0, body, c, k, workers=4), sphere_grid) for k in (0, 10, 20)]
    assert spread[1] > spread[0] + 0.02
    assert spread[2] > spread[1] + 0.02
