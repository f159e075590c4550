"""Tests for initial density construction."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

# Add project root to allow imports
import sys, os
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../..')))

from src.core.exceptions import BoxTooSmall
from src.core.models import GaussianParams, VonMisesSo3Params
from src.density.grids import VelocityGrid
from src.density.initialization import (default_velocity_grid, gaussian_factor, gaussian_tail_mass, init_density,
                                        von_mises_factor)
from src.geometry.so3 import exp_so3
from src.harmonic.quadrature import So3Quadrature


@pytest.fixture
def von_mises():
    return VonMisesSo3Params(mean=np.eye(3), kappa=4.0)


@pytest.fixture
def gaussian():
    return GaussianParams(mean=[0.5, 0.0, -0.5], covariance=0.09 * np.eye(3))


def test_von_mises_peak_at_mean(von_mises):
    assert von_mises_factor(np.eye(3), von_mises) == pytest.approx(np.exp(4.0))


def test_von_mises_decays_with_angle(von_mises):
    angles = np.array([0.0, 0.5, 1.0, 2.0])
    values = von_mises_factor(exp_so3(angles[:, None] * np.array([0.0, 0.0, 1.0])), von_mises)
    assert np.all(np.diff(values) < 0)
    assert_allclose(values, np.exp(4.0 * np.cos(angles)))


def test_gaussian_factor_peak_is_one(gaussian):
    assert gaussian_factor(gaussian.mean, gaussian) == pytest.approx(1.0)


def test_tail_mass_of_wide_box_is_tiny(gaussian):
    assert gaussian_tail_mass(gaussian, default_velocity_grid(gaussian, (5, 5, 5))) < 1e-8


def test_init_density_is_normalized(von_mises, gaussian):
    q = So3Quadrature.build(9, 9, 9)
    velocity = default_velocity_grid(gaussian, (7, 7, 7))
    d, c = init_density(von_mises, gaussian, q, velocity)
    assert d.total_mass() == pytest.approx(1.0, abs=1e-12)
    assert d.normalizer == c
    assert c > 0.0
    assert d.k == 0
    assert d.escaped_mass == 0.0


def test_init_density_peak_at_mean(von_mises, gaussian):
    q = So3Quadrature.build(9, 9, 9)
    d, _ = init_density(von_mises, gaussian, q, default_velocity_grid(gaussian, (7, 7, 7)))
    idx = np.unravel_index(np.argmax(d.values), d.shape)
    assert_allclose(d.quadrature.rotations()[idx[:3]], np.eye(3), atol=1e-12)
    assert_allclose(d.velocity.nodes()[idx[3:]], gaussian.mean, atol=1e-12)


def test_init_density_rejects_small_box(von_mises, gaussian):
    q = So3Quadrature.build(5, 5, 5)
    narrow = VelocityGrid.centered(gaussian.mean, [0.3, 0.3, 0.3], (5, 5, 5))
    with pytest.raises(BoxTooSmall) as exc:
        init_density(von_mises, gaussian, q, narrow)
    assert exc.value.tail_mass > 1e-6
