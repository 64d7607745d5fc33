import math

import numpy as np
import pytest

import chronoclock.clockExceptions as ex
from chronoclock import pdx
from chronoclock.dynamics import StepPotentialSpec, evolve_step_potential
from chronoclock.lattice import Region, gaussian_state, make_grid


def schroedinger_residual(g, x, tau, V=0.0, m=1.0, h=1e-4):
    """|i dg/dtau + g''/2m - V g| relative to |g| by central differences."""
    dtau = (g(x, tau + h) - g(x, tau - h)) / (2.0 * h)
    dxx = (g(x + h, tau) - 2.0 * g(x, tau) + g(x - h, tau)) / h ** 2
    return abs(1j * dtau + dxx / (2.0 * m) - V * g(x, tau)) / abs(g(x, tau))


@pytest.mark.parametrize("x, tau", [(1.3, 0.7), (-2.0, 1.5), (0.4, 3.0)])
def test_free_propagator_solves_schroedinger(x, tau):
    def g(x, tau):
        return pdx.free_propagator(x, tau, 0.2, 1.0)
    assert schroedinger_residual(g, x, tau) < 1e-5


@pytest.mark.parametrize("x, tau, V", [(0.8, 0.6, 0.5), (2.0, 1.2, 3.0)])
def test_image_propagator_solves_schroedinger(x, tau, V):
    def g(x, tau):
        return pdx.restricted_propagator_image(x, tau, 1.5, V, 1.0)
    assert schroedinger_residual(g, x, tau, V) < 1e-5


def test_image_propagator_vanishes_outside_half_line():
    assert pdx.restricted_propagator_image(0.0, 1.0, 2.0, 0.5) == 0.0
    assert pdx.restricted_propagator_image(-1.0, 1.0, 2.0, 0.5) == 0.0
    assert pdx.restricted_propagator_image(1.0, 1.0, -2.0, 0.5) == 0.0
    values = pdx.restricted_propagator_image(np.array([-1.0, 1.0]), 1.0, 2.0, 0.5)
    assert values[0] == 0.0 and values[1] != 0.0


@pytest.mark.parametrize("tau, x_from, V", [(1.0, 2.0, 0.5), (0.5, 1.0, 3.0), (2.0, 3.0, 0.0)])
def test_image_slope_matches_finite_difference(tau, x_from, V):
    h = 1e-5
    analytic = pdx.restricted_propagator_slope(tau, x_from, V)
    numeric = pdx.restricted_propagator_image(h, tau, x_from, V) / h
    assert abs(numeric - analytic) / abs(analytic) < 1e-8


def test_potential_phase_runs_forward():
    plain = pdx.restricted_propagator_image(1.0, 2.0, 1.5, 0.0)
    shifted = pdx.restricted_propagator_image(1.0, 2.0, 1.5, 0.75)
    assert shifted == pytest.approx(plain * np.exp(-1.5j), abs=1e-14)


def test_propagators_reject_non_positive_time():
    with pytest.raises(ex.InputException):
        pdx.free_propagator(1.0, 0.0, 0.0)
    with pytest.raises(ex.InputException):
        pdx.restricted_propagator_slope(-1.0, 1.0, 0.0)


def test_free_gaussian_follows_grid_evolution():
    grid = make_grid(-40.0, 40.0, 1024)
    a, p0, sigma, t = 2.0, 1.0, 1.0, 1.0
    psi = gaussian_state(grid, a, p0, sigma)
    value, slope = pdx.free_gaussian(grid.x, 0.0, a, p0, sigma)
    np.testing.assert_allclose(value, psi.amplitudes, atol=1e-10)
    evolved = evolve_step_potential(psi, StepPotentialSpec(0.0, Region()), t / 200, 200, stride=200)[-1]
    value, _ = pdx.free_gaussian(grid.x, t, a, p0, sigma)
    np.testing.assert_allclose(value, evolved.amplitudes, atol=1e-9)


def test_richardson_limit_is_exact_for_polynomials():
    etas = np.array([0.4, 0.2, 0.1])
    values = 1.0 + 2.0j * etas + 3.0 * etas ** 2
    assert pdx.richardson_limit(etas, values) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ex.InputException):
        pdx.richardson_limit([0.1], [1.0])
    with pytest.raises(ex.InputException):
        pdx.richardson_limit([0.1, 0.1], [1.0, 2.0])


@pytest.mark.parametrize("x", [0.5, 1.0, -1.0])
def test_scattering_quadrature_matches_closed_form(x):
    value = pdx.scattering_integral_quadrature(x, 1.0)
    reference = pdx.scattering_integral(x, 1.0)
    if x < 0:
        reference = -reference
    assert abs(value - reference) / abs(reference) < 1e-3


def test_scattering_rejects_degenerate_input():
    with pytest.raises(ex.InputException):
        pdx.scattering_integral(1.0, 0.0)
    with pytest.raises(ex.InputException):
        pdx.scattering_integral_quadrature(0.0, 1.0)


@pytest.mark.parametrize("x", [-0.5, -1.0])
def test_wall_oracle_matches_green_function(x):
    value = pdx.wall_integral_quadrature(x, 1.0, 100.0)
    reference = pdx.wall_green_function(x, 1.0, 100.0)
    assert abs(value - reference) / abs(reference) < 1e-2


def test_large_wall_form():
    exact = pdx.wall_green_function(-1.0, 1.0, 1e4)
    printed = pdx.strong_coupling_wall_integral(-1.0, 1.0, 1e4)
    assert abs(printed - exact) / abs(exact) < 0.02
    # the two differ by the ratio (k + K) / sqrt(2 m V)
    k, K = math.sqrt(2.0), math.sqrt(2.0 * 10001.0)
    assert printed / exact == pytest.approx((k + K) / math.sqrt(2.0 * 1e4), rel=1e-12)
    with pytest.raises(ex.InputException):
        pdx.strong_coupling_wall_integral(0.5, 1.0, 1e4)
    with pytest.raises(ex.InputException):
        pdx.wall_green_function(1.0, 1.0, 1e4)


def test_composition_of_free_propagators():
    composed = pdx.free_propagator_composition(1.0, 1.0, 0.5, -0.5)
    direct = pdx.free_propagator(1.0, 1.5, -0.5)
    assert abs(composed - direct) / abs(direct) < 1e-6


def test_first_crossing_rejects_same_side():
    with pytest.raises(ex.InputException):
        pdx.pdx_first_crossing(1.0, 4.0, 2.0, 0.0)
    with pytest.raises(ex.InputException):
        pdx.pdx_semiclassical(-1.0, -4.0, 2.0, 0.0)


def test_first_crossing_reproduces_free_propagation():
    x_to, x_from, tau = -4.0, 4.0, 2.0
    p0 = -(x_from - x_to) / tau
    value = pdx.pdx_first_crossing(x_to, x_from, tau, 0.0, p0)
    reference = pdx.smeared_free_propagator(x_to, x_from, tau, p0)
    assert abs(value - reference) / abs(reference) < 0.01


@pytest.mark.slow
def test_semiclassical_error_shrinks_with_weaker_step():
    x_to, x_from, tau = -4.0, 4.0, 2.0
    p0 = -(x_from - x_to) / tau
    energy = 0.5 * p0 ** 2
    errors = []
    for ratio in (5.0, 10.0, 20.0):
        V = energy / ratio
        reference = pdx.grid_propagator(x_to, x_from, tau, V, p0)
        errors.append(abs(pdx.pdx_semiclassical(x_to, x_from, tau, V, p0) - reference) / abs(reference))
        exact = pdx.pdx_first_crossing(x_to, x_from, tau, V, p0)
        assert abs(exact - reference) / abs(reference) < 0.01
    assert errors[0] > errors[1] > errors[2]
    assert errors[2] <= 0.03
