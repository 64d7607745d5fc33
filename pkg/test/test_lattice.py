import math

import numpy as np
import pytest

import chronoclock.clockExceptions as ex
from chronoclock.lattice import (HALF_LINE, INTERVAL, MOMENTUM, Region, WaveFunction, counter_propagating_mass,
                                 gaussian_state, in_momentum,
                                 in_position, make_grid, mean_momentum, mean_position, momentum_amplitude,
                                 momentum_variance, probability_in_region, superpose, transform, value_at)


@pytest.fixture(scope="module")
def packet():
    grid = make_grid(-60.0, 60.0, 4096)
    return gaussian_state(grid, 15.0, -3.0, 2.0)


def test_make_grid_spacing():
    grid = make_grid(-10, 10, 4)
    assert grid.dx == 5.0
    np.testing.assert_allclose(grid.x, [-10.0, -5.0, 0.0, 5.0])
    assert grid.dp == pytest.approx(2.0 * math.pi / 20.0)
    np.testing.assert_allclose(np.sort(grid.p), grid.dp * np.arange(-2, 2))


@pytest.mark.parametrize("bounds", [(0, 1, 3), (1, 0, 4), (0, 0, 8), (0, 1, 1), (0, float("inf"), 8)])
def test_make_grid_rejects_bad_lattices(bounds):
    with pytest.raises(ex.GridException):
        make_grid(*bounds)


def test_gaussian_moments(packet):
    assert packet.norm == pytest.approx(1.0, abs=1e-10)
    assert mean_position(packet) == pytest.approx(15.0, abs=1e-8)
    assert mean_momentum(packet) == pytest.approx(-3.0, abs=1e-8)
    assert momentum_variance(packet) == pytest.approx(0.0625, rel=1e-6)


def test_gaussian_refuses_clipped_tail():
    grid = make_grid(-20.0, 20.0, 512)
    with pytest.raises(ex.GridException, match="tail"):
        gaussian_state(grid, 15.0, 0.0, 2.0)


def test_gaussian_refuses_unresolved_width():
    grid = make_grid(-20.0, 20.0, 64)
    with pytest.raises(ex.GridException, match="resolvable"):
        gaussian_state(grid, 0.0, 0.0, 0.5)


def test_gaussian_refuses_momentum_beyond_lattice():
    grid = make_grid(-20.0, 20.0, 128)
    with pytest.raises(ex.GridException, match="lattice limit"):
        gaussian_state(grid, 0.0, 9.0, 2.0)


def test_transform_preserves_norm(packet):
    phi = transform(packet)
    assert phi.representation == MOMENTUM
    assert phi.norm == pytest.approx(packet.norm, abs=1e-12)
    np.testing.assert_allclose(in_position(phi).amplitudes, packet.amplitudes, atol=1e-12)


def test_momentum_amplitude_matches_closed_form(packet):
    p = np.array([-3.5, -3.0, -2.4])
    sigma, x0, p0 = 2.0, 15.0, -3.0
    expected = (2.0 * sigma ** 2 / math.pi) ** 0.25 * np.exp(-sigma ** 2 * (p - p0) ** 2 - 1j * (p - p0) * x0)
    np.testing.assert_allclose(momentum_amplitude(packet, p), expected, rtol=1e-8)


def test_spectral_momentum_matches_finite_differences(packet):
    grid = packet.grid
    psi = packet.amplitudes
    slope = (np.roll(psi, -1) - np.roll(psi, 1)) / (2.0 * grid.dx)
    finite = float(np.real(np.sum(np.conj(psi) * -1j * slope)) * grid.dx)
    assert finite == pytest.approx(mean_momentum(packet), abs=10.0 * grid.dx ** 2)


def test_value_at_matches_analytic_gaussian():
    grid = make_grid(-20.0, 20.0, 512)
    x0, p0, sigma = 1.0, 2.0, 1.5
    psi = gaussian_state(grid, x0, p0, sigma)
    expected = (2.0 * math.pi * sigma ** 2) ** -0.25 * math.exp(-x0 ** 2 / (4.0 * sigma ** 2))
    value, slope = value_at(psi, 0.0)
    assert value == pytest.approx(expected, abs=1e-10)
    assert slope == pytest.approx((x0 / (2.0 * sigma ** 2) + 1j * p0) * expected, abs=1e-9)

    # off-lattice point
    x = 0.3 * grid.dx
    value, _ = value_at(psi, x)
    exact = expected * math.exp(-((x - x0) ** 2 - x0 ** 2) / (4.0 * sigma ** 2)) * np.exp(1j * p0 * x)
    assert value == pytest.approx(exact, abs=1e-9)


def test_value_at_outside_grid():
    grid = make_grid(-5.0, 5.0, 64)
    with pytest.raises(ex.GridException):
        value_at(gaussian_state(grid, 0.0, 0.0, 1.0), 6.0)


def test_region_characteristic_halves_edges():
    half = Region(HALF_LINE)
    np.testing.assert_array_equal(half.characteristic([-1.0, 0.0, 1.0], tol=1e-12), [0.0, 0.5, 1.0])
    box = Region(INTERVAL, 2.0)
    assert box.edges == (-2.0, 2.0)
    np.testing.assert_array_equal(box.characteristic([-3.0, -2.0, 0.0, 2.0, 3.0], tol=1e-12),
                                  [0.0, 0.5, 1.0, 0.5, 0.0])


def test_region_rejects_bad_input():
    with pytest.raises(ex.InputException):
        Region("quarter_plane")
    with pytest.raises(ex.InputException):
        Region(INTERVAL, 0.0)


def test_probability_in_region(packet):
    assert probability_in_region(packet, Region(HALF_LINE)) == pytest.approx(1.0, abs=1e-10)
    assert probability_in_region(packet, Region(INTERVAL, 5.0)) < 1e-6
    with pytest.raises(ex.InputException):
        probability_in_region(in_momentum(packet), Region(HALF_LINE))


def test_packet_centred_on_an_edge_is_split_evenly(packet):
    grid = packet.grid
    assert probability_in_region(gaussian_state(grid, 0.0, -3.0, 2.0), Region(HALF_LINE)) == pytest.approx(
        0.5, abs=1e-10)
    assert probability_in_region(gaussian_state(grid, 5.0, -3.0, 2.0), Region(INTERVAL, 5.0)) == pytest.approx(
        0.5, abs=0.01)


def test_counter_propagating_mass():
    grid = make_grid(-60.0, 60.0, 4096)
    # half the normal tail beyond two momentum widths
    assert counter_propagating_mass(gaussian_state(grid, 15.0, -0.5, 2.0)) == pytest.approx(0.02275, rel=0.05)
    assert counter_propagating_mass(gaussian_state(grid, 15.0, 0.5, 2.0)) == pytest.approx(0.02275, rel=0.05)
    assert counter_propagating_mass(gaussian_state(grid, 15.0, -3.0, 2.0)) < 1e-12
    with pytest.raises(ex.InputException):
        counter_propagating_mass(gaussian_state(grid, 15.0, 0.0, 2.0))


def test_refining_the_grid_keeps_moments(packet):
    fine = gaussian_state(make_grid(-60.0, 60.0, 8192), 15.0, -3.0, 2.0)
    for moment in (mean_position, mean_momentum, momentum_variance):
        assert moment(fine) == pytest.approx(moment(packet), abs=1e-8)


def test_superpose_normalises_and_rejects_cancellation():
    grid = make_grid(-40.0, 40.0, 1024)
    a = gaussian_state(grid, 10.0, -3.0, 2.0)
    b = gaussian_state(grid, 10.0, -1.0, 2.0)
    mixed = superpose([a, b], [1.0, 0.5])
    assert mixed.norm == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ex.InputException):
        superpose([a, a], [1.0, -1.0])


def test_wavefunction_shape_check():
    grid = make_grid(-1.0, 1.0, 8)
    with pytest.raises(ex.GridException):
        WaveFunction(grid, np.zeros(4))
    with pytest.raises(ex.InputException):
        WaveFunction(grid, np.zeros(8), representation="energy")
