import math

import numpy as np
import pytest

import chronoclock.clockExceptions as ex
from chronoclock.clocks import (POTENTIAL_WELL, ClockModel, diagonalize, harmonic_potential, linear_momentum_clock,
                               potential_well_clock)
from chronoclock.dynamics import (READOUT_ALL, READOUT_TRANSMITTED, SplitOperatorPropagator, StepPotentialSpec,
                                  evolve_composite, evolve_step_potential, mean_reflection, pointer_distribution,
                                  reflection_coefficient, steps_for, surviving_probability)
from chronoclock.lattice import (HALF_LINE, INTERVAL, Region, WaveFunction, gaussian_state, make_grid, mean_momentum,
                                 mean_position, probability_in_region)
from chronoclock.observables import POINTER_Y, Distribution, relative_l2, weak_arrival_prediction


@pytest.fixture(scope="module")
def grid():
    return make_grid(-40.0, 40.0, 1024)


@pytest.fixture(scope="module")
def clock():
    return linear_momentum_clock(make_grid(-40.0, 40.0, 256), eps0=1.0, sigma_eps=0.1, truncation=1e-14)


def test_spec_rejects_non_positive_mass():
    with pytest.raises(ex.InputException):
        StepPotentialSpec(1.0, Region(), mass=0.0)


def test_propagator_rejects_bad_steps(grid):
    spec = StepPotentialSpec(0.0, Region())
    with pytest.raises(ex.InputException):
        SplitOperatorPropagator(grid, spec, 0.0)
    psi = gaussian_state(grid, 10.0, -3.0, 2.0)
    with pytest.raises(ex.StabilityException):
        SplitOperatorPropagator(grid, StepPotentialSpec(1e3, Region()), 0.01).check_stability(psi)
    with pytest.raises(ex.InputException):
        evolve_step_potential(psi, spec, 0.01, 0)
    with pytest.raises(ex.InputException):
        evolve_step_potential(psi, spec, 0.01, 10, stride=0)


def test_grid_mismatch(grid):
    psi = gaussian_state(make_grid(-40.0, 40.0, 512), 10.0, -3.0, 2.0)
    propagator = SplitOperatorPropagator(grid, StepPotentialSpec(0.0, Region()), 0.01)
    with pytest.raises(ex.GridException):
        propagator.run(psi, 10)


def test_steps_for():
    assert steps_for(1.0, 0.3) == (4, 0.25)
    assert steps_for(1.0, 0.25) == (4, 0.25)
    with pytest.raises(ex.InputException):
        steps_for(-1.0, 0.1)


def test_snapshot_layout(grid):
    psi = gaussian_state(grid, 10.0, -3.0, 2.0)
    dt = 0.005
    snapshots = evolve_step_potential(psi, StepPotentialSpec(0.0, Region()), dt, 10, stride=3)
    assert len(snapshots) == 5
    np.testing.assert_allclose([s.time for s in snapshots], dt * np.array([0, 3, 6, 9, 10]))


def test_free_particle_ehrenfest(grid):
    psi = gaussian_state(grid, 10.0, -3.0, 2.0)
    dt, n_steps = 0.005, 1000
    snapshots = evolve_step_potential(psi, StepPotentialSpec(0.0, Region()), dt, n_steps, stride=100)
    for state in snapshots:
        assert state.norm == pytest.approx(1.0, abs=1e-10)
        assert mean_position(state) == pytest.approx(10.0 - 3.0 * state.time, abs=1e-6)
        assert mean_momentum(state) == pytest.approx(-3.0, abs=1e-10)


def test_packet_hitting_the_box_edge(grid):
    psi = gaussian_state(grid, 20.0, 5.0, 1.0)
    with pytest.raises(ex.BoundaryException):
        evolve_step_potential(psi, StepPotentialSpec(0.0, Region()), 0.002, 2000)


def test_reflection_coefficient_limits():
    assert reflection_coefficient(3.0, 0.0) == 0.0
    k, k_out = 3.0, np.sqrt(9.0 + 2.0 * 225.0)
    assert reflection_coefficient(-3.0, 225.0) == pytest.approx(((k - k_out) / (k + k_out)) ** 2)
    # no propagating wave outside: total reflection
    assert reflection_coefficient(1.0, -1.0) == 1.0
    np.testing.assert_allclose(reflection_coefficient(np.array([1.0, 2.0]), 0.0), [0.0, 0.0])


def test_unresolved_step_is_refused(grid, clock):
    psi = gaussian_state(make_grid(-140.0, 40.0, 4096), 10.0, -3.0, 2.0)
    propagator = SplitOperatorPropagator(psi.grid, StepPotentialSpec(225.0, Region(HALF_LINE)), 0.0004)
    # k dx = sqrt(9 + 450) * 180 / 4096 is about 0.94
    with pytest.raises(ex.GridException):
        propagator.check_stability(psi)
    assert propagator.step_wavenumber(psi) == pytest.approx(math.sqrt(459.0), rel=1e-8)
    with pytest.raises(ex.GridException):
        evolve_composite(gaussian_state(grid, 10.0, -3.0, 2.0), clock, 30.0, Region(HALF_LINE), 1.0, 0.0015)


@pytest.mark.slow
def test_step_reflection_matches_plane_wave_average():
    grid = make_grid(-140.0, 40.0, 8192)
    psi = gaussian_state(grid, 10.0, -3.0, 2.0)
    V = 50.0 * 4.5
    dt = 0.09 / V
    n_steps, dt = steps_for(6.0, dt)
    propagator = SplitOperatorPropagator(grid, StepPotentialSpec(V, Region(HALF_LINE)), dt)
    propagator.check_stability(psi)
    _, final = propagator.run(psi, n_steps, stride=n_steps, keep=False)
    reflected = probability_in_region(final, Region(HALF_LINE))
    assert reflected == pytest.approx(mean_reflection(psi, V), rel=0.02)
    assert final.norm == pytest.approx(1.0, abs=1e-8)


@pytest.mark.slow
def test_strong_channel_reflects_like_plane_waves():
    grid = make_grid(-288.0, 64.0, 8192)
    psi = gaussian_state(grid, 12.0, -1.0, 3.0)
    V = 30.0
    n_steps, dt = steps_for(24.0, 0.09 / V)
    propagator = SplitOperatorPropagator(grid, StepPotentialSpec(V, Region(HALF_LINE)), dt)
    propagator.check_stability(psi)
    _, final = propagator.run(psi, n_steps, stride=n_steps, keep=False)
    reflected = probability_in_region(final, Region(HALF_LINE))
    assert reflected > 0.5
    assert reflected == pytest.approx(mean_reflection(psi, V), rel=0.03)


def test_decoupled_composite_reads_initial_clock_state(grid, clock):
    psi = gaussian_state(grid, 10.0, -3.0, 2.0)
    state = evolve_composite(psi, clock, 0.0, Region(HALF_LINE), 8.0, 0.0075)
    assert state.completeness == pytest.approx(1.0, abs=1e-8)
    for channel in state.channels:
        assert channel.psi.norm == pytest.approx(1.0, abs=1e-10)
    pointer = pointer_distribution(state)
    assert pointer.raw_mass == pytest.approx(1.0, abs=1e-6)
    reference = Distribution(POINTER_Y, clock.grid.x, clock.initial_state.density)
    assert relative_l2(pointer, reference) <= 1e-6


def test_clock_never_runs_for_packet_outside_region(grid, clock):
    psi = gaussian_state(grid, -12.0, -3.0, 2.0)
    state = evolve_composite(psi, clock, 0.02, Region(HALF_LINE), 3.0, 0.0075, threads=2)
    pointer = pointer_distribution(state, READOUT_ALL)
    reference = Distribution(POINTER_Y, clock.grid.x, clock.initial_state.density)
    assert relative_l2(pointer, reference) <= 1e-6
    assert surviving_probability(state) < 1e-8


def test_composite_requires_exit(grid, clock):
    psi = gaussian_state(grid, 10.0, -3.0, 2.0)
    with pytest.raises(ex.RegionExitException):
        evolve_composite(psi, clock, 0.0, Region(HALF_LINE), 1.0, 0.0075)
    state = evolve_composite(psi, clock, 0.0, Region(HALF_LINE), 1.0, 0.0075, require_exit=False)
    assert surviving_probability(state) == pytest.approx(1.0, abs=1e-3)


def test_transmitted_readout_counts_only_left_side(grid, clock):
    psi = gaussian_state(grid, 10.0, -3.0, 2.0)
    state = evolve_composite(psi, clock, 0.0, Region(HALF_LINE), 8.0, 0.0075)
    transmitted = pointer_distribution(state, READOUT_TRANSMITTED)
    assert transmitted.raw_mass == pytest.approx(1.0 - surviving_probability(state), abs=1e-6)
    with pytest.raises(ex.InputException):
        pointer_distribution(state, "reflected")


def test_interval_dwell_shifts_pointer(grid, clock):
    psi = gaussian_state(grid, 12.0, -3.0, 2.0)
    lam, L = 0.02, 3.0
    state = evolve_composite(psi, clock, lam, Region(INTERVAL, L), 9.0, 0.0075)
    pointer = pointer_distribution(state)
    mean_y = float(np.sum(pointer.coordinates * pointer.density) * clock.grid.dx)
    # the clock runs for about 2 L m / |p0|
    assert mean_y == pytest.approx(lam * 2.0 * L / 3.0, rel=0.02)


def test_eigenbasis_clock_channels(grid):
    well = potential_well_clock(make_grid(-10.0, 10.0, 128), mu=1.0, omega=1.0, y0=1.0, truncation=1e-16)
    psi = gaussian_state(grid, -12.0, -3.0, 2.0)
    state = evolve_composite(psi, well, 0.01, Region(HALF_LINE), 1.0, 0.0075)
    assert len(state.channels) == len(well.eigensystem)
    pointer = pointer_distribution(state)
    np.testing.assert_allclose(pointer.density, well.initial_state.density, atol=1e-6)


def test_clock_eigenstate_is_left_unchanged(grid):
    well_grid = make_grid(-10.0, 10.0, 128)
    potential = harmonic_potential(1.0, 1.0)
    _, vectors = diagonalize(well_grid, 1.0, potential)
    phi0 = WaveFunction(well_grid, vectors[:, 3] / math.sqrt(well_grid.dx))
    eigenclock = ClockModel(POTENTIAL_WELL, well_grid, phi0, mass_clock=1.0, potential=potential)
    assert len(eigenclock.eigensystem) == 1
    psi = gaussian_state(grid, 10.0, -3.0, 2.0)
    state = evolve_composite(psi, eigenclock, 0.5, Region(HALF_LINE), 8.0, 0.0075, require_exit=False)
    pointer = pointer_distribution(state)
    np.testing.assert_allclose(pointer.density, phi0.density, atol=1e-8)


def test_truncation_converges(grid):
    psi = gaussian_state(grid, 10.0, -3.0, 2.0)
    clock_grid = make_grid(-40.0, 40.0, 256)
    pointers = []
    for truncation in (1e-14, 1e-16):
        clock = linear_momentum_clock(clock_grid, eps0=1.0, sigma_eps=0.1, truncation=truncation)
        state = evolve_composite(psi, clock, 0.02, Region(HALF_LINE), 8.0, 0.0075)
        pointers.append(pointer_distribution(state))
    assert relative_l2(pointers[0], pointers[1]) < 1e-6


@pytest.mark.slow
def test_pointer_converges_at_second_order_in_dt(grid, clock):
    psi = gaussian_state(grid, 10.0, -3.0, 2.0)
    pointers = [pointer_distribution(evolve_composite(psi, clock, 0.05, Region(HALF_LINE), 8.0, dt)).density
                for dt in (0.008, 0.004, 0.002)]
    ratio = np.linalg.norm(pointers[0] - pointers[1]) / np.linalg.norm(pointers[1] - pointers[2])
    # halving dt divides the Strang error by four
    assert 3.0 < ratio < 5.5


def test_pointer_is_frozen_once_the_packet_has_left(clock):
    psi = gaussian_state(make_grid(-100.0, 40.0, 2048), 10.0, -3.0, 2.0)
    early, late = [pointer_distribution(evolve_composite(psi, clock, 0.02, Region(HALF_LINE), tau, 0.0075))
                   for tau in (9.0, 18.0)]
    assert relative_l2(late, early) < 1e-6


def test_weak_prediction_degrades_with_coupling(grid, clock):
    psi = gaussian_state(grid, 10.0, -3.0, 2.0)
    n_steps, dt = steps_for(8.0, 0.0075)
    snapshots = evolve_step_potential(psi, StepPotentialSpec(0.0, Region(HALF_LINE)), dt, n_steps, stride=1)
    errors = []
    for lam in (0.1, 0.2):
        pointer = pointer_distribution(evolve_composite(psi, clock, lam, Region(HALF_LINE), 8.0, dt))
        errors.append(relative_l2(pointer, weak_arrival_prediction(snapshots, clock, lam, 1.0)))
    assert errors[0] < 0.7 * errors[1]
