import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import fft

import chronoclock.clockExceptions as ex
from chronoclock.lattice import (Region, edge_probability, in_momentum, in_position, mean_momentum,
                                 momentum_support, probability_in_region)
from chronoclock.observables import POINTER_Y, Distribution

log = logging.getLogger(__name__)

# largest phase any split factor may advance per step
MAX_PHASE = 0.1
# largest k dx for the fastest wave on either side of the step
MAX_STEP_RESOLUTION = 0.5
MAX_SNAPSHOTS = 2000
EDGE_TOLERANCE = 1e-4
EDGE_CHECKS = 16
EXIT_TOLERANCE = 1e-3
READOUT_ALL = "all"
READOUT_TRANSMITTED = "transmitted"
Y_BLOCK = 256


@dataclass(frozen=True)
class StepPotentialSpec(object):
    """H = p^2 / 2m + V chi(x) for one clock channel."""

    V: float
    region: Region
    mass: float = 1.0

    def __post_init__(self):
        if not self.mass > 0:
            raise ex.InputException("Particle mass must be positive, got {}".format(self.mass))


class SplitOperatorPropagator(object):
    """Strang-split propagator for a step potential on a periodic grid.

    Consecutive half potential steps are fused, so a run costs one forward and
    one inverse FFT per step.
    """

    def __init__(self, grid, spec, dt, debug=False):
        if not dt > 0:
            raise ex.InputException("Time step must be positive, got {}".format(dt))
        self.grid = grid
        self.spec = spec
        self.dt = dt
        self.debug = debug

        potential = spec.V * spec.region.on_grid(grid)
        self._half = np.exp(-0.5j * dt * potential)
        self._full = self._half ** 2
        self._kinetic = np.exp(-0.5j * dt * grid.p ** 2 / spec.mass)
        margin = 0.05 * grid.length
        self._edge = (grid.x < grid.x_min + margin) | (grid.x > grid.x_max - margin)

    def phase_per_step(self, psi):
        kinetic = momentum_support(psi) ** 2 / (2.0 * self.spec.mass)
        return self.dt * max(abs(self.spec.V), kinetic)

    def check_stability(self, psi):
        phase = self.phase_per_step(psi)
        if phase > MAX_PHASE:
            raise ex.StabilityException("Phase per step {:.4f} exceeds {} (dt = {}, V = {})".format(
                phase, MAX_PHASE, self.dt, self.spec.V))
        self.check_resolution(psi)
        if self.debug:
            log.debug("Phase per step {:.4f} for V = {}".format(phase, self.spec.V))

    def step_wavenumber(self, psi):
        return math.sqrt(mean_momentum(psi) ** 2 + 2.0 * self.spec.mass * abs(self.spec.V))

    def check_resolution(self, psi):
        """The step at the region edge is only resolved when k dx stays small on both sides."""
        if self.spec.V == 0:
            return
        kdx = self.step_wavenumber(psi) * self.grid.dx
        if kdx > MAX_STEP_RESOLUTION:
            raise ex.GridException("k dx = {:.3f} across the step (V = {}) exceeds {}; refine the grid".format(
                kdx, self.spec.V, MAX_STEP_RESOLUTION))

    def _check_edges(self, amplitudes, t):
        leaked = float(np.sum(np.abs(amplitudes[self._edge]) ** 2) * self.grid.dx)
        if leaked > EDGE_TOLERANCE:
            raise ex.BoundaryException("Probability {:.3e} reached the box edge at t = {:.4g}; enlarge the grid".format(
                leaked, t))

    def run(self, psi0, n_steps, stride=1, observer=None, keep=True):
        """Advance psi0 by n_steps, handing every stride-th state to ``observer``.

        Returns the recorded states (empty when ``keep`` is false) and the final state.
        """
        psi0 = in_position(psi0)
        if psi0.grid != self.grid:
            raise ex.GridException("State and propagator grids differ")
        t0 = psi0.time
        records = []

        def record(amplitudes, k):
            state = psi0.with_amplitudes(amplitudes, time=t0 + k * self.dt)
            if observer is not None:
                observer(state)
            if keep:
                records.append(state)

        record(psi0.amplitudes, 0)
        check_every = max(1, n_steps // EDGE_CHECKS)
        u = self._half * psi0.amplitudes
        for k in range(1, n_steps + 1):
            u = fft.ifft(self._kinetic * fft.fft(u))
            if k % stride == 0 or k % check_every == 0 or k == n_steps:
                state = self._half * u
                self._check_edges(state, t0 + k * self.dt)
                if k % stride == 0:
                    record(state, k)
            if k < n_steps:
                u *= self._full
        final = psi0.with_amplitudes(self._half * u, time=t0 + n_steps * self.dt)

        drift = abs(final.norm - psi0.norm)
        if drift > 1e-8:
            log.warning("Norm drifted by {:.3e} over {} steps".format(drift, n_steps))
        elif self.debug:
            log.debug("Norm drift {:.3e} over {} steps".format(drift, n_steps))
        return records, final


def default_stride(n_steps):
    return max(1, math.ceil(n_steps / MAX_SNAPSHOTS))


def evolve_step_potential(psi0, spec, dt, n_steps, stride=None, debug=False):
    """Snapshots of psi0 evolved under p^2/2m + V chi(x), every ``stride`` steps and at the end."""
    if int(n_steps) != n_steps or n_steps < 1:
        raise ex.InputException("n_steps must be a positive integer, got {}".format(n_steps))
    n_steps = int(n_steps)
    stride = default_stride(n_steps) if stride is None else int(stride)
    if stride < 1:
        raise ex.InputException("Snapshot stride must be >= 1, got {}".format(stride))
    psi0 = in_position(psi0)
    propagator = SplitOperatorPropagator(psi0.grid, spec, dt, debug=debug)
    propagator.check_stability(psi0)
    snapshots, final = propagator.run(psi0, n_steps, stride)
    if n_steps % stride:
        snapshots.append(final)
    return snapshots


def steps_for(tau, dt):
    """Whole number of steps covering tau, never longer than dt each."""
    if not tau > 0 or not dt > 0:
        raise ex.InputException("tau and dt must be positive, got tau = {}, dt = {}".format(tau, dt))
    n_steps = max(1, math.ceil(tau / dt - 1e-9))
    return n_steps, tau / n_steps


@dataclass(frozen=True, eq=False)
class Channel(object):
    epsilon: float
    weight: complex
    measure: float
    psi: object
    region_probability: float


@dataclass(frozen=True, eq=False)
class CompositeState(object):
    """Particle states per clock energy; Psi(x, y) is assembled only at readout."""

    channels: tuple
    clock: object
    region: Region
    lam: float
    elapsed: float

    @property
    def clock_grid(self):
        return self.clock.grid

    @property
    def clock_eigenfunctions(self):
        return self.clock.eigensystem.eigenfunctions

    @property
    def completeness(self):
        return float(sum(abs(c.weight) ** 2 * c.measure for c in self.channels))


def evolve_composite(psi0, clock, lam, region, tau, dt, mass=1.0, threads=1, require_exit=True, debug=False):
    """Evolve psi0 in every clock-energy channel with V = lam * eps inside ``region``."""
    clock.check_truncation()
    psi0 = in_position(psi0)
    n_steps, dt = steps_for(tau, dt)
    system = clock.eigensystem

    strongest = StepPotentialSpec(lam * float(np.max(np.abs(system.energies))), region, mass)
    SplitOperatorPropagator(psi0.grid, strongest, dt, debug=debug).check_stability(psi0)
    log.info("Evolving {} clock channels for {} steps of {:.4g}".format(len(system), n_steps, dt))

    def evolve(index):
        epsilon = float(system.energies[index])
        propagator = SplitOperatorPropagator(psi0.grid, StepPotentialSpec(lam * epsilon, region, mass), dt)
        _, final = propagator.run(psi0, n_steps, stride=n_steps, keep=False)
        return Channel(epsilon, complex(system.weights[index]), float(system.measure[index]), final,
                       probability_in_region(final, region))

    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        channels = tuple(pool.map(evolve, range(len(system))))

    state = CompositeState(channels, clock, region, lam, n_steps * dt)
    worst = max(c.region_probability for c in channels)
    if worst > EXIT_TOLERANCE:
        message = "Probability {:.3e} still inside the region at tau = {:.4g}".format(worst, state.elapsed)
        if require_exit:
            raise ex.RegionExitException(message)
        log.warning(message)
    if debug:
        log.debug("Channel completeness {:.12f}, edge probability of psi0 {:.2e}".format(
            state.completeness, edge_probability(psi0)))
    return state


def pointer_distribution(state, readout=READOUT_ALL):
    """Pi(y) = int dx |sum_eps w(eps) <y|eps> psi_eps(x)|^2 over all x or only the transmitted side."""
    if not state.channels:
        raise ex.InputException("Composite state has no channels")
    grid = state.channels[0].psi.grid
    if any(c.psi.grid != grid for c in state.channels):
        raise ex.GridException("Channels live on different particle grids")
    if state.clock_eigenfunctions.shape[1] != len(state.channels):
        raise ex.GridException("Clock eigenbasis and channel list differ in length")
    if readout == READOUT_ALL:
        columns = np.ones(grid.n_points, dtype=bool)
    elif readout == READOUT_TRANSMITTED:
        columns = grid.x < state.region.edges[0] - 1e-9 * grid.dx
    else:
        raise ex.InputException("Unknown readout {!r}".format(readout))

    amplitudes = np.stack([c.weight * c.measure * c.psi.amplitudes[columns] for c in state.channels])
    eigenfunctions = state.clock_eigenfunctions
    density = np.empty(state.clock_grid.n_points)
    for start in range(0, density.size, Y_BLOCK):
        block = eigenfunctions[start:start + Y_BLOCK] @ amplitudes
        density[start:start + Y_BLOCK] = np.sum(np.abs(block) ** 2, axis=1) * grid.dx

    mass = float(np.sum(density) * state.clock_grid.dx)
    if readout == READOUT_ALL and abs(mass - 1.0) > 1e-6:
        log.warning("Pointer distribution mass {:.9f} differs from 1".format(mass))
    return Distribution(POINTER_Y, state.clock_grid.x, density, raw_mass=mass)


def surviving_probability(state):
    """Probability still inside the region at the end of the run."""
    return float(sum(abs(c.weight) ** 2 * c.measure * c.region_probability for c in state.channels))


def reflection_coefficient(p, V, m=1.0):
    """Plane-wave reflection |(k - k')/(k + k')|^2 for leaving a step of height V into free space."""
    p = np.asarray(p, dtype=float)
    k = np.abs(p)
    outside = p ** 2 + 2.0 * m * V
    k_out = np.sqrt(np.clip(outside, 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        r = ((k - k_out) / (k + k_out)) ** 2
    r = np.where(outside <= 0, 1.0, np.nan_to_num(r, nan=1.0))
    return float(r) if r.ndim == 0 else r


def mean_reflection(psi0, V, m=1.0):
    """Reflection coefficient averaged over |psi~_0(p)|^2."""
    phi = in_momentum(psi0)
    return float(np.sum(reflection_coefficient(phi.grid.p, V, m) * phi.density) * phi.grid.dp / phi.norm)
