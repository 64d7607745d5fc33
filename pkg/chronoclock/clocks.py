import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy import fft, integrate, linalg, optimize

import chronoclock.clockExceptions as ex
from chronoclock.lattice import POSITION, WaveFunction, gaussian_state, in_momentum, in_position

log = logging.getLogger(__name__)

LINEAR_MOMENTUM = "linear_momentum"
FREE_PARTICLE = "free_particle"
POTENTIAL_WELL = "potential_well"

CLOCK_KINDS = (LINEAR_MOMENTUM, FREE_PARTICLE, POTENTIAL_WELL)

# largest |phi_0|^2 mass the truncated eigenbasis may lose
MAX_DEFICIT = 1e-8
Y_REF = 0.0


@dataclass(frozen=True, eq=False)
class Eigensystem(object):
    """Truncated clock eigenbasis: energies, <y|eps> on the clock grid, <eps|phi_0> and the eps measure."""

    energies: np.ndarray
    weights: np.ndarray
    measure: np.ndarray
    deficit: float
    axis: np.ndarray
    vectors: Optional[np.ndarray] = None

    @cached_property
    def eigenfunctions(self):
        """<y|eps> as columns; plane waves are only built when first needed."""
        if self.vectors is not None:
            return self.vectors
        return np.exp(1j * np.outer(self.axis, self.energies)) / np.sqrt(2.0 * np.pi)

    @property
    def masses(self):
        return np.abs(self.weights) ** 2 * self.measure

    @property
    def completeness(self):
        return float(np.sum(self.masses))

    def __len__(self):
        return self.energies.size


@dataclass(frozen=True, eq=False)
class ClockModel(object):
    """Clock Hamiltonian H_c, its initial state phi_0 and the truncated eigenbasis used for coupling.

    ``kind`` selects H_c: ``linear_momentum`` (H_c = p_y), ``free_particle``
    (p_y^2 / 2 mu) or ``potential_well`` (p_y^2 / 2 mu + U(y)).
    """

    kind: str
    grid: object
    initial_state: WaveFunction
    mass_clock: float = 1.0
    potential: Optional[Callable] = None
    truncation: float = 1e-12
    eigensystem: Eigensystem = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in CLOCK_KINDS:
            raise ex.InputException("Unknown clock kind {!r}".format(self.kind))
        if self.initial_state.grid != self.grid:
            raise ex.GridException("Clock initial state lives on a different grid")
        if self.kind != LINEAR_MOMENTUM and not self.mass_clock > 0:
            raise ex.InputException("Clock mass must be positive, got {}".format(self.mass_clock))
        if self.kind == POTENTIAL_WELL and self.potential is None:
            raise ex.InputException("potential_well clock needs a potential U(y)")
        object.__setattr__(self, "eigensystem", self._build_eigensystem())

    def _build_eigensystem(self):
        grid = self.grid
        if self.kind in (LINEAR_MOMENTUM, FREE_PARTICLE):
            p = grid.p
            energies = p if self.kind == LINEAR_MOMENTUM else p ** 2 / (2.0 * self.mass_clock)
            weights = in_momentum(self.initial_state).amplitudes
            measure = np.full(p.size, grid.dp)
            keep, deficit = _truncate(energies, weights, measure, self.truncation)
            vectors = None
            if self.kind == FREE_PARTICLE:
                vectors = np.exp(1j * np.outer(grid.x, p[keep])) / np.sqrt(2.0 * np.pi)
        else:
            energies, vectors = diagonalize(grid, self.mass_clock, self.potential)
            phi0 = in_position(self.initial_state).amplitudes
            weights = vectors.conj().T @ phi0 * np.sqrt(grid.dx)
            measure = np.ones(energies.size)
            keep, deficit = _truncate(energies, weights, measure, self.truncation)
            vectors = vectors[:, keep] / np.sqrt(grid.dx)
        return Eigensystem(energies[keep], weights[keep], measure[keep], deficit, grid.x, vectors)

    def check_truncation(self):
        if self.eigensystem.deficit > MAX_DEFICIT:
            raise ex.TruncationException("Clock eigenbasis captures only {:.10f} of |phi_0|^2 (deficit {:.2e})".format(
                1.0 - self.eigensystem.deficit, self.eigensystem.deficit))

    def potential_on(self, y):
        if self.potential is None:
            return np.zeros_like(np.asarray(y, dtype=float))
        return np.asarray(self.potential(np.asarray(y, dtype=float)), dtype=float)


def diagonalize(grid, mu, potential):
    n = grid.n_points
    # spectral kinetic operator, real symmetric circulant
    kinetic = fft.ifft(fft.fft(np.eye(n), axis=0) * (grid.p ** 2 / (2.0 * mu))[:, None], axis=0).real
    hamiltonian = 0.5 * (kinetic + kinetic.T) + np.diag(np.asarray(potential(grid.x), dtype=float))
    energies, vectors = linalg.eigh(hamiltonian)
    ref = int(np.argmin(np.abs(grid.x - Y_REF)))
    for k in range(vectors.shape[1]):
        column = vectors[:, k]
        significant = np.nonzero(np.abs(column[ref:]) > 1e-6 * np.abs(column).max())[0]
        if significant.size and column[ref + significant[0]] < 0:
            vectors[:, k] = -column
    return energies, vectors.astype(complex)


def _truncate(energies, weights, measure, truncation):
    """Indices of the heaviest states holding 1 - truncation of |phi_0|^2, sorted by energy."""
    masses = np.abs(weights) ** 2 * measure
    order = np.argsort(-masses, kind="stable")
    cumulative = np.cumsum(masses[order])
    count = min(int(np.searchsorted(cumulative, 1.0 - truncation)) + 1, masses.size)
    keep = order[:count]
    keep = keep[np.argsort(energies[keep], kind="stable")]
    deficit = max(0.0, 1.0 - float(cumulative[count - 1]))
    log.debug("Clock eigenbasis truncated to {} of {} states, deficit {:.2e}".format(count, masses.size, deficit))
    return keep, deficit


def linear_momentum_clock(grid, eps0, sigma_eps, y0=0.0, truncation=1e-12):
    """H_c = p_y with a Gaussian phi_0 of mean clock energy eps0 and energy width sigma_eps."""
    phi0 = gaussian_state(grid, y0, eps0, 1.0 / (2.0 * sigma_eps))
    return ClockModel(LINEAR_MOMENTUM, grid, phi0, truncation=truncation)


def free_particle_clock(grid, mu, eps0, sigma_y, y0=0.0, truncation=1e-12):
    """Free clock particle launched with kinetic energy eps0 from y0."""
    phi0 = gaussian_state(grid, y0, math.sqrt(2.0 * mu * eps0), sigma_y)
    return ClockModel(FREE_PARTICLE, grid, phi0, mass_clock=mu, truncation=truncation)


def harmonic_potential(mu, omega):
    def potential(y):
        return 0.5 * mu * omega ** 2 * np.asarray(y, dtype=float) ** 2
    return potential


def potential_well_clock(grid, mu, omega=1.0, potential=None, y0=0.0, p0=0.0, sigma_y=None, truncation=1e-12):
    """Clock in a well U(y), harmonic by default; phi_0 a Gaussian at (y0, p0)."""
    potential = potential or harmonic_potential(mu, omega)
    sigma_y = sigma_y or 1.0 / math.sqrt(2.0 * mu * omega)
    phi0 = gaussian_state(grid, y0, p0, sigma_y)
    return ClockModel(POTENTIAL_WELL, grid, phi0, mass_clock=mu, potential=potential, truncation=truncation)


def clock_response_matrix(clock, lam, times):
    """Phi(y, t) for every t in ``times``; columns follow ``times``."""
    clock.check_truncation()
    system = clock.eigensystem
    times = np.atleast_1d(np.asarray(times, dtype=float))
    coeffs = (system.weights * system.measure)[:, None] * np.exp(-1j * lam * np.outer(system.energies, times))
    return system.eigenfunctions @ coeffs


def clock_response(clock, lam, t):
    """Clock wavefunction Phi(y, t) = <y| exp(-i lam H_c t) |phi_0>."""
    values = clock_response_matrix(clock, lam, [t])[:, 0]
    return WaveFunction(clock.grid, values, POSITION, t)


def resolution_overlap(clock, lam, delta_t):
    """Overlap of clock states a time delta_t apart: sum |phi_0(eps)|^2 exp(-i lam eps delta_t)."""
    system = clock.eigensystem
    delta_t = np.asarray(delta_t, dtype=float)
    phases = np.exp(-1j * lam * np.multiply.outer(delta_t, system.energies))
    overlap = phases @ system.masses
    return complex(overlap) if overlap.ndim == 0 else overlap


def clock_energy_moments(clock):
    """Mean and standard deviation of |phi_0(eps)|^2."""
    system = clock.eigensystem
    masses = system.masses / system.completeness
    mean = float(np.sum(masses * system.energies))
    variance = float(np.sum(masses * (system.energies - mean) ** 2))
    return mean, math.sqrt(max(variance, 0.0))


def resolution_time(clock, lam):
    """Smallest resolvable time difference 1 / (lam sigma_eps); infinite for an eigenstate clock."""
    mean, sigma = clock_energy_moments(clock)
    if lam * sigma <= 1e-12 * max(1.0, abs(mean)):
        log.warning("Clock has no energy spread (sigma_eps = {:.3e}); resolution time is infinite".format(sigma))
        return math.inf
    return 1.0 / (lam * sigma)


@dataclass(frozen=True, eq=False)
class WKBEigenstate(object):
    """<y|eps> ~ C(y, eps) exp(i S(y, eps)) on the classically allowed region."""

    epsilon: float
    kind: str
    mass_clock: float
    potential: Optional[Callable]
    turning_points: tuple
    allowed: tuple
    normalization: float

    def _momentum(self, y, epsilon):
        kinetic = epsilon - float(self.potential(y)) if self.potential is not None else epsilon
        return math.sqrt(2.0 * self.mass_clock * kinetic) if kinetic > 0 else 0.0

    def _check_allowed(self, y, epsilon):
        lo, hi = self.allowed
        if not lo <= y <= hi:
            raise ex.InputException("y = {} lies in the classically forbidden region at eps = {}".format(y, epsilon))
        if self.potential is not None and float(self.potential(y)) >= epsilon:
            raise ex.InputException("y = {} lies in the classically forbidden region at eps = {}".format(y, epsilon))

    def action(self, y, epsilon=None):
        """Hamilton-Jacobi function S(y, eps), zero at y = 0."""
        epsilon = self.epsilon if epsilon is None else epsilon
        y = np.asarray(y, dtype=float)
        if self.kind != POTENTIAL_WELL:
            slope = epsilon if self.kind == LINEAR_MOMENTUM else math.sqrt(2.0 * self.mass_clock * epsilon)
            return slope * y if y.ndim else float(slope * y)
        values = np.empty(y.shape)
        for index, point in np.ndenumerate(y):
            self._check_allowed(point, epsilon)
            values[index] = integrate.quad(self._momentum, Y_REF, point, args=(epsilon,),
                                           epsabs=1e-13, epsrel=1e-12, limit=200)[0]
        return values if values.ndim else float(values)

    def amplitude(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind != POTENTIAL_WELL:
            return np.full(y.shape, self.normalization) if y.ndim else self.normalization
        kinetic = self.epsilon - self.potential(y)
        if np.any(kinetic <= 0):
            raise ex.InputException("Amplitude requested in the classically forbidden region")
        return self.normalization * (2.0 * self.mass_clock * kinetic) ** -0.25

    def __call__(self, y):
        return self.amplitude(y) * np.exp(1j * self.action(y))

    def standing_density(self, y):
        """Real bound-state form 2 C^2 cos^2(S - S(a) - pi/4), a the left turning point."""
        if self.kind != POTENTIAL_WELL:
            return np.abs(self.amplitude(y)) ** 2
        left = self.turning_points[0]
        offset = integrate.quad(self._momentum, Y_REF, left, args=(self.epsilon,), limit=200)[0]
        phase = self.action(y) - offset - math.pi / 4.0
        return 2.0 * self.amplitude(y) ** 2 * np.cos(phase) ** 2


def _turning_points(clock, epsilon):
    grid = clock.grid
    y = np.linspace(grid.x_min, grid.x_max, 8 * grid.n_points + 1)
    excess = epsilon - clock.potential_on(y)
    crossings = np.nonzero(np.sign(excess[:-1]) * np.sign(excess[1:]) < 0)[0]

    def gap(point):
        return epsilon - float(clock.potential_on(point))

    return tuple(optimize.brentq(gap, y[i], y[i + 1], xtol=1e-14) for i in crossings)


def wkb_eigenstate(clock, epsilon):
    """WKB (or exact plane-wave) eigenstate of the clock Hamiltonian at energy epsilon."""
    grid = clock.grid
    mu = clock.mass_clock
    if clock.kind == LINEAR_MOMENTUM:
        return WKBEigenstate(epsilon, LINEAR_MOMENTUM, mu, None, (), (grid.x_min, grid.x_max),
                             1.0 / math.sqrt(2.0 * math.pi))
    if clock.kind == FREE_PARTICLE:
        if not epsilon > 0:
            raise ex.InputException("Free clock energy must be positive, got {}".format(epsilon))
        return WKBEigenstate(epsilon, FREE_PARTICLE, mu, None, (), (grid.x_min, grid.x_max),
                             1.0 / math.sqrt(grid.length))

    if epsilon <= float(np.min(clock.potential_on(grid.x))):
        raise ex.InputException("eps = {} lies below the potential minimum".format(epsilon))
    if epsilon <= float(clock.potential_on(Y_REF)):
        raise ex.InputException("Reference point y = 0 is classically forbidden at eps = {}".format(epsilon))
    points = _turning_points(clock, epsilon)
    left = max([p for p in points if p < Y_REF], default=grid.x_min)
    right = min([p for p in points if p > Y_REF], default=grid.x_max)

    def inverse_momentum(y):
        kinetic = epsilon - float(clock.potential_on(y))
        return 1.0 / math.sqrt(2.0 * mu * kinetic) if kinetic > 0 else 0.0

    weight = integrate.quad(inverse_momentum, left, right, limit=400)[0]
    state = WKBEigenstate(epsilon, POTENTIAL_WELL, mu, clock.potential, (left, right), (left, right),
                          1.0 / math.sqrt(weight))
    log.debug("WKB state at eps = {} with turning points {}".format(epsilon, state.turning_points))
    return state


def hj_time_map(wkb, lam, y, rel_step=1e-4):
    """Recorded time t = (1/lam) dS/deps at pointer position y, by central difference in eps."""
    if not lam > 0:
        raise ex.InputException("Coupling must be positive, got {}".format(lam))
    step = rel_step * abs(wkb.epsilon)
    if step == 0:
        raise ex.ConvergenceException("Finite-difference step vanishes at eps = 0")
    try:
        upper = wkb.action(y, wkb.epsilon + step)
        lower = wkb.action(y, wkb.epsilon - step)
    except ex.InputException as e:
        raise ex.ConvergenceException("Finite-difference step crosses a turning point: {}".format(e))
    times = (np.asarray(upper) - np.asarray(lower)) / (2.0 * step * lam)
    return times if times.ndim else float(times)
