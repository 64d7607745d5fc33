import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import fft

import chronoclock.clockExceptions as ex

log = logging.getLogger(__name__)

POSITION = "position"
MOMENTUM = "momentum"

HALF_LINE = "half_line_positive"
INTERVAL = "interval"

# density ratio allowed at the box edges for a freshly built Gaussian
TAIL_THRESHOLD = 1e-10
# momentum-space extent of a Gaussian, in units of its momentum width
MOMENTUM_REACH = 7.0
# fraction of the box on each side treated as "near the edge"
EDGE_FRACTION = 0.05


@dataclass(frozen=True)
class Grid(object):
    """Uniform periodic lattice on [x_min, x_max) with its paired momentum lattice."""

    x_min: float
    x_max: float
    n_points: int

    @property
    def length(self):
        return self.x_max - self.x_min

    @property
    def dx(self):
        return self.length / self.n_points

    @property
    def dp(self):
        return 2.0 * np.pi / self.length

    @property
    def p_max(self):
        return np.pi / self.dx

    @cached_property
    def x(self):
        return self.x_min + self.dx * np.arange(self.n_points)

    @cached_property
    def p(self):
        # standard discrete-Fourier ordering: 0, dp, ..., -p_max, ..., -dp
        return 2.0 * np.pi * fft.fftfreq(self.n_points, d=self.dx)

    def contains(self, x):
        return self.x_min <= x <= self.x_max


def make_grid(x_min, x_max, n_points):
    """Build a Grid, refusing degenerate extents and non power-of-two sizes."""
    if not (np.isfinite(x_min) and np.isfinite(x_max)) or x_max <= x_min:
        raise ex.GridException("Degenerate grid extent [{}, {}]".format(x_min, x_max))
    if int(n_points) != n_points or n_points < 2 or (int(n_points) & (int(n_points) - 1)) != 0:
        raise ex.GridException("n_points must be a power of two >= 2, got {}".format(n_points))
    return Grid(float(x_min), float(x_max), int(n_points))


@dataclass(frozen=True, eq=False)
class WaveFunction(object):
    """Complex amplitudes on a Grid, in position or momentum representation.

    Momentum amplitudes are normalised so that sum |psi~|^2 dp equals
    sum |psi|^2 dx. ``time`` is the evolution time the state belongs to.
    """

    grid: Grid
    amplitudes: np.ndarray
    representation: str = POSITION
    time: float = 0.0

    def __post_init__(self):
        amplitudes = np.array(self.amplitudes, dtype=complex, copy=True)
        if amplitudes.shape != (self.grid.n_points,):
            raise ex.GridException("Amplitudes of shape {} do not match a grid of {} points".format(
                amplitudes.shape, self.grid.n_points))
        if self.representation not in (POSITION, MOMENTUM):
            raise ex.InputException("Unknown representation {!r}".format(self.representation))
        amplitudes.setflags(write=False)
        object.__setattr__(self, "amplitudes", amplitudes)

    @property
    def coordinates(self):
        return self.grid.x if self.representation == POSITION else self.grid.p

    @property
    def measure(self):
        return self.grid.dx if self.representation == POSITION else self.grid.dp

    @property
    def density(self):
        return np.abs(self.amplitudes) ** 2

    @property
    def norm(self):
        return float(np.sum(self.density) * self.measure)

    def with_amplitudes(self, amplitudes, time=None):
        return WaveFunction(self.grid, amplitudes, self.representation,
                            self.time if time is None else time)

    def to_rows(self):
        """Columns (coordinate, Re psi, Im psi) for CSV output."""
        return np.column_stack((self.coordinates, self.amplitudes.real, self.amplitudes.imag))


@dataclass(frozen=True)
class Region(object):
    """Characteristic function chi(x) of the region in which the clock runs."""

    kind: str = HALF_LINE
    L: float = 0.0

    def __post_init__(self):
        if self.kind not in (HALF_LINE, INTERVAL):
            raise ex.InputException("Unknown region kind {!r}".format(self.kind))
        if self.kind == INTERVAL and not self.L > 0:
            raise ex.InputException("Interval region needs L > 0, got {}".format(self.L))

    @property
    def edges(self):
        if self.kind == HALF_LINE:
            return (0.0,)
        return (-self.L, self.L)

    def characteristic(self, x, tol=0.0):
        """Evaluate chi at x: 1 inside, 0 outside, 1/2 within tol of an edge."""
        x = np.asarray(x, dtype=float)
        if self.kind == HALF_LINE:
            chi = (x > 0).astype(float)
        else:
            chi = ((x > -self.L) & (x < self.L)).astype(float)
        for edge in self.edges:
            chi = np.where(np.abs(x - edge) <= tol, 0.5, chi)
        return chi

    def on_grid(self, grid):
        return self.characteristic(grid.x, tol=1e-9 * grid.dx)


def transform(psi):
    """Change representation position <-> momentum with a Parseval-preserving DFT."""
    grid = psi.grid
    if psi.representation == POSITION:
        amplitudes = grid.dx / np.sqrt(2.0 * np.pi) * np.exp(-1j * grid.p * grid.x_min) * fft.fft(psi.amplitudes)
        return WaveFunction(grid, amplitudes, MOMENTUM, psi.time)
    amplitudes = np.sqrt(2.0 * np.pi) / grid.dx * fft.ifft(psi.amplitudes * np.exp(1j * grid.p * grid.x_min))
    return WaveFunction(grid, amplitudes, POSITION, psi.time)


def in_position(psi):
    return psi if psi.representation == POSITION else transform(psi)


def in_momentum(psi):
    return psi if psi.representation == MOMENTUM else transform(psi)


def gaussian_state(grid, x0, p0, sigma):
    """Normalised packet exp(-(x-x0)^2/4 sigma^2 + i p0 x) on the grid."""
    if not grid.contains(x0):
        raise ex.GridException("Packet centre {} lies outside [{}, {}]".format(x0, grid.x_min, grid.x_max))
    if sigma < 3.0 * grid.dx:
        raise ex.GridException("Packet width {} is not resolvable with dx = {} (need sigma >= 3 dx)".format(
            sigma, grid.dx))
    reach = min(x0 - grid.x_min, grid.x_max - x0)
    edge_ratio = np.exp(-reach ** 2 / (2.0 * sigma ** 2))
    if edge_ratio > TAIL_THRESHOLD:
        raise ex.GridException("Gaussian tail clipped at the box edge: density ratio {:.3e} > {:.0e}".format(
            edge_ratio, TAIL_THRESHOLD))
    if abs(p0) + MOMENTUM_REACH / (2.0 * sigma) > grid.p_max:
        raise ex.GridException("Momentum content around p0 = {} exceeds the lattice limit {}".format(
            p0, grid.p_max))

    x = grid.x
    amplitudes = np.exp(-(x - x0) ** 2 / (4.0 * sigma ** 2) + 1j * p0 * x)
    amplitudes /= np.sqrt(np.sum(np.abs(amplitudes) ** 2) * grid.dx)
    return WaveFunction(grid, amplitudes, POSITION)


def superpose(states, coefficients):
    """Normalised linear combination of position-space states on one grid."""
    states = [in_position(s) for s in states]
    grid = states[0].grid
    if any(s.grid != grid for s in states):
        raise ex.GridException("Cannot superpose states on different grids")
    amplitudes = sum(c * s.amplitudes for c, s in zip(coefficients, states))
    norm = np.sqrt(np.sum(np.abs(amplitudes) ** 2) * grid.dx)
    if norm == 0:
        raise ex.InputException("Superposition vanishes identically")
    return WaveFunction(grid, amplitudes / norm, POSITION, states[0].time)


def probability_in_region(psi, region):
    if psi.representation != POSITION:
        raise ex.InputException("probability_in_region needs a position-space state")
    return float(np.sum(region.on_grid(psi.grid) * psi.density) * psi.grid.dx)


def edge_probability(psi, fraction=EDGE_FRACTION):
    """Probability within ``fraction`` of the box length from either edge."""
    psi = in_position(psi)
    grid = psi.grid
    margin = fraction * grid.length
    near = (grid.x < grid.x_min + margin) | (grid.x > grid.x_max - margin)
    return float(np.sum(psi.density[near]) * grid.dx)


def value_at(psi, x_point):
    """Band-limited interpolation of (psi(x), psi'(x)) at an arbitrary point."""
    grid = psi.grid
    if not grid.contains(x_point):
        raise ex.GridException("x = {} lies outside the grid [{}, {}]".format(x_point, grid.x_min, grid.x_max))
    coeffs = in_momentum(psi).amplitudes
    p = grid.p
    phase = np.exp(1j * p * x_point)
    basis = phase.copy()
    slope = 1j * p * phase
    if grid.n_points % 2 == 0:
        # split the Nyquist mode evenly between +p_max and -p_max
        k = grid.n_points // 2
        basis[k] = np.cos(p[k] * x_point)
        slope[k] = -p[k] * np.sin(p[k] * x_point)
    scale = grid.dp / np.sqrt(2.0 * np.pi)
    return complex(scale * np.dot(basis, coeffs)), complex(scale * np.dot(slope, coeffs))


def momentum_amplitude(psi, p_values, block=512):
    """psi~(p) at arbitrary momenta by direct (non-uniform) Fourier sum."""
    psi = in_position(psi)
    grid = psi.grid
    p_values = np.atleast_1d(np.asarray(p_values, dtype=float))
    out = np.empty(p_values.shape, dtype=complex)
    for start in range(0, p_values.size, block):
        chunk = p_values[start:start + block]
        out[start:start + block] = np.exp(-1j * np.outer(chunk, grid.x)) @ psi.amplitudes
    return out * grid.dx / np.sqrt(2.0 * np.pi)


def mean_position(psi):
    psi = in_position(psi)
    return float(np.sum(psi.grid.x * psi.density) * psi.grid.dx / psi.norm)


def mean_momentum(psi):
    phi = in_momentum(psi)
    return float(np.sum(phi.grid.p * phi.density) * phi.grid.dp / phi.norm)


def counter_propagating_mass(psi):
    """Probability carried by momenta of the opposite sign to <p>; half the p = 0 sample counts."""
    phi = in_momentum(psi)
    mean = mean_momentum(phi)
    # a numerically zero <p> has no direction
    if abs(mean) <= 1e-9 * np.sqrt(momentum_variance(phi)):
        raise ex.InputException("Packet has no mean momentum to oppose")
    p = phi.grid.p * np.sign(mean)
    weights = np.where(p < 0, 1.0, np.where(p == 0, 0.5, 0.0))
    return float(np.sum(weights * phi.density) * phi.grid.dp / phi.norm)


def momentum_variance(psi):
    phi = in_momentum(psi)
    mean = mean_momentum(phi)
    return float(np.sum((phi.grid.p - mean) ** 2 * phi.density) * phi.grid.dp / phi.norm)


def momentum_support(psi, threshold=1e-12):
    """Largest |p| at which |psi~(p)|^2 exceeds ``threshold`` times its peak."""
    phi = in_momentum(psi)
    density = phi.density
    significant = density > threshold * density.max()
    return float(np.max(np.abs(phi.grid.p[significant])))
