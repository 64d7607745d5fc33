import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate

import chronoclock.clockExceptions as ex
from chronoclock.clocks import LINEAR_MOMENTUM, clock_response_matrix
from chronoclock.lattice import in_momentum, momentum_amplitude, value_at

log = logging.getLogger(__name__)

POINTER_Y = "pointer_y"
TIME_T = "time_t"

# relative level below which momentum-space density is treated as absent
DENSITY_FLOOR = 1e-16
TIME_BLOCK = 256


@dataclass(frozen=True, eq=False)
class Distribution(object):
    """Density sampled on a uniform lattice along the pointer (y) or time (t) axis.

    ``quasi`` marks signed densities such as the current J(t); ``raw_mass`` keeps
    the mass a distribution had before it was normalised.
    """

    axis: str
    coordinates: np.ndarray
    density: np.ndarray
    quasi: bool = False
    raw_mass: Optional[float] = None

    def __post_init__(self):
        if self.axis not in (POINTER_Y, TIME_T):
            raise ex.InputException("Unknown distribution axis {!r}".format(self.axis))
        coordinates = np.array(self.coordinates, dtype=float, copy=True)
        density = np.array(self.density, dtype=float, copy=True)
        if coordinates.ndim != 1 or coordinates.shape != density.shape or coordinates.size < 2:
            raise ex.InputException("Coordinates and density must be matching 1D arrays")
        steps = np.diff(coordinates)
        if steps[0] <= 0 or not np.allclose(steps, steps[0], rtol=1e-8, atol=0.0):
            raise ex.InputException("Distribution lattice must be uniform and increasing")
        if not self.quasi and density.min() < -1e-12 * max(np.abs(density).max(), 1e-300):
            raise ex.InputException("Negative density {:.3e} in a distribution not tagged quasi".format(density.min()))
        coordinates.setflags(write=False)
        density.setflags(write=False)
        object.__setattr__(self, "coordinates", coordinates)
        object.__setattr__(self, "density", density)

    @property
    def spacing(self):
        return float(self.coordinates[1] - self.coordinates[0])

    @property
    def samples(self):
        return list(zip(self.coordinates.tolist(), self.density.tolist()))

    @property
    def total_mass(self):
        return float(integrate.trapezoid(self.density, self.coordinates))

    @property
    def quadrature_weights(self):
        weights = np.full(self.coordinates.size, self.spacing)
        weights[[0, -1]] *= 0.5
        return weights

    def normalized(self):
        mass = self.total_mass
        if not mass > 0:
            raise ex.WindowException("Cannot normalise a distribution of mass {:.3e}".format(mass))
        raw = mass if self.raw_mass is None else self.raw_mass
        return Distribution(self.axis, self.coordinates, self.density / mass, self.quasi, raw)

    def moments(self):
        """Mean and standard deviation of the normalised density."""
        mass = self.total_mass
        mean = integrate.trapezoid(self.coordinates * self.density, self.coordinates) / mass
        variance = integrate.trapezoid((self.coordinates - mean) ** 2 * self.density, self.coordinates) / mass
        return float(mean), float(np.sqrt(variance))

    def interpolate(self, coordinates):
        return np.interp(coordinates, self.coordinates, self.density, left=0.0, right=0.0)

    def to_rows(self):
        return np.column_stack((self.coordinates, self.density))

    def metadata(self):
        return {
            "axis": self.axis,
            "total_mass": self.total_mass,
            "raw_mass": self.raw_mass,
            "quasi": self.quasi,
            "n_points": int(self.coordinates.size),
            "start": float(self.coordinates[0]),
            "spacing": self.spacing,
        }


def snapshot_times(snapshots):
    times = np.array([s.time for s in snapshots], dtype=float)
    if times.size < 2:
        raise ex.InputException("At least two snapshots are needed, got {}".format(times.size))
    steps = np.diff(times)
    if steps[0] <= 0 or not np.allclose(steps, steps[0], rtol=1e-8, atol=1e-12):
        raise ex.InputException("Snapshots must be spaced uniformly in time")
    return times


def current_at_origin(psi, m):
    """J = (i/2m)(psi* psi' - psi'* psi) at x = 0; positive for leftward flux."""
    value, slope = value_at(psi, 0.0)
    return float(-(np.conj(value) * slope).imag / m)


def kinetic_energy_density_at_origin(psi):
    """<psi| p delta(x) p |psi> = |(p psi)(0)|^2."""
    _, slope = value_at(psi, 0.0)
    return float(abs(slope) ** 2)


def probability_current_series(snapshots, m):
    times = snapshot_times(snapshots)
    current = np.array([current_at_origin(s, m) for s in snapshots])
    return Distribution(TIME_T, times, current, quasi=True)


def kinetic_energy_density_series(snapshots):
    times = snapshot_times(snapshots)
    density = np.array([kinetic_energy_density_at_origin(s) for s in snapshots])
    return Distribution(TIME_T, times, density)


def normalized_strong_arrival(snapshots, m, mean_p, mass_tolerance=0.02):
    """Kinetic energy density divided by m |<p>|, the detector-independent strong-coupling form."""
    if abs(mean_p) < 1e-12:
        raise ex.InputException("Mean momentum must be non-zero for the strong-coupling normalisation")
    kinetic = kinetic_energy_density_series(snapshots)
    density = kinetic.density / (m * abs(mean_p))
    mass = float(integrate.trapezoid(density, kinetic.coordinates))
    if abs(mass - 1.0) > mass_tolerance:
        raise ex.WindowException("Snapshot window holds mass {:.4f} of the normalised arrival density".format(mass))
    return Distribution(TIME_T, kinetic.coordinates, density, raw_mass=mass)


def _momentum_window(psi0_momentum, p_floor, floor_mass):
    phi = in_momentum(psi0_momentum)
    p = phi.grid.p
    density = phi.density / phi.norm
    if p_floor is None:
        p_floor = 0.1 * float(np.sum(np.abs(p) * density) * phi.grid.dp)
    slow = float(np.sum(density[np.abs(p) < p_floor]) * phi.grid.dp)
    if slow > floor_mass:
        raise ex.WindowException("Momentum mass {:.3e} below |p| = {:.3g} gives unrepresentable dwell times".format(
            slow, p_floor))
    significant = (density > DENSITY_FLOOR * density.max()) & (np.abs(p) >= p_floor)
    return phi, p, density, significant, p_floor


def dwell_semiclassical(psi0_momentum, L, m, n_points=4096, p_floor=None, floor_mass=1e-8):
    """Distribution of 2 m L / |p| over the initial momentum density."""
    phi, p, density, significant, p_floor = _momentum_window(psi0_momentum, p_floor, floor_mass)
    speeds = np.abs(p[significant])
    p_hi = speeds.max() + 2.0 * phi.grid.dp
    p_lo = max(speeds.min() - 2.0 * phi.grid.dp, p_floor)
    times = np.linspace(2.0 * m * L / p_hi, 2.0 * m * L / p_lo, n_points)
    p_of_t = 2.0 * m * L / times
    amplitude = np.abs(momentum_amplitude(phi, p_of_t)) ** 2 + np.abs(momentum_amplitude(phi, -p_of_t)) ** 2
    dist = Distribution(TIME_T, times, 2.0 * m * L / times ** 2 * amplitude / phi.norm)
    log.debug("Semiclassical dwell distribution on t in [{:.4g}, {:.4g}], mass {:.8f}".format(
        times[0], times[-1], dist.total_mass))
    return dist


def smear(ideal, kernel, coordinates=None, axis=None):
    """Pi_C(t) = int R(t, s) Pi(s) ds with R sampled as kernel[t_index, s_index]."""
    kernel = np.asarray(kernel)
    coordinates = ideal.coordinates if coordinates is None else np.asarray(coordinates, dtype=float)
    if kernel.ndim != 2 or kernel.shape != (coordinates.size, ideal.coordinates.size):
        raise ex.InputException("Kernel of shape {} does not match lattices ({}, {})".format(
            kernel.shape, coordinates.size, ideal.coordinates.size))
    density = np.real(kernel @ (ideal.density * ideal.quadrature_weights))
    return Distribution(axis or ideal.axis, coordinates, density, quasi=ideal.quasi)


def delta_kernel(coordinates):
    """Discrete delta on a lattice: smearing with it returns the input."""
    lattice = Distribution(TIME_T, coordinates, np.zeros(len(coordinates)))
    return np.diag(1.0 / lattice.quadrature_weights)


def convolution_kernel(coordinates, profile):
    """R(t, s) = r(t - s) on a lattice."""
    coordinates = np.asarray(coordinates, dtype=float)
    return profile(np.subtract.outer(coordinates, coordinates))


def normalize_kernel(kernel, coordinates):
    """Rescale columns so that int R(t, s) dt = 1 for every s."""
    lattice = Distribution(TIME_T, coordinates, np.zeros(len(coordinates)))
    column_mass = lattice.quadrature_weights @ kernel
    return kernel / column_mass[None, :]


def response_kernel(clock, lam, coordinates):
    """R(t, s) = lam |Phi(lam t, s)|^2 for the linear clock, on one uniform time lattice."""
    if clock.kind != LINEAR_MOMENTUM:
        raise ex.InputException("response_kernel needs a linear_momentum clock, got {}".format(clock.kind))
    clock.check_truncation()
    coordinates = np.asarray(coordinates, dtype=float)
    step = coordinates[1] - coordinates[0]
    n = coordinates.size
    system = clock.eigensystem
    # Phi(y, s) depends on y - lam s only, so the kernel is Toeplitz
    lags = lam * step * np.arange(-(n - 1), n)
    amplitude = np.exp(1j * np.outer(lags, system.energies)) @ (system.weights * system.measure)
    profile = lam * np.abs(amplitude) ** 2 / (2.0 * np.pi)
    index = np.subtract.outer(np.arange(n), np.arange(n)) + (n - 1)
    return profile[index]


def clock_density_kernel(clock, lam, coordinates, times):
    """|Phi(y, t)|^2 with rows on clock-grid points ``coordinates`` and columns on ``times``."""
    if not np.array_equal(np.asarray(coordinates, dtype=float), clock.grid.x):
        raise ex.GridException("clock_density_kernel rows must be the clock grid")
    times = np.asarray(times, dtype=float)
    kernel = np.empty((clock.grid.n_points, times.size))
    for start in range(0, times.size, TIME_BLOCK):
        block = times[start:start + TIME_BLOCK]
        kernel[:, start:start + TIME_BLOCK] = np.abs(clock_response_matrix(clock, lam, block)) ** 2
    return kernel


def coarse_grain(dist, t1, t2):
    """Probability in [t1, t2] from the piecewise-linear interpolant of the density."""
    c = dist.coordinates
    tol = 1e-12 * max(abs(c[0]), abs(c[-1]), 1.0)
    if not t1 < t2:
        raise ex.InputException("Reversed interval [{}, {}]".format(t1, t2))
    if t1 < c[0] - tol or t2 > c[-1] + tol:
        raise ex.InputException("Interval [{}, {}] leaves the lattice span [{}, {}]".format(t1, t2, c[0], c[-1]))
    f = dist.density
    cumulative = np.concatenate(([0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(c))))

    def primitive(t):
        t = min(max(t, c[0]), c[-1])
        i = int(np.clip(np.searchsorted(c, t, side="right") - 1, 0, c.size - 2))
        h = t - c[i]
        slope = (f[i + 1] - f[i]) / (c[i + 1] - c[i])
        return cumulative[i] + h * (f[i] + 0.5 * slope * h)

    return float(primitive(t2) - primitive(t1))


def weak_arrival_prediction(snapshots, clock, lam, m, window_mass=0.999):
    """Pi(y) = int dt |Phi(y, t)|^2 J(t), the clock-smeared current."""
    current = probability_current_series(snapshots, m)
    mass = current.total_mass
    if mass < window_mass:
        raise ex.WindowException("Snapshot window holds only {:.5f} of the time-integrated current".format(mass))
    weighted = current.density * current.quadrature_weights
    kernel = clock_density_kernel(clock, lam, clock.grid.x, current.coordinates)
    prediction = Distribution(POINTER_Y, clock.grid.x, kernel @ weighted, quasi=True)
    return prediction.normalized()


def strong_arrival_prediction(snapshots, lam, m, mean_p, coordinates=None, time_map=None, mass_tolerance=0.02):
    """Kinetic energy density read at the time t(y); t = y / lam unless ``time_map`` is given."""
    arrival = normalized_strong_arrival(snapshots, m, mean_p, mass_tolerance)
    if coordinates is None and time_map is None:
        pulled = Distribution(POINTER_Y, lam * arrival.coordinates, arrival.density / lam)
        return Distribution(POINTER_Y, pulled.coordinates, pulled.density, raw_mass=arrival.raw_mass).normalized()
    if coordinates is None:
        raise ex.InputException("A time map needs explicit pointer coordinates")
    coordinates = np.asarray(coordinates, dtype=float)
    times = np.asarray(time_map(coordinates) if time_map else coordinates / lam, dtype=float)
    jacobian = np.abs(np.gradient(times, coordinates))
    density = arrival.interpolate(times) * jacobian
    pulled = Distribution(POINTER_Y, coordinates, density, raw_mass=arrival.raw_mass)
    return pulled.normalized()


def weak_dwell_prediction(psi0_momentum, clock, lam, L, m, p_floor=None, floor_mass=1e-8):
    """Pi(y) = int dp |psi_0(p)|^2 |Phi(y, 2 L m / |p|)|^2."""
    phi, p, density, significant, _ = _momentum_window(psi0_momentum, p_floor, floor_mass)
    times = 2.0 * m * L / np.abs(p[significant])
    weights = density[significant] * phi.grid.dp
    kernel = clock_density_kernel(clock, lam, clock.grid.x, times)
    prediction = Distribution(POINTER_Y, clock.grid.x, kernel @ weights)
    return prediction.normalized()


def relative_l2(simulated, predicted, support_fraction=1e-4):
    """Relative L2 distance over the union support where either density exceeds a fraction of its peak."""
    a = simulated.density
    b = predicted.interpolate(simulated.coordinates)
    support = (np.abs(a) > support_fraction * np.abs(a).max()) | (np.abs(b) > support_fraction * np.abs(b).max())
    reference = np.sqrt(np.sum(b[support] ** 2))
    if reference == 0:
        raise ex.InputException("Predicted density vanishes on the comparison support")
    return float(np.sqrt(np.sum((a[support] - b[support]) ** 2)) / reference)


def sup_relative(simulated, predicted):
    b = predicted.interpolate(simulated.coordinates)
    return float(np.max(np.abs(simulated.density - b)) / np.max(np.abs(b)))
