import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, linalg

import chronoclock.clockExceptions as ex
from chronoclock.dynamics import SplitOperatorPropagator, StepPotentialSpec, steps_for
from chronoclock.lattice import HALF_LINE, Region, gaussian_state, make_grid, momentum_support, value_at

log = logging.getLogger(__name__)

# 1 / sqrt(i) on the principal branch
INV_SQRT_I = complex(math.cos(math.pi / 4), -math.sin(math.pi / 4))
SOURCE_WIDTH = 4.0
QUADRATURE_WARN = 1e-4
QUADRATURE_FAIL = 1e-2


@dataclass(frozen=True)
class PropagatorSample(object):
    x_from: float
    x_to: float
    tau: float
    V: float
    m: float
    value: complex

    def to_row(self):
        return [self.x_from, self.x_to, self.tau, self.V, self.m, self.value.real, self.value.imag]


def default_grid():
    return make_grid(-40.0, 40.0, 1024)


def _check_tau(tau):
    if not np.all(np.asarray(tau) > 0):
        raise ex.InputException("Propagation time must be positive, got {}".format(tau))


def free_propagator(x_to, tau, x_from, m=1.0):
    """g_f(x_to, tau | x_from) = (m / 2 pi i tau)^(1/2) exp(i m (x_to - x_from)^2 / 2 tau)."""
    _check_tau(tau)
    x_to = np.asarray(x_to, dtype=float)
    value = INV_SQRT_I * np.sqrt(m / (2.0 * np.pi * tau)) * np.exp(0.5j * m * (x_to - x_from) ** 2 / tau)
    return complex(value) if value.ndim == 0 else value


def restricted_propagator_image(x_to, tau, x_from, V, m=1.0):
    """Dirichlet propagator on x > 0 under a flat potential V, built from an image source.

    The potential contributes the phase exp(-i V tau) of forward evolution.
    """
    _check_tau(tau)
    x_to = np.asarray(x_to, dtype=float)
    if x_from <= 0:
        return complex(0.0) if x_to.ndim == 0 else np.zeros(x_to.shape, dtype=complex)
    images = free_propagator(x_to, tau, x_from, m) - free_propagator(-x_to, tau, x_from, m)
    value = np.where(x_to > 0, images, 0.0) * np.exp(-1j * V * tau)
    return complex(value) if np.ndim(value) == 0 else value


def restricted_propagator_slope(tau, x_from, V, m=1.0):
    """d g_r / dx at x = 0+, twice the free slope times the potential phase."""
    _check_tau(tau)
    if x_from <= 0:
        return complex(0.0)
    free_slope = -1j * m * x_from / tau * free_propagator(0.0, tau, x_from, m)
    return complex(2.0 * free_slope * np.exp(-1j * V * tau))


def free_gaussian(x, t, a, p0, sigma, m=1.0):
    """Freely evolved packet exp(-(x-a)^2/4 sigma^2 + i p0 x) and its x-derivative."""
    x = np.asarray(x, dtype=float)
    alpha = sigma ** 2 + 0.5j * t / m
    shifted = x - a - p0 * t / m
    value = ((2.0 * np.pi * sigma ** 2) ** -0.25 * np.sqrt(sigma ** 2 / alpha)
             * np.exp(-shifted ** 2 / (4.0 * alpha) + 1j * p0 * x - 0.5j * p0 ** 2 * t / m))
    slope = (-shifted / (2.0 * alpha) + 1j * p0) * value
    return value, slope


def _target_profile(x, x_to, sigma):
    return (2.0 * np.pi * sigma ** 2) ** -0.25 * np.exp(-(x - x_to) ** 2 / (4.0 * sigma ** 2))


def smeared_free_propagator(x_to, x_from, tau, p0=0.0, m=1.0, grid=None):
    """<chi_to| exp(-i H_0 tau) |source> between Gaussians of width 4 dx."""
    _check_tau(tau)
    grid = grid or default_grid()
    sigma = SOURCE_WIDTH * grid.dx
    evolved, _ = free_gaussian(grid.x, tau, x_from, p0, sigma, m)
    return complex(np.sum(_target_profile(grid.x, x_to, sigma) * evolved) * grid.dx)


def grid_propagator(x_to, x_from, tau, V, p0=0.0, m=1.0, grid=None, dt=None):
    """Same smeared amplitude with the step V theta(x) evolved on the grid."""
    _check_tau(tau)
    grid = grid or default_grid()
    sigma = SOURCE_WIDTH * grid.dx
    source = gaussian_state(grid, x_from, p0, sigma)
    propagator, n_steps = _step_propagator(grid, source, tau, V, m, dt)
    _, final = propagator.run(source, n_steps, stride=n_steps, keep=False)
    return complex(np.sum(_target_profile(grid.x, x_to, sigma) * final.amplitudes) * grid.dx)


def _step_propagator(grid, state, tau, V, m, dt):
    if dt is None:
        fastest = max(abs(V), momentum_support(state) ** 2 / (2.0 * m))
        dt = 0.09 / fastest
    n_steps, dt = steps_for(tau, dt)
    propagator = SplitOperatorPropagator(grid, StepPotentialSpec(V, Region(HALF_LINE), m), dt)
    propagator.check_stability(state)
    return propagator, n_steps


def _crossing_quadrature(post_crossing, x_from, tau, V, p0, m, sigma, n_steps):
    """(i/2m) int_0^tau h(tau - t) d_x psi_r(0, t) dt on n_steps + 1 uniform nodes."""
    t = np.linspace(0.0, tau, n_steps + 1)
    _, free_slope = free_gaussian(0.0, t, x_from, p0, sigma, m)
    restricted_slope = 2.0 * np.exp(-1j * V * t) * free_slope
    integrand = (0.5j / m) * post_crossing[::-1] * restricted_slope
    value = complex(integrate.trapezoid(integrand, t))
    if n_steps % 2 == 0:
        coarse = complex(integrate.trapezoid(integrand[::2], t[::2]))
        estimate = abs(value - coarse) / max(abs(value), 1e-300)
        if estimate > QUADRATURE_FAIL:
            raise ex.ConvergenceException("Crossing-time quadrature unresolved: relative change {:.2e}".format(estimate))
        if estimate > QUADRATURE_WARN:
            log.warning("Crossing-time quadrature estimate {:.2e} with {} nodes".format(estimate, n_steps + 1))
    return value


def _check_crossing(x_to, x_from):
    if not x_to < 0 < x_from:
        raise ex.InputException("First-crossing decomposition needs x_to < 0 < x_from, got {} and {}".format(
            x_to, x_from))


def pdx_first_crossing(x_to, x_from, tau, V, p0=0.0, m=1.0, grid=None, dt=None):
    """Smeared propagator across x = 0 assembled at the first crossing time.

    Before the crossing the source moves under the exact image propagator; after
    it the amplitude h(s) = (exp(-iHs) chi_to)(0) comes from grid evolution.
    """
    _check_crossing(x_to, x_from)
    _check_tau(tau)
    grid = grid or default_grid()
    sigma = SOURCE_WIDTH * grid.dx
    target = gaussian_state(grid, x_to, 0.0, sigma)
    propagator, n_steps = _step_propagator(grid, target, tau, V, m, dt)
    post_crossing = []
    propagator.run(target, n_steps, stride=1, keep=False,
                   observer=lambda state: post_crossing.append(value_at(state, 0.0)[0]))
    return _crossing_quadrature(np.array(post_crossing), x_from, tau, V, p0, m, sigma, n_steps)


def pdx_semiclassical(x_to, x_from, tau, V, p0=0.0, m=1.0, grid=None, dt=None):
    """First-crossing decomposition with free propagation after the crossing."""
    _check_crossing(x_to, x_from)
    _check_tau(tau)
    grid = grid or default_grid()
    sigma = SOURCE_WIDTH * grid.dx
    target = gaussian_state(grid, x_to, 0.0, sigma)
    _, n_steps = _step_propagator(grid, target, tau, V, m, dt)
    s = np.linspace(0.0, tau, n_steps + 1)
    post_crossing, _ = free_gaussian(0.0, s, x_to, 0.0, sigma, m)
    return _crossing_quadrature(post_crossing, x_from, tau, V, p0, m, sigma, n_steps)


def richardson_limit(etas, values):
    """Polynomial extrapolation of values(eta) to eta = 0 (Neville's scheme)."""
    etas = np.asarray(etas, dtype=float)
    table = np.array(values, dtype=complex)
    if etas.size != table.size or etas.size < 2:
        raise ex.InputException("Need at least two matching damping/value pairs")
    if np.unique(etas).size != etas.size:
        raise ex.InputException("Damping values must be distinct")
    n = etas.size
    for level in range(1, n):
        for i in range(n - level):
            table[i] = (etas[i + level] * table[i] - etas[i] * table[i + 1]) / (etas[i + level] - etas[i])
    return complex(table[0])


def scattering_integral(x, E, m=1.0):
    """int_0^inf ds <x| exp(-i H_0 s) p |0> exp(i E s) = m exp(i |x| sqrt(2 m E)) on the x > 0 branch."""
    if not E > 0:
        raise ex.InputException("Scattering energy must be positive, got {}".format(E))
    x = np.asarray(x, dtype=float)
    value = m * np.exp(1j * np.abs(x) * np.sqrt(2.0 * m * E))
    return complex(value) if value.ndim == 0 else value


def _fourier_tail(func, lower, omega):
    """int_lower^inf func(s) exp(i omega s) ds for complex func, via QAWF."""
    parts = {}
    for weight in ("cos", "sin"):
        for name, part in (("re", lambda s: func(s).real), ("im", lambda s: func(s).imag)):
            value, error = integrate.quad(part, lower, np.inf, weight=weight, wvar=omega, limlst=200)
            parts[(weight, name)] = value
    real = parts[("cos", "re")] - parts[("sin", "im")]
    imag = parts[("sin", "re")] + parts[("cos", "im")]
    return complex(real, imag)


def damped_scattering_integral(x, E, m, eta):
    """The scattering s-integral with an exp(-eta s) damping factor."""
    if x == 0:
        raise ex.InputException("The s-integral vanishes identically at x = 0; evaluate at x != 0")
    s_split = 1.0 / E
    # s < s_split, mapped to w = m x^2 / 2s where the integrand oscillates as exp(i w)
    w_split = m * x ** 2 / (2.0 * s_split)
    prefactor = m * math.copysign(1.0, x) * INV_SQRT_I / math.sqrt(math.pi)

    def early(w):
        return prefactor * w ** -0.5 * np.exp((1j * E - eta) * m * x ** 2 / (2.0 * w))

    def late(s):
        return (m * x / s) * np.sqrt(m / (2.0 * np.pi * s)) * INV_SQRT_I * np.exp(0.5j * m * x ** 2 / s - eta * s)

    return _fourier_tail(early, w_split, 1.0) + _fourier_tail(late, s_split, E)


def scattering_integral_quadrature(x, E, m=1.0, etas=None):
    """Damped quadrature of the scattering s-integral, extrapolated to zero damping."""
    if not E > 0:
        raise ex.InputException("Scattering energy must be positive, got {}".format(E))
    etas = etas if etas is not None else [0.2 * E, 0.1 * E, 0.05 * E]
    values = [damped_scattering_integral(x, E, m, eta) for eta in etas]
    limit = richardson_limit(etas, values)
    log.debug("Scattering integral at x = {}: damped {} -> {}".format(x, values, limit))
    return limit


def strong_coupling_wall_integral(x, E, V_wall, m=1.0):
    """sqrt(2m / V) exp(-i x sqrt(2m (E + V))), the large-wall form of the exit amplitude."""
    if not V_wall > 0:
        raise ex.InputException("Wall height must be positive, got {}".format(V_wall))
    x = np.asarray(x, dtype=float)
    if np.any(x > 0):
        raise ex.InputException("Wall integral is defined for x <= 0")
    value = np.sqrt(2.0 * m / V_wall) * np.exp(-1j * x * np.sqrt(2.0 * m * (E + V_wall)))
    return complex(value) if value.ndim == 0 else value


def wall_green_function(x, E, V_wall, m=1.0):
    """Exact int_0^inf dt exp(i E t) <x| exp(-i H t) |0> for x <= 0 below a drop of depth V at x = 0."""
    if not V_wall > 0 or not E > 0:
        raise ex.InputException("Need E > 0 and V_wall > 0, got {} and {}".format(E, V_wall))
    x = np.asarray(x, dtype=float)
    if np.any(x > 0):
        raise ex.InputException("Wall Green function is defined for x <= 0")
    k = math.sqrt(2.0 * m * E)
    K = math.sqrt(2.0 * m * (E + V_wall))
    value = 2.0 * m * np.exp(-1j * K * x) / (k + K)
    return complex(value) if value.ndim == 0 else value


def _outgoing_factor(energy, m, dx):
    """exp(i kappa dx) of the decaying outgoing lattice wave at complex energy."""
    kappa_dx = np.arccos(1.0 - m * dx ** 2 * energy + 0j)
    if kappa_dx.imag < 0:
        kappa_dx = -kappa_dx
    return np.exp(1j * kappa_dx)


def damped_wall_green_function(x_points, E, V_wall, m, eta, extent=5.0, dx=2e-3):
    """Lattice solution of (E + i eta - H) G = delta(x) with transparent ends, times i."""
    n = int(round(2.0 * extent / dx)) + 1
    grid_x = np.linspace(-extent, extent, n)
    dx = grid_x[1] - grid_x[0]
    potential = np.where(grid_x < 0, -V_wall, 0.0)
    potential[n // 2] = -0.5 * V_wall
    hop = 1.0 / (2.0 * m * dx ** 2)
    energy = E + 1j * eta
    diagonal = energy - potential - 2.0 * hop
    diagonal[0] += hop * _outgoing_factor(energy + V_wall, m, dx)
    diagonal[-1] += hop * _outgoing_factor(energy, m, dx)
    bands = np.zeros((3, n), dtype=complex)
    bands[0, 1:] = hop
    bands[1] = diagonal
    bands[2, :-1] = hop
    rhs = np.zeros(n, dtype=complex)
    rhs[n // 2] = 1.0 / dx
    green = linalg.solve_banded((1, 1), bands, rhs)
    values = np.interp(x_points, grid_x, green.real) + 1j * np.interp(x_points, grid_x, green.imag)
    return 1j * values


def wall_integral_quadrature(x, E, V_wall, m=1.0, etas=None, extent=5.0, dx=2e-3):
    """Damped lattice oracle for ``wall_green_function``, extrapolated to zero damping."""
    if not V_wall > 0 or not E > 0:
        raise ex.InputException("Need E > 0 and V_wall > 0, got {} and {}".format(E, V_wall))
    if not -extent < x <= 0:
        raise ex.InputException("x = {} outside the oracle box (-{}, 0]".format(x, extent))
    etas = etas if etas is not None else [0.2 * E, 0.1 * E, 0.05 * E]
    values = [complex(damped_wall_green_function(x, E, V_wall, m, eta, extent, dx)) for eta in etas]
    return richardson_limit(etas, values)


def free_propagator_composition(x_to, tau_2, tau_1, x_from, m=1.0, etas=None, tolerance=1e-6):
    """int dz g_f(x_to, tau_2 | z) g_f(z, tau_1 | x_from) by Gaussian-damped quadrature."""
    _check_tau(tau_1)
    _check_tau(tau_2)
    etas = etas if etas is not None else [0.02, 0.01, 0.005, 0.0025]
    values = []
    for eta in etas:
        reach = math.sqrt(40.0 / eta)
        rate = m * reach * (1.0 / tau_1 + 1.0 / tau_2) + m * (abs(x_to) / tau_2 + abs(x_from) / tau_1)
        n = int(math.ceil(2.0 * reach * 4.0 * rate / math.pi)) + 1
        z = np.linspace(-reach, reach, n)
        integrand = free_propagator(z, tau_2, x_to, m) * free_propagator(z, tau_1, x_from, m) * np.exp(-eta * z ** 2)
        values.append(complex(integrate.trapezoid(integrand, z)))
    limit = richardson_limit(etas, values)
    check = richardson_limit(etas[:-1], values[:-1])
    if abs(limit - check) > tolerance * max(abs(limit), 1.0):
        log.warning("Composition extrapolation moved by {:.2e}".format(abs(limit - check)))
    return limit
