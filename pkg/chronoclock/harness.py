import copy
import json
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np
import yaml

import chronoclock.clockExceptions as ex
from chronoclock.clocks import (FREE_PARTICLE, LINEAR_MOMENTUM, POTENTIAL_WELL, clock_energy_moments,
                                free_particle_clock, hj_time_map, linear_momentum_clock, potential_well_clock,
                                resolution_overlap, resolution_time, wkb_eigenstate)
from chronoclock.dynamics import (READOUT_ALL, READOUT_TRANSMITTED, StepPotentialSpec, default_stride,
                                  evolve_composite, evolve_step_potential, pointer_distribution, steps_for,
                                  surviving_probability)
from chronoclock.lattice import (HALF_LINE, INTERVAL, Region, counter_propagating_mass, gaussian_state, in_momentum,
                                 make_grid, mean_momentum, momentum_amplitude, momentum_support)
from chronoclock.observables import (POINTER_Y, Distribution, coarse_grain, dwell_semiclassical,
                                     probability_current_series, relative_l2, response_kernel, smear,
                                     strong_arrival_prediction, sup_relative, weak_arrival_prediction,
                                     weak_dwell_prediction)
from chronoclock import pdx

log = logging.getLogger(__name__)

ARRIVAL_WEAK = "arrival_weak"
ARRIVAL_STRONG = "arrival_strong"
DWELL_WEAK = "dwell_weak"
PDX_CHECK = "pdx_check"
RESOLUTION_SCAN = "resolution_scan"
EXPERIMENTS = (ARRIVAL_WEAK, ARRIVAL_STRONG, DWELL_WEAK, PDX_CHECK, RESOLUTION_SCAN)

AUTO = "auto"
WEAK_RATIO = 0.05
STRONG_RATIO = 50.0
MIN_DWELL_ACTION = 10.0
# amplitudes kept across all free-evolution snapshots
SNAPSHOT_BUDGET = 8e6


def _defaults(experiment):
    """Section defaults; the strong run uses a slower, wider packet so its clock grid stays desk-sized.

    Its particle grid is fine enough to resolve the fast transmitted wave and wide
    enough to hold it until tau.
    """
    particle = {"m": 1.0, "x0": 15.0, "p0": -3.0, "sigma": 2.0}
    clock = {"kind": LINEAR_MOMENTUM, "mu": 1.0, "eps0": 1.0, "sigma_eps": 0.1, "sigma_y": None,
             "omega": 1.0, "y0": 0.0, "truncation": 1e-12}
    region = {"kind": HALF_LINE, "L": 0.0}
    grid = {"x_min": -60.0, "x_max": 60.0, "n_points": 4096}
    clock_grid = {"x_min": -40.0, "x_max": 40.0, "n_points": 512}
    thresholds = {"l2": 0.05, "mass": 1e-6, "reflected": 0.5, "coarse": 0.02, "monte_carlo": 0.01,
                  "resolution": 1e-8, "pdx_identity": 0.01, "pdx_semiclassical": 0.03, "pdx_slope": 1e-8,
                  "scattering": 1e-3, "wall": 1e-2, "wall_large": 0.02, "composition": 1e-6, "tail": 1e-6}
    top = {"lambda": 0.02, "dt": AUTO, "tau": AUTO, "exit_margin": 10.0, "safety_factor": 1.5,
           "output_dir": "results", "seed": 0, "threads": 1, "max_work": 5e11}
    if experiment == ARRIVAL_STRONG:
        particle.update({"x0": 12.0, "p0": -1.0, "sigma": 3.0})
        grid.update({"x_min": -288.0, "x_max": 64.0, "n_points": 8192})
        clock_grid.update({"x_min": -40.0, "x_max": 760.0, "n_points": 2048})
        thresholds["l2"] = 0.10
        top.update({"lambda": 30.0, "tau": 24.0, "max_work": 1e12})
    elif experiment == DWELL_WEAK:
        region.update({"kind": INTERVAL, "L": 5.0})
    elif experiment == RESOLUTION_SCAN:
        clock["sigma_eps"] = 10.0
        top["lambda"] = 1.0
    return {"particle": particle, "clock": clock, "region": region, "grid": grid, "clock_grid": clock_grid,
            "thresholds": thresholds}, top


SECTIONS = ("particle", "clock", "region", "grid", "clock_grid", "thresholds")
TEXT_KEYS = {("clock", "kind"), ("region", "kind")}
OPTIONAL_KEYS = {("clock", "sigma_y")}
INTEGER_KEYS = {("grid", "n_points"), ("clock_grid", "n_points")}


def _number(value, name, kind=float):
    """Coerce a config value; YAML leaves exponents such as 2e-2 as strings."""
    try:
        if isinstance(value, bool):
            raise ValueError(value)
        number = float(value)
        if kind is int:
            if number != int(number):
                raise ValueError(value)
            return int(number)
        return number
    except (TypeError, ValueError):
        raise ex.DataException("{} must be {}, got {!r}".format(
            name, "an integer" if kind is int else "a number", value))


@dataclass
class ExperimentConfig(object):
    """Validated experiment description, normally read from a YAML file."""

    experiment: str
    particle: dict
    clock: dict
    region: dict
    grid: dict
    clock_grid: dict
    thresholds: dict
    lam: float
    dt: object
    tau: object
    exit_margin: float
    safety_factor: float
    output_dir: str
    seed: int
    threads: int
    max_work: float

    @classmethod
    def from_dict(cls, mapping):
        if not isinstance(mapping, dict):
            raise ex.DataException("Config must be a mapping, got {}".format(type(mapping).__name__))
        experiment = mapping.get("experiment", ARRIVAL_WEAK)
        if experiment not in EXPERIMENTS:
            raise ex.DataException("Unknown experiment {!r}; expected one of {}".format(experiment, EXPERIMENTS))
        sections, top = _defaults(experiment)
        for key, value in mapping.items():
            if key == "experiment":
                continue
            if key in sections:
                if not isinstance(value, dict):
                    raise ex.DataException("Section {!r} must be a mapping".format(key))
                unknown = set(value) - set(sections[key])
                if unknown:
                    raise ex.DataException("Unknown keys {} in section {!r}".format(sorted(unknown), key))
                sections[key].update(value)
            elif key in top:
                top[key] = value
            else:
                raise ex.DataException("Unknown config key {!r}".format(key))
        top["lam"] = top.pop("lambda")
        config = cls(experiment=experiment, **sections, **top)
        config.validate()
        return config

    @classmethod
    def from_yaml(cls, path):
        try:
            with open(path) as stream:
                mapping = yaml.safe_load(stream)
        except OSError as e:
            raise ex.DataException("Cannot read config {}: {}".format(path, e))
        except yaml.YAMLError as e:
            raise ex.DataException("Malformed YAML in {}: {}".format(path, e))
        return cls.from_dict(mapping or {})

    def validate(self):
        self._coerce()
        for name in ("dt", "tau"):
            value = getattr(self, name)
            if value != AUTO and not value > 0:
                raise ex.InputException("{} must be positive or 'auto', got {!r}".format(name, value))
        if not self.particle["m"] > 0:
            raise ex.InputException("Particle mass must be positive, got {}".format(self.particle["m"]))
        if self.lam < 0:
            raise ex.InputException("Coupling must be non-negative, got {}".format(self.lam))
        if self.threads < 1:
            raise ex.InputException("threads must be >= 1, got {}".format(self.threads))

    def _coerce(self):
        for section in SECTIONS:
            values = getattr(self, section)
            for key, value in values.items():
                if (section, key) in TEXT_KEYS or (value is None and (section, key) in OPTIONAL_KEYS):
                    continue
                kind = int if (section, key) in INTEGER_KEYS else float
                values[key] = _number(value, "{}.{}".format(section, key), kind)
        for name in ("dt", "tau"):
            value = getattr(self, name)
            if value != AUTO:
                try:
                    setattr(self, name, _number(value, name))
                except ex.DataException:
                    raise ex.InputException("{} must be positive or 'auto', got {!r}".format(name, value))
        self.lam = _number(self.lam, "lambda")
        self.exit_margin = _number(self.exit_margin, "exit_margin")
        self.safety_factor = _number(self.safety_factor, "safety_factor")
        self.max_work = _number(self.max_work, "max_work")
        self.seed = _number(self.seed, "seed", int)
        self.threads = _number(self.threads, "threads", int)

    @property
    def energy(self):
        return self.particle["p0"] ** 2 / (2.0 * self.particle["m"])

    def to_dict(self):
        data = {name: copy.deepcopy(getattr(self, name)) for name in SECTIONS}
        data.update({"experiment": self.experiment, "lambda": self.lam, "dt": self.dt, "tau": self.tau,
                     "exit_margin": self.exit_margin, "safety_factor": self.safety_factor,
                     "output_dir": self.output_dir, "seed": self.seed, "threads": self.threads,
                     "max_work": self.max_work})
        return data


@dataclass
class ComparisonReport(object):
    l2_relative: float
    sup_relative: float
    mass_simulated: float
    mass_predicted: float
    coarse_grained_table: list = field(default_factory=list)
    passed: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def ok(self):
        return all(self.passed.values())

    def to_dict(self):
        return {
            "l2_relative": self.l2_relative,
            "sup_relative": self.sup_relative,
            "mass_simulated": self.mass_simulated,
            "mass_predicted": self.mass_predicted,
            "coarse_grained_table": [list(row) for row in self.coarse_grained_table],
            "passed": dict(self.passed),
            "ok": self.ok,
            "details": self.details,
        }


def build_clock(config, grid=None):
    spec = config.clock
    grid = grid or make_grid(**config.clock_grid)
    if spec["kind"] == LINEAR_MOMENTUM:
        return linear_momentum_clock(grid, spec["eps0"], spec["sigma_eps"], spec["y0"], spec["truncation"])
    if spec["kind"] == FREE_PARTICLE:
        sigma_y = spec["sigma_y"] or 1.0 / (2.0 * spec["sigma_eps"])
        return free_particle_clock(grid, spec["mu"], spec["eps0"], sigma_y, spec["y0"], spec["truncation"])
    if spec["kind"] == POTENTIAL_WELL:
        return potential_well_clock(grid, spec["mu"], spec["omega"], y0=spec["y0"], sigma_y=spec["sigma_y"],
                                    truncation=spec["truncation"])
    raise ex.InputException("Unknown clock kind {!r}".format(spec["kind"]))


def build_region(config):
    return Region(config.region["kind"], config.region["L"])


def auto_tau(config):
    """Time to carry the packet from x0 across the region and an exit margin, with a safety factor."""
    particle = config.particle
    if particle["p0"] == 0:
        raise ex.InputException("auto tau needs a moving packet, p0 = 0")
    distance = particle["x0"] + config.exit_margin
    if config.region["kind"] == INTERVAL:
        distance += config.region["L"]
    speed = abs(particle["p0"]) / particle["m"]
    return distance / speed * config.safety_factor


def check_regime(config, clock):
    """Refuse configs outside the coupling regime their experiment assumes."""
    mean_eps, _ = clock_energy_moments(clock)
    strength = config.lam * abs(mean_eps)
    energy = config.energy
    if config.experiment in (ARRIVAL_WEAK, DWELL_WEAK) and strength > WEAK_RATIO * energy:
        raise ex.RegimeException("{} needs lambda eps0 <= {} E, got {:.4g} > {:.4g}".format(
            config.experiment, WEAK_RATIO, strength, WEAK_RATIO * energy))
    if config.experiment == ARRIVAL_STRONG and strength < STRONG_RATIO * energy:
        raise ex.RegimeException("arrival_strong needs lambda eps0 >= {} E, got {:.4g} < {:.4g}".format(
            STRONG_RATIO, strength, STRONG_RATIO * energy))
    if config.experiment == DWELL_WEAK:
        L = config.region["L"]
        if config.region["kind"] != INTERVAL:
            raise ex.RegimeException("dwell_weak needs an interval region")
        if abs(config.particle["p0"]) * L < MIN_DWELL_ACTION:
            raise ex.RegimeException("dwell_weak needs |p0| L >= {}, got {:.4g}".format(
                MIN_DWELL_ACTION, abs(config.particle["p0"]) * L))
        if config.particle["x0"] <= L:
            raise ex.RegimeException("dwell_weak needs the packet to start outside the interval (x0 > L)")


def estimate_work(n_channels, n_steps, n_points):
    return 2.0 * n_channels * n_steps * n_points * math.log2(n_points)


def compare_distributions(simulated, predicted, thresholds, l2_threshold=None):
    l2 = relative_l2(simulated, predicted)
    sup = sup_relative(simulated, predicted)
    table = coarse_grained_table(simulated, predicted)
    limit = thresholds["l2"] if l2_threshold is None else l2_threshold
    return ComparisonReport(l2, sup, simulated.total_mass, predicted.total_mass, table, {"l2": l2 <= limit})


def coarse_grained_table(simulated, predicted, n_bins=10, support_fraction=1e-4):
    """Probabilities of both distributions in equal bins spanning the predicted support."""
    peak = np.abs(predicted.density).max()
    support = predicted.coordinates[np.abs(predicted.density) > support_fraction * peak]
    lo = max(support[0], simulated.coordinates[0])
    hi = min(support[-1], simulated.coordinates[-1])
    if not hi > lo:
        return []
    edges = np.linspace(lo, hi, n_bins + 1)
    return [(float(a), float(b), coarse_grain(simulated, a, b), coarse_grain(predicted, a, b))
            for a, b in zip(edges[:-1], edges[1:])]


def sample_dwell_times(psi0, L, m, n_samples, seed, n_lattice=8192):
    """Monte-Carlo dwell times 2 m L / |p| with p drawn from |psi~_0(p)|^2 by inverse CDF."""
    phi = in_momentum(psi0)
    reach = momentum_support(phi, threshold=1e-16)
    p = np.linspace(-reach, reach, n_lattice)
    density = np.abs(momentum_amplitude(phi, p)) ** 2
    cumulative = np.concatenate(([0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(p))))
    cumulative /= cumulative[-1]
    rng = np.random.default_rng(seed)
    draws = np.interp(rng.random(n_samples), cumulative, p)
    return 2.0 * m * L / np.abs(draws)


def monte_carlo_dwell_error(samples, dwell, n_bins=60, smoothing=5):
    """Smoothed sup-norm distance between a dwell-time histogram and the semiclassical density."""
    lo, hi = dwell.coordinates[0], dwell.coordinates[-1]
    counts, edges = np.histogram(samples, bins=n_bins, range=(lo, hi))
    width = edges[1] - edges[0]
    histogram = counts / (samples.size * width)
    expected = np.array([coarse_grain(dwell, a, b) / width for a, b in zip(edges[:-1], edges[1:])])
    window = np.ones(smoothing) / smoothing
    histogram = np.convolve(histogram, window, mode="same")
    expected = np.convolve(expected, window, mode="same")
    return float(np.max(np.abs(histogram - expected)) / np.max(expected))


class ClockExperiment(object):
    """Runs one configured experiment and collects its artifacts."""

    _monte_carlo_samples = 1000000

    def __init__(self, config, debug=False):
        self.config = config
        self.debug = debug
        self.artifacts = {}
        self.checks = {}
        self._routes = {
            ARRIVAL_WEAK: self.arrival_weak,
            ARRIVAL_STRONG: self.arrival_strong,
            DWELL_WEAK: self.dwell_weak,
            PDX_CHECK: self.pdx_check,
            RESOLUTION_SCAN: self.resolution_scan,
        }

    def run(self):
        runner = self._routes[self.config.experiment]
        log.info("Running {} experiment".format(self.config.experiment))
        report = runner()
        report.details.update(self.checks)
        report.details["experiment"] = self.config.experiment
        log.info("{} finished: l2 = {:.3e}, passed = {}".format(self.config.experiment, report.l2_relative,
                                                                report.passed))
        return report

    def _setup(self):
        config = self.config
        particle = config.particle
        grid = make_grid(**config.grid)
        psi0 = gaussian_state(grid, particle["x0"], particle["p0"], particle["sigma"])
        if config.experiment in (ARRIVAL_WEAK, ARRIVAL_STRONG):
            self._tail_check(psi0)
        clock = build_clock(config)
        check_regime(config, clock)
        region = build_region(config)
        tau = auto_tau(config) if config.tau == AUTO else float(config.tau)
        dt = self._resolve_dt(psi0, clock)
        n_steps, dt = steps_for(tau, dt)
        work = estimate_work(len(clock.eigensystem), n_steps, grid.n_points)
        if work > config.max_work:
            raise ex.ResourceException("Estimated work {:.3e} exceeds max_work {:.3e}".format(work, config.max_work))
        if self.debug:
            log.debug("Setup: {} channels, tau = {:.4g}, dt = {:.4g}, {} steps, work {:.3e}".format(
                len(clock.eigensystem), tau, dt, n_steps, work))
        return psi0, clock, region, tau, dt, n_steps

    def _tail_check(self, psi0):
        tail = counter_propagating_mass(psi0)
        self.checks["tail_mass"] = tail
        if tail > self.config.thresholds["tail"]:
            raise ex.InputException("Packet carries {:.3e} of its probability against p0, above {:.1e}".format(
                tail, self.config.thresholds["tail"]))

    def _resolve_dt(self, psi0, clock):
        if self.config.dt != AUTO:
            return float(self.config.dt)
        m = self.config.particle["m"]
        potential = self.config.lam * float(np.max(np.abs(clock.eigensystem.energies)))
        fastest = max(potential, momentum_support(psi0) ** 2 / (2.0 * m))
        return 0.09 / fastest

    def _free_snapshots(self, psi0, region, dt, n_steps):
        spec = StepPotentialSpec(0.0, region, self.config.particle["m"])
        stride = max(default_stride(n_steps), math.ceil(n_steps * psi0.grid.n_points / SNAPSHOT_BUDGET))
        return evolve_step_potential(psi0, spec, dt, n_steps, stride=stride, debug=self.debug)

    def _composite(self, psi0, clock, region, tau, dt, require_exit=True):
        config = self.config
        return evolve_composite(psi0, clock, config.lam, region, tau, dt, config.particle["m"],
                                threads=config.threads, require_exit=require_exit, debug=self.debug)

    def _mass_check(self, report, simulated):
        mass = simulated.raw_mass if simulated.raw_mass is not None else simulated.total_mass
        report.details["pointer_raw_mass"] = mass
        report.passed["mass"] = abs(mass - 1.0) <= self.config.thresholds["mass"]

    def arrival_weak(self):
        config = self.config
        psi0, clock, region, tau, dt, n_steps = self._setup()
        state = self._composite(psi0, clock, region, tau, dt)
        simulated = pointer_distribution(state, READOUT_ALL)
        snapshots = self._free_snapshots(psi0, region, dt, n_steps)
        current = probability_current_series(snapshots, config.particle["m"])
        if config.lam == 0:
            log.info("Decoupled run: comparing against |phi_0(y)|^2")
            predicted = Distribution(POINTER_Y, clock.grid.x, clock.initial_state.density)
            report = compare_distributions(simulated, predicted, config.thresholds, l2_threshold=1e-6)
        else:
            predicted = weak_arrival_prediction(snapshots, clock, config.lam, config.particle["m"])
            report = compare_distributions(simulated, predicted, config.thresholds)
        self._mass_check(report, simulated)
        report.details.update({"tau": tau, "dt": dt, "n_channels": len(clock.eigensystem),
                               "min_current": float(current.density.min()),
                               "surviving_probability": surviving_probability(state)})
        self.artifacts.update({"pointer": simulated, "predicted": predicted, "current": current})
        return report

    def arrival_strong(self):
        config = self.config
        m = config.particle["m"]
        psi0, clock, region, tau, dt, n_steps = self._setup()
        if clock.kind == POTENTIAL_WELL:
            raise ex.InputException("arrival_strong needs a linear_momentum or free_particle clock")
        state = self._composite(psi0, clock, region, tau, dt, require_exit=False)
        transmitted = pointer_distribution(state, READOUT_TRANSMITTED)
        simulated = transmitted.normalized()
        snapshots = self._free_snapshots(psi0, region, dt, n_steps)
        time_map = None
        if clock.kind != LINEAR_MOMENTUM:
            wkb = wkb_eigenstate(clock, clock_energy_moments(clock)[0])
            time_map = lambda y: hj_time_map(wkb, config.lam, y)
        predicted = strong_arrival_prediction(snapshots, config.lam, m, mean_momentum(psi0),
                                              coordinates=clock.grid.x, time_map=time_map)
        report = compare_distributions(simulated, predicted, config.thresholds)
        residual = simulated.moments()[1] / predicted.moments()[1] - 1.0
        if abs(residual) > 0.01:
            log.warning("Pointer width differs from the kinetic density width by {:+.1%}".format(residual))
        reflected = surviving_probability(state)
        report.passed["reflected"] = reflected > config.thresholds["reflected"]
        if reflected <= config.thresholds["reflected"]:
            log.warning("Reflected probability {:.3f} shows no Zeno reflection".format(reflected))
        report.details.update({"tau": tau, "dt": dt, "n_channels": len(clock.eigensystem),
                               "reflected_probability": reflected, "transmitted_mass": transmitted.raw_mass,
                               "residual_smearing": residual})
        self.artifacts.update({"pointer": simulated, "predicted": predicted,
                               "current": probability_current_series(snapshots, m)})
        return report

    def dwell_weak(self):
        config = self.config
        m = config.particle["m"]
        L = config.region["L"]
        psi0, clock, region, tau, dt, n_steps = self._setup()
        state = self._composite(psi0, clock, region, tau, dt)
        simulated = pointer_distribution(state, READOUT_ALL)
        predicted = weak_dwell_prediction(psi0, clock, config.lam, L, m)
        report = compare_distributions(simulated, predicted, config.thresholds)
        self._mass_check(report, simulated)

        dwell = dwell_semiclassical(psi0, L, m)
        samples = sample_dwell_times(psi0, L, m, self._monte_carlo_samples, config.seed)
        error = monte_carlo_dwell_error(samples, dwell)
        report.passed["monte_carlo"] = error <= config.thresholds["monte_carlo"]
        report.details.update({"tau": tau, "dt": dt, "n_channels": len(clock.eigensystem),
                               "monte_carlo_error": error, "dwell_mass": dwell.total_mass})
        self.artifacts.update({"pointer": simulated, "predicted": predicted, "dwell": dwell})
        return report

    def pdx_check(self):
        thresholds = self.config.thresholds
        m = self.config.particle["m"]
        rows = []
        passed = {}

        def relative(value, reference):
            return abs(value - reference) / abs(reference)

        identity = []
        for x_to, x_from, tau in ((-4.0, 4.0, 2.0), (-3.0, 5.0, 2.5), (-5.0, 3.0, 2.0), (-2.0, 2.0, 1.0),
                                  (-6.0, 4.0, 3.0)):
            p0 = -m * (x_from - x_to) / tau
            value = pdx.pdx_first_crossing(x_to, x_from, tau, 0.0, p0, m)
            reference = pdx.smeared_free_propagator(x_to, x_from, tau, p0, m)
            identity.append(relative(value, reference))
            rows.append(["identity", x_from, x_to, tau, 0.0, value, reference, identity[-1]])
        passed["pdx_identity"] = max(identity) <= thresholds["pdx_identity"]

        x_to, x_from, tau = -4.0, 4.0, 2.0
        p0 = -m * (x_from - x_to) / tau
        energy = p0 ** 2 / (2.0 * m)
        semiclassical, exact = [], []
        for ratio in (5.0, 10.0, 20.0):
            V = energy / ratio
            reference = pdx.grid_propagator(x_to, x_from, tau, V, p0, m)
            approx = pdx.pdx_semiclassical(x_to, x_from, tau, V, p0, m)
            full = pdx.pdx_first_crossing(x_to, x_from, tau, V, p0, m)
            semiclassical.append(relative(approx, reference))
            exact.append(relative(full, reference))
            rows.append(["semiclassical", x_from, x_to, tau, V, approx, reference, semiclassical[-1]])
            rows.append(["first_crossing", x_from, x_to, tau, V, full, reference, exact[-1]])
        passed["pdx_semiclassical"] = (semiclassical[0] > semiclassical[1] > semiclassical[2]
                                       and semiclassical[2] <= thresholds["pdx_semiclassical"])

        slopes = []
        h = 1e-5
        for tau, x_from, V in ((1.0, 2.0, 0.5), (0.5, 1.0, 3.0), (2.0, 3.0, 0.0)):
            analytic = pdx.restricted_propagator_slope(tau, x_from, V, m)
            numeric = pdx.restricted_propagator_image(h, tau, x_from, V, m) / h
            slopes.append(relative(numeric, analytic))
            rows.append(["slope", x_from, 0.0, tau, V, numeric, analytic, slopes[-1]])
        passed["pdx_slope"] = max(slopes) <= thresholds["pdx_slope"]

        scattering = []
        for x in (0.5, 1.0, 2.0):
            value = pdx.scattering_integral_quadrature(x, 1.0, m)
            reference = pdx.scattering_integral(x, 1.0, m)
            scattering.append(relative(value, reference))
            rows.append(["scattering", 0.0, x, 0.0, 0.0, value, reference, scattering[-1]])
        passed["scattering"] = max(scattering) <= thresholds["scattering"]

        walls = []
        for x in (-0.5, -1.0):
            value = pdx.wall_integral_quadrature(x, 1.0, 100.0, m)
            reference = pdx.wall_green_function(x, 1.0, 100.0, m)
            walls.append(relative(value, reference))
            rows.append(["wall", 0.0, x, 0.0, 100.0, value, reference, walls[-1]])
        printed = pdx.strong_coupling_wall_integral(-1.0, 1.0, 1e4, m)
        exact_wall = pdx.wall_green_function(-1.0, 1.0, 1e4, m)
        large = relative(printed, exact_wall)
        rows.append(["wall_large", 0.0, -1.0, 0.0, 1e4, printed, exact_wall, large])
        passed["wall"] = max(walls) <= thresholds["wall"]
        passed["wall_large"] = large <= thresholds["wall_large"]

        composed = pdx.free_propagator_composition(1.0, 1.0, 0.5, -0.5, m)
        direct = pdx.free_propagator(1.0, 1.5, -0.5, m)
        composition = relative(composed, direct)
        rows.append(["composition", -0.5, 1.0, 1.5, 0.0, composed, direct, composition])
        passed["composition"] = composition <= thresholds["composition"]

        self.artifacts["pdx"] = rows
        return ComparisonReport(max(identity), max(semiclassical), 1.0, 1.0, [], passed,
                                {"semiclassical_errors": semiclassical, "first_crossing_errors": exact,
                                 "identity_errors": identity})

    def resolution_scan(self):
        config = self.config
        lam = config.lam
        sigma_eps = config.clock["sigma_eps"]
        psi0 = gaussian_state(make_grid(**config.grid), config.particle["x0"], config.particle["p0"],
                              config.particle["sigma"])
        tau = auto_tau(config) if config.tau == AUTO else float(config.tau)
        dt = float(config.dt) if config.dt != AUTO else 0.09 / (momentum_support(psi0) ** 2 / (2.0 * config.particle["m"]))
        n_steps, dt = steps_for(tau, dt)

        coarse_clock = scan_clock(lam, config.clock["eps0"], sigma_eps, tau)
        fine_clock = scan_clock(lam, config.clock["eps0"], 4.0 * sigma_eps, tau)
        delta = np.linspace(0.0, 10.0, 201) / (lam * sigma_eps)
        overlap = np.abs(resolution_overlap(coarse_clock, lam, delta))
        gaussian = np.exp(-0.5 * (lam * sigma_eps * delta) ** 2)
        overlap_error = float(np.max(np.abs(overlap - gaussian)))

        snapshots = self._free_snapshots(psi0, Region(HALF_LINE), dt, n_steps)
        ideal = probability_current_series(snapshots, config.particle["m"])
        times = ideal.coordinates
        coarse = smear(ideal, response_kernel(coarse_clock, lam, times))
        fine = smear(ideal, response_kernel(fine_clock, lam, times))
        width = 10.0 * resolution_time(coarse_clock, lam)
        edges = np.arange(times[0] + width, times[-1] - width, width)
        table, worst = [], 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            p_coarse, p_fine = coarse_grain(coarse, a, b), coarse_grain(fine, a, b)
            table.append((float(a), float(b), p_coarse, p_fine))
            worst = max(worst, abs(p_coarse - p_fine) / max(abs(p_coarse), abs(p_fine), 1e-2))
        passed = {"resolution": overlap_error <= config.thresholds["resolution"],
                  "coarse": worst <= config.thresholds["coarse"]}
        self.artifacts["overlap"] = np.column_stack((delta, overlap, gaussian))
        self.artifacts.update({"pointer": coarse, "predicted": fine, "current": ideal})
        return ComparisonReport(relative_l2(coarse, fine), sup_relative(coarse, fine), coarse.total_mass,
                                fine.total_mass, table, passed,
                                {"overlap_error": overlap_error, "coarse_error": worst,
                                 "resolution_times": [resolution_time(coarse_clock, lam),
                                                      resolution_time(fine_clock, lam)]})

    def write_artifacts(self, report, output_dir=None):
        """Write CSV artifacts and report.json; byte-identical for identical inputs."""
        output_dir = output_dir or self.config.output_dir
        os.makedirs(output_dir, exist_ok=True)
        written = []
        sidecars = {}
        for name, artifact in sorted(self.artifacts.items()):
            path = os.path.join(output_dir, "{}.csv".format(name))
            if isinstance(artifact, Distribution):
                header = "{},density".format("y" if artifact.axis == POINTER_Y else "t")
                np.savetxt(path, artifact.to_rows(), delimiter=",", header=header, comments="", fmt="%.17g")
                sidecars[name] = artifact.metadata()
            elif name == "pdx":
                _write_pdx_rows(path, artifact)
            else:
                np.savetxt(path, np.asarray(artifact), delimiter=",", comments="", fmt="%.17g")
            written.append(path)
        payload = {"report": report.to_dict(), "config": self.config.to_dict(), "distributions": sidecars}
        report_path = os.path.join(output_dir, "report.json")
        with open(report_path, "w") as stream:
            json.dump(payload, stream, sort_keys=True, indent=2, default=_json_default)
            stream.write("\n")
        written.append(report_path)
        if self.debug:
            log.debug("Wrote {}".format(", ".join(written)))
        return written


def scan_clock(lam, eps0, sigma_eps, span):
    """Linear clock on a grid long enough that response lags up to lam * span do not wrap."""
    sigma_y = 1.0 / (2.0 * sigma_eps)
    length = 2.0 * lam * span + 20.0 * sigma_y
    n_points = 1 << int(math.ceil(math.log2(length / (sigma_y / 3.5))))
    grid = make_grid(-0.5 * length, 0.5 * length, n_points)
    return linear_momentum_clock(grid, eps0, sigma_eps)


def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    raise TypeError("Object of type {} is not JSON serializable".format(type(value).__name__))


def _write_pdx_rows(path, rows):
    with open(path, "w") as stream:
        stream.write("check,x_from,x_to,tau,V,value_re,value_im,reference_re,reference_im,relative_error\n")
        for check, x_from, x_to, tau, V, value, reference, error in rows:
            fields = [x_from, x_to, tau, V, value.real, value.imag, reference.real, reference.imag, error]
            stream.write(",".join([check] + ["{:.17g}".format(f) for f in fields]) + "\n")


def read_distribution(path, axis):
    try:
        rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as e:
        raise ex.DataException("Cannot read distribution {}: {}".format(path, e))
    if rows.shape[1] != 2:
        raise ex.DataException("{} must hold two columns, found {}".format(path, rows.shape[1]))
    return Distribution(axis, rows[:, 0], rows[:, 1], quasi=True)


def plot_data(output_dir, target=None):
    """Join pointer.csv and predicted.csv into whitespace-separated gnuplot columns."""
    simulated = read_distribution(os.path.join(output_dir, "pointer.csv"), POINTER_Y)
    predicted = read_distribution(os.path.join(output_dir, "predicted.csv"), POINTER_Y)
    columns = np.column_stack((simulated.coordinates, simulated.density,
                               predicted.interpolate(simulated.coordinates)))
    target = target or os.path.join(output_dir, "plot.dat")
    np.savetxt(target, columns, header="y simulated predicted", fmt="%.10g")
    return target


def run_experiment(config, output_dir=None, debug=False):
    """Run the configured experiment, write its artifacts and return the report."""
    experiment = ClockExperiment(config, debug=debug)
    report = experiment.run()
    experiment.write_artifacts(report, output_dir)
    return report
