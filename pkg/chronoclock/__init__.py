from __future__ import absolute_import

from chronoclock.lattice import Grid, Region, WaveFunction, gaussian_state, make_grid, probability_in_region
from chronoclock.clocks import ClockModel, linear_momentum_clock, free_particle_clock, potential_well_clock
from chronoclock.dynamics import StepPotentialSpec, evolve_step_potential, evolve_composite, pointer_distribution
from chronoclock.observables import Distribution
from chronoclock.harness import ClockExperiment, ComparisonReport, ExperimentConfig, run_experiment

__all__ = ["Grid", "Region", "WaveFunction", "gaussian_state", "make_grid", "probability_in_region",
           "ClockModel", "linear_momentum_clock", "free_particle_clock", "potential_well_clock",
           "StepPotentialSpec", "evolve_step_potential", "evolve_composite", "pointer_distribution",
           "Distribution", "ClockExperiment", "ComparisonReport", "ExperimentConfig", "run_experiment"]
