# package import statement
from chronoclock import (Region, StepPotentialSpec, evolve_composite, evolve_step_potential, gaussian_state,
                         linear_momentum_clock, make_grid, pointer_distribution)
from chronoclock.clockExceptions import ChronoClockException
from chronoclock.dynamics import steps_for
from chronoclock.lattice import HALF_LINE
from chronoclock.observables import relative_l2, weak_arrival_prediction

#particle lattice and incoming packet
grid = make_grid(-60.0, 60.0, 4096)
psi0 = gaussian_state(grid, 15.0, -3.0, 2.0)

#clock on its own lattice
clock = linear_momentum_clock(make_grid(-40.0, 40.0, 512), eps0=1.0, sigma_eps=0.1)

lam, tau, dt = 0.02, 12.5, 0.0075
region = Region(HALF_LINE)

#couple the clock and read the pointer once the packet has left x > 0
try:
    state = evolve_composite(psi0, clock, lam, region, tau, dt, threads=4)
    pointer = pointer_distribution(state)
    print("Pointer mass: {}".format(pointer.raw_mass))
except ChronoClockException as e:
    print("Coupled run failed: {}".format(e))
    raise

#weak-coupling prediction from the free evolution
n_steps, dt = steps_for(tau, dt)
snapshots = evolve_step_potential(psi0, StepPotentialSpec(0.0, region), dt, n_steps)
predicted = weak_arrival_prediction(snapshots, clock, lam, 1.0)
print("Relative L2 distance: {}".format(relative_l2(pointer, predicted)))
