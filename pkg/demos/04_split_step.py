# Strang splitting: mass to roundoff, energy to second order, exact symmetries
import math

import numpy as np

from hoslab.evolution import SolverConfig, evolve, scaling_transform
from hoslab.harness import gaussian_profile, generate_initial_data
from hoslab.i_method import energy
from hoslab.spectral import Field, GridSpec, lp_norm

grid = GridSpec(d=1, k=3, n=1024, L=16.0)
u0 = generate_initial_data("multi-bump", grid, seed=0, amplitude=1.0, width=1.0)

trace, u = evolve(u0, SolverConfig(dt=1e-3, T=2.0, record_every=200))
print("relative mass drift:", trace.max_relative_mass_drift())
print("energy drift       :", trace.max_energy_drift())

# halving dt cuts the energy drift by about 4
prev = None
for dt in (4e-3, 2e-3, 1e-3):
    d = evolve(u0, SolverConfig(dt=dt, T=1.0, record_every=max(1, round(0.02 / dt))))[0].max_energy_drift()
    print(f"dt={dt}: drift {d:.3e}" + ("" if prev is None else f"  factor {prev / d:.3f}"))
    prev = d

# running backwards: conjugate, evolve, conjugate
_, back = evolve(u.conj(), SolverConfig(dt=1e-3, T=2.0, record_every=2000))
print("time-reversal error:", lp_norm(back.conj() - u0, 2))

# scaling symmetry in the critical case d == k
g2 = GridSpec(d=2, k=2, n=128, L=4.0)
gen = gaussian_profile(1.0, 0.5)
f = Field.from_function(g2, gen)
for lam in (2.0, 4.0):
    fl = scaling_transform(f, lam, generator=gen)
    print(f"lambda={lam}: L^2 ratio {lp_norm(fl, 2) / lp_norm(f, 2):.15f}  "
          f"lambda^k E(u_lam)/E(u) {lam**2 * energy(fl).total / energy(f).total:.15f}")
