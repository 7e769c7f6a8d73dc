# The smoothing multiplier I_N, the modified energy and the exact thresholds
import math

import numpy as np

from hoslab.harness import generate_initial_data
from hoslab.i_method import (
    IOperatorSpec,
    apply_I,
    energy,
    energy_increment_rate,
    growth_exponent,
    m_value,
    modified_energy,
    sandwich_check,
    thresholds,
)
from hoslab.spectral import GridSpec, lp_norm

# exponent table in exact rational arithmetic
for k in (3, 4, 5):
    th = thresholds(k)
    print(f"k={k}: gamma(k)={th.gamma_k}  gamma0(k)={th.gamma0_k}  alpha(k)={th.alpha_k}")
print("growth exponent at k=3, gamma=1:", growth_exponent(3, 1))

# the symbol: 1 below N, (|xi|/N)^(gamma-k/2) above 2N
spec = IOperatorSpec(N=4.0, gamma=1.0, k=3)
for r in (0, 4, 5, 6, 8, 16, 64):
    print(f"m({r}) = {m_value(spec, r):.6f}")

grid = GridSpec(d=1, k=3, n=512, L=math.pi)
f = generate_initial_data("shell-random", grid, seed=1, amplitude=1.0, band="<=", M=64)

# sandwich ratios stay bounded as N moves
for N in (4.0, 8.0, 16.0, 32.0):
    r1, r2 = sandwich_check(f, IOperatorSpec(N, 1.0, 3))
    print(f"N={N:>4}: lower {r1:.4f}  upper {r2:.4f}")

# I is the identity on data supported below N
low = generate_initial_data("shell-random", grid, seed=2, amplitude=1.0, band="<=", M=2)
print("|I f - f| on band-limited data:", np.abs(apply_I(low, spec).values - low.values).max())

# modified energy approaches the energy as N grows
print("E(f) =", energy(f).total)
for N in (4.0, 16.0, 64.0):
    print(f"E(I_N f), N={N}: {modified_energy(f, IOperatorSpec(N, 1.0, 3)).total:.6f}")

# the instantaneous rate of change of E(I_N u) along the flow
for N in (2.0, 8.0, 32.0):
    print(f"d/dt E(I_N u) at t=0, N={N}: {energy_increment_rate(f * 0.3, IOperatorSpec(N, 1.0, 3)):.3e}")
