# Dyadic frequency decomposition and Bernstein ratios
import math

from hoslab.harness import generate_initial_data
from hoslab.littlewood_paley import bernstein_check, phi, project
from hoslab.spectral import GridSpec, lp_norm

# the cutoff is 1 on [0, 1], 0 beyond 2 and C-infinity in between
for r in (0.0, 1.0, 1.25, 1.5, 1.75, 2.0):
    print(f"phi({r}) = {float(phi(r)):.6f}")

grid = GridSpec(d=1, k=3, n=1024, L=16.0)
f = generate_initial_data("shell-random", grid, seed=0, amplitude=1.0, band="<=", M=64)

# low part plus every shell reconstructs f
parts = project(f, "<=", 1)
M = 2
while M <= 64:
    parts = parts + project(f, "=", M)
    M *= 2
parts = parts + project(f, ">", 64)
print("reconstruction error:", lp_norm(parts - f, 2))

# energy in each shell
M = 1
while M <= 64:
    print(f"||P_{M} f||_2 = {lp_norm(project(f, '=', M), 2):.4f}")
    M *= 2

# Bernstein ratios stay of order one across scales
print("\nBernstein ratios (gamma=0.5, p=2, q=4)")
for M in (2, 4, 8, 16, 32):
    rep = bernstein_check(f, M, 0.5, 2, 4)
    print(M, {k: round(v, 3) for k, v in rep.ratios.items()})
