# Strichartz, bilinear and Bourgain-space measurements on free solutions
import math

import numpy as np

from hoslab.estimates import (
    AdmissiblePair,
    XsbParams,
    bilinear_horizon,
    bilinear_ratio,
    duhamel_cutoff_check,
    linear_trajectory,
    strichartz_ratio,
    xsb_norm,
)
from hoslab.harness import duhamel_signal, generate_initial_data
from hoslab.spectral import GridSpec, sobolev_norm

# Strichartz ratio for the pair (4, 4) over seeded data
grid = GridSpec(d=1, k=3, n=1024, L=16.0)
ratios = [
    strichartz_ratio(generate_initial_data("shell-random", grid, s, 1.0, band="<=", M=8), AdmissiblePair(4, 4))
    for s in range(10)
]
print("Strichartz ratios:", np.round(ratios, 4), " max/median", max(ratios) / np.median(ratios))

# bilinear gain in d = 2 for separated frequencies
g2 = GridSpec(d=2, k=2, n=256, L=math.pi)
u = generate_initial_data("windowed-noise", g2, 1, 1.0, width=0.5)
v = generate_initial_data("windowed-noise", g2, 2, 1.0, width=0.5)
for M2 in (8, 32):
    T = bilinear_horizon(g2, M2)
    print(f"bilinear ratio M1=2, M2={M2}: {bilinear_ratio(u, v, 2, M2, T, T / 64):.4f}")

# X^{gamma,b} norm of a cut-off free solution factorises as ||psi||_H^b ||f||_H^gamma
g1 = GridSpec(d=1, k=3, n=64, L=math.pi)
times = np.linspace(-2.5, 2.5, 257)
for s in range(3):
    f = generate_initial_data("shell-random", g1, s, 1.0, band="<=", M=8)
    x = xsb_norm(linear_trajectory(f, times), times, XsbParams(gamma=1.0))
    print(f"seed {s}: X norm / H^1 norm = {x / sobolev_norm(f, 1.0):.6f}")

# the cut-off Duhamel ratio shrinks with delta
n = 4096
t = -16 + 32 / n * np.arange(n)
res = duhamel_cutoff_check(duhamel_signal(0, t, 1.0), t, [1.0, 0.5, 0.25, 0.125])
for d, r, q in zip(res.deltas, res.ratios, res.normalized):
    print(f"delta={d:<6} ratio {r:.4f}  ratio*delta^-(1-b-b') {q:.4f}")
print("fitted slope:", res.fit.slope)
