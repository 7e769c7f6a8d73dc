# Grids, fields and Fourier multipliers on the periodic box [-L, L)^d
import math

import numpy as np

from hoslab.spectral import (
    Field,
    GridSpec,
    apply_multiplier,
    bracket_power,
    lambda_power,
    lp_norm,
    sobolev_norm,
    spectral_l2_norm,
)

grid = GridSpec(d=1, k=3, n=256, L=math.pi)
print("grid:", grid)
print("Nyquist frequency:", grid.nyquist)

# a Gaussian sampled on the grid; physical and spectral L^2 norms agree (Plancherel)
f = Field.from_function(grid, lambda x: np.exp(-2 * x**2))
print("L^2 physical :", lp_norm(f, 2))
print("L^2 spectral :", spectral_l2_norm(f))

# Lambda^s multiplies each mode by |xi|^s, so a plane wave is an eigenfunction
wave = Field.plane_wave(grid, (5,))
out = apply_multiplier(wave, lambda_power(1.5))
print("Lambda^1.5 on mode 5, gain:", np.abs(out.values).max(), "expected", 5**1.5)

# Sobolev norms grow with the weight <xi>^gamma
for gamma in (0.0, 0.5, 1.0, 1.5):
    print(f"||f||_H^{gamma}: {sobolev_norm(f, gamma):.6f}")

# <xi>^-1 smooths: the H^1 norm of the smoothed field equals the L^2 norm of the original
g = apply_multiplier(f, bracket_power(-1.0))
print("||<D>^-1 f||_H^1 =", sobolev_norm(g, 1.0), " ||f||_L2 =", lp_norm(f, 2))
