# Increment of the modified energy over a short run, as a function of N
import math
import warnings

from hoslab.estimates import almost_conservation_experiment, growth_experiment, rescaling_plan
from hoslab.evolution import SolverConfig
from hoslab.harness import generate_initial_data
from hoslab.i_method import IOperatorSpec
from hoslab.spectral import GridSpec

# a reduced version of the default experiment: coarser grid, shorter run
grid = GridSpec(d=1, k=3, n=512, L=math.pi)
u0 = generate_initial_data("power-law", grid, 0, 0.5, exponent=2.0, K=100)
specs = [IOperatorSpec(N, 1.0, 3) for N in (4.0, 8.0, 16.0, 32.0)]
cfg = SolverConfig(dt=2e-6, T=0.01, record_every=5)
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    res = almost_conservation_experiment(u0, specs, 0.01, cfg)
for N, inc in zip(res.Ns, res.increments):
    print(f"N={N:>4}: sup |E(I u(t)) - E(I u0)| = {inc:.3e}")
print(f"fitted slope {res.fit.slope:.3f}  (theory bound {res.bound_slope:.3f})")

# how far the rescaling argument reaches for a target time
plan = rescaling_plan(3, 1, 1.0, 100.0)
print(f"rescaling plan for T=100: N={plan.N:.3g}, lambda={plan.lam:.3g}, N-exponent {plan.n_exponent}")

# H^1 norm along a nonlinear run, compared with the polynomial bound
g = GridSpec(d=1, k=3, n=256, L=16.0)
data = generate_initial_data("gaussian", g, 0, 1.0, width=1.0)
gr = growth_experiment(data, 1.0, 3, [1, 2, 4], SolverConfig(dt=1e-3, T=1.0))
print("H^1 norms:", [round(x, 6) for x in gr.norms], " fitted exponent", round(gr.fit.slope, 4),
      " bound", round(gr.theoretical, 4))
