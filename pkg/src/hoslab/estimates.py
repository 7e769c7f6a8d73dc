"""Numerical experiments for the linear, bilinear and modified-energy estimates.

Every inequality is tested in its measurable form: a ratio of the two sides
that should stay bounded across a sweep, or a log-log slope compared against
the predicted exponent. Time horizons stay short relative to the torus
recurrence so that the periodic box stands in for R^d.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import numpy as np
import scipy.fft as sfft

from .evolution import BlowUpError, SolverConfig, evolve, linear_propagate
from .i_method import IOperatorSpec, growth_exponent, modified_energy, thresholds
from .littlewood_paley import phi, project
from .spectral import Field, GridSpec, lp_norm, refine, sobolev_norm, spacetime_norm

__all__ = [
    "AdmissiblePair",
    "is_admissible",
    "SlopeFit",
    "fit_loglog",
    "XsbParams",
    "time_cutoff",
    "linear_trajectory",
    "strichartz_ratio",
    "bilinear_ratio",
    "bilinear_horizon",
    "xsb_norm",
    "time_sobolev_norm",
    "DuhamelResult",
    "duhamel_cutoff_check",
    "AlmostConservationResult",
    "almost_conservation_experiment",
    "refined_increments",
    "RescalingPlan",
    "rescaling_plan",
    "estimate_c0",
    "GrowthResult",
    "growth_experiment",
]


def is_admissible(p: float, q: float) -> bool:
    """Literal admissibility: (p, q) in [2, inf]^2, (q, p) != (2, inf), 1/p + 1/q = 1/2."""
    if not (p >= 2 and q >= 2):
        return False
    if q == 2 and math.isinf(p):
        return False
    return abs(1.0 / p + 1.0 / q - 0.5) <= 1e-12


@dataclass(frozen=True)
class AdmissiblePair:
    p: float
    q: float

    def __post_init__(self):
        if not is_admissible(self.p, self.q):
            raise ValueError(f"({self.p}, {self.q}) is not an admissible pair")


@dataclass
class SlopeFit:
    """Ordinary least-squares line through log-log points."""

    log_x: list[float]
    log_y: list[float]
    slope: float
    intercept: float
    residual_rms: float

    def as_dict(self) -> dict:
        return {
            "log_x": list(self.log_x),
            "log_y": list(self.log_y),
            "slope": self.slope,
            "intercept": self.intercept,
            "residual_rms": self.residual_rms,
        }


def fit_loglog(x: Sequence[float], y: Sequence[float]) -> SlopeFit:
    """Fit log y = slope * log x + intercept (natural logs, unweighted)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size:
        raise ValueError("abscissas and ordinates differ in length")
    if x.size < 3:
        raise ValueError(f"a slope fit needs at least 3 points, got {x.size}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fit needs positive data")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    return SlopeFit(
        log_x=lx.tolist(),
        log_y=ly.tolist(),
        slope=float(slope),
        intercept=float(intercept),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
    )


@dataclass(frozen=True)
class XsbParams:
    """Bourgain-space exponents; defaults instantiate 1/2+ and 0+ as 0.55 and 0.30."""

    gamma: float = 0.0
    b: float = 0.55
    b_prime: float = 0.30

    def __post_init__(self):
        if not (0 < self.b_prime < 0.5 < self.b):
            raise ValueError(f"need 0 < b' < 1/2 < b, got b={self.b}, b'={self.b_prime}")
        if not self.b + self.b_prime < 1:
            raise ValueError(f"need b + b' < 1, got {self.b + self.b_prime}")


def time_cutoff(t, delta: float = 1.0):
    """psi_delta(t) = psi(t/delta); psi is 1 on [-1, 1] and vanishes outside [-2, 2]."""
    return phi(np.abs(np.asarray(t, dtype=float)) / delta)


def linear_trajectory(f0: Field, times: Sequence[float]) -> list[Field]:
    return [linear_propagate(f0, float(t)) for t in times]


def _uniform_times(T: float, dt: float) -> np.ndarray:
    n = max(1, int(round(T / dt)))
    return np.linspace(0.0, n * dt, n + 1)


def strichartz_ratio(f0: Field, pair: AdmissiblePair, T: float | None = None, dt: float | None = None) -> float:
    """||e^{it Lambda^k} f0||_{L^p_t L^q_x([0,T])} / ||f0||_{L^2}.

    T defaults to L/4; dt defaults to T/256.
    """
    if not isinstance(pair, AdmissiblePair):
        pair = AdmissiblePair(*pair)
    norm0 = lp_norm(f0, 2)
    if norm0 == 0:
        raise ValueError("Strichartz ratio is undefined for zero data")
    T = f0.grid.L / 4 if T is None else T
    dt = T / 256 if dt is None else dt
    traj = linear_trajectory(f0, _uniform_times(T, dt))
    return spacetime_norm(traj, pair.p, pair.q, dt) / norm0


def bilinear_horizon(grid: GridSpec, M2: float, fraction: float = 0.5) -> float:
    """Time for the fastest component of the P_{M2} shell to cross ``fraction * L``.

    Group speed at |xi| = 2*M2 is k (2 M2)^{k-1}; stopping before it wraps
    around the box keeps the torus from feeding waves back in.
    """
    return fraction * grid.L / (grid.k * (2.0 * M2) ** (grid.k - 1))


def bilinear_ratio(
    u0: Field,
    v0: Field,
    M1: float,
    M2: float,
    T: float,
    dt: float,
    conjugate: str | None = None,
) -> float:
    """Bilinear ratio ||(e^{itL} P_{M1} u0)(e^{itL} P_{M2} v0)||_{L^2_{t,x}} / gain.

    The gain is (M1/M2)^{(k-1)/2} ||P_{M1} u0|| ||P_{M2} v0||, with the grid
    dimension d in place of k when d != k. ``conjugate`` in {"u", "v"}
    conjugates that factor.
    """
    if M1 > M2:
        raise ValueError(f"need M1 <= M2, got {M1} > {M2}")
    if conjugate not in (None, "u", "v"):
        raise ValueError(f"conjugate must be None, 'u' or 'v', got {conjugate!r}")
    g = u0.grid
    a = project(u0, "=", M1)
    b = project(v0, "=", M2)
    na, nb = lp_norm(a, 2), lp_norm(b, 2)
    if na < 1e-30 or nb < 1e-30:
        raise ValueError("empty dyadic shell: projected data vanish")
    ah, bh = a.spectrum, b.spectrum
    r_k = g.frequency_magnitude() ** g.k
    times = _uniform_times(T, dt)
    vals = np.empty(times.size)
    for j, t in enumerate(times):
        ph = np.exp(1j * t * r_k)
        x = sfft.ifftn(ah * ph)
        y = sfft.ifftn(bh * ph)
        if conjugate == "u":
            x = np.conj(x)
        elif conjugate == "v":
            y = np.conj(y)
        vals[j] = np.sum(np.abs(x * y) ** 2) * g.cell_volume
    lhs = math.sqrt(np.trapezoid(vals, times))
    expo = (g.k - 1) / 2 if g.d == g.k else (g.d - 1) / 2
    return lhs / ((M1 / M2) ** expo * na * nb)


def xsb_norm(
    traj: Sequence[Field],
    times: Sequence[float],
    params: XsbParams | tuple[float, float],
    delta: float = 1.0,
) -> float:
    """Discrete X^{gamma,b} norm of psi_delta(t) u(t).

    The snapshots are pulled back by the free flow, e^{-it Lambda^k} u(t), so
    the time transform directly sees tau - |xi|^k and high dispersive
    frequencies cannot alias in tau. Normalised so that gamma = b = 0 gives the
    Riemann-sum L^2_{t,x} norm of psi_delta u.

    ``params`` may also be a raw ``(gamma, b)`` pair, which skips the
    constraints on b and b' (useful for b = 0 checks).
    """
    if isinstance(params, XsbParams):
        gamma, b = params.gamma, params.b
    else:
        gamma, b = (float(v) for v in params)
    times = np.asarray(times, dtype=float)
    if len(traj) != times.size or times.size < 2:
        raise ValueError("need one snapshot per sample time and at least two samples")
    dt = times[1] - times[0]
    if not np.allclose(np.diff(times), dt, rtol=1e-9, atol=0):
        raise ValueError("sample times must be uniform")
    if times[0] > -2 * delta or times[-1] < 2 * delta:
        raise ValueError(
            f"time window [{times[0]:.4g}, {times[-1]:.4g}] does not cover supp psi_delta = [-{2 * delta:g}, {2 * delta:g}]"
        )
    g = traj[0].grid
    r = g.frequency_magnitude()
    r_k = r**g.k
    window = time_cutoff(times, delta)
    stack = np.empty((times.size,) + g.shape, dtype=np.complex128)
    for j, (u, t) in enumerate(zip(traj, times)):
        stack[j] = window[j] * u.spectrum * np.exp(-1j * t * r_k)
    spec = sfft.fft(stack, axis=0)
    sigma = 2 * math.pi * np.fft.fftfreq(times.size, dt)
    w_t = (1.0 + sigma**2) ** b
    w_x = (1.0 + r**2) ** gamma
    weighted = np.abs(spec) ** 2 * w_t.reshape((-1,) + (1,) * g.d) * w_x
    return float(math.sqrt(np.sum(weighted) * dt / times.size * g.volume / g.size**2))


def time_sobolev_norm(samples: np.ndarray, dt: float, s: float) -> float:
    """H^s_t norm of a periodic time signal, with H^0 the Riemann-sum L^2 norm."""
    samples = np.asarray(samples)
    n = samples.size
    tau = 2 * math.pi * np.fft.fftfreq(n, dt)
    c = np.fft.fft(samples)
    return float(math.sqrt(np.sum((1.0 + tau**2) ** s * np.abs(c) ** 2) * dt / n))


def _antiderivative(samples: np.ndarray, times: np.ndarray) -> np.ndarray:
    """int_0^t g(s) ds for a band-limited periodic signal, evaluated spectrally."""
    n = times.size
    dt = times[1] - times[0]
    tau = 2 * math.pi * np.fft.fftfreq(n, dt)
    # coefficients of g(t) = sum c_j exp(i tau_j t), referenced to t = 0
    c = np.fft.fft(samples) / n * np.exp(-1j * tau * times[0])
    nz = tau != 0
    a = np.zeros_like(c)
    a[nz] = c[nz] / (1j * tau[nz])
    osc = np.exp(1j * np.outer(times, tau[nz])) @ a[nz] if n <= 4096 else _ifft_eval(a, tau, times)
    return osc - a.sum() + c[0] * times


def _ifft_eval(a: np.ndarray, tau: np.ndarray, times: np.ndarray) -> np.ndarray:
    n = times.size
    return np.fft.ifft(a * np.exp(1j * tau * times[0])) * n


@dataclass
class DuhamelResult:
    deltas: list[float]
    ratios: list[float]
    fit: SlopeFit | None
    bound_exponent: float

    @property
    def normalized(self) -> list[float]:
        """ratio * delta^{-(1 - b - b')}."""
        return [r * d ** (-self.bound_exponent) for r, d in zip(self.ratios, self.deltas)]


def duhamel_cutoff_check(
    g: np.ndarray,
    times: np.ndarray,
    deltas: Sequence[float],
    params: XsbParams = XsbParams(),
) -> DuhamelResult:
    """Ratios ||psi_delta(t) int_0^t g||_{H^b} / ||g||_{H^{-b'}} across a delta sweep.

    ``g`` is sampled on the uniform periodic grid ``times`` (which must contain
    t = 0 and cover [-2 delta, 2 delta] for every delta). The bound predicts
    ratio <~ delta^{1-b-b'}, so the fitted log-log slope should be at least
    1 - b - b'.
    """
    deltas = [float(d) for d in deltas]
    if len(deltas) < 3:
        raise ValueError(f"a delta sweep needs at least 3 values, got {len(deltas)}")
    times = np.asarray(times, dtype=float)
    g = np.asarray(g, dtype=np.complex128)
    dt = times[1] - times[0]
    span = min(-times[0], times[-1] + dt)
    if max(deltas) * 2 >= span:
        raise ValueError(f"delta sweep up to {max(deltas)} does not fit inside the sampled window")
    expo = 1.0 - params.b - params.b_prime
    gnorm = time_sobolev_norm(g, dt, -params.b_prime)
    if gnorm == 0:
        return DuhamelResult(deltas, [0.0] * len(deltas), None, expo)
    G = _antiderivative(g, times)
    ratios = [time_sobolev_norm(time_cutoff(times, d) * G, dt, params.b) / gnorm for d in deltas]
    return DuhamelResult(deltas, ratios, fit_loglog(deltas, ratios), expo)


@dataclass
class AlmostConservationResult:
    Ns: list[float]
    increments: list[float]
    excluded: list[float]
    fit: SlopeFit | None
    bound_slope: float
    initial_energies: list[float]
    trace: object = None


MEASUREMENT_FLOOR = 1e-14


def almost_conservation_experiment(
    u0: Field,
    specs: Sequence[IOperatorSpec],
    delta_run: float,
    cfg: SolverConfig,
) -> AlmostConservationResult:
    """sup_{t <= delta_run} |E(I_N u(t)) - E(I_N u0)| for each N, and its log-log slope in N.

    All thresholds share one trajectory. Increments under 1e-14 are excluded
    with a warning; the fit needs three surviving points.
    """
    if not specs:
        raise ValueError("need at least one I-operator threshold")
    run_cfg = replace(cfg, T=delta_run)
    trace, _ = evolve(u0, run_cfg, specs)
    Ns, incs, excluded = [], [], []
    for s in specs:
        inc = trace.max_modified_energy_increment(s.N)
        if inc < MEASUREMENT_FLOOR:
            warnings.warn(f"increment {inc:.3g} at N={s.N:g} is below the measurement floor; excluded")
            excluded.append(s.N)
            continue
        Ns.append(s.N)
        incs.append(inc)
    fit = fit_loglog(Ns, incs) if len(Ns) >= 3 else None
    k = u0.grid.k
    bound = -float(thresholds(k).gamma0_k) if k >= 3 else float("nan")
    e0 = [trace.modified_energy[s.N][0] for s in specs]
    return AlmostConservationResult(Ns, incs, excluded, fit, bound, e0, trace)


def refined_increments(
    u0: Field,
    specs: Sequence[IOperatorSpec],
    delta_run: float,
    cfg: SolverConfig,
) -> tuple[list[float], list[float]]:
    """Increments on the given grid and on the grid with twice the points (same physics)."""
    coarse = almost_conservation_experiment(u0, specs, delta_run, cfg)
    fine = almost_conservation_experiment(refine(u0, 2), specs, delta_run, cfg)
    pick = lambda res: [res.trace.max_modified_energy_increment(s.N) for s in specs]
    return pick(coarse), pick(fine)


@dataclass(frozen=True)
class RescalingPlan:
    lam: float
    N: float
    n_exponent: Fraction
    lambda_exponent: Fraction


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(str(x))


def rescaling_plan(
    k: int,
    gamma,
    hgamma_bound: float,
    T_target: float,
    C0: float = 1.0,
    C1: float = 1.0,
    delta: float = 1.0,
) -> RescalingPlan:
    """Choose N and the scale lambda that make E(I u_lambda(0)) <= 1/2 and reach time T.

    lambda = N^{(k/2-gamma)/gamma} (2 C0)^{1/(2 gamma)} (1 + ||u0||)^{2/gamma}, and
    T = C1 delta N^{gamma0} / lambda^k, i.e. T ~ N^{(2(gamma0+k)gamma - k^2)/(2 gamma)}.
    Exponents are exact rationals (gamma is read through its decimal string).
    N and lambda come back as inf when they exceed the float range.
    """
    th = thresholds(k)
    g = _as_fraction(gamma)
    if not th.gamma_k < g < Fraction(k, 2):
        raise ValueError(f"gamma must lie in (gamma(k), k/2) = ({th.gamma_k}, {Fraction(k, 2)}), got {gamma}")
    if not T_target >= 1:
        raise ValueError(f"target time must be >= 1, got {T_target}")
    lam_exp = (Fraction(k, 2) - g) / g
    n_exp = (2 * (th.gamma0_k + k) * g - k * k) / (2 * g)
    gf = float(g)
    lam_const = (2 * C0) ** (1 / (2 * gf)) * (1 + hgamma_bound) ** (2 / gf)
    # T = C1 delta N^{gamma0} / (lam_const N^{lam_exp})^k
    scale = C1 * delta / lam_const**k
    # work in logs: N diverges as gamma -> gamma(k)+
    log_N = math.log(T_target / scale) / float(n_exp)
    log_lam = float(lam_exp) * log_N + math.log(lam_const)
    N = math.exp(log_N) if log_N < 700 else math.inf
    lam = math.exp(log_lam) if log_lam < 700 else math.inf
    return RescalingPlan(lam=lam, N=N, n_exponent=n_exp, lambda_exponent=lam_exp)


def estimate_c0(u0: Field, spec: IOperatorSpec, lams: Sequence[float]) -> float:
    """Largest observed E(I u_lam(0)) / (N^{k-2gamma} lam^{-2gamma} (1 + ||u0||_{H^gamma})^4)."""
    from .evolution import scaling_transform

    k, gam = spec.k, spec.gamma
    h = sobolev_norm(u0, gam)
    best = 0.0
    for lam in lams:
        ul = scaling_transform(u0, lam)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            e = modified_energy(ul, spec).total
        best = max(best, e / (spec.N ** (k - 2 * gam) * lam ** (-2 * gam) * (1 + h) ** 4))
    return best


@dataclass
class GrowthResult:
    times: list[float]
    norms: list[float]
    fit: SlopeFit | None
    theoretical: float
    aborted: bool = False
    abort_time: float | None = None


def growth_experiment(
    u0: Field,
    gamma: float,
    k: int,
    T_values: Sequence[float],
    cfg: SolverConfig,
) -> GrowthResult:
    """Record ||u(T)||_{H^gamma} at each T and fit its exponent against 1 + T.

    The exponent is only an upper bound, so the fitted exponent is compared
    one-sidedly with :func:`growth_exponent`. A blow-up aborts the run and the
    partial record is returned.
    """
    if u0.grid.k != k:
        raise ValueError(f"grid has k={u0.grid.k}, experiment asked for k={k}")
    theo = float(growth_exponent(k, gamma))
    T_values = sorted(float(t) for t in T_values)
    times, norms = [], []
    u, t_prev = u0, 0.0
    try:
        for T in T_values:
            span = T - t_prev
            if span > 0:
                seg = replace(cfg, T=span, record_every=max(1, int(round(span / cfg.dt))))
                _, u = evolve(u, seg, (), gamma=gamma)
            times.append(T)
            norms.append(sobolev_norm(u, gamma))
            t_prev = T
    except BlowUpError as exc:
        fit = fit_loglog([1 + t for t in times], norms) if len(times) >= 3 else None
        return GrowthResult(times, norms, fit, theo, aborted=True, abort_time=t_prev + exc.time)
    fit = fit_loglog([1 + t for t in times], norms) if len(times) >= 3 else None
    return GrowthResult(times, norms, fit, theo)
