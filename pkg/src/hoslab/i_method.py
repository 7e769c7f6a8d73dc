"""The I_N smoothing multiplier, modified energy, and the threshold exponents.

``m_N`` equals 1 for |xi| <= N and ``(|xi|/N)^(gamma - k/2)`` for |xi| >= 2N,
so I_N acts as a fractional integral of order k/2 - gamma at high frequency.
On (N, 2N) the exponent is switched on smoothly:

    m(r) = exp(s((r - N)/N) * (gamma - k/2) * log(r/N))

with ``s`` the smoothstep from :mod:`hoslab.littlewood_paley`. This matches
both plateaus to all orders and is non-increasing.
"""

from __future__ import annotations

import math
import numbers
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .littlewood_paley import smoothstep
from .spectral import (
    Field,
    MultiplierSpec,
    apply_multiplier,
    cubic_term,
    lambda_power,
    lp_norm,
    sobolev_norm,
)

__all__ = [
    "IOperatorSpec",
    "Thresholds",
    "thresholds",
    "growth_exponent",
    "m_value",
    "i_multiplier",
    "apply_I",
    "EnergyParts",
    "energy",
    "modified_energy",
    "sandwich_check",
    "mu_symbol",
    "time_derivative",
    "energy_increment_rate",
    "m_profile_csv",
]


@dataclass(frozen=True)
class IOperatorSpec:
    N: float
    gamma: float
    k: int

    def __post_init__(self):
        if not self.N >= 1:
            raise ValueError(f"I-operator threshold N must be >= 1, got {self.N}")
        if int(self.k) != self.k or self.k < 2:
            raise ValueError(f"k must be an integer >= 2, got {self.k}")
        if not 0 < self.gamma < self.k / 2:
            raise ValueError(f"gamma must lie in (0, k/2) = (0, {self.k / 2}), got {self.gamma}")

    @property
    def order(self) -> float:
        """Smoothing order k/2 - gamma."""
        return self.k / 2 - self.gamma

    def rescaled(self, lam: float) -> "IOperatorSpec":
        """Threshold co-scaled with x -> x/lam, so that m_{N/lam}(xi/lam) == m_N(xi)."""
        return IOperatorSpec(N=self.N / lam, gamma=self.gamma, k=self.k)


@dataclass(frozen=True)
class Thresholds:
    k: int
    gamma_k: Fraction
    gamma0_k: Fraction
    alpha_k: Fraction


def thresholds(k: int) -> Thresholds:
    """Exact regularity threshold gamma(k), decay exponent gamma0(k) and weight alpha(k)."""
    if int(k) != k or k < 3:
        raise ValueError(f"thresholds are defined for integer k >= 3, got {k}")
    k = int(k)
    return Thresholds(
        k=k,
        gamma_k=Fraction(k * (4 * k - 1), 14 * k - 3),
        gamma0_k=Fraction(k * (6 * k - 1), 8 * k - 2),
        alpha_k=Fraction(k * (2 * k - 1), 8 * k - 2),
    )


def _exact(x):
    if isinstance(x, numbers.Rational):
        return Fraction(x)
    return None


def growth_exponent(k: int, gamma):
    """Polynomial growth exponent of the H^gamma norm.

    Exact (a Fraction) for rational gamma, float otherwise.
    """
    th = thresholds(k)
    if not th.gamma_k < gamma < Fraction(k, 2):
        raise ValueError(f"gamma must lie in (gamma(k), k/2) = ({float(th.gamma_k):.6g}, {k / 2}), got {gamma}")
    g = _exact(gamma)
    if g is None:
        g = float(gamma)
    num = (4 * k - 1) * (k - 2 * g)
    den = 2 * ((14 * k - 3) * g - k * (4 * k - 1))
    return num / den


def m_value(spec: IOperatorSpec, r):
    """m_N at frequency magnitude(s) ``r``; scalar in, scalar out."""
    scalar = np.isscalar(r)
    r = np.asarray(r, dtype=float)
    N = spec.N
    c = spec.gamma - spec.k / 2
    t = np.maximum(r, N) / N
    out = np.where(r >= 2 * N, t**c, np.exp(smoothstep(t - 1.0) * c * np.log(t)))
    out = np.where(r <= N, 1.0, out)
    return float(out) if scalar else out


def i_multiplier(spec: IOperatorSpec) -> MultiplierSpec:
    return MultiplierSpec(lambda r: m_value(spec, r), label=f"I_N(N={spec.N:g}, gamma={spec.gamma:g}, k={spec.k})")


def _check_k(f: Field, spec: IOperatorSpec):
    if f.grid.k != spec.k:
        raise ValueError(f"I-operator built for k={spec.k} applied on a grid with k={f.grid.k}")


def apply_I(f: Field, spec: IOperatorSpec) -> Field:
    _check_k(f, spec)
    if f.grid.nyquist <= 2 * spec.N:
        warnings.warn(
            f"grid Nyquist {f.grid.nyquist:.4g} does not exceed 2N = {2 * spec.N:g}; "
            "the power-law tail of m_N is not resolved",
            RuntimeWarning,
            stacklevel=2,
        )
    return apply_multiplier(f, i_multiplier(spec))


@dataclass(frozen=True)
class EnergyParts:
    mass: float
    kinetic: float
    potential: float

    @property
    def total(self) -> float:
        return self.kinetic + self.potential


def _energy_of(g: Field, mass: float) -> EnergyParts:
    kin = 0.5 * sobolev_norm(g, g.grid.k / 2, homogeneous=True) ** 2
    pot = 0.25 * lp_norm(g, 4) ** 4
    return EnergyParts(mass=mass, kinetic=kin, potential=pot)


def energy(f: Field) -> EnergyParts:
    """E(u) = 1/2 ||Lambda^{k/2} u||^2 + 1/4 ||u||_4^4, with the mass alongside."""
    return _energy_of(f, lp_norm(f, 2) ** 2)


def modified_energy(f: Field, spec: IOperatorSpec) -> EnergyParts:
    """E(I_N u). The dimension need not equal k; the formula is evaluated as is."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        g = apply_I(f, spec)
    return _energy_of(g, lp_norm(f, 2) ** 2)


def sandwich_check(f: Field, spec: IOperatorSpec) -> tuple[float, float]:
    """Return ``(||f||_{H^gamma} / ||If||_{H^{k/2}}, ||If||_{H^{k/2}} / (N^{k/2-gamma} ||f||_{H^gamma}))``."""
    hg = sobolev_norm(f, spec.gamma)
    if hg == 0:
        raise ValueError("sandwich ratios are undefined for the zero field")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        If = apply_I(f, spec)
    top = sobolev_norm(If, spec.k / 2)
    return hg / top, top / (spec.N**spec.order * hg)


def mu_symbol(spec: IOperatorSpec, xi2, xi3, xi4) -> float:
    """Commutator symbol 1 - m(xi2 + xi3 + xi4) / (m(xi2) m(xi3) m(xi4))."""
    a, b, c = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (xi2, xi3, xi4))
    norm = lambda v: float(np.sqrt(np.sum(v * v)))
    top = m_value(spec, norm(a + b + c))
    return 1.0 - top / (m_value(spec, norm(a)) * m_value(spec, norm(b)) * m_value(spec, norm(c)))


def time_derivative(f: Field, dealias: bool = False) -> Field:
    """du/dt = i (Lambda^k u + |u|^2 u), read off the equation."""
    lin = apply_multiplier(f, lambda_power(f.grid.k))
    return Field(f.grid, 1j * (lin.values + cubic_term(f, dealias).values))


def energy_increment_rate(f: Field, spec: IOperatorSpec, dealias: bool = False) -> float:
    """Instantaneous d/dt E(I_N u) along the flow through ``f``.

    Computes Re int conj(I u_t) (|Iu|^2 Iu - I(|u|^2 u)) dx. With ``dealias``
    the nonlinearity matches the solver's 2/3-truncated intensity, so the value
    is the exact derivative of the semi-discrete flow that :func:`hoslab.evolution.step`
    approximates.
    """
    _check_k(f, spec)
    mult = i_multiplier(spec)
    Iut = apply_multiplier(time_derivative(f, dealias), mult)
    Iu = apply_multiplier(f, mult)
    comm = np.abs(Iu.values) ** 2 * Iu.values - apply_multiplier(cubic_term(f, dealias), mult).values
    return float(np.real(np.sum(np.conj(Iut.values) * comm)) * f.grid.cell_volume)


def m_profile_csv(spec: IOperatorSpec, r) -> str:
    """CSV text of (r, m(r)); the header records the adopted tail exponent gamma - k/2."""
    r = np.asarray(r, dtype=float)
    lines = [
        f"# m_N profile: N={spec.N!r} gamma={spec.gamma!r} k={spec.k} tail_exponent=gamma-k/2={spec.gamma - spec.k / 2!r}",
        "r,m",
    ]
    lines += [f"{a!r},{b!r}" for a, b in zip(r.tolist(), np.atleast_1d(m_value(spec, r)).tolist())]
    return "\n".join(lines) + "\n"
