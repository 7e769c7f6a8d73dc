"""Dyadic Littlewood-Paley projections and Bernstein-ratio measurements.

The base cutoff is the C-infinity profile

    phi(r) = 1 on [0, 1],  0 on [2, inf),  s(2 - r) in between,

with ``s(t) = g(t) / (g(t) + g(1 - t))`` and ``g(t) = exp(-1/t)`` for t > 0.
``P_M`` uses ``phi(r/M) - phi(2r/M)``, supported in the annulus [M/2, 2M].
As in the I-method decomposition, ``P_1`` means ``P_{<=1}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spectral import Field, MultiplierSpec, apply_multiplier, lambda_power, lp_norm

__all__ = [
    "smoothstep",
    "phi",
    "shell_profile",
    "band_multiplier",
    "project",
    "BernsteinReport",
    "bernstein_check",
    "BANDS",
]

BANDS = ("<=", ">", "=", "<", ">=", "(]")

EMPTY_SHELL_L2 = 1e-30


def _g(t):
    t = np.asarray(t, dtype=float)
    pos = t > 0
    return np.where(pos, np.exp(-1.0 / np.where(pos, t, 1.0)), 0.0)


def smoothstep(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, strictly increasing between."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    a = _g(t)
    return a / (a + _g(1.0 - t))


def phi(r):
    """Radial cutoff equal to 1 on [0, 1] and 0 on [2, inf)."""
    r = np.asarray(r, dtype=float)
    return np.where(r <= 1.0, 1.0, np.where(r >= 2.0, 0.0, smoothstep(2.0 - r)))


def shell_profile(r, M: float):
    """psi_M(r) = phi(r/M) - phi(2r/M)."""
    return phi(np.asarray(r) / M) - phi(2.0 * np.asarray(r) / M)


def _is_dyadic(M: float) -> bool:
    if not (M > 0 and math.isfinite(M)):
        return False
    e = math.log2(M)
    return abs(e - round(e)) < 1e-12


def _symbol(band: str, M: float, upper: float | None):
    def le(r):
        return phi(r / M)

    def eq(r):
        if M == 1:
            return phi(r)
        return shell_profile(r, M)

    if band == "<=":
        return le
    if band == ">":
        return lambda r: 1.0 - le(r)
    if band == "=":
        return eq
    if band == "<":
        return lambda r: le(r) - eq(r)
    if band == ">=":
        return lambda r: (1.0 - le(r)) + eq(r)
    if band == "(]":
        return lambda r: phi(r / upper) - phi(r / M)
    raise ValueError(f"unknown band {band!r}; expected one of {BANDS}")


def band_multiplier(band: str, M: float, upper: float | None = None) -> MultiplierSpec:
    if band not in BANDS:
        raise ValueError(f"unknown band {band!r}; expected one of {BANDS}")
    if not _is_dyadic(M):
        raise ValueError(f"M must be a power of two, got {M}")
    if band == "(]":
        if upper is None or not _is_dyadic(upper) or upper < M:
            raise ValueError(f"band (M1, M2] needs a dyadic upper bound >= {M}, got {upper}")
    label = f"P({M},{upper}]" if band == "(]" else f"P{band}{M}"
    return MultiplierSpec(_symbol(band, M, upper), label=label)


def project(f: Field, band: str, M: float, upper: float | None = None) -> Field:
    """Apply a Littlewood-Paley projection.

    ``band`` is one of ``"<="``, ``">"``, ``"="`` (P_M), ``"<"``, ``">="`` or
    ``"(]"`` (P_{M < . <= upper}).
    """
    top = max(M, upper or M)
    if top > f.grid.nyquist:
        raise ValueError(f"dyadic scale {top} exceeds the grid Nyquist frequency {f.grid.nyquist:.4g}")
    return apply_multiplier(f, band_multiplier(band, M, upper))


@dataclass
class BernsteinReport:
    """Ratios of the Bernstein inequalities at one dyadic scale.

    Each ratio is the left side divided by the right side without the implicit
    constant. Ratios whose projection is numerically empty are listed in
    ``empty`` and omitted from ``ratios``.
    """

    M: float
    p: float
    q: float
    gamma: float
    ratios: dict[str, float] = field(default_factory=dict)
    empty: tuple[str, ...] = ()

    @property
    def empty_shell(self) -> bool:
        return not self.ratios

    def csv_rows(self) -> list[tuple]:
        return [(self.M, self.p, self.q, self.gamma, name, val) for name, val in self.ratios.items()]


def bernstein_check(f: Field, M: float, gamma: float, p: float, q: float) -> BernsteinReport:
    """Measure the six Bernstein ratios (the shell line counts +gamma and -gamma).

    Names: ``high_inverse``, ``low_derivative``, ``shell_derivative``,
    ``shell_inverse``, ``low_lp_lq``, ``shell_lp_lq``. The L^p -> L^q gain uses
    the grid dimension d.
    """
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    if not (1 <= p <= q):
        raise ValueError(f"need 1 <= p <= q, got p={p}, q={q}")
    d = f.grid.d
    ratios: dict[str, float] = {}
    empty: list[str] = []

    def nonempty(g: Field, names):
        if lp_norm(g, 2) < EMPTY_SHELL_L2:
            empty.extend(names)
            return False
        return True

    lam = lambda_power(gamma)
    lam_inv = lambda_power(-gamma)

    high = project(f, ">=", M)
    if nonempty(high, ["high_inverse"]):
        ratios["high_inverse"] = lp_norm(high, p) / (M**-gamma * lp_norm(apply_multiplier(high, lam), p))

    low = project(f, "<=", M)
    if nonempty(low, ["low_derivative", "low_lp_lq"]):
        ratios["low_derivative"] = lp_norm(apply_multiplier(low, lam), p) / (M**gamma * lp_norm(low, p))

    shell = project(f, "=", M)
    if nonempty(shell, ["shell_derivative", "shell_inverse", "shell_lp_lq"]):
        base = lp_norm(shell, p)
        ratios["shell_derivative"] = lp_norm(apply_multiplier(shell, lam), p) / (M**gamma * base)
        ratios["shell_inverse"] = lp_norm(apply_multiplier(shell, lam_inv), p) / (M**-gamma * base)

    gain = M ** (d / p - (0.0 if math.isinf(q) else d / q))
    if "low_lp_lq" not in empty:
        ratios["low_lp_lq"] = lp_norm(low, q) / (gain * lp_norm(low, p))
    if "shell_lp_lq" not in empty:
        ratios["shell_lp_lq"] = lp_norm(shell, q) / (gain * lp_norm(shell, p))

    order = ["high_inverse", "low_derivative", "shell_derivative", "shell_inverse", "low_lp_lq", "shell_lp_lq"]
    ratios = {k: ratios[k] for k in order if k in ratios}
    return BernsteinReport(M=M, p=p, q=q, gamma=gamma, ratios=ratios, empty=tuple(empty))
