"""
Periodic grids, spectral transforms, Fourier multipliers and discrete norms.

The whole-space problem on R^d is approximated by the torus [-L, L)^d sampled
with n points per axis. Frequencies live on the lattice pi*j/L, so every plane
wave exp(i xi.x) with xi on that lattice is an exact grid mode.

Conventions
-----------
- physical samples ``f(x_j)`` with ``x_j = -L + j*dx``, ``dx = 2L/n``
- spectral coefficients are the raw ``fftn`` of the samples
- discrete L^2: ``sum |f|^2 dx^d == V/n^(2d) * sum |fhat|^2`` (Plancherel)
"""

from __future__ import annotations

import functools
import math
import struct
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sfft

__all__ = [
    "GridSpec",
    "Field",
    "MultiplierSpec",
    "apply_multiplier",
    "lambda_power",
    "bracket_power",
    "identity_multiplier",
    "lp_norm",
    "spectral_l2_norm",
    "sobolev_norm",
    "spacetime_norm",
    "dealias_mask",
    "cubic_term",
    "refine",
    "field_to_bytes",
    "field_from_bytes",
    "field_to_json",
    "field_from_json",
]

_HEADER = struct.Struct("<qqdq")
_JSON_MAX_POINTS = 1 << 16


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Periodic box [-L, L)^d with n points per axis and dispersion order k.

    The L^2-critical setting is d == k; smaller d is a reduced mode used for
    fast runs. Operations that depend on L^2-criticality check ``d == k`` themselves.
    """

    d: int
    k: int
    n: int
    L: float = 16.0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"dimension d must be a positive integer, got {self.d}")
        if int(self.k) != self.k or self.k < 2:
            raise ValueError(f"dispersion order k must be an integer >= 2, got {self.k}")
        if int(self.n) != self.n or self.n < 4 or not _is_power_of_two(int(self.n)):
            raise ValueError(f"n must be a power of two >= 4, got {self.n}")
        if not (self.L > 0 and math.isfinite(self.L)):
            raise ValueError(f"half period L must be positive, got {self.L}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "L", float(self.L))

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def size(self) -> int:
        return self.n**self.d

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def cell_volume(self) -> float:
        return self.dx**self.d

    @property
    def volume(self) -> float:
        return (2.0 * self.L) ** self.d

    @property
    def nyquist(self) -> float:
        """Largest lattice frequency magnitude along one axis, pi*n/(2L)."""
        return math.pi * self.n / (2.0 * self.L)

    @property
    def is_critical(self) -> bool:
        return self.d == self.k

    def axis(self) -> np.ndarray:
        return -self.L + self.dx * np.arange(self.n)

    def axis_frequencies(self) -> np.ndarray:
        return math.pi * np.fft.fftfreq(self.n, 1.0 / self.n) / self.L

    def coordinates(self) -> tuple[np.ndarray, ...]:
        return _coordinates(self)

    def frequencies(self) -> tuple[np.ndarray, ...]:
        return _frequencies(self)

    def frequency_magnitude(self) -> np.ndarray:
        return _frequency_magnitude(self)

    def with_half_period(self, L: float) -> "GridSpec":
        return GridSpec(d=self.d, k=self.k, n=self.n, L=L)


# Cached per grid; results are read-only so sharing across threads is safe.
@functools.lru_cache(maxsize=32)
def _coordinates(grid: GridSpec) -> tuple[np.ndarray, ...]:
    out = np.meshgrid(*([grid.axis()] * grid.d), indexing="ij")
    for a in out:
        a.setflags(write=False)
    return tuple(out)


@functools.lru_cache(maxsize=32)
def _frequencies(grid: GridSpec) -> tuple[np.ndarray, ...]:
    out = np.meshgrid(*([grid.axis_frequencies()] * grid.d), indexing="ij")
    for a in out:
        a.setflags(write=False)
    return tuple(out)


@functools.lru_cache(maxsize=32)
def _frequency_magnitude(grid: GridSpec) -> np.ndarray:
    r = np.sqrt(sum(c**2 for c in _frequencies(grid)))
    r.setflags(write=False)
    return r


def _fft(values: np.ndarray) -> np.ndarray:
    return sfft.fftn(values)


def _ifft(coeffs: np.ndarray) -> np.ndarray:
    return sfft.ifftn(coeffs)


@dataclass(frozen=True, eq=False)
class Field:
    """Complex grid function on a :class:`GridSpec`.

    Values are stored read-only. The spectral representation is computed on
    first access and cached; two threads racing on the cache compute the same
    array, so concurrent read-only use is safe.
    """

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.complex128, copy=True)
        if v.shape != self.grid.shape:
            if v.size != self.grid.size:
                raise ValueError(
                    f"expected {self.grid.size} values for grid {self.grid.shape}, got {v.size}"
                )
            v = v.reshape(self.grid.shape)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @functools.cached_property
    def spectrum(self) -> np.ndarray:
        c = _fft(self.values)
        c.setflags(write=False)
        return c

    @classmethod
    def from_spectrum(cls, grid: GridSpec, coeffs: np.ndarray) -> "Field":
        f = cls(grid, _ifft(coeffs))
        c = np.array(coeffs, dtype=np.complex128, copy=True)
        c.setflags(write=False)
        f.__dict__["spectrum"] = c
        return f

    @classmethod
    def from_function(cls, grid: GridSpec, fn: Callable[..., np.ndarray]) -> "Field":
        """Sample ``fn(x_1, ..., x_d)`` on the grid."""
        return cls(grid, fn(*grid.coordinates()))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "Field":
        return cls(grid, np.zeros(grid.shape, dtype=np.complex128))

    @classmethod
    def plane_wave(cls, grid: GridSpec, modes: Sequence[int], amplitude: complex = 1.0) -> "Field":
        """Exact lattice mode ``A exp(i xi.x)`` with ``xi = pi*modes/L``."""
        if len(modes) != grid.d:
            raise ValueError(f"need {grid.d} mode indices, got {len(modes)}")
        xi = [math.pi * m / grid.L for m in modes]
        coords = grid.coordinates()
        phase = sum(x * c for x, c in zip(xi, coords))
        return cls(grid, amplitude * np.exp(1j * phase))

    def conj(self) -> "Field":
        return Field(self.grid, np.conj(self.values))

    def _check(self, other: "Field"):
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")

    def __add__(self, other: "Field") -> "Field":
        self._check(other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        self._check(other)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, scalar: complex) -> "Field":
        return Field(self.grid, self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.values)


@dataclass(frozen=True)
class MultiplierSpec:
    """Real Fourier symbol evaluated on the lattice.

    Radial symbols take the frequency magnitude |xi|; non-radial ones receive
    the d frequency component arrays.
    """

    symbol: Callable[..., np.ndarray]
    label: str = "multiplier"
    radial: bool = True

    def evaluate(self, grid: GridSpec) -> np.ndarray:
        if self.radial:
            vals = self.symbol(grid.frequency_magnitude())
        else:
            vals = self.symbol(*grid.frequencies())
        return np.broadcast_to(np.asarray(vals, dtype=float), grid.shape)


def lambda_power(gamma: float) -> MultiplierSpec:
    """Symbol |xi|^gamma.

    For gamma < 0 the zero mode is excluded (its symbol is set to 0);
    for gamma == 0 the symbol is 1 everywhere.
    """
    gamma = float(gamma)

    def sym(r):
        if gamma == 0:
            return np.ones_like(r)
        safe = np.where(r > 0, r, 1.0)
        return np.where(r > 0, safe**gamma, 0.0)

    return MultiplierSpec(sym, label=f"Lambda^{gamma:g}")


def bracket_power(gamma: float) -> MultiplierSpec:
    """Symbol <xi>^gamma with <a> = sqrt(1 + a^2)."""
    gamma = float(gamma)
    return MultiplierSpec(lambda r: (1.0 + r**2) ** (gamma / 2), label=f"<Lambda>^{gamma:g}")


def identity_multiplier() -> MultiplierSpec:
    return MultiplierSpec(lambda r: np.ones_like(r), label="identity")


def apply_multiplier(f: Field, m: MultiplierSpec) -> Field:
    """Multiply the spectral coefficients of ``f`` by the symbol of ``m``.

    A symbol equal to 1 at every lattice point returns ``f`` itself.
    """
    sym = m.evaluate(f.grid)
    bad = ~np.isfinite(sym)
    if bad.any():
        idx = tuple(int(i[0]) for i in np.nonzero(bad))
        xi = tuple(float(c[idx]) for c in f.grid.frequencies())
        raise ValueError(f"symbol {m.label!r} is not finite at frequency {xi}")
    if np.all(sym == 1.0):
        return f
    return Field.from_spectrum(f.grid, f.spectrum * sym)


def lp_norm(f: Field, p: float) -> float:
    """Riemann-sum L^p norm; ``p = inf`` gives the max modulus."""
    if not p >= 1:
        raise ValueError(f"L^p norm needs p >= 1, got {p}")
    a = np.abs(f.values)
    if math.isinf(p):
        return float(a.max())
    if p == 2:
        return float(math.sqrt(np.sum(a * a) * f.grid.cell_volume))
    return float((np.sum(a**p) * f.grid.cell_volume) ** (1.0 / p))


def _spectral_sum(f: Field, weight: np.ndarray | float) -> float:
    g = f.grid
    return float(np.sum(weight * np.abs(f.spectrum) ** 2) * g.volume / g.size**2)


def spectral_l2_norm(f: Field) -> float:
    """L^2 norm computed from the spectral coefficients."""
    return math.sqrt(_spectral_sum(f, 1.0))


def sobolev_norm(f: Field, gamma: float, homogeneous: bool = False) -> float:
    """H^gamma (``<xi>^gamma`` weight) or homogeneous Hdot^gamma (``|xi|^gamma``) norm.

    The homogeneous norm ignores the zero mode when gamma > 0. For gamma < 0
    it is only defined for mean-free fields; a nonzero mean raises.
    """
    gamma = float(gamma)
    r = f.grid.frequency_magnitude()
    if not homogeneous:
        if gamma == 0:
            return lp_norm(f, 2)
        return math.sqrt(_spectral_sum(f, (1.0 + r**2) ** gamma))
    if gamma == 0:
        return math.sqrt(_spectral_sum(f, 1.0))
    zero = (0,) * f.grid.d
    if gamma < 0:
        scale = np.abs(f.spectrum).max()
        if abs(f.spectrum[zero]) > 1e-12 * scale:
            raise ValueError(
                f"homogeneous norm with gamma={gamma} < 0 is undefined for a field with nonzero mean"
            )
    safe = np.where(r > 0, r, 1.0)
    w = np.where(r > 0, safe ** (2 * gamma), 0.0)
    return math.sqrt(_spectral_sum(f, w))


def spacetime_norm(traj: Sequence[Field], p: float, q: float, dt: float) -> float:
    """L^p_t L^q_x norm of uniformly spaced snapshots.

    Finite p uses the trapezoidal rule in time; p = inf takes the max.
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    if not p >= 1:
        raise ValueError(f"time exponent must be >= 1, got {p}")
    inner = np.array([lp_norm(u, q) for u in traj])
    if math.isinf(p):
        return float(inner.max())
    if len(inner) == 1:
        return 0.0
    top = inner.max()
    if top == 0:
        return 0.0
    # scale by the max so large p cannot overflow
    return float(top * np.trapezoid((inner / top) ** p, dx=dt) ** (1.0 / p))


def dealias_mask(grid: GridSpec) -> np.ndarray:
    """2/3-rule mask: keeps modes with every |xi_i| <= (2/3) * Nyquist."""
    return _dealias_mask(grid)


@functools.lru_cache(maxsize=32)
def _dealias_mask(grid: GridSpec) -> np.ndarray:
    cut = 2.0 / 3.0 * grid.nyquist
    mask = np.ones(grid.shape, dtype=bool)
    for c in grid.frequencies():
        mask &= np.abs(c) <= cut
    mask.setflags(write=False)
    return mask


def dealiased_intensity(values: np.ndarray, grid: GridSpec, dealias: bool) -> np.ndarray:
    """|u|^2, optionally truncated by the 2/3 rule (stays real)."""
    inten = np.abs(values) ** 2
    if dealias:
        inten = _ifft(_fft(inten) * _dealias_mask(grid)).real
    return inten


def cubic_term(f: Field, dealias: bool = False) -> Field:
    """The nonlinearity |u|^2 u, with the intensity 2/3-truncated when ``dealias``."""
    return Field(f.grid, dealiased_intensity(f.values, f.grid, dealias) * f.values)


def _pad_axis(c: np.ndarray, axis: int, n_fine: int) -> np.ndarray:
    n = c.shape[axis]
    half = n // 2
    c = np.moveaxis(c, axis, 0)
    out = np.zeros((n_fine,) + c.shape[1:], dtype=np.complex128)
    out[:half] = c[:half]
    out[n_fine - half + 1 :] = c[half + 1 :]
    out[half] = c[half] / 2
    out[n_fine - half] = c[half] / 2
    return np.moveaxis(out, 0, axis)


def refine(f: Field, factor: int = 2) -> Field:
    """Spectral (zero-padding) interpolation onto a grid with ``factor`` times more points.

    The coarse Nyquist line is split evenly between +/- Nyquist so real
    fields stay real.
    """
    if factor < 1 or not _is_power_of_two(factor):
        raise ValueError(f"refinement factor must be a power of two, got {factor}")
    g = f.grid
    fine = GridSpec(d=g.d, k=g.k, n=g.n * factor, L=g.L)
    if factor == 1:
        return f
    c = np.asarray(f.spectrum)
    for ax in range(g.d):
        c = _pad_axis(c, ax, fine.n)
    return Field.from_spectrum(fine, c * (fine.size / g.size))


def field_to_bytes(f: Field) -> bytes:
    """Binary container: ``<qqdq`` header (d, k, L, n) then interleaved re/im doubles."""
    g = f.grid
    payload = np.ascontiguousarray(f.values, dtype="<c16").tobytes(order="C")
    return _HEADER.pack(g.d, g.k, g.L, g.n) + payload


def field_from_bytes(data: bytes) -> Field:
    if len(data) < _HEADER.size:
        raise ValueError("truncated field container header")
    d, k, L, n = _HEADER.unpack_from(data)
    grid = GridSpec(d=d, k=k, n=n, L=L)
    body = data[_HEADER.size :]
    if len(body) != 16 * grid.size:
        raise ValueError(f"payload holds {len(body)} bytes, expected {16 * grid.size}")
    vals = np.frombuffer(body, dtype="<c16").reshape(grid.shape)
    return Field(grid, vals)


def field_to_json(f: Field) -> dict:
    g = f.grid
    if g.size > _JSON_MAX_POINTS:
        raise ValueError(f"JSON export is limited to {_JSON_MAX_POINTS} points, grid has {g.size}")
    flat = f.values.ravel()
    return {
        "d": g.d,
        "k": g.k,
        "L": g.L,
        "n": g.n,
        "re": [float(v) for v in flat.real],
        "im": [float(v) for v in flat.imag],
    }


def field_from_json(obj: dict) -> Field:
    grid = GridSpec(d=obj["d"], k=obj["k"], n=obj["n"], L=obj["L"])
    vals = np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)
    return Field(grid, vals)
