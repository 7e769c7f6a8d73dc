"""Experiment configuration, registry, initial data and persistence.

This is the only module that touches the file system. An experiment is a
function from a validated :class:`ExperimentConfig` to an :class:`Outcome`
(tables, fitted curves and verdicts); :func:`run` times it, wraps it in an
:class:`ExperimentRecord` and writes everything under

    <out>/<experiment>-s<seed>-<config hash>/

so reruns of the same configuration overwrite the same files. Sweep points
are computed through a bounded thread pool; all writes happen afterwards on
the calling thread.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import math
import os
import platform
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np
import scipy

from . import __version__
from .estimates import (
    AdmissiblePair,
    SlopeFit,
    XsbParams,
    almost_conservation_experiment,
    bilinear_horizon,
    bilinear_ratio,
    duhamel_cutoff_check,
    fit_loglog,
    growth_experiment,
    rescaling_plan,
    strichartz_ratio,
    time_cutoff,
    xsb_norm,
)
from .evolution import SolverConfig, evolve, linear_propagate, scaling_transform
from .i_method import (
    IOperatorSpec,
    apply_I,
    energy_increment_rate,
    growth_exponent,
    modified_energy,
    sandwich_check,
    thresholds,
)
from .littlewood_paley import bernstein_check, project
from .spectral import Field, GridSpec, lp_norm, refine, sobolev_norm

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "Table",
    "Curve",
    "Verdict",
    "Outcome",
    "ExperimentRecord",
    "EXPERIMENTS",
    "DATA_KINDS",
    "make_rng",
    "generate_initial_data",
    "gaussian_profile",
    "run",
    "write_record",
    "emit_plot_data",
    "output_root",
]

DEFAULT_OUT = "hoslab-out"
OUT_ENV = "HOSLAB_OUT"
SEED_MASK = (1 << 64) - 1


class ConfigError(ValueError):
    """Invalid configuration, detected before any computation."""


# ---------------------------------------------------------------- random data


def make_rng(seed: int) -> np.random.Generator:
    """Philox-4x64 stream keyed directly by the 64-bit seed, counter starting at 0."""
    return np.random.Generator(np.random.Philox(key=int(seed) & SEED_MASK))


def gaussian_profile(amplitude: float, width: float, center: Sequence[float] | None = None) -> Callable:
    """Closed form A exp(-|x - c|^2 / (2 w^2)) as a callable of the coordinates."""

    def fn(*coords):
        c = center if center is not None else (0.0,) * len(coords)
        r2 = sum((x - x0) ** 2 for x, x0 in zip(coords, c))
        return amplitude * np.exp(-r2 / (2.0 * width**2)) + 0j

    return fn


def _complex_noise(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _gaussian(grid, seed, amplitude, width=None):
    w = grid.L / 16 if width is None else float(width)
    return Field.from_function(grid, gaussian_profile(amplitude, w))


def _multi_bump(grid, seed, amplitude, count=3, width=None):
    rng = make_rng(seed)
    w = grid.L / 16 if width is None else float(width)
    vals = np.zeros(grid.shape, dtype=np.complex128)
    coords = grid.coordinates()
    for _ in range(int(count)):
        c = rng.uniform(-grid.L / 4, grid.L / 4, size=grid.d)
        kick = np.round(rng.uniform(-2, 2, size=grid.d) * grid.L / math.pi) * math.pi / grid.L
        ww = w * rng.uniform(0.5, 1.0)
        phase = rng.uniform(0, 2 * math.pi)
        env = np.exp(-sum((x - x0) ** 2 for x, x0 in zip(coords, c)) / (2 * ww**2))
        vals += env * np.exp(1j * (phase + sum(q * x for q, x in zip(kick, coords))))
    return Field(grid, amplitude * vals / np.abs(vals).max())


def _shell_random(grid, seed, amplitude, M=4, band="="):
    rng = make_rng(seed)
    f = project(Field(grid, _complex_noise(rng, grid.shape)), band, M)
    nrm = lp_norm(f, 2)
    if nrm == 0:
        raise ValueError(f"band {band!r} at M={M} holds no lattice modes on this grid")
    return f * (amplitude / nrm)


def _windowed_noise(grid, seed, amplitude, width=0.5):
    rng = make_rng(seed)
    env = np.exp(-sum(x**2 for x in grid.coordinates()) / (2 * float(width) ** 2))
    return Field(grid, amplitude * env * _complex_noise(rng, grid.shape))


def _single_mode(grid, seed, amplitude, modes=None):
    modes = [1] * grid.d if modes is None else [int(m) for m in modes]
    return Field.plane_wave(grid, modes, amplitude)


def _power_law(grid, seed, amplitude, exponent=2.0, K=100):
    """A V^{-1/2} sum_{|j|_inf <= K} <xi_j>^{-exponent} exp(i xi_j . x), all phases 1."""
    K = int(K)
    if 2 * K >= grid.n:
        raise ValueError(f"power-law cutoff K={K} needs n > 2K, got n={grid.n}")
    j = np.fft.fftfreq(grid.n, 1.0 / grid.n)
    inside = np.ones(grid.shape, dtype=bool)
    for c in np.meshgrid(*([j] * grid.d), indexing="ij"):
        inside &= np.abs(c) <= K
    r = grid.frequency_magnitude()
    coeffs = np.where(inside, (1.0 + r**2) ** (-float(exponent) / 2), 0.0)
    return Field.from_spectrum(grid, amplitude * coeffs * grid.size / math.sqrt(grid.volume))


_KINDS: dict[str, Callable[..., Field]] = {
    "gaussian": _gaussian,
    "multi-bump": _multi_bump,
    "shell-random": _shell_random,
    "single-mode": _single_mode,
    "power-law": _power_law,
    "windowed-noise": _windowed_noise,
}
DATA_KINDS = tuple(_KINDS) + ("zero",)


def generate_initial_data(kind: str, grid: GridSpec, seed: int, amplitude: float, **options) -> Field:
    """Deterministic initial datum.

    gaussian      A exp(-|x|^2/(2w^2)), w = L/16 unless ``width`` is given
    multi-bump    ``count`` seeded Gaussian packets centred in |x_i| <= L/4
    shell-random  seeded noise projected on a band (``band``, ``M``), scaled to L^2 norm A
    single-mode   lattice plane wave with integer ``modes``
    power-law     deterministic <xi>^-``exponent`` spectrum cut at lattice index ``K``
    windowed-noise seeded complex noise times a Gaussian of width ``width``
    zero          the zero field (amplitude ignored)
    """
    if kind == "zero":
        return Field.zeros(grid)
    if kind not in _KINDS:
        raise ValueError(f"unknown initial-data kind {kind!r}; expected one of {DATA_KINDS}")
    if not amplitude > 0:
        raise ValueError(f"amplitude must be positive, got {amplitude}")
    return _KINDS[kind](grid, seed, float(amplitude), **options)


# ---------------------------------------------------------------- records


@dataclass
class Table:
    """One CSV file: header row plus rows of numbers or strings."""

    header: list[str]
    rows: list[list[Any]] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    def as_records(self) -> list[dict]:
        return [dict(zip(self.header, (_jsonable(v) for v in row))) for row in self.rows]


@dataclass
class Curve:
    """A (log x, log y) series with its optional fit and excluded points."""

    name: str
    x_label: str
    y_label: str
    x: list[float]
    y: list[float]
    fit: SlopeFit | None = None
    excluded: list[dict] = field(default_factory=list)


@dataclass
class Verdict:
    criterion: str
    status: str  # pass | fail | report-only | inconclusive | abort
    detail: str
    value: float | None = None
    threshold: float | None = None

    def as_dict(self) -> dict:
        return {
            "criterion": self.criterion,
            "status": self.status,
            "detail": self.detail,
            "value": _jsonable(self.value),
            "threshold": _jsonable(self.threshold),
        }


@dataclass
class Outcome:
    tables: dict[str, Table] = field(default_factory=dict)
    curves: list[Curve] = field(default_factory=list)
    verdicts: list[Verdict] = field(default_factory=list)
    results: dict[str, Any] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)


FAILING = ("fail", "inconclusive", "abort")


@dataclass
class ExperimentRecord:
    experiment: str
    seed: int
    config_hash: str
    config: dict
    outcome: Outcome
    wall_clock_seconds: float
    version: str = __version__
    environment: dict = field(default_factory=dict)

    @property
    def verdicts(self) -> list[Verdict]:
        return self.outcome.verdicts

    @property
    def passed(self) -> bool:
        return not any(v.status in FAILING for v in self.verdicts)

    @property
    def status(self) -> str:
        if any(v.status == "abort" for v in self.verdicts):
            return "abort"
        return "pass" if self.passed else "fail"

    def verdict(self, criterion: str) -> Verdict:
        for v in self.verdicts:
            if v.criterion == criterion:
                return v
        raise KeyError(criterion)

    def to_json(self) -> dict:
        o = self.outcome
        return {
            "schema_version": 1,
            "experiment": self.experiment,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "config": self.config,
            "artifact_version": self.version,
            "environment": self.environment,
            "results": _jsonable(o.results),
            "measurements": {name: t.as_records() for name, t in o.tables.items()},
            "fits": {
                c.name: None if c.fit is None else dict(c.fit.as_dict(), excluded=_jsonable(c.excluded))
                for c in o.curves
            },
            "verdicts": [v.as_dict() for v in o.verdicts],
            "notes": list(o.notes),
            "status": self.status,
            "wall_clock_seconds": self.wall_clock_seconds,
        }


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, Fraction):
        return str(v)
    return str(v)


def _jsonable(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


# ---------------------------------------------------------------- configuration

_COMMON = {"seed": 0, "jobs": 1, "out": None}

_DEFAULTS: dict[str, dict] = {
    "thresholds": {
        "grid": {"d": 1, "k": 3, "n": 64, "L": 16.0},
        "params": {"k": [3, 4], "gamma": 1.0},
    },
    "conserve": {
        "grid": {"d": 1, "k": 3, "n": 1024, "L": 16.0},
        "solver": {"dt": 1e-4, "T": 1.0, "dealias": True, "record_every": 1000},
        "data": {"kind": "multi-bump", "amplitude": 1.0, "width": 1.0},
        "sweep": {"dt": [4e-3, 2e-3, 1e-3], "N": [1.0, 2.0, 4.0]},
        "params": {
            "mass_tol": 1e-10,
            "order_T": 1.0,
            "order_record": 0.02,
            "order_band": [3.0, 5.0],
            "gamma": 1.0,
            "fd_step": 2e-5,
            "fd_substeps": 4,
            "rate_tol": 1e-4,
            "zero_tol": 1e-10,
        },
    },
    "scaling": {
        "grid": {"d": 3, "k": 3, "n": 64, "L": 4.0},
        "data": {"kind": "gaussian", "amplitude": 1.0, "width": 0.5},
        "sweep": {"lambda": [2.0, 4.0]},
        "params": {"N": 4.0, "gamma": 1.0, "tol": 1e-6},
    },
    "bernstein": {
        "grid": {"d": 1, "k": 3, "n": 1024, "L": 16.0},
        "data": {"kind": "shell-random", "amplitude": 1.0, "band": "<=", "M": 64, "count": 20},
        "sweep": {"M": [2, 4, 8, 16, 32], "N": [4.0, 8.0, 16.0, 32.0]},
        "params": {
            "gamma": 0.5,
            "p": 2.0,
            "q": 4.0,
            "spread": 8.0,
            "sandwich_count": 200,
            "sandwich_gamma": 1.0,
            "sandwich_spread": 4.0,
        },
    },
    "strichartz": {
        "grid": {"d": 1, "k": 3, "n": 1024, "L": 16.0},
        "data": {"kind": "shell-random", "amplitude": 1.0, "band": "<=", "M": 8, "count": 20},
        "params": {"p": 4.0, "q": 4.0, "T": None, "steps": 256, "spread": 3.0},
    },
    "bilinear": {
        "grid": {"d": 2, "k": 2, "n": 512, "L": math.pi},
        "data": {"kind": "windowed-noise", "amplitude": 1.0, "width": 0.5, "count": 3},
        "sweep": {"M1": 2, "M2": [8, 32, 128]},
        "params": {"fraction": 0.5, "steps": 64, "spread": 2.0, "conjugate_tol": 2.0},
    },
    "xsb": {
        "grid": {"d": 1, "k": 3, "n": 64, "L": math.pi},
        "data": {"kind": "shell-random", "amplitude": 1.0, "band": "<=", "M": 8, "count": 10},
        "params": {"gamma": 0.0, "b": 0.55, "b_prime": 0.30, "t_max": 2.5, "steps": 256, "oracle_tol": 1e-10, "spread": 3.0},
    },
    "duhamel": {
        "grid": {"d": 1, "k": 3, "n": 64, "L": 16.0},
        "sweep": {"delta": [1.0, 0.5, 0.25, 0.125]},
        "params": {
            "b": 0.55,
            "b_prime": 0.30,
            "t_half": 16.0,
            "samples": 4096,
            "bandwidth": 1.0,
            "min_slope": 0.05,
            "max_rms": 0.15,
        },
    },
    "almost-conservation": {
        "grid": {"d": 1, "k": 3, "n": 1024, "L": math.pi},
        "solver": {"dt": 1e-6, "T": 0.02, "dealias": True, "record_every": 5},
        "data": {"kind": "power-law", "amplitude": 0.5, "exponent": 2.0, "K": 100},
        "sweep": {"N": [4.0, 8.0, 16.0, 32.0]},
        "params": {
            "gamma": 1.0,
            "delta_run": 0.02,
            "slope_slack": 0.5,
            "max_rms": 0.15,
            "refine": True,
            "refine_tol": 0.10,
            "max_initial_energy": 1.0,
        },
    },
    "growth": {
        "grid": {"d": 1, "k": 3, "n": 256, "L": 16.0},
        "solver": {"dt": 1e-3, "T": 1.0, "dealias": True, "record_every": 1000},
        "data": {"kind": "gaussian", "amplitude": 1.0, "width": 1.0},
        "sweep": {"T": [1.0, 2.0, 4.0, 8.0]},
        "params": {"gamma": 1.0, "margin": 0.2, "linear_tol": 0.02, "small_amplitude": 1e-3, "max_rms": 0.15},
    },
}

EXPERIMENTS = tuple(_DEFAULTS)

_REQUIRED_SWEEPS = {
    "conserve": {"dt": 3, "N": 1},
    "scaling": {"lambda": 1},
    "bernstein": {"M": 1, "N": 1},
    "bilinear": {"M2": 1},
    "duhamel": {"delta": 3},
    "almost-conservation": {"N": 3},
    "growth": {"T": 3},
}


def _deep_merge(base: dict, extra: Mapping) -> dict:
    out = copy.deepcopy(base)
    for key, val in extra.items():
        if isinstance(val, Mapping) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def parse_override(text: str) -> tuple[list[str], Any]:
    """``a.b.c=value``; the value is read as JSON when possible, else as a string."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    path = [p for p in key.strip().split(".") if p]
    if not path:
        raise ConfigError(f"override {text!r} has an empty key")
    try:
        val = json.loads(raw)
    except json.JSONDecodeError:
        val = raw
    return path, val


def apply_overrides(mapping: dict, overrides: Iterable[str]) -> dict:
    out = copy.deepcopy(mapping)
    for text in overrides:
        path, val = parse_override(text)
        node = out
        for p in path[:-1]:
            nxt = node.get(p)
            if not isinstance(nxt, dict):
                nxt = node[p] = {}
            node = nxt
        node[path[-1]] = val
    return out


@dataclass
class ExperimentConfig:
    """Fully resolved configuration of one experiment run."""

    name: str
    grid: GridSpec
    solver: SolverConfig | None
    sweep: dict
    data: dict
    params: dict
    seed: int
    out: str | None = None
    jobs: int = 1

    @classmethod
    def from_mapping(cls, mapping: Mapping, name: str | None = None, overrides: Iterable[str] = ()) -> "ExperimentConfig":
        """Merge experiment defaults, the mapping, and ``key=value`` overrides (last wins)."""
        user = apply_overrides(dict(mapping), overrides)
        name = name or user.get("experiment")
        if name not in _DEFAULTS:
            raise ConfigError(f"unknown experiment {name!r}; expected one of {', '.join(EXPERIMENTS)}")
        user.pop("experiment", None)
        unknown = set(user) - {"grid", "solver", "sweep", "data", "params", "seed", "out", "jobs"}
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        merged = _deep_merge(_deep_merge(_COMMON, _DEFAULTS[name]), user)
        try:
            grid = GridSpec(**merged["grid"])
            solver = SolverConfig(**merged["solver"]) if "solver" in merged else None
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        seed = merged["seed"]
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed <= SEED_MASK:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
        jobs = merged["jobs"]
        if isinstance(jobs, bool) or not isinstance(jobs, int) or jobs < 1:
            raise ConfigError(f"jobs must be a positive integer, got {jobs!r}")
        cfg = cls(
            name=name,
            grid=grid,
            solver=solver,
            sweep=dict(merged.get("sweep", {})),
            data=dict(merged.get("data", {})),
            params=dict(merged.get("params", {})),
            seed=seed,
            out=merged["out"],
            jobs=jobs,
        )
        cfg.validate()
        return cfg

    def validate(self):
        for key, minimum in _REQUIRED_SWEEPS.get(self.name, {}).items():
            vals = self.sweep.get(key)
            if not isinstance(vals, list) or len(vals) < minimum:
                raise ConfigError(f"sweep axis {key!r} of {self.name} needs a list of at least {minimum} values, got {vals!r}")
            if not all(isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0 for v in vals):
                raise ConfigError(f"sweep axis {key!r} must hold positive numbers, got {vals!r}")
        kind = self.data.get("kind")
        if kind is not None:
            if kind not in DATA_KINDS:
                raise ConfigError(f"unknown initial-data kind {kind!r}; expected one of {DATA_KINDS}")
            if kind != "zero" and not (isinstance(self.data.get("amplitude"), (int, float)) and self.data["amplitude"] > 0):
                raise ConfigError(f"data amplitude must be positive, got {self.data.get('amplitude')!r}")
        if self.name == "scaling" and not self.grid.is_critical:
            raise ConfigError(f"scaling needs d == k, got d={self.grid.d}, k={self.grid.k}")
        if self.name in ("xsb", "duhamel"):
            try:
                XsbParams(self.params.get("gamma", 0.0), self.params["b"], self.params["b_prime"])
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc

    def as_dict(self) -> dict:
        d = {
            "experiment": self.name,
            "grid": {"d": self.grid.d, "k": self.grid.k, "n": self.grid.n, "L": self.grid.L},
            "sweep": self.sweep,
            "data": self.data,
            "params": self.params,
            "seed": self.seed,
        }
        if self.solver is not None:
            s = self.solver
            d["solver"] = {
                "dt": s.dt,
                "T": s.T,
                "dealias": s.dealias,
                "record_every": s.record_every,
                "nonlinearity_on": s.nonlinearity_on,
                "dispersion_on": s.dispersion_on,
            }
        return d

    @property
    def config_hash(self) -> str:
        """Hash of the configuration without the output directory and pool size."""
        text = json.dumps(_jsonable(self.as_dict()), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:12]

    def data_options(self) -> dict:
        return {k: v for k, v in self.data.items() if k not in ("kind", "amplitude", "count")}

    def initial_data(self, seed: int | None = None, grid: GridSpec | None = None, **changes) -> Field:
        data = dict(self.data, **changes)
        opts = {k: v for k, v in data.items() if k not in ("kind", "amplitude", "count")}
        return generate_initial_data(
            data["kind"], grid or self.grid, self.seed if seed is None else seed, data.get("amplitude", 0.0), **opts
        )

    def seeds(self, count: int) -> list[int]:
        """Consecutive 64-bit seeds starting at the configured one."""
        return [(self.seed + i) & SEED_MASK for i in range(int(count))]

    def pmap(self, fn: Callable, items: Sequence) -> list:
        """Map over independent sweep points, concurrently when ``jobs > 1``; order is preserved."""
        items = list(items)
        if self.jobs == 1 or len(items) < 2:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(max_workers=self.jobs) as pool:
            return list(pool.map(fn, items))


# ---------------------------------------------------------------- experiments


def _spread(values: Sequence[float], ref: str = "median") -> float:
    v = np.asarray(values, dtype=float)
    base = np.median(v) if ref == "median" else v.min()
    return float(v.max() / base)


def _bound_verdict(name: str, value: float, limit: float, detail: str, upper: bool = True) -> Verdict:
    ok = value <= limit if upper else value >= limit
    return Verdict(name, "pass" if ok else "fail", detail, value, limit)


def _exp_thresholds(cfg: ExperimentConfig) -> Outcome:
    out = Outcome()
    expected = {
        3: (Fraction(11, 13), Fraction(51, 22), Fraction(15, 22)),
        4: (Fraction(60, 53), Fraction(46, 15), Fraction(14, 15)),
    }
    table = Table(["k", "gamma_k", "gamma0_k", "alpha_k", "alpha_plus_gamma0", "gamma_k_from_gamma0"])
    ok, problems = True, []
    gamma = cfg.params.get("gamma", 1.0)
    for k in cfg.params.get("k", [3, 4]):
        th = thresholds(k)
        from_g0 = Fraction(k * k) / (2 * (th.gamma0_k + k))
        table.rows.append([k, th.gamma_k, th.gamma0_k, th.alpha_k, th.alpha_k + th.gamma0_k, from_g0])
        out.results[f"k={k}"] = {"gamma_k": th.gamma_k, "gamma0_k": th.gamma0_k, "alpha_k": th.alpha_k}
        if th.alpha_k + th.gamma0_k != k:
            ok = False
            problems.append(f"alpha+gamma0 != k at k={k}")
        if from_g0 != th.gamma_k:
            ok = False
            problems.append(f"gamma(k) identity fails at k={k}")
        if not th.gamma0_k < Fraction(2 * k - 1, 2):
            ok = False
            problems.append(f"gamma0({k}) >= k - 1/2")
        if k in expected and (th.gamma_k, th.gamma0_k, th.alpha_k) != expected[k]:
            ok = False
            problems.append(f"values at k={k} differ from the reference table")
        g = Fraction(str(gamma))
        if th.gamma_k < g < Fraction(k, 2):
            plan = rescaling_plan(k, g, 1.0, 10.0)
            out.results[f"k={k}"]["growth_exponent"] = growth_exponent(k, g)
            out.results[f"k={k}"]["N_exponent"] = plan.n_exponent
    out.tables["thresholds"] = table
    out.verdicts.append(Verdict("thresholds-exact", "pass" if ok else "fail", "; ".join(problems) or "all identities exact"))
    return out


def _exp_conserve(cfg: ExperimentConfig) -> Outcome:
    out = Outcome()
    p = cfg.params
    u0 = cfg.initial_data()
    solver = cfg.solver

    # mass over the configured run
    trace, _ = evolve(u0, solver)
    drift = trace.max_relative_mass_drift()
    out.tables["trace"] = _trace_table(trace)
    out.results["mass_drift"] = drift
    out.results["steps"] = solver.n_steps
    out.verdicts.append(_bound_verdict("mass-drift", drift, p["mass_tol"], f"max relative mass drift over {solver.n_steps} steps"))

    # energy drift under dt refinement
    dts = [float(x) for x in cfg.sweep["dt"]]

    def drift_at(dt):
        every = max(1, int(round(p["order_record"] / dt)))
        run_cfg = SolverConfig(dt=dt, T=p["order_T"], dealias=solver.dealias, record_every=every)
        return evolve(u0, run_cfg)[0].max_energy_drift()

    drifts = cfg.pmap(drift_at, dts)
    table = Table(["dt", "max_energy_drift"], [[a, b] for a, b in zip(dts, drifts)])
    out.tables["energy_order"] = table
    lo, hi = p["order_band"]
    if max(drifts) == 0:
        out.verdicts.append(Verdict("energy-order", "pass", "no energy drift at any step size (trivial data)"))
    else:
        factors = [a / b if b > 0 else math.inf for a, b in zip(drifts, drifts[1:])]
        out.results["energy_drift_factors"] = factors
        ok = all(lo <= f <= hi for f in factors)
        out.verdicts.append(
            Verdict("energy-order", "pass" if ok else "fail", f"drift reduction factors {factors} per halving", min(factors), lo)
        )
    out.curves.append(
        Curve("energy_drift", "log dt", "log max energy drift", [math.log(x) for x in dts],
              [math.log(y) if y > 0 else -math.inf for y in drifts],
              fit_loglog(dts, drifts) if min(drifts) > 0 else None)
    )

    # analytic energy-increment rate against a centred difference of the flow
    gamma, k = p["gamma"], cfg.grid.k
    h, sub = p["fd_step"], int(p["fd_substeps"])
    fd_cfg = SolverConfig(dt=h / sub, T=h, dealias=solver.dealias, record_every=sub)
    _, up = evolve(u0, fd_cfg)
    _, um = evolve(u0.conj(), fd_cfg)
    um = um.conj()
    rows, worst = [], 0.0
    for N in cfg.sweep["N"]:
        spec = IOperatorSpec(float(N), gamma, k)
        rate = energy_increment_rate(u0, spec, dealias=solver.dealias)
        fd = (modified_energy(up, spec).total - modified_energy(um, spec).total) / (2 * h)
        if abs(rate) <= p["zero_tol"] and abs(fd) <= p["zero_tol"]:
            rel = 0.0
        else:
            rel = abs(fd - rate) / max(abs(rate), abs(fd))
        worst = max(worst, rel)
        rows.append([float(N), rate, fd, rel])
    out.tables["increment_rate"] = Table(["N", "analytic_rate", "centered_difference", "relative_error"], rows)
    out.verdicts.append(_bound_verdict("increment-identity", worst, p["rate_tol"], "analytic rate vs centred difference"))

    # exact zero of the rate when I is the identity on the data and its cubic image
    g = cfg.grid
    zero_rows = []
    big = IOperatorSpec(max(1.0, g.nyquist * math.sqrt(g.d)), gamma, k)
    zero_rows.append(["N>=nyquist", big.N, energy_increment_rate(u0, big, dealias=False)])
    low = generate_initial_data("shell-random", g, cfg.seed, 1.0, band="<=", M=1)
    zero_rows.append(["band-limited", 8.0, energy_increment_rate(low, IOperatorSpec(8.0, gamma, k), dealias=False)])
    out.tables["increment_zero"] = Table(["case", "N", "rate"], zero_rows)
    zmax = max(abs(r[2]) for r in zero_rows)
    out.verdicts.append(_bound_verdict("increment-zero", zmax, p["zero_tol"], "rate when I acts as the identity"))
    return out


def _trace_table(trace) -> Table:
    text = trace.to_csv().splitlines()
    header = text[0].split(",")
    rows = [[float(x) for x in line.split(",")] for line in text[1:]]
    return Table(header, rows)


def _exp_scaling(cfg: ExperimentConfig) -> Outcome:
    out = Outcome()
    p, g = cfg.params, cfg.grid
    amp = cfg.data.get("amplitude", 1.0)
    width = cfg.data.get("width", g.L / 16)
    gen = gaussian_profile(amp, width)
    u0 = Field.from_function(g, gen)
    spec = IOperatorSpec(float(p["N"]), p["gamma"], g.k)
    e0 = modified_energy(u0, spec).total
    m0 = lp_norm(u0, 2)
    closed = amp**2 * (math.pi * width**2) ** (g.d / 2)
    out.results["mass_vs_closed_form"] = abs(m0**2 / closed - 1)
    rows, worst = [], 0.0

    def point(lam):
        ul = scaling_transform(u0, lam, generator=gen)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            el = modified_energy(ul, spec.rescaled(lam)).total
        l2 = abs(lp_norm(ul, 2) / m0 - 1)
        en = abs(lam**g.k * el / e0 - 1) if e0 != 0 else abs(el)
        return [lam, lp_norm(ul, 2), m0, el, e0, l2, en]

    for row in cfg.pmap(point, [float(x) for x in cfg.sweep["lambda"]]):
        rows.append(row)
        worst = max(worst, row[5], row[6])
    out.tables["scaling"] = Table(["lambda", "l2_scaled", "l2", "E_I_scaled", "E_I", "l2_rel_err", "energy_rel_err"], rows)
    out.verdicts.append(_bound_verdict("scaling-identity", worst, p["tol"], "L^2 and E(I u) = lam^k E(I_{N/lam} u_lam)"))
    return out


def _exp_bernstein(cfg: ExperimentConfig) -> Outcome:
    out = Outcome()
    p, g = cfg.params, cfg.grid
    count = int(cfg.data.get("count", 20))
    Ms = [float(m) for m in cfg.sweep["M"]]

    def one(seed):
        f = cfg.initial_data(seed)
        return [bernstein_check(f, M, p["gamma"], p["p"], p["q"]) for M in Ms]

    reports = [r for batch in cfg.pmap(one, cfg.seeds(count)) for r in batch]
    table = Table(["M", "p", "q", "gamma", "ratio_name", "value"])
    families: dict[str, list[float]] = {}
    for rep in reports:
        table.rows.extend(list(r) for r in rep.csv_rows())
        for name, val in rep.ratios.items():
            families.setdefault(name, []).append(val)
    out.tables["bernstein"] = table
    spreads = {name: _spread(v, "min") for name, v in families.items()}
    out.results["bernstein_spreads"] = spreads
    worst = max(spreads.values())
    out.verdicts.append(_bound_verdict("bernstein-spread", worst, p["spread"], f"max/min per ratio family {spreads}"))

    # I-operator sandwich
    Ns = [float(n) for n in cfg.sweep["N"]]
    sg = p["sandwich_gamma"]

    def sand(seed):
        f = cfg.initial_data(seed)
        return [(N,) + sandwich_check(f, IOperatorSpec(N, sg, g.k)) for N in Ns]

    srows = [list(r) for batch in cfg.pmap(sand, cfg.seeds(int(p["sandwich_count"]))) for r in batch]
    out.tables["sandwich"] = Table(["N", "lower_ratio", "upper_ratio"], srows)
    s1 = _spread([r[1] for r in srows])
    s2 = _spread([r[2] for r in srows])
    out.results["sandwich_spreads"] = {"lower": s1, "upper": s2}
    out.verdicts.append(_bound_verdict("sandwich-spread", max(s1, s2), p["sandwich_spread"], "max/median of both sandwich ratios"))

    # I is the identity on data below N
    low = generate_initial_data("shell-random", g, cfg.seed, 1.0, band="<=", M=min(Ns) / 2)
    err = max(
        float(np.abs(apply_I(low, IOperatorSpec(N, sg, g.k)).values - low.values).max()) for N in Ns
    )
    out.results["identity_error"] = err
    out.verdicts.append(_bound_verdict("sandwich-identity", err, 1e-13, "If - f on data supported below N"))
    return out


def _exp_strichartz(cfg: ExperimentConfig) -> Outcome:
    out = Outcome()
    p = cfg.params
    pair = AdmissiblePair(p["p"], p["q"])
    T = p["T"] if p.get("T") is not None else cfg.grid.L / 4
    dt = T / int(p["steps"])
    seeds = cfg.seeds(int(cfg.data.get("count", 20)))
    ratios = cfg.pmap(lambda s: strichartz_ratio(cfg.initial_data(s), pair, T, dt), seeds)
    out.tables["strichartz"] = Table(["seed", "p", "q", "T", "ratio"], [[s, pair.p, pair.q, T, r] for s, r in zip(seeds, ratios)])
    spread = _spread(ratios)
    out.results["spread"] = spread
    out.verdicts.append(_bound_verdict("strichartz-uniformity", spread, p["spread"], "max/median over seeded data"))
    return out


def _exp_bilinear(cfg: ExperimentConfig) -> Outcome:
    out = Outcome()
    p, g = cfg.params, cfg.grid
    M1 = float(cfg.sweep["M1"])
    M2s = [float(m) for m in cfg.sweep["M2"]]
    seeds = cfg.seeds(int(cfg.data.get("count", 3)))
    jobs = [(s, i, M2) for s in seeds for i, M2 in enumerate(M2s)]

    def point(job):
        s, i, M2 = job
        u0 = cfg.initial_data(s)
        v0 = cfg.initial_data((s + (i + 1) * 7919) & SEED_MASK)
        T = bilinear_horizon(g, M2, p["fraction"])
        dt = T / int(p["steps"])
        r = bilinear_ratio(u0, v0, M1, M2, T, dt)
        rc = bilinear_ratio(u0, v0, M1, M2, T, dt, conjugate="u") if i == 0 else float("nan")
        rv = bilinear_ratio(u0, v0, M1, M2, T, dt, conjugate="v") if i == 0 else float("nan")
        return [s, M1, M2, T, r, rc, rv]

    rows = cfg.pmap(point, jobs)
    out.tables["bilinear"] = Table(["seed", "M1", "M2", "T", "ratio", "ratio_conj_u", "ratio_conj_v"], rows)
    worst = 0.0
    for s in seeds:
        vals = [r[4] for r in rows if r[0] == s]
        worst = max(worst, _spread(vals))
    out.results["worst_spread"] = worst
    out.verdicts.append(_bound_verdict("bilinear-gain", worst, p["spread"], "max/median over M2/M1 per seed"))
    conj = [max(r[5], r[6]) / min(r[5], r[6]) for r in rows if not math.isnan(r[5])]
    out.verdicts.append(_bound_verdict("bilinear-conjugation", max(conj), p["conjugate_tol"], "conjugated-factor swap"))
    return out


def _exp_xsb(cfg: ExperimentConfig) -> Outcome:
    out = Outcome()
    p = cfg.params
    params = XsbParams(p["gamma"], p["b"], p["b_prime"])
    steps = int(p["steps"])
    times = np.linspace(-p["t_max"], p["t_max"], steps + 1)
    dt = times[1] - times[0]
    seeds = cfg.seeds(int(cfg.data.get("count", 10)))

    def point(s):
        f = cfg.initial_data(s)
        traj = [linear_propagate(f, t) for t in times]
        norm = xsb_norm(traj, times, params)
        plain = xsb_norm(traj, times, (0.0, 0.0))
        window = time_cutoff(times)
        direct = math.sqrt(sum(w**2 * lp_norm(u, 2) ** 2 for w, u in zip(window, traj)) * dt)
        return [s, norm, sobolev_norm(f, params.gamma), norm / sobolev_norm(f, params.gamma), abs(plain / direct - 1)]

    rows = cfg.pmap(point, seeds)
    out.tables["xsb"] = Table(["seed", "xsb_norm", "h_gamma_norm", "ratio", "oracle_rel_err"], rows)
    err = max(r[4] for r in rows)
    out.verdicts.append(_bound_verdict("xsb-oracle", err, p["oracle_tol"], "b=gamma=0 norm vs direct L^2_{t,x}"))
    spread = _spread([r[3] for r in rows])
    out.verdicts.append(Verdict("xsb-homogeneous-bound", "report-only", "max/median of X norm over H^gamma norm", spread, p["spread"]))
    return out


def duhamel_signal(seed: int, times: np.ndarray, bandwidth: float) -> np.ndarray:
    """Seeded complex time signal with Gaussian spectral envelope exp(-tau^2 / (2 bw^2))."""
    rng = make_rng(seed)
    tau = 2 * math.pi * np.fft.fftfreq(times.size, times[1] - times[0])
    c = np.fft.fft(_complex_noise(rng, times.size)) * np.exp(-(tau**2) / (2 * bandwidth**2))
    return np.fft.ifft(c)


def _exp_duhamel(cfg: ExperimentConfig) -> Outcome:
    out = Outcome()
    p = cfg.params
    params = XsbParams(0.0, p["b"], p["b_prime"])
    n = int(p["samples"])
    times = -p["t_half"] + 2 * p["t_half"] / n * np.arange(n)
    g = duhamel_signal(cfg.seed, times, p["bandwidth"])
    res = duhamel_cutoff_check(g, times, cfg.sweep["delta"], params)
    out.tables["duhamel"] = Table(
        ["delta", "ratio", "normalized"], [[d, r, q] for d, r, q in zip(res.deltas, res.ratios, res.normalized)]
    )
    if res.fit is None:
        out.verdicts.append(Verdict("duhamel-decay", "pass", "zero signal: all ratios vanish"))
        return out
    out.curves.append(Curve("duhamel", "log delta", "log ratio", res.fit.log_x, res.fit.log_y, res.fit))
    out.results["slope"] = res.fit.slope
    out.results["bound_exponent"] = res.bound_exponent
    if res.fit.residual_rms > p["max_rms"]:
        out.verdicts.append(Verdict("duhamel-decay", "inconclusive", f"fit residual {res.fit.residual_rms:.3g} too large", res.fit.slope, p["min_slope"]))
    else:
        out.verdicts.append(_bound_verdict("duhamel-decay", res.fit.slope, p["min_slope"], "fitted log-log slope of the ratio", upper=False))
    return out


def _exp_almost(cfg: ExperimentConfig) -> Outcome:
    out = Outcome()
    p, g = cfg.params, cfg.grid
    Ns = [float(N) for N in cfg.sweep["N"]]
    specs = [IOperatorSpec(N, p["gamma"], g.k) for N in Ns]
    u0 = cfg.initial_data()
    grids = [u0, refine(u0, 2)] if p.get("refine", True) else [u0]

    def job(f):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            res = almost_conservation_experiment(f, specs, p["delta_run"], cfg.solver)
        return res, [str(w.message) for w in caught]

    results = cfg.pmap(job, grids)
    coarse, msgs = results[0]
    out.notes.extend(msgs)
    incs = {s.N: coarse.trace.max_modified_energy_increment(s.N) for s in specs}
    rows = [[N, incs[N], N in coarse.excluded, coarse.initial_energies[i]] for i, N in enumerate(Ns)]
    header = ["N", "increment", "excluded", "E_I_initial"]
    if len(results) > 1:
        fine = results[1][0]
        header += ["increment_refined", "refinement_change"]
        for row in rows:
            f_inc = fine.trace.max_modified_energy_increment(row[0])
            row += [f_inc, abs(f_inc / row[1] - 1) if row[1] > 0 else 0.0]
    out.tables["almost_conservation"] = Table(header, rows)
    out.tables["trace"] = _trace_table(coarse.trace)
    excluded = [{"N": N, "increment": incs[N], "reason": "below measurement floor 1e-14"} for N in coarse.excluded]
    x = [math.log(N) for N in coarse.Ns]
    y = [math.log(v) for v in coarse.increments]
    out.curves.append(Curve("almost_conservation", "log N", "log increment", x, y, coarse.fit, excluded))
    bound = coarse.bound_slope + p["slope_slack"]
    out.results["bound_slope"] = coarse.bound_slope
    e_max = max(coarse.initial_energies)
    out.results["max_initial_modified_energy"] = e_max
    if coarse.fit is None:
        out.verdicts.append(Verdict("almost-conservation-slope", "inconclusive", "fewer than 3 increments above the floor"))
    elif coarse.fit.residual_rms > p["max_rms"]:
        out.verdicts.append(Verdict("almost-conservation-slope", "inconclusive", f"fit residual {coarse.fit.residual_rms:.3g} too large", coarse.fit.slope, bound))
    else:
        out.verdicts.append(_bound_verdict("almost-conservation-slope", coarse.fit.slope, bound, f"fitted slope (residual {coarse.fit.residual_rms:.3g})"))
    out.verdicts.append(_bound_verdict("almost-conservation-energy", e_max, p["max_initial_energy"], "E(I_N u0) precondition"))
    if len(results) > 1:
        change = max(r[-1] for r in rows)
        out.verdicts.append(_bound_verdict("almost-conservation-refinement", change, p["refine_tol"], "relative change of increments on the doubled grid"))
    return out


def _exp_growth(cfg: ExperimentConfig) -> Outcome:
    out = Outcome()
    p, g = cfg.params, cfg.grid
    Ts = [float(t) for t in cfg.sweep["T"]]
    u0 = cfg.initial_data()
    small = cfg.initial_data(amplitude=p["small_amplitude"])

    runs = [
        ("nonlinear", u0, cfg.solver),
        ("linear", u0, replace(cfg.solver, nonlinearity_on=False)),
        ("small-data", small, cfg.solver),
    ]
    results = cfg.pmap(lambda r: growth_experiment(r[1], p["gamma"], g.k, Ts, r[2]), runs)
    table = Table(["run", "T", "h_gamma_norm"])
    fits = {}
    for (name, _, _), res in zip(runs, results):
        table.rows.extend([name, t, v] for t, v in zip(res.times, res.norms))
        fits[name] = res
        if res.fit is not None:
            out.curves.append(Curve(f"growth_{name}", "log(1+T)", "log H^gamma norm", res.fit.log_x, res.fit.log_y, res.fit))
    out.tables["growth"] = table
    main = fits["nonlinear"]
    theo = main.theoretical
    out.results["theoretical_exponent"] = growth_exponent(g.k, Fraction(str(p["gamma"]))) if g.k >= 3 else theo
    if any(r.aborted for r in results):
        bad = [name for (name, _, _), r in zip(runs, results) if r.aborted]
        out.verdicts.append(Verdict("growth-bound", "abort", f"blow-up suspected in {bad}"))
        return out
    limit = theo + p["margin"]
    slope = main.fit.slope
    status = "pass" if slope <= limit and main.fit.residual_rms <= p["max_rms"] else "fail"
    out.verdicts.append(Verdict("growth-bound", status, f"fitted exponent vs theoretical {theo:.6g} (report-only bound)", slope, limit))
    lin = abs(fits["linear"].fit.slope)
    out.verdicts.append(_bound_verdict("growth-linear-control", lin, p["linear_tol"], "linear flow keeps every H^gamma norm"))
    out.verdicts.append(Verdict("growth-small-data", "report-only", "fitted exponent for small data", fits["small-data"].fit.slope, None))
    return out


_RUNNERS: dict[str, Callable[[ExperimentConfig], Outcome]] = {
    "thresholds": _exp_thresholds,
    "conserve": _exp_conserve,
    "scaling": _exp_scaling,
    "bernstein": _exp_bernstein,
    "strichartz": _exp_strichartz,
    "bilinear": _exp_bilinear,
    "xsb": _exp_xsb,
    "duhamel": _exp_duhamel,
    "almost-conservation": _exp_almost,
    "growth": _exp_growth,
}


# ---------------------------------------------------------------- running and writing


def output_root(cfg: ExperimentConfig, flag: str | None = None) -> Path:
    """--out flag, then $HOSLAB_OUT, then the config's ``out``, then ./hoslab-out."""
    return Path(flag or os.environ.get(OUT_ENV) or cfg.out or DEFAULT_OUT)


def run_directory(cfg: ExperimentConfig, root: Path) -> Path:
    return Path(root) / f"{cfg.name}-s{cfg.seed}-{cfg.config_hash}"


def _check_writable(root: Path):
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {root}: {exc}") from exc
    if not os.access(root, os.W_OK):
        raise ConfigError(f"output directory {root} is not writable")


def _environment() -> dict:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "platform": platform.platform(),
    }


def execute(cfg: ExperimentConfig) -> ExperimentRecord:
    """Run the experiment in memory; failures become an ``abort`` verdict."""
    start = time.perf_counter()
    try:
        outcome = _RUNNERS[cfg.name](cfg)
    except Exception as exc:  # the record must be written whatever happens
        outcome = Outcome(verdicts=[Verdict(cfg.name, "abort", f"{type(exc).__name__}: {exc}")])
    return ExperimentRecord(
        experiment=cfg.name,
        seed=cfg.seed,
        config_hash=cfg.config_hash,
        config=_jsonable(cfg.as_dict()),
        outcome=outcome,
        wall_clock_seconds=time.perf_counter() - start,
        environment=_environment(),
    )


def run(cfg: ExperimentConfig, out: str | os.PathLike | None = None) -> ExperimentRecord:
    """Validate the output location, run the experiment and write its files."""
    root = output_root(cfg, None if out is None else str(out))
    _check_writable(root)
    record = execute(cfg)
    write_record(record, run_directory(cfg, root))
    return record


def _write_text(path: Path, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def write_record(record: ExperimentRecord, directory: Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, table in record.outcome.tables.items():
        path = directory / f"{name}.csv"
        _write_text(path, table.to_csv())
        paths.append(path)
    paths += emit_plot_data(record, directory / "plot")
    path = directory / "record.json"
    _write_text(path, json.dumps(record.to_json(), indent=2, sort_keys=True) + "\n")
    paths.append(path)
    return paths


def emit_plot_data(record: ExperimentRecord, directory: Path) -> list[Path]:
    """Two-column gnuplot data per curve, a fitted-line file and a script stub.

    Points excluded from a fit are listed in ``<curve>.excluded.txt``; curves
    without finite points are skipped and noted in the record.
    """
    directory = Path(directory)
    paths: list[Path] = []
    for c in record.outcome.curves:
        pts = [(a, b) for a, b in zip(c.x, c.y) if math.isfinite(a) and math.isfinite(b)]
        if not pts:
            record.outcome.notes.append(f"curve {c.name} has no finite points; plot data skipped")
            continue
        directory.mkdir(parents=True, exist_ok=True)
        dat = directory / f"{c.name}.dat"
        _write_text(dat, f"# {c.x_label}\t{c.y_label}\n" + "".join(f"{a!r}\t{b!r}\n" for a, b in pts))
        paths.append(dat)
        plot = f'plot "{dat.name}" using 1:2 with points title "{c.name}"'
        if c.fit is not None:
            fit_path = directory / f"{c.name}.fit.dat"
            xs = [pts[0][0], pts[-1][0]]
            _write_text(
                fit_path,
                f"# slope {c.fit.slope!r} intercept {c.fit.intercept!r} residual_rms {c.fit.residual_rms!r}\n"
                + "".join(f"{x!r}\t{c.fit.slope * x + c.fit.intercept!r}\n" for x in xs),
            )
            paths.append(fit_path)
            plot += f', "{fit_path.name}" using 1:2 with lines title "slope {c.fit.slope:.4g}"'
        gp = directory / f"{c.name}.gp"
        _write_text(gp, f'set xlabel "{c.x_label}"\nset ylabel "{c.y_label}"\n{plot}\n')
        paths.append(gp)
        if c.excluded:
            side = directory / f"{c.name}.excluded.txt"
            _write_text(side, "".join(json.dumps(_jsonable(e), sort_keys=True) + "\n" for e in c.excluded))
            paths.append(side)
    return paths
