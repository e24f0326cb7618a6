"""Monte Carlo identification of a bimodal relative-degree-two system.

Each run draws a random binary input and random sample times, simulates the
noisy output, and for every warp exponent ``r - 1`` learns a combination of
``m`` min-warped kernels by simplex-constrained kernel learning, with
lambda chosen by GCV on the learned combination (or, with
``lambda_selection = uniform``, on the uniform mixture before learning). Impulse-response and output fits are
scored on ``[0, 1]``, including the extrapolation region without samples.
"""

from __future__ import annotations

import logging
import statistics
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid

from .errors import NumericalError, ParseError, UndefinedScoreError
from .gram import GramMatrix, QuadratureConfig
from .io import read_config, write_table
from .kernels import warped_kernel
from .mkl import KernelDictionary, active_atoms, fit_mkl, select_lambda_mkl
from .signals import (
    add_noise,
    convolve_true_response,
    generate_binary_input,
    true_impulse_response,
)
from .solver import IdentifiedModel, default_lambda_grid, select_lambda

__all__ = [
    "ExperimentConfig",
    "RunResult",
    "ExperimentReport",
    "dictionary_specs",
    "build_dictionary",
    "fit_scores",
    "run_single",
    "run_experiment",
    "write_report",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExperimentConfig:
    omega1: float = 10.0
    omega2: float = 100.0
    amplitude: float = 20.0
    n_runs: int = 50
    n_samples: int = 100
    sample_interval: tuple = (0.0, 0.75)
    noise_ratio: float = 0.1
    m: int = 40
    omega_min: float = 1.0
    omega_max: float = 1000.0
    r_values: tuple = (1, 2)
    n_switch: int = 10
    switch_interval: tuple = (0.0, 1.0)
    base_seed: int = 0
    lambda_min: float = 1e-8
    lambda_max: float = 1e2
    lambda_count: int = 30
    fit_nodes: int = 2001
    fit_interval: tuple = (0.0, 1.0)
    mkl_tol: float = 1e-9
    mkl_max_iter: int = 500
    active_threshold: float = 0.01
    panel_order: int = 8
    entry_rel_tol: float = 1e-8
    curve_runs: tuple = (0,)
    gram_normalization: str = "trace"
    mkl_method: str = "newton"
    lambda_selection: str = "joint"

    def __post_init__(self):
        for name in ("n_runs", "n_samples", "m", "n_switch", "lambda_count", "mkl_max_iter"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        for name in ("sample_interval", "switch_interval", "fit_interval"):
            lo, hi = getattr(self, name)
            if not hi > lo:
                raise ValueError(f"{name} must be a nonempty interval")
        if not 0 < self.omega_min <= self.omega_max:
            raise ValueError("need 0 < omega_min <= omega_max")
        if not 0 < self.lambda_min <= self.lambda_max:
            raise ValueError("need 0 < lambda_min <= lambda_max")
        if self.fit_nodes < 3 or self.fit_nodes % 2 == 0:
            raise ValueError("fit_nodes must be odd and at least 3")
        if not self.r_values or any(r < 1 for r in self.r_values):
            raise ValueError("r_values must be positive integers")
        if self.noise_ratio < 0:
            raise ValueError("noise_ratio must be nonnegative")
        if not (self.omega1 > 0 and self.omega2 > 0):
            raise ValueError("true-system rates must be positive")
        if self.gram_normalization not in ("trace", "none"):
            raise ValueError("gram_normalization must be 'trace' or 'none'")
        if self.mkl_method not in ("newton", "gradient"):
            raise ValueError("mkl_method must be 'newton' or 'gradient'")
        if self.lambda_selection not in ("joint", "uniform"):
            raise ValueError("lambda_selection must be 'joint' or 'uniform'")

    @property
    def omegas(self) -> np.ndarray:
        if self.m == 1:
            return np.array([float(self.omega_min)])
        return np.logspace(np.log10(self.omega_min), np.log10(self.omega_max), self.m)

    @property
    def lambda_grid(self) -> np.ndarray:
        return default_lambda_grid(self.lambda_count, self.lambda_min, self.lambda_max)

    @property
    def quadrature(self) -> QuadratureConfig:
        return QuadratureConfig(panel_order=self.panel_order, entry_rel_tol=self.entry_rel_tol)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        raw = read_config(path)
        known = {f.name: f for f in fields(cls)}
        defaults = cls()
        kwargs = {}
        for key, (value, lineno) in raw.items():
            if key not in known:
                raise ParseError(f"unknown key {key!r}", path, lineno)
            default = getattr(defaults, key)
            try:
                kwargs[key] = _convert(value, default)
            except ValueError as exc:
                raise ParseError(f"bad value for {key}: {exc}", path, lineno) from None
        try:
            return cls(**kwargs)
        except ValueError as exc:
            raise ParseError(str(exc), path) from None

    def to_lines(self) -> list:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            text = ", ".join(map(_scalar_text, v)) if isinstance(v, tuple) else _scalar_text(v)
            out.append(f"{f.name} = {text}")
        return out


def _scalar_text(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, int):
        return str(v)
    return "%.17g" % v


def _convert(text: str, default):
    if isinstance(default, tuple):
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if not parts and default == ():
            return ()
        proto = default[0] if default else 0
        conv = tuple(_convert(p, proto) for p in parts)
        if len(default) == 2 and isinstance(default[0], float) and len(conv) != 2:
            raise ValueError(f"expected two numbers, got {text!r}")
        return conv
    if isinstance(default, str):
        return text.lower()
    if isinstance(default, bool):
        low = text.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if isinstance(default, int):
        return int(text)
    return float(text)


def dictionary_specs(config: ExperimentConfig, r: int) -> list:
    """Single-atom min-warped kernels ``(t1 t2)^{r-1} exp(-w max(t1, t2))``."""
    if r < 1:
        raise ValueError("r must be at least 1")
    return [warped_kernel(float(w), k=r - 1) for w in config.omegas]


def build_dictionary(config: ExperimentConfig, r: int, u, times) -> KernelDictionary:
    """Basis kernels and Grams; rescaled to unit mean Gram diagonal unless
    ``gram_normalization = none``."""
    d = KernelDictionary.build(dictionary_specs(config, r), u, times, config.quadrature)
    return d.normalized() if config.gram_normalization == "trace" else d


def fit_scores(h_star, y_star, truth, u, n_nodes: int = 2001, interval=(0.0, 1.0)):
    """``(fit_h, fit_y)`` by composite trapezoid on ``n_nodes`` points.

    ``truth`` is ``(omega1, omega2, amplitude)``; ``h_star`` and ``y_star``
    are vectorized callables.
    """
    if n_nodes < 3 or n_nodes % 2 == 0:
        raise ValueError("n_nodes must be odd and at least 3")
    w1, w2, A = truth
    t = np.linspace(interval[0], interval[1], n_nodes)
    h = true_impulse_response(t, w1, w2, A)
    y = convolve_true_response(u, w1, w2, A, t)
    hs = np.asarray(h_star(t), dtype=float)
    ys = np.asarray(y_star(t), dtype=float)
    span = t[-1] - t[0]
    ybar = trapezoid(y, t) / span
    den_h = trapezoid(h**2, t)
    den_y = trapezoid((y - ybar) ** 2, t)
    if not den_h > 0:
        raise UndefinedScoreError("true impulse response vanishes on the scoring interval")
    if not den_y > 0:
        raise UndefinedScoreError("true output is constant on the scoring interval")
    fit_h = 100.0 * (1.0 - np.sqrt(trapezoid((hs - h) ** 2, t) / den_h))
    fit_y = 100.0 * (1.0 - np.sqrt(trapezoid((ys - y) ** 2, t) / den_y))
    return float(fit_h), float(fit_y)


@dataclass(frozen=True)
class RunResult:
    run: int
    seed: int
    r: int
    fit_h: float
    fit_y: float
    lam: float
    n_active: int
    iterations: int
    objective: float
    weights: np.ndarray = field(repr=False, default=None)
    curves: dict = field(repr=False, default=None)


def _draw(config: ExperimentConfig, run: int):
    seed = config.base_seed + run
    s_input, s_times, s_noise = np.random.SeedSequence(seed).spawn(3)
    u = generate_binary_input(s_input, config.n_switch, config.switch_interval)
    lo, hi = config.sample_interval
    times = np.random.default_rng(s_times).uniform(lo, hi, config.n_samples)
    y0 = convolve_true_response(u, config.omega1, config.omega2, config.amplitude, times)
    y = add_noise(y0, config.noise_ratio, s_noise)
    return seed, u, times, y


def run_single(config: ExperimentConfig, run: int, keep_curves: bool = False) -> list:
    """All ``r`` branches of one run; raises on any numerical failure."""
    seed, u, times, y = _draw(config, run)
    truth = (config.omega1, config.omega2, config.amplitude)
    out = []
    for r in config.r_values:
        dictionary = build_dictionary(config, r, u, times)
        options = dict(tol=config.mkl_tol, max_iter=config.mkl_max_iter, method=config.mkl_method)
        if config.lambda_selection == "joint":
            _, mkl = select_lambda_mkl(dictionary, y, config.lambda_grid, **options)
        else:
            uniform = dictionary.grams.mean(axis=0)
            lam = select_lambda(uniform, y, config.lambda_grid).selected
            mkl = fit_mkl(dictionary, y, lam, **options)
        lam = mkl.lam
        model = IdentifiedModel(
            mkl.kernel(), u, times, mkl.c, lam, GramMatrix(mkl.gram(), times), config.quadrature
        )
        t = np.linspace(config.fit_interval[0], config.fit_interval[1], config.fit_nodes)
        hs = model.impulse_response(t)
        ys = model.predict(t)
        fit_h, fit_y = fit_scores(
            lambda s: hs, lambda s: ys, truth, u, config.fit_nodes, config.fit_interval
        )
        curves = None
        if keep_curves:
            curves = {
                "t": t,
                "h": true_impulse_response(t, *truth),
                "h_star": hs,
                "y": convolve_true_response(u, *truth, t),
                "y_star": ys,
                "samples": (times, y),
            }
        out.append(
            RunResult(
                run, seed, r, fit_h, fit_y, lam,
                len(active_atoms(mkl, config.active_threshold)),
                mkl.iterations, mkl.objective, mkl.d, curves,
            )
        )
    return out


def _quartiles(values) -> tuple:
    v = sorted(values)
    if len(v) == 1:
        return (v[0],) * 5
    q1, med, q3 = statistics.quantiles(v, n=4, method="inclusive")
    return v[0], q1, med, q3, v[-1]


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    results: list
    excluded: list = field(default_factory=list)

    def rows(self, r: int | None = None) -> list:
        return [x for x in self.results if r is None or x.r == r]

    def scores(self, r: int, name: str) -> np.ndarray:
        return np.array([getattr(x, name) for x in self.rows(r)])

    def summary(self) -> list:
        """``(r, score, min, q1, median, q3, max, n)`` rows, inclusive quartiles."""
        out = []
        for r in self.config.r_values:
            for name in ("fit_h", "fit_y"):
                vals = self.scores(r, name)
                if vals.size == 0:
                    continue
                out.append((r, name, *_quartiles(vals), int(vals.size)))
        return out

    def median(self, r: int, name: str) -> float:
        return float(statistics.median(self.scores(r, name)))


def run_experiment(config: ExperimentConfig, keep_curves: bool = False, progress=None) -> ExperimentReport:
    """Every run in order; failing runs are logged and excluded as a whole."""
    results, excluded = [], []
    for run in range(config.n_runs):
        try:
            rows = run_single(config, run, keep_curves and run in config.curve_runs)
        except NumericalError as exc:
            log.warning("run %d excluded: %s", run, exc)
            excluded.append((run, str(exc)))
            continue
        results.extend(rows)
        if progress is not None:
            progress(run, rows)
    return ExperimentReport(config, results, excluded)


def write_report(report: ExperimentReport, out_dir) -> list:
    """Write ``report.csv``, ``summary.csv``, weights and curve CSVs; return the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    p = out / "report.csv"
    write_table(
        p,
        ("run", "seed", "r", "fit_h", "fit_y", "lambda", "n_active", "iterations", "objective"),
        (
            (x.run, x.seed, x.r, x.fit_h, x.fit_y, x.lam, x.n_active, x.iterations, x.objective)
            for x in report.results
        ),
    )
    paths.append(p)
    p = out / "summary.csv"
    write_table(
        p,
        ("r", "score", "min", "q1", "median", "q3", "max", "n_runs", "n_excluded"),
        (row + (len(report.excluded),) for row in report.summary()),
    )
    paths.append(p)
    p = out / "weights.csv"
    omegas = report.config.omegas
    write_table(
        p,
        ("run", "r", "k", "omega", "d_k"),
        (
            (x.run, x.r, k, omegas[k], x.weights[k])
            for x in report.results
            for k in range(omegas.size)
        ),
    )
    paths.append(p)
    for x in report.results:
        if not x.curves:
            continue
        c = x.curves
        p = out / f"curve_h_run{x.run}_r{x.r}.csv"
        write_table(p, ("t", "h", "h_star"), zip(c["t"], c["h"], c["h_star"]))
        paths.append(p)
        p = out / f"curve_y_run{x.run}_r{x.r}.csv"
        write_table(p, ("t", "y", "y_star"), zip(c["t"], c["y"], c["y_star"]))
        paths.append(p)
        p = out / f"samples_run{x.run}.csv"
        if p not in paths:
            write_table(p, ("t", "y"), zip(*c["samples"]))
            paths.append(p)
    if report.excluded:
        p = out / "excluded.csv"
        write_table(p, ("run", "reason"), ((run, msg.replace(",", ";")) for run, msg in report.excluded))
        paths.append(p)
    return paths
