"""Input signals, sampled datasets and the synthetic bimodal test system.

Continuous-time inputs are piecewise constant: a sorted list of breakpoints
with the level held on ``[breakpoints[k], breakpoints[k+1])``. Before the
first breakpoint the signal is zero (system at rest), after the last one it
keeps the last level forever.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammainc, gammaincc

__all__ = [
    "TimeDomain",
    "PiecewiseConstantSignal",
    "FunctionSignal",
    "DiscreteSignal",
    "Dataset",
    "eval_signal",
    "generate_binary_input",
    "true_impulse_response",
    "convolve_true_response",
    "add_noise",
]


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeDomain:
    """Continuous time (the real line) or a uniform discrete grid."""

    kind: str = "continuous"
    step: float = 1.0

    def __post_init__(self):
        if self.kind not in ("continuous", "discrete"):
            raise ValueError(f"unknown time domain kind {self.kind!r}")
        if self.kind == "discrete" and not self.step > 0:
            raise ValueError("discrete time step must be positive")


@dataclass(frozen=True, eq=False)
class PiecewiseConstantSignal:
    breakpoints: np.ndarray
    levels: np.ndarray

    def __post_init__(self):
        bp = _frozen_array(self.breakpoints)
        lv = _frozen_array(self.levels)
        if bp.size == 0:
            raise ValueError("a signal needs at least one breakpoint")
        if bp.size != lv.size:
            raise ValueError(
                f"{bp.size} breakpoints but {lv.size} levels; they must match"
            )
        if not (np.all(np.isfinite(bp)) and np.all(np.isfinite(lv))):
            raise ValueError("breakpoints and levels must be finite")
        if np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "levels", lv)

    @classmethod
    def zero(cls) -> "PiecewiseConstantSignal":
        return cls([0.0], [0.0])

    @classmethod
    def step(cls, at: float = 0.0, level: float = 1.0) -> "PiecewiseConstantSignal":
        return cls([at], [level])

    @property
    def start(self) -> float:
        return float(self.breakpoints[0])

    def segments(self):
        """Yield ``(lo, hi, level)`` triples; the last one has ``hi = inf``."""
        his = np.append(self.breakpoints[1:], np.inf)
        return zip(self.breakpoints, his, self.levels)

    def __call__(self, t):
        return eval_signal(self, t)

    def __add__(self, other: "PiecewiseConstantSignal") -> "PiecewiseConstantSignal":
        bp = np.union1d(self.breakpoints, other.breakpoints)
        return PiecewiseConstantSignal(bp, self(bp) + other(bp))

    def __eq__(self, other):
        if not isinstance(other, PiecewiseConstantSignal):
            return NotImplemented
        return np.array_equal(self.breakpoints, other.breakpoints) and np.array_equal(
            self.levels, other.levels
        )

    def __hash__(self):
        return hash((self.breakpoints.tobytes(), self.levels.tobytes()))


@dataclass(frozen=True, eq=False)
class FunctionSignal:
    """Any vectorized input ``func(t)`` that vanishes before ``start``.

    ``breakpoints`` lists the places where ``func`` is not smooth; they are
    used as panel boundaries by the quadrature path of the Gram module.
    """

    func: Callable[[np.ndarray], np.ndarray]
    start: float
    breakpoints: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        bp = np.union1d(_frozen_array(self.breakpoints), [self.start])
        bp.setflags(write=False)
        object.__setattr__(self, "breakpoints", bp)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t >= self.start, self.func(t), 0.0)


@dataclass(frozen=True, eq=False)
class DiscreteSignal:
    """Samples ``values[n]`` at integer times ``start_index + n``, zero elsewhere."""

    start_index: int
    values: np.ndarray

    def __post_init__(self):
        v = _frozen_array(self.values)
        if not np.all(np.isfinite(v)):
            raise ValueError("discrete signal values must be finite")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "start_index", int(self.start_index))

    @property
    def stop_index(self) -> int:
        return self.start_index + self.values.size

    def __call__(self, n):
        n = np.asarray(n)
        idx = n - self.start_index
        inside = (idx >= 0) & (idx < self.values.size)
        out = np.zeros(n.shape)
        out[inside] = self.values[idx[inside].astype(int)]
        return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Output measurements ``(t_i, y_i)``, i = 1..ell."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = _frozen_array(self.times)
        y = _frozen_array(self.values)
        if t.size < 1:
            raise ValueError("a dataset needs at least one sample")
        if t.size != y.size:
            raise ValueError(f"{t.size} sample times but {y.size} measurements")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
            raise ValueError("dataset values must be finite")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", y)

    def __len__(self):
        return self.times.size


def eval_signal(u: PiecewiseConstantSignal, t):
    """Value of ``u`` at ``t`` (scalar or array), right-continuous at breakpoints."""
    t = np.asarray(t, dtype=float)
    idx = np.searchsorted(u.breakpoints, t, side="right") - 1
    out = np.where(idx >= 0, u.levels[np.clip(idx, 0, None)], 0.0)
    return out if out.ndim else float(out)


def generate_binary_input(
    seed, n_switch: int = 10, interval: tuple[float, float] = (0.0, 1.0)
) -> PiecewiseConstantSignal:
    """Random binary excitation with ``n_switch`` uniformly drawn switching times.

    The level is 1 from the earliest switching instant, then alternates
    0, 1, 0, ... ``seed`` is anything ``numpy.random.default_rng`` accepts
    (an int or a ``SeedSequence``); the bit generator is PCG64.
    """
    lo, hi = map(float, interval)
    if not hi > lo:
        raise ValueError(f"empty switching interval {interval}")
    if n_switch < 1:
        raise ValueError("need at least one switching instant")
    rng = np.random.default_rng(seed)
    instants = np.sort(rng.uniform(lo, hi, size=n_switch))
    # Ties have probability zero but would break strict monotonicity.
    if np.any(np.diff(instants) <= 0):
        instants = np.unique(instants)
    levels = (np.arange(instants.size) % 2 == 0).astype(float)
    return PiecewiseConstantSignal(instants, levels)


def true_impulse_response(t, omega1: float, omega2: float, amplitude: float):
    """h(t) = H(t) t (exp(-omega1 t) + A exp(-omega2 t))."""
    t = np.asarray(t, dtype=float)
    tp = np.maximum(t, 0.0)
    h = np.where(
        t >= 0, tp * (np.exp(-omega1 * tp) + amplitude * np.exp(-omega2 * tp)), 0.0
    )
    return h if h.ndim else float(h)


def _ramp_exp_integral(omega: float, lo, hi):
    # int_lo^hi s exp(-omega s) ds via the regularized incomplete gamma P(2, .);
    # the complementary form avoids cancellation far out in the tail
    x_lo, x_hi = omega * lo, omega * hi
    far = x_lo > 1.0
    diff = np.where(
        far,
        gammaincc(2.0, x_lo) - gammaincc(2.0, x_hi),
        gammainc(2.0, x_hi) - gammainc(2.0, x_lo),
    )
    return diff / omega**2


def convolve_true_response(
    u: PiecewiseConstantSignal, omega1: float, omega2: float, amplitude: float, t
):
    """Exact ``(u * h)(t)`` for the bimodal relative-degree-two system."""
    if not (omega1 > 0 and omega2 > 0):
        raise ValueError("decay rates must be positive")
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape)
    for lo, hi, level in u.segments():
        if level == 0.0:
            continue
        # u(t - tau) = level for tau in (t - hi, t - lo], clipped to tau >= 0
        tau_hi = np.maximum(t - lo, 0.0)
        tau_lo = np.clip(t - hi, 0.0, None) if np.isfinite(hi) else np.zeros(t.shape)
        tau_lo = np.minimum(tau_lo, tau_hi)
        for omega, weight in ((omega1, 1.0), (omega2, amplitude)):
            out += level * weight * _ramp_exp_integral(omega, tau_lo, tau_hi)
    return out if out.ndim else float(out)


def add_noise(y0: Sequence[float], sigma_ratio: float, seed) -> np.ndarray:
    """Add iid Gaussian noise with std ``sigma_ratio * std(y0)`` (population std)."""
    y0 = np.asarray(y0, dtype=float)
    if y0.size == 0:
        raise ValueError("y0 must be nonempty")
    sigma = sigma_ratio * np.std(y0)
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal(y0.shape)
    if sigma == 0:
        return y0.copy()
    return y0 + sigma * eps
