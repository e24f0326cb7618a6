"""Numerical evidence for kernel stability, relative degree and smoothness.

A kernel is stable when its RKHS sits inside L1. Integrability of ``|K|``
on the quadrant is sufficient, and ``int |int K(t1, t2) h(t1) dt1| dt2 <
inf`` for every bounded ``h`` is necessary. Neither can be decided from
finitely many numbers, so :func:`stability_trend` looks at how truncated
integrals behave on a sequence of growing horizons and reports ``bounded``,
``diverging`` or ``inconclusive``.

Every function accepts a :class:`KernelSpec` or any vectorized callable
``K(t1, t2)`` that vanishes for negative arguments.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy import integrate
from scipy.optimize import brentq

from .errors import QuadratureError
from .gram import DEFAULT_QUADRATURE, QuadratureConfig, _gauss_legendre, _rate_scale
from .kernels import TRANSLATION, KernelSpec, integrate_exponential_kernel_once

__all__ = [
    "VerdictRule",
    "StabilityReport",
    "DegreeProbe",
    "SmoothnessProbe",
    "l1_norm_estimate",
    "l1_norm_curve",
    "lemma2_integral",
    "stability_trend",
    "counterexample_kernel",
    "counterexample_lemma2_integral",
    "counterexample_lemma2_closed_form",
    "integrated_exponential_kernel",
    "relative_degree_probe",
    "smoothness_probe",
]

BOUNDED = "bounded"
DIVERGING = "diverging"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class VerdictRule:
    """Thresholds of the stability trend heuristic.

    bounded: the last l1 increment is below ``bounded_rel_increment`` times
    the running value, or the increments shrink geometrically with the last
    ratio ``inc[-1] / inc[-2]`` at most ``bounded_increment_ratio``.
    diverging: the increments never shrink and the value grew by more than
    ``diverging_growth`` over the last horizon step.
    """

    bounded_rel_increment: float = 1e-6
    bounded_increment_ratio: float = 0.05
    diverging_growth: float = 0.10


DEFAULT_RULE = VerdictRule()


@dataclass(frozen=True)
class StabilityReport:
    horizons: np.ndarray
    l1_values: np.ndarray
    lemma2_values: np.ndarray
    verdict: str
    probe_values: dict = field(default_factory=dict)

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.l1_values)


@dataclass(frozen=True)
class DegreeProbe:
    t: float
    derivative_estimates: np.ndarray
    estimated_degree: int | None
    threshold: float = 1e-3
    h_step: float = 1e-4


@dataclass(frozen=True)
class SmoothnessProbe:
    """One-sided derivative estimates of a kernel section at ``tau``.

    ``left`` and ``right`` hold the estimates on step sizes ``h`` and
    ``h / 2``. The section looks ``order`` times differentiable at ``tau``
    when all four agree to ``rel_tol``.
    """

    tau: float
    order: int
    left: tuple
    right: tuple
    rel_tol: float = 1e-3

    @property
    def estimates(self) -> list:
        return [*self.left, *self.right]

    @property
    def differentiable(self) -> bool:
        est = np.array(self.estimates)
        scale = max(np.max(np.abs(est)), 1e-12)
        return bool(np.max(est) - np.min(est) <= self.rel_tol * scale)


class _Callable:
    """A named kernel callable, so reports can print something useful."""

    def __init__(self, func, name):
        self.func = func
        self.name = name

    def __call__(self, t1, t2):
        return self.func(t1, t2)

    def __repr__(self):
        return self.name


def counterexample_kernel():
    """``H(t1) H(t2) / (1 + (t1 + t2)^2)``: integrable on each line, not stable."""

    def k(t1, t2):
        t1 = np.asarray(t1, dtype=float)
        t2 = np.asarray(t2, dtype=float)
        causal = (t1 >= 0) & (t2 >= 0)
        return np.where(causal, 1.0 / (1.0 + (t1 + t2) ** 2), 0.0)

    return _Callable(k, "1/(1+(t1+t2)^2)")


def integrated_exponential_kernel(omega: float = 1.0):
    """The exponential kernel after one integrate-twice step."""
    return _Callable(
        lambda a, b: integrate_exponential_kernel_once(omega, a, b),
        f"integrated-exponential(omega={omega:g})",
    )


def _delay(kernel) -> float:
    return float(kernel.delay) if isinstance(kernel, KernelSpec) else 0.0


def _lag_zeros(kernel, upper: float) -> np.ndarray:
    """Lags in ``(0, upper)`` where a cosine translation kernel changes sign."""
    if not (isinstance(kernel, KernelSpec) and kernel.family == TRANSLATION):
        return np.zeros(0)
    if kernel.ti_shape != "cosine":
        return np.zeros(0)
    atoms = [(m, w) for m, w in kernel.atoms if m > 0]
    wmax = max(w for _, w in atoms)
    if wmax == 0:
        return np.zeros(0)

    def f(v):
        return sum(m * np.cos(w * v) for m, w in atoms)

    if len(atoms) == 1:
        w = atoms[0][1]
        n = np.arange(int(upper * w / np.pi) + 2)
        z = (np.pi / 2 + n * np.pi) / w
        return z[z < upper]
    grid = np.linspace(0.0, upper, int(np.ceil(upper * wmax * 20)) + 2)
    vals = f(grid)
    out = []
    for i in np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0):
        out.append(brentq(f, grid[i], grid[i + 1], xtol=1e-15))
    out.extend(grid[1:-1][vals[1:-1] == 0])
    return np.sort(np.array(out))


def _edges(lo, hi, breaks, cap):
    pts = np.asarray(breaks, dtype=float)
    pts = pts[(pts > lo) & (pts < hi)]
    e = np.unique(np.concatenate(([lo], pts, [hi])))
    out = [e[:1]]
    for a, b in zip(e[:-1], e[1:]):
        n = max(1, int(np.ceil((b - a) / cap)))
        out.append(np.linspace(a, b, n + 1)[1:])
    return np.concatenate(out)


def _refine(estimate, q: QuadratureConfig, what: str):
    prev = estimate(0)
    for level in range(1, q.max_refinements + 1):
        cur = estimate(level)
        err = np.abs(cur - prev)
        scale = np.max(np.abs(cur)) if cur.size else 0.0
        allowed = q.entry_rel_tol * (np.abs(cur) + q.abs_floor_ratio * scale)
        if np.all(err <= allowed):
            return cur
        prev = cur
    raise QuadratureError(
        f"{what} did not reach relative accuracy {q.entry_rel_tol:g} "
        f"after {q.max_refinements} refinements (change {np.max(err):.3g})"
    )


def _subdivide(edges, level):
    for _ in range(level):
        mid = 0.5 * (edges[:-1] + edges[1:])
        e = np.empty(edges.size + mid.size)
        e[0::2], e[1::2] = edges, mid
        edges = e
    return edges


def l1_norm_curve(kernel, horizons, q: QuadratureConfig = DEFAULT_QUADRATURE) -> np.ndarray:
    """``int int_{[0,T]^2} |K|`` for every ``T`` in ``horizons``.

    Symmetry gives ``2 int_0^T ds1 int_0^{s1} |K(s1, s2)| ds2``. The inner
    integral runs over the lag ``v = s1 - s2`` with panels cut at the sign
    changes of translation kernels; the outer one is accumulated over panels
    that end on every horizon, so the curve is nondecreasing by construction.
    """
    T = np.atleast_1d(np.asarray(horizons, dtype=float))
    if np.any(T <= 0):
        raise ValueError("horizons must be positive")
    order = np.argsort(T)
    Tmax = float(T[order[-1]])
    D = _delay(kernel)
    out = np.zeros(T.size)
    if Tmax <= D:
        return out
    cap = min(q.max_panel_length, _rate_scale(kernel))
    zeros = _lag_zeros(kernel, Tmax - D)
    outer0 = _edges(D, Tmax, np.concatenate([T, D + zeros]), cap)
    inner0 = _edges(0.0, Tmax - D, zeros, cap)
    xg, wg = _gauss_legendre(q.panel_order)

    def estimate(level):
        oe = _subdivide(outer0, level)
        ie = _subdivide(inner0, level)
        mid, half = 0.5 * (oe[:-1] + oe[1:]), 0.5 * np.diff(oe)
        x = (mid[:, None] + half[:, None] * xg).ravel()
        wo = (half[:, None] * wg).ravel()
        g = np.empty(x.size)
        step = max(1, (1 << 20) // (ie.size * q.panel_order))
        for c0 in range(0, x.size, step):
            xc = x[c0:c0 + step, None]
            lo = np.minimum(ie[:-1][None, :], xc - D)
            hi = np.minimum(ie[1:][None, :], xc - D)
            m, h = 0.5 * (lo + hi), 0.5 * (hi - lo)
            v = m[..., None] + h[..., None] * xg
            kv = np.abs(kernel(xc[..., None], xc[..., None] - v))
            g[c0:c0 + step] = np.sum(kv * (h[..., None] * wg), axis=(1, 2))
        cum = np.concatenate(([0.0], np.cumsum((g * wo).reshape(-1, q.panel_order).sum(axis=1))))
        idx = np.searchsorted(oe, np.maximum(T, D))
        idx = np.minimum(idx, oe.size - 1)
        return 2.0 * cum[idx]

    return _refine(estimate, q, "l1 quadrature")


def l1_norm_estimate(kernel, T: float, q: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Panelized quadrature of ``|K|`` over ``[0, T]^2``."""
    if not T > 0:
        raise ValueError("T must be positive")
    return float(l1_norm_curve(kernel, [T], q)[0])


def _probe_inner(kernel, probe, edges, x, n):
    """``g(x) = int K(t1, x) h(t1) dt1`` over ``edges``, panels split at ``t1 = x``."""
    xg, wg = _gauss_legendre(n)
    x = np.asarray(x, dtype=float).reshape(-1)
    g = np.empty(x.size)
    step = max(1, (1 << 20) // (2 * edges.size * n))
    a, b = edges[:-1][None, :, None], edges[1:][None, :, None]
    for c0 in range(0, x.size, step):
        xc = x[c0:c0 + step, None, None]
        c = np.clip(xc, a, b)
        lo = np.concatenate([np.broadcast_to(a, c.shape), c], axis=2)
        hi = np.concatenate([c, np.broadcast_to(b, c.shape)], axis=2)
        m, h = 0.5 * (lo + hi), 0.5 * (hi - lo)
        t1 = m[..., None] + h[..., None] * xg
        kv = kernel(t1, xc[..., None]) * probe(t1)
        g[c0:c0 + step] = np.sum(kv * (h[..., None] * wg), axis=(1, 2, 3))
    return g


def lemma2_integral(kernel, T: float, probe=None, q: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """``int_0^T |int_0^T K(t1, t2) h(t1) dt1| dt2`` for a probe ``h`` (default 1).

    Sign changes of the inner integral are located first and used as outer
    panel edges, so the absolute value does not spoil convergence.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    D = _delay(kernel)
    if T <= D:
        return 0.0
    probe = (lambda t: np.ones_like(t)) if probe is None else probe
    cap = min(q.max_panel_length, _rate_scale(kernel))
    n = q.panel_order
    xg, wg = _gauss_legendre(n)
    inner_edges = _subdivide(_edges(D, T, [], cap), 1)
    scan = np.linspace(D, T, 16 * inner_edges.size + 1)
    gs = _probe_inner(kernel, probe, inner_edges, scan, n)
    roots = [
        brentq(lambda v: _probe_inner(kernel, probe, inner_edges, [v], n)[0], scan[i], scan[i + 1], xtol=1e-14)
        for i in np.flatnonzero(gs[:-1] * gs[1:] < 0)
    ]
    base = _edges(D, T, roots, cap)

    def estimate(level):
        e = _subdivide(base, level)
        mid, half = 0.5 * (e[:-1] + e[1:]), 0.5 * np.diff(e)
        x = (mid[:, None] + half[:, None] * xg).ravel()
        wo = (half[:, None] * wg).ravel()
        g = _probe_inner(kernel, probe, _subdivide(inner_edges, level), x, n)
        return np.array([np.sum(np.abs(g) * wo)])

    return float(_refine(estimate, q, "probe quadrature")[0])


def _verdict(values: np.ndarray, rule: VerdictRule) -> str:
    inc = np.diff(values)
    last = values[-1]
    if last == 0 or inc[-1] <= rule.bounded_rel_increment * last:
        return BOUNDED
    if inc[-2] > 0 and inc[-1] <= rule.bounded_increment_ratio * inc[-2]:
        return BOUNDED
    growing = np.all(np.diff(inc) >= 0) and np.all(inc > 0)
    if growing and inc[-1] > rule.diverging_growth * values[-2]:
        return DIVERGING
    return INCONCLUSIVE


def stability_trend(
    kernel,
    horizons=(5.0, 10.0, 20.0, 40.0),
    q: QuadratureConfig = DEFAULT_QUADRATURE,
    rule: VerdictRule = DEFAULT_RULE,
    probes=None,
) -> StabilityReport:
    """Truncated l1 and probe integrals on growing horizons plus a verdict.

    ``probes`` maps names to extra probe functions ``h``; translation
    kernels get ``cos(omega t)`` automatically. The verdict is evidence
    computed from the l1 curve, not a proof.
    """
    T = np.asarray(horizons, dtype=float).reshape(-1)
    if T.size < 3:
        raise ValueError("need at least three horizons")
    if np.any(T <= 0) or np.any(np.diff(T) <= 0):
        raise ValueError("horizons must be positive and strictly increasing")
    l1 = l1_norm_curve(kernel, T, q)
    lemma2 = np.array([lemma2_integral(kernel, t, None, q) for t in T])
    probes = dict(probes or {})
    if isinstance(kernel, KernelSpec) and kernel.family == TRANSLATION:
        w = max(w for m, w in kernel.atoms if m > 0)
        probes.setdefault("cos", lambda t, w=w: np.cos(w * t))
    extra = {
        name: np.array([lemma2_integral(kernel, t, h, q) for t in T]) for name, h in probes.items()
    }
    return StabilityReport(T, l1, lemma2, _verdict(l1, rule), extra)


def counterexample_lemma2_integral(T: float) -> float:
    """``int_0^T (pi/2 - arctan t2) dt2`` by adaptive quadrature.

    The integrand is ``int_0^inf K(t1, t2) dt1`` for the counterexample
    kernel, so the value grows like ``log T``.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    val, _ = integrate.quad(
        lambda s: np.arctan2(1.0, s), 0.0, T, epsabs=0.0, epsrel=1e-13, limit=500
    )
    return float(val)


def counterexample_lemma2_closed_form(T: float) -> float:
    return float(T * np.arctan2(1.0, T) + 0.5 * np.log1p(T * T))


def _section(kernel, t):
    D = _delay(kernel)
    return lambda tau: np.asarray(kernel(D + np.asarray(tau, dtype=float), t), dtype=float)


def relative_degree_probe(
    kernel, t: float, max_order: int = 4, h_step: float = 1e-4, threshold: float = 1e-3
) -> DegreeProbe:
    """Forward-difference derivatives of ``tau -> K(tau, t)`` at ``0+``.

    The estimated degree is one plus the first order whose estimate exceeds
    ``threshold`` in magnitude; ``None`` if no order up to ``max_order`` does.
    For delayed kernels the section starts at the delay.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if not 0 <= max_order <= 4:
        raise ValueError("max_order must be between 0 and 4")
    if not (h_step > 0 and t - max_order * h_step > 0):
        raise ValueError("h_step too large for this section time")
    f = _section(kernel, t)(np.arange(max_order + 1) * h_step)
    est = np.array(
        [
            sum((-1) ** (i - j) * comb(i, j) * f[j] for j in range(i + 1)) / h_step**i
            for i in range(max_order + 1)
        ]
    )
    above = np.flatnonzero(np.abs(est) > threshold)
    degree = int(above[0]) + 1 if above.size else None
    return DegreeProbe(float(t), est, degree, threshold, h_step)


def _one_sided_weights(order: int) -> np.ndarray:
    # nodes 0, 1, ..., order + 1: second-order accurate derivative of given order
    n = order + 2
    j = np.arange(n, dtype=float)
    A = np.vander(j, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[order] = float(np.prod(np.arange(1, order + 1)))
    return np.linalg.solve(A, rhs)


def smoothness_probe(
    kernel, t: float, order: int, h_step: float = 1e-3, tau: float | None = None
) -> SmoothnessProbe:
    """Left and right derivative estimates of ``K(., t)`` at ``tau`` (default ``t``).

    Each side uses a second-order one-sided stencil on steps ``h`` and
    ``h / 2``. At a point where the section is ``order`` times
    differentiable the four numbers agree; at a kink the two sides split.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if not 1 <= order <= 3:
        raise ValueError("order must be 1, 2 or 3")
    tau = float(t if tau is None else tau)
    if not tau - (order + 1) * h_step > _delay(kernel):
        raise ValueError("tau too close to the start of the section for this step")
    f = lambda s: np.asarray(kernel(s, t), dtype=float)
    w = _one_sided_weights(order)
    j = np.arange(w.size)

    def side(sign):
        return tuple(
            float(sign**order * np.dot(w, f(tau + sign * j * h)) / h**order)
            for h in (h_step, h_step / 2)
        )

    return SmoothnessProbe(tau, order, side(-1), side(1))
