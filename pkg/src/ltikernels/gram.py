"""Representers and doubly-convolved Gram matrices.

For an input ``u`` and sample times ``t_i`` the Gram entries are

    K_ij = int int u(t_i - s1) u(t_j - s2) K(s1, s2) ds1 ds2

and the representer of the i-th measurement, evaluated at ``t``, is
``int u(t_i - s) K(s, t) ds``. Causality of ``K`` and the zero past of ``u``
make every integration range compact.

Evaluation routes, chosen per kernel family and input type:

* exponential / Heaviside mixtures with piecewise-constant input: exact,
  the entry separates into ``sum_j mass_j a_i(w_j) a_j(w_j)``;
* ``min``-warped kernels with piecewise-constant input: exact. The square is
  split along the diagonal, the inner factor is a piecewise polynomial and the
  outer integral reduces to incomplete-gamma moments per panel;
* cubic-spline-warped kernels: the same diagonal split with a closed-form
  inner factor, outer Gauss-Legendre panels with refinement;
* everything else (translation-invariant kernels, arbitrary callables,
  non piecewise-constant inputs): nested panel quadrature with the inner
  panels split at the diagonal crease.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb, factorial

import numpy as np
from scipy.special import gammainc

from .errors import QuadratureError
from .kernels import EXPONENTIAL, HEAVISIDE, TRANSLATION, WARPED, KernelSpec
from .signals import DiscreteSignal, PiecewiseConstantSignal

__all__ = [
    "QuadratureConfig",
    "GramMatrix",
    "representer_value",
    "representer_matrix",
    "gram_entry",
    "cross_gram",
    "assemble_gram",
    "gram_discrete",
    "warped_min_dictionary",
]

log = logging.getLogger(__name__)

_CHUNK = 256
# float64 elements allowed in one batch of quadrature nodes
_BUDGET = 1 << 21


@dataclass(frozen=True)
class QuadratureConfig:
    """Panel quadrature settings.

    ``abs_floor_ratio`` sets the absolute accuracy demanded from entries that
    are tiny compared with the largest entry: an entry is accepted when two
    successive refinements differ by at most
    ``entry_rel_tol * (|K_ij| + abs_floor_ratio * max|K|)``.
    ``horizon`` is only used by the diagnostics' truncated L1 integrals.
    """

    panel_order: int = 8
    entry_rel_tol: float = 1e-8
    horizon: float | None = None
    max_panel_length: float = 0.5
    max_refinements: int = 4
    abs_floor_ratio: float = 1e-8

    def __post_init__(self):
        if self.panel_order < 2:
            raise ValueError("panel_order must be at least 2")
        if not self.entry_rel_tol > 0:
            raise ValueError("entry_rel_tol must be positive")
        if not self.max_panel_length > 0:
            raise ValueError("max_panel_length must be positive")
        if self.max_refinements < 1:
            # acceptance compares two successive refinements
            raise ValueError("max_refinements must be at least 1")
        if self.horizon is not None and not self.horizon > 0:
            raise ValueError("horizon must be positive")


DEFAULT_QUADRATURE = QuadratureConfig()


@dataclass(frozen=True, eq=False)
class GramMatrix:
    entries: np.ndarray
    times: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        K = np.array(self.entries, dtype=float)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise ValueError(f"Gram matrix must be square, got shape {K.shape}")
        K.setflags(write=False)
        t = np.array(self.times, dtype=float).reshape(-1)
        t.setflags(write=False)
        object.__setattr__(self, "entries", K)
        object.__setattr__(self, "times", t)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def is_psd(self, rel_tol: float = 1e-8) -> bool:
        ev = self.eigenvalues()
        return bool(ev[0] >= -rel_tol * max(ev[-1], 0.0))


# -- one-dimensional building blocks -------------------------------------------


@lru_cache(maxsize=None)
def _gauss_legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _panel_rule(lo, hi, n):
    """Gauss-Legendre nodes/weights on panels ``[lo, hi]`` (any leading shape)."""
    xi, wi = _gauss_legendre(n)
    lo = np.asarray(lo, dtype=float)[..., None]
    hi = np.asarray(hi, dtype=float)[..., None]
    half = 0.5 * (hi - lo)
    return lo + half * (xi + 1.0), half * wi


def _cap_edges(edges: np.ndarray, cap: float) -> np.ndarray:
    lengths = np.diff(edges)
    pieces = np.maximum(np.ceil(lengths / cap).astype(int), 1)
    if np.all(pieces == 1):
        return edges
    out = [edges[:1]]
    for a, b, m in zip(edges[:-1], edges[1:], pieces):
        out.append(np.linspace(a, b, m + 1)[1:])
    return np.concatenate(out)


def _bisect_edges(edges: np.ndarray) -> np.ndarray:
    mids = 0.5 * (edges[:-1] + edges[1:])
    out = np.empty(edges.size + mids.size)
    out[0::2] = edges
    out[1::2] = mids
    return out


def _clean_edges(points, lo: float, hi: float) -> np.ndarray:
    p = np.asarray(points, dtype=float).reshape(-1)
    p = p[(p > lo) & (p < hi)]
    return np.unique(np.concatenate(([lo], p, [hi])))


def _power_exp_integral(r: int, L, rate):
    """``int_0^L s^r exp(-rate s) ds`` for ``L >= 0``, ``rate >= 0``."""
    L = np.asarray(L, dtype=float)
    rate = np.asarray(rate, dtype=float)
    if rate.ndim == 0 and rate == 0.0:
        return L ** (r + 1) / (r + 1)
    L, rate = np.broadcast_arrays(L, rate)
    x = rate * L
    out = np.empty(x.shape)
    small = x < 1e-3
    if np.any(small):
        # short-interval / slow-rate series: L^{r+1} sum_j (-x)^j / (j! (r+1+j))
        xs = x[small]
        series = np.zeros(xs.shape)
        term = np.ones(xs.shape)
        for j in range(7):
            series += term / (r + 1 + j)
            term *= -xs / (j + 1)
        out[small] = series * L[small] ** (r + 1)
    big = ~small
    if np.any(big):
        rb = rate[big]
        out[big] = factorial(r) / rb ** (r + 1) * gammainc(r + 1, x[big])
    return out


def _shifted_moment(coeffs, a, L, rate):
    """``exp(-rate a) int_0^L sum_r coeffs[r] s^r exp(-rate s) ds``."""
    total = 0.0
    for r, c in enumerate(coeffs):
        if np.all(np.asarray(c) == 0):
            continue
        total = total + c * _power_exp_integral(r, L, rate)
    return np.exp(-np.asarray(rate) * a) * total


def _moment(n: int, a, b, rate):
    """``int_a^b s^n exp(-rate s) ds`` for ``0 <= a <= b``.

    Expanding ``(a + s)^n`` keeps every term nonnegative, so the result is
    accurate to a few ulps even on short panels far from the origin.
    """
    a = np.asarray(a, dtype=float)
    L = np.maximum(np.asarray(b, dtype=float) - a, 0.0)
    coeffs = [comb(n, r) * a ** (n - r) for r in range(n + 1)]
    return _shifted_moment(coeffs, a, L, rate)


def _input_moment(u: PiecewiseConstantSignal, ts, lo, hi, power: int, rate):
    """``int_{lo}^{hi} u(ts - s) s^power exp(-rate s) ds`` over ``s >= 0``.

    ``ts`` has shape ``(S,)``; ``lo``/``hi`` broadcast against ``(S, 1)``.
    """
    ts = np.asarray(ts, dtype=float).reshape(-1, 1)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    shape = np.broadcast(ts, lo, hi).shape
    out = np.zeros(shape)
    for b_lo, b_hi, level in u.segments():
        if level == 0.0:
            continue
        s_lo = np.maximum(np.maximum(lo, ts - b_hi), 0.0)
        s_hi = np.minimum(hi, ts - b_lo)
        active = s_hi > s_lo
        if not np.any(active):
            continue
        s_hi = np.where(active, s_hi, s_lo)
        out = out + level * _moment(power, s_lo, s_hi, rate)
    return out


def _is_pc(u) -> bool:
    return isinstance(u, PiecewiseConstantSignal)


def _signal_start(u) -> float:
    return float(u.breakpoints[0]) if _is_pc(u) else float(u.start)


def _rate_scale(kernel) -> float:
    """A length below which the kernel is well resolved by one panel."""
    if not isinstance(kernel, KernelSpec):
        return np.inf
    w = kernel.omegas[kernel.masses > 0]
    if w.size == 0 or np.max(w) == 0:
        return np.inf
    wmax = float(np.max(w))
    if kernel.family == TRANSLATION:
        if kernel.ti_shape == "gaussian":
            return 1.0 / np.sqrt(wmax)
        return 1.0 / wmax
    if kernel.family == WARPED and kernel.shape == "cubicspline":
        return 2.0 / (3.0 * wmax)
    return 2.0 / wmax


def _delay(kernel) -> float:
    return float(getattr(kernel, "delay", 0.0))


# -- representers --------------------------------------------------------------


def _representer_closed(spec: KernelSpec, u, ts, tq):
    """Closed-form representers for exponential/Heaviside/warped families."""
    ts = np.asarray(ts, dtype=float) - spec.delay
    tq = np.asarray(tq, dtype=float) - spec.delay
    causal = tq >= 0
    x = np.where(causal, tq, 0.0)[None, :]
    R = np.zeros((ts.size, tq.size))
    k = spec.k
    for mass, omega in spec.atoms:
        if mass == 0:
            continue
        if spec.family == HEAVISIDE:
            R += mass * _input_moment(u, ts, 0.0, np.inf, 0, 0.0)
        elif spec.family == EXPONENTIAL:
            R += mass * _input_moment(u, ts, 0.0, np.inf, 0, omega) * np.exp(-omega * x)
        elif spec.shape == "min":
            below = np.exp(-omega * x) * _input_moment(u, ts, 0.0, x, k, 0.0)
            above = _input_moment(u, ts, x, np.inf, k, omega)
            R += mass * x**k * (below + above)
        else:
            below = np.exp(-2 * omega * x) / 2 * _input_moment(u, ts, 0.0, x, k, omega)
            below -= np.exp(-3 * omega * x) / 6 * _input_moment(u, ts, 0.0, x, k, 0.0)
            above = np.exp(-omega * x) / 2 * _input_moment(u, ts, x, np.inf, k, 2 * omega)
            above -= _input_moment(u, ts, x, np.inf, k, 3 * omega) / 6
            R += mass * x**k * (below + above)
    return np.where(causal[None, :], R, 0.0)


def _split_panels(edges, x):
    """Split every panel of ``edges`` at each point of ``x``.

    Returns ``lo, hi`` with shape ``(X, P, 2)``; each panel contributes the
    pieces left and right of ``x`` (one of them may be empty).
    """
    a = edges[:-1][None, :]
    b = edges[1:][None, :]
    c = np.clip(np.asarray(x, dtype=float)[:, None], a, b)
    lo = np.stack(np.broadcast_arrays(a, c), axis=-1)
    hi = np.stack(np.broadcast_arrays(c, b), axis=-1)
    return lo, hi


def _inner_integral(kernel, u, ts, edges, x, n: int) -> np.ndarray:
    """``out[s, j] = int u(ts[s] - v) K(v, x[j]) dv`` over ``[edges[0], edges[-1]]``.

    Every panel is split at ``x[j]`` so the crease of the kernel falls on a
    panel boundary. For piecewise-constant inputs the edges contain all
    shifted breakpoints, so ``u(ts - v)`` is constant per panel and only the
    kernel has to be integrated node by node.
    """
    pc = _is_pc(u)
    P = edges.size - 1
    out = np.empty((ts.size, x.size))
    if pc:
        U = u(ts[:, None] - 0.5 * (edges[:-1] + edges[1:])[None, :])
    per_x = P * 2 * n * (1 if pc else ts.size)
    step = max(1, _BUDGET // per_x)
    for c0 in range(0, x.size, step):
        xc = x[c0:c0 + step]
        lo, hi = _split_panels(edges, xc)
        xi, wi = _panel_rule(lo, hi, n)  # (X, P, 2, n)
        kv = kernel(xi, xc[:, None, None, None]) * wi
        if pc:
            out[:, c0:c0 + step] = U @ kv.sum(axis=(2, 3)).T
        else:
            uv = u(ts[:, None, None, None, None] - xi[None])
            out[:, c0:c0 + step] = np.einsum("sxpjn,xpjn->sx", uv, kv)
    return out


def _representer_quadrature(kernel, u, ts, tq, q: QuadratureConfig):
    ts = np.asarray(ts, dtype=float)
    tq = np.asarray(tq, dtype=float)
    D = _delay(kernel)
    start = _signal_start(u)
    upper = float(np.max(ts)) - start
    if upper <= max(D, 0.0):
        return np.zeros((ts.size, tq.size))
    lower = max(D, 0.0)
    pts = np.concatenate([(ts[:, None] - u.breakpoints[None, :]).ravel(), [lower]])
    base = _clean_edges(pts, lower, upper)
    base = _cap_edges(base, min(q.max_panel_length, _rate_scale(kernel)))

    def estimate(edges):
        return _inner_integral(kernel, u, ts, edges, tq, q.panel_order)

    return _refine_until_converged(estimate, base, q, "representer")


def _refine_until_converged(estimate, edges, q: QuadratureConfig, what: str):
    prev = estimate(edges)
    for _ in range(q.max_refinements):
        edges = _bisect_edges(edges)
        cur = estimate(edges)
        scale = np.max(np.abs(cur)) if cur.size else 0.0
        err = np.abs(cur - prev)
        allowed = q.entry_rel_tol * (np.abs(cur) + q.abs_floor_ratio * scale)
        if np.all(err <= allowed):
            return cur
        prev = cur
    bad = np.unravel_index(np.argmax(err - allowed), err.shape)
    raise QuadratureError(
        f"{what} quadrature did not reach relative accuracy {q.entry_rel_tol:g} "
        f"after {q.max_refinements} refinements; worst entry {tuple(int(i) for i in bad)} "
        f"changed by {err[bad]:.3g} (value {cur[bad]:.6g})"
    )


def _use_closed_form(kernel, u, method: str) -> bool:
    if method == "quadrature":
        return False
    if method not in ("auto", "closed"):
        raise ValueError(f"unknown method {method!r}")
    return (
        isinstance(kernel, KernelSpec)
        and kernel.family in (HEAVISIDE, EXPONENTIAL, WARPED)
        and _is_pc(u)
    )


def representer_matrix(kernel, u, sample_times, query_times, q=DEFAULT_QUADRATURE, method="auto"):
    """``R[i, n] = int u(t_i - s) K(s, t_n) ds`` for all sample/query pairs."""
    ts = np.atleast_1d(np.asarray(sample_times, dtype=float))
    tq = np.atleast_1d(np.asarray(query_times, dtype=float))
    if _use_closed_form(kernel, u, method):
        return _representer_closed(kernel, u, ts, tq)
    return _representer_quadrature(kernel, u, ts, tq, q)


def representer_value(kernel, u, t_sample: float, t: float, q=DEFAULT_QUADRATURE, method="auto") -> float:
    """``(u * K_t)(t_sample)``, the i-th representer evaluated at ``t``."""
    return float(representer_matrix(kernel, u, [t_sample], [t], q, method)[0, 0])


# -- Gram entries ----------------------------------------------------------------


def _support_edges(u, ta, tb, D):
    """Panel edges in lag coordinates covering the support of both inputs."""
    start = _signal_start(u)
    upper = max(float(np.max(ta)), float(np.max(tb))) - start
    lower = max(D, 0.0)
    if upper <= lower:
        return None
    pts = np.concatenate(
        [
            (ta[:, None] - u.breakpoints[None, :]).ravel(),
            (tb[:, None] - u.breakpoints[None, :]).ravel(),
        ]
    )
    return _clean_edges(pts, lower, upper)


def _separable_cross(spec: KernelSpec, u, ta, tb):
    ta = ta - spec.delay
    tb = tb - spec.delay
    K = np.zeros((ta.size, tb.size))
    if spec.family == HEAVISIDE:
        total = sum(m for m, _ in spec.atoms)
        aa = _input_moment(u, ta, 0.0, np.inf, 0, 0.0)[:, 0]
        ab = aa if tb is ta else _input_moment(u, tb, 0.0, np.inf, 0, 0.0)[:, 0]
        return total * np.outer(aa, ab)
    for mass, omega in spec.atoms:
        if mass == 0:
            continue
        aa = _input_moment(u, ta, 0.0, np.inf, 0, omega)[:, 0]
        ab = _input_moment(u, tb, 0.0, np.inf, 0, omega)[:, 0]
        K += mass * np.outer(aa, ab)
    return K


class _MinWarpedParts:
    """Panel data shared by every rate of a ``min``-warped dictionary.

    On a panel ``[p, p + L)`` both shifted inputs are constant and the inner
    factor ``P_b(s) = int_0^s u(t_b - r) r^k dr`` equals
    ``P_b(p) + u_b (s^{k+1} - p^{k+1}) / (k + 1)``. Everything depending on
    the decay rate is confined to two per-panel moments.
    """

    def __init__(self, u, ta, tb, k: int, delay: float):
        self.k = k
        self.same = tb is ta
        ta = np.asarray(ta, dtype=float) - delay
        tb = ta if self.same else np.asarray(tb, dtype=float) - delay
        self.shape = (ta.size, tb.size)
        edges = _support_edges(u, ta, tb, 0.0)
        self.empty = edges is None
        if self.empty:
            return
        p, L = edges[:-1], np.diff(edges)
        mid = p + 0.5 * L
        self.p, self.L = p, L
        self.Ua = u(ta[:, None] - mid[None, :])
        self.Pa = _input_moment(u, ta, 0.0, p[None, :], k, 0.0)
        if self.same:
            self.Ub, self.Pb = self.Ua, self.Pa
        else:
            self.Ub = u(tb[:, None] - mid[None, :])
            self.Pb = _input_moment(u, tb, 0.0, p[None, :], k, 0.0)
        # int_p^{p+L} s^k (s^{k+1} - p^{k+1}) e^{-w s} ds as a polynomial in s - p
        left = [comb(k, r) * p ** (k - r) for r in range(k + 1)]
        right = [np.zeros_like(p)] + [comb(k + 1, r) * p ** (k + 1 - r) for r in range(1, k + 2)]
        conv = [np.zeros_like(p) for _ in range(2 * k + 2)]
        for i, ci in enumerate(left):
            for j, cj in enumerate(right):
                conv[i + j] = conv[i + j] + ci * cj
        self.left, self.conv = left, conv

    def gram(self, omega: float) -> np.ndarray:
        if self.empty:
            return np.zeros(self.shape)
        M = _shifted_moment(self.left, self.p, self.L, omega)
        N = _shifted_moment(self.conv, self.p, self.L, omega) / (self.k + 1)
        X = (self.Ua * M) @ self.Pb.T + (self.Ua * N) @ self.Ub.T
        if self.same:
            return X + X.T
        Y = (self.Ub * M) @ self.Pa.T + (self.Ub * N) @ self.Ua.T
        return X + Y.T


def _warped_min_cross(spec: KernelSpec, u, ta, tb):
    parts = _MinWarpedParts(u, ta, tb, spec.k, spec.delay)
    K = np.zeros(parts.shape)
    for mass, omega in spec.atoms:
        if mass:
            K += mass * parts.gram(omega)
    return K


def warped_min_dictionary(u, times, omegas, k: int, delay: float = 0.0) -> np.ndarray:
    """Stacked Grams ``(m, ell, ell)`` of single-atom ``min``-warped kernels."""
    times = np.asarray(times, dtype=float)
    parts = _MinWarpedParts(u, times, times, k, delay)
    return np.stack([parts.gram(float(w)) for w in omegas])


def _warped_outer_quadrature(spec: KernelSpec, u, ta, tb, q: QuadratureConfig):
    """Diagonal split with closed-form inner factor and outer Gauss-Legendre panels."""
    same = tb is ta
    ta = ta - spec.delay
    tb = ta if same else tb - spec.delay
    edges = _support_edges(u, ta, tb, 0.0)
    if edges is None:
        return np.zeros((ta.size, tb.size))
    edges = _cap_edges(edges, min(q.max_panel_length, _rate_scale(spec)))
    k = spec.k

    def inner(ts, x):
        # F(x) = x^k * int_0^x u(ts - s) s^k G-part(s, x) ds, summed over atoms
        P = _input_moment(u, ts, 0.0, x[None, :], k, 0.0)
        F = np.zeros_like(P)
        for mass, omega in spec.atoms:
            if mass == 0:
                continue
            if spec.shape == "min":
                F += mass * np.exp(-omega * x) * P
            else:
                E = _input_moment(u, ts, 0.0, x[None, :], k, omega)
                F += mass * (np.exp(-2 * omega * x) * E / 2 - np.exp(-3 * omega * x) * P / 6)
        return F * x**k

    def estimate(e):
        x, w = _panel_rule(e[:-1], e[1:], q.panel_order)
        x, w = x.ravel(), w.ravel()
        Ua = u(ta[:, None] - x[None, :])
        Fa = inner(ta, x)
        if same:
            X = (Ua * w) @ Fa.T
            return X + X.T
        Ub = u(tb[:, None] - x[None, :])
        Fb = inner(tb, x)
        return (Ua * w) @ Fb.T + (Fa * w) @ Ub.T

    return _refine_until_converged(estimate, edges, q, "Gram")


def _nested_quadrature(kernel, u, ta, tb, q: QuadratureConfig):
    """Generic route: outer panels over s1, inner panels split at s2 = s1."""
    D = _delay(kernel)
    edges = _support_edges(u, ta, tb, D)
    if edges is None:
        return np.zeros((ta.size, tb.size))
    cap = min(q.max_panel_length, _rate_scale(kernel))
    edges = _cap_edges(edges, cap)

    def estimate(e):
        xo, wo = _panel_rule(e[:-1], e[1:], q.panel_order)
        xo, wo = xo.ravel(), wo.ravel()
        Rb = _inner_integral(kernel, u, tb, e, xo, q.panel_order)
        Ua = u(ta[:, None] - xo[None, :])
        return (Ua * wo) @ Rb.T

    return _refine_until_converged(estimate, edges, q, "Gram")


def cross_gram(kernel, u, times_a, times_b, q=DEFAULT_QUADRATURE, method="auto") -> np.ndarray:
    """Rectangular Gram ``[K(t_a, t_b)]`` between two lists of output times."""
    ta = np.atleast_1d(np.asarray(times_a, dtype=float))
    same = times_b is times_a
    tb = ta if same else np.atleast_1d(np.asarray(times_b, dtype=float))
    closed = _use_closed_form(kernel, u, method)
    if not same and tb.size > _CHUNK:
        blocks = [
            cross_gram(kernel, u, ta, tb[c0:c0 + _CHUNK], q, method)
            for c0 in range(0, tb.size, _CHUNK)
        ]
        return np.concatenate(blocks, axis=1)
    if closed and kernel.family in (HEAVISIDE, EXPONENTIAL):
        return _separable_cross(kernel, u, ta, tb)
    if closed and kernel.shape == "min":
        return _warped_min_cross(kernel, u, ta, tb)
    if isinstance(kernel, KernelSpec) and kernel.family == WARPED and _is_pc(u) and method != "quadrature":
        return _warped_outer_quadrature(kernel, u, ta, tb, q)
    return _nested_quadrature(kernel, u, ta, tb, q)


def gram_entry(kernel, u, t_i: float, t_j: float, q=DEFAULT_QUADRATURE, method="auto") -> float:
    """``int int u(t_i - s1) u(t_j - s2) K(s1, s2) ds1 ds2``."""
    return float(cross_gram(kernel, u, [t_i], [t_j], q, method)[0, 0])


def assemble_gram(kernel, u, times, q=DEFAULT_QUADRATURE, method="auto") -> GramMatrix:
    """Symmetric Gram matrix of ``kernel`` for one input and ``ell`` sample times."""
    t = np.atleast_1d(np.asarray(times, dtype=float))
    if t.size == 0:
        raise ValueError("need at least one sample time")
    K = cross_gram(kernel, u, t, t, q, method)
    # mirror the upper triangle so symmetry is exact for every route
    K = np.triu(K) + np.triu(K, 1).T
    return GramMatrix(K, t)


def gram_discrete(kernel, u: DiscreteSignal, indices, step: float = 1.0) -> GramMatrix:
    """Discrete-time Gram: the double integral becomes a finite double sum.

    The kernel is evaluated at lags ``n * step``; ``indices`` are integer
    sample times.
    """
    idx = np.atleast_1d(np.asarray(indices)).astype(int)
    if idx.size == 0:
        raise ValueError("need at least one sample index")
    max_lag = int(np.max(idx)) - u.start_index
    if max_lag < 0 or u.values.size == 0:
        return GramMatrix(np.zeros((idx.size, idx.size)), idx * step)
    lags = np.arange(max_lag + 1)
    A = u(idx[:, None] - lags[None, :])
    Kl = np.asarray(kernel(lags[:, None] * step, lags[None, :] * step), dtype=float)
    K = A @ Kl @ A.T
    K = np.triu(K) + np.triu(K, 1).T
    return GramMatrix(K, idx * step)
