"""Regularized least squares in the span of the representers, and GCV.

With squared loss the coefficient vector solves ``(K + lam I) c = y``. The
estimated impulse response is ``h*(t) = sum_i c_i (u * K_t)(t_i)`` and the
predicted output ``y*(t) = sum_i c_i K(t_i, t)`` with the cross-Gram entry
between a sample time and the query time.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve_triangular

from .errors import DegenerateSmootherError, IllConditionedError, SelectionError
from .gram import DEFAULT_QUADRATURE, GramMatrix, QuadratureConfig, cross_gram, representer_matrix

__all__ = [
    "IdentifiedModel",
    "GcvResult",
    "DEFAULT_LAMBDA_GRID",
    "default_lambda_grid",
    "fit_rls",
    "fit_model",
    "eval_impulse_response",
    "predict_output",
    "gcv_score",
    "select_lambda",
    "rls_objective",
]

log = logging.getLogger(__name__)

JITTER = 1e-12


def default_lambda_grid(n: int = 30, lo: float = 1e-8, hi: float = 1e2) -> np.ndarray:
    return np.logspace(np.log10(lo), np.log10(hi), n)


DEFAULT_LAMBDA_GRID = default_lambda_grid()


def _components(kernel):
    """Normalize a kernel argument to a list of ``(weight, spec)`` pairs."""
    if not isinstance(kernel, (list, tuple)):
        return [(1.0, kernel)]
    comps = [(float(w), s) for w, s in kernel]
    if not comps:
        raise ValueError("empty kernel mixture")
    return comps


@dataclass(frozen=True, eq=False)
class IdentifiedModel:
    """A fitted model: kernel, input, sample times, coefficients and lambda.

    ``kernel`` is a :class:`KernelSpec` or a sequence of ``(weight, spec)``
    pairs (a kernel combination). ``gram`` is the training Gram matrix; when
    present, predictions at training times reuse its rows.
    """

    kernel: object
    u: object
    times: np.ndarray
    c: np.ndarray
    lam: float
    gram: GramMatrix | None = None
    quadrature: QuadratureConfig = field(default=DEFAULT_QUADRATURE)

    def __post_init__(self):
        t = np.array(self.times, dtype=float).reshape(-1)
        c = np.array(self.c, dtype=float).reshape(-1)
        if t.size != c.size:
            raise ValueError(f"{c.size} coefficients for {t.size} sample times")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        t.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "lam", float(self.lam))

    def impulse_response(self, t):
        return eval_impulse_response(self, t)

    def predict(self, t):
        return predict_output(self, t)

    def rkhs_norm_sq(self) -> float:
        if self.gram is None:
            raise ValueError("model has no stored Gram matrix")
        return float(self.c @ self.gram.entries @ self.c)


@dataclass(frozen=True)
class GcvResult:
    lambda_grid: np.ndarray
    scores: np.ndarray
    selected: float

    @property
    def selected_index(self) -> int:
        return int(np.flatnonzero(self.lambda_grid == self.selected)[-1])


def _as_matrix(K) -> np.ndarray:
    return np.asarray(K.entries if isinstance(K, GramMatrix) else K, dtype=float)


def _factor(K: np.ndarray, lam: float):
    n = K.shape[0]
    A = K + lam * np.eye(n)
    try:
        return cho_factor(A, lower=True, check_finite=True)
    except LinAlgError:
        jitter = JITTER * max(np.trace(K), 0.0) / n
        log.debug("Cholesky failed at lambda=%g, retrying with jitter %g", lam, jitter)
    try:
        return cho_factor(A + jitter * np.eye(n), lower=True)
    except LinAlgError as exc:
        raise IllConditionedError(
            f"K + lambda I is not numerically positive definite (lambda={lam:g})"
        ) from exc


def _check(K: np.ndarray, y: np.ndarray, lam: float):
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError(f"Gram matrix must be square, got {K.shape}")
    if y.shape != (K.shape[0],):
        raise ValueError(f"expected {K.shape[0]} measurements, got {y.size}")
    if not (np.isfinite(lam) and lam > 0):
        raise ValueError("lambda must be positive and finite")


def fit_rls(K, y: Sequence[float], lam: float) -> np.ndarray:
    """Coefficients ``c`` solving ``(K + lam I) c = y`` by Cholesky."""
    K = _as_matrix(K)
    y = np.asarray(y, dtype=float).reshape(-1)
    _check(K, y, lam)
    return cho_solve(_factor(K, lam), y)


def rls_objective(K, y, lam: float, c) -> float:
    """``sum 0.5 (y - Kc)^2 + lam/2 c'Kc``, the finite-dimensional problem."""
    K = _as_matrix(K)
    c = np.asarray(c, dtype=float)
    r = np.asarray(y, dtype=float) - K @ c
    return float(0.5 * r @ r + 0.5 * lam * c @ K @ c)


def gcv_score(K, y: Sequence[float], lam: float) -> float:
    """``ell ||(I - H) y||^2 / trace(I - H)^2`` with ``H = K (K + lam I)^-1``.

    Uses ``(I - H) y = lam c`` and ``trace(I - H) = lam trace((K + lam I)^-1)``.
    """
    K = _as_matrix(K)
    y = np.asarray(y, dtype=float).reshape(-1)
    _check(K, y, lam)
    n = y.size
    fac = _factor(K, lam)
    c = cho_solve(fac, y)
    Linv = solve_triangular(fac[0], np.eye(n), lower=True)
    tr = lam * float(np.sum(Linv * Linv))
    if not tr > 0:
        raise DegenerateSmootherError(f"trace(I - H) = {tr:g} at lambda={lam:g}")
    resid = lam * c
    return float(n * (resid @ resid) / tr**2)


def select_lambda(K, y: Sequence[float], grid=None) -> GcvResult:
    """Minimize the GCV score over ``grid``; ties go to the larger lambda.

    Grid points where the factorization or the trace degenerates score
    ``inf``; if every point does, :class:`SelectionError` is raised.
    """
    grid = DEFAULT_LAMBDA_GRID if grid is None else np.asarray(grid, dtype=float).reshape(-1)
    if grid.size == 0:
        raise ValueError("lambda grid is empty")
    if np.any(np.diff(grid) < 0):
        raise ValueError("lambda grid must be sorted ascending")
    scores = np.empty(grid.size)
    for i, lam in enumerate(grid):
        try:
            scores[i] = gcv_score(K, y, float(lam))
        except (IllConditionedError, DegenerateSmootherError) as exc:
            log.debug("GCV point lambda=%g skipped: %s", lam, exc)
            scores[i] = np.inf
    if not np.any(np.isfinite(scores)):
        raise SelectionError("GCV score undefined at every grid point")
    best = np.flatnonzero(scores == np.min(scores))[-1]
    return GcvResult(grid.copy(), scores, float(grid[best]))


def _cross(kernel, u, ta, tb, q):
    out = np.zeros((ta.size, tb.size))
    for w, spec in _components(kernel):
        if w:
            out += w * cross_gram(spec, u, ta, tb, q)
    return out


def _representers(kernel, u, ts, tq, q):
    out = np.zeros((ts.size, tq.size))
    for w, spec in _components(kernel):
        if w:
            out += w * representer_matrix(spec, u, ts, tq, q)
    return out


def fit_model(kernel, u, times, y, lam: float, q: QuadratureConfig = DEFAULT_QUADRATURE, gram=None):
    """Assemble the Gram (unless given), solve for ``c`` and wrap the result."""
    times = np.asarray(times, dtype=float)
    if gram is None:
        K = _cross(kernel, u, times, times, q)
        K = np.triu(K) + np.triu(K, 1).T
        gram = GramMatrix(K, times)
    c = fit_rls(gram, y, lam)
    return IdentifiedModel(kernel, u, times, c, lam, gram, q)


def eval_impulse_response(model: IdentifiedModel, t):
    """``h*(t) = sum_i c_i (u * K_t)(t_i)``; exactly 0 for ``t < 0``."""
    t = np.asarray(t, dtype=float)
    flat = t.reshape(-1)
    out = np.zeros(flat.shape)
    pos = flat >= 0
    if np.any(pos) and np.any(model.c):
        R = _representers(model.kernel, model.u, model.times, flat[pos], model.quadrature)
        out[pos] = model.c @ R
    out = out.reshape(t.shape)
    return out if out.ndim else float(out)


def predict_output(model: IdentifiedModel, t):
    """``y*(t) = sum_i c_i K(t_i, t)`` with the doubly-convolved cross kernel.

    Query times that coincide with a training time use the stored Gram row,
    so the prediction there is exactly ``(K c)_j``.
    """
    t = np.asarray(t, dtype=float)
    flat = t.reshape(-1)
    out = np.zeros(flat.shape)
    if np.any(model.c):
        todo = np.ones(flat.shape, dtype=bool)
        if model.gram is not None:
            order = np.argsort(model.times, kind="stable")
            st = model.times[order]
            pos = np.clip(np.searchsorted(st, flat), 0, st.size - 1)
            hit = st[pos] == flat
            if np.any(hit):
                rows = order[pos[hit]]
                out[hit] = model.gram.entries[rows] @ model.c
                todo = ~hit
        if np.any(todo):
            C = _cross(model.kernel, model.u, model.times, flat[todo], model.quadrature)
            out[todo] = model.c @ C
    out = out.reshape(t.shape)
    return out if out.ndim else float(out)
