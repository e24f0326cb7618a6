import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ltikernels.gram import assemble_gram
from ltikernels.kernels import KernelSpec, exponential_kernel, tc_kernel, warped_kernel
from ltikernels.mkl import (
    KernelDictionary,
    active_atoms,
    combine_kernels,
    fit_mkl,
    mkl_gradient,
    mkl_objective,
    select_lambda_mkl,
    simplex_project,
    stationarity_residual,
)
from ltikernels.solver import fit_rls, gcv_score, rls_objective

from conftest import random_psd


def _instance(gen, ell=None, m=None):
    ell = ell or int(gen.integers(3, 11))
    m = m or int(gen.integers(2, 6))
    G = np.array([random_psd(gen, ell, int(gen.integers(1, ell + 1))) * 10 ** gen.uniform(-2, 2) for _ in range(m)])
    return G, gen.standard_normal(ell), 10 ** gen.uniform(-2, 1)


def test_simplex_project_examples():
    np.testing.assert_array_equal(simplex_project([0.2, 0.3, 0.5]), [0.2, 0.3, 0.5])
    np.testing.assert_array_equal(simplex_project([10.0, 0.0]), [1.0, 0.0])
    np.testing.assert_allclose(simplex_project([0.0, 0.0]), [0.5, 0.5])
    with pytest.raises(ValueError):
        simplex_project([])
    with pytest.raises(ValueError):
        simplex_project([np.nan, 1.0])


def _simplex_grid(m, n):
    pts = []
    for cuts in itertools.combinations(range(n + m - 1), m - 1):
        edges = (-1,) + cuts + (n + m - 1,)
        pts.append([edges[i + 1] - edges[i] - 1 for i in range(m)])
    return np.array(pts, dtype=float) / n


def test_simplex_project_matches_grid_search(rng):
    grid = _simplex_grid(6, 30)
    for _ in range(5):
        v = rng.normal(0.2, 0.6, 6)
        p = simplex_project(v)
        best = np.min(np.sum((grid - v) ** 2, axis=1))
        assert np.sum((p - v) ** 2) <= best + 1e-12
        assert best - np.sum((p - v) ** 2) <= 1e-3


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=12))
def test_simplex_project_properties(v):
    p = simplex_project(v)
    assert np.all(p >= 0)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    # variational inequality: (v - p)'(q - p) <= 0 for vertices q
    r = np.asarray(v) - p
    assert np.all(r - r @ p <= 1e-9 * (1 + np.max(np.abs(v))))


def test_single_kernel_dictionary(rng):
    G, y, lam = _instance(rng, m=1)
    model = fit_mkl(G, y, lam)
    np.testing.assert_array_equal(model.d, [1.0])
    np.testing.assert_allclose(model.c, fit_rls(G[0], y, lam), rtol=1e-14)
    assert model.converged and model.iterations == 0


def test_duplicate_grams(rng):
    G, y, lam = _instance(rng, m=1)
    model = fit_mkl(np.concatenate([G, G]), y, lam)
    assert model.objective == pytest.approx(mkl_objective(G, y, lam, [1.0]), rel=1e-12)


@pytest.mark.parametrize("method", ["newton", "gradient"])
def test_random_search_oracle(method):
    gen = np.random.default_rng(99)
    G, y, lam = _instance(gen, ell=6, m=3)
    model = fit_mkl(G, y, lam, method=method, max_iter=5000)
    D = gen.dirichlet(np.ones(3), 10_000)
    best = min(mkl_objective(G, y, lam, d) for d in D)
    assert model.objective <= best + 1e-6


@given(st.integers(0, 10_000))
def test_invariants(seed):
    gen = np.random.default_rng(seed)
    G, y, lam = _instance(gen)
    model = fit_mkl(G, y, lam)
    d = model.d
    assert np.all(d >= 0) and d.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(model.objective_trace) <= 0)
    # J equals the inner regularized minimum on K(d)
    K = np.tensordot(d, G, axes=1)
    c = fit_rls(K, y, lam)
    assert model.objective == pytest.approx(rls_objective(K, y, lam, c), rel=1e-10)
    assert model.converged
    assert stationarity_residual(G, y, lam, d) <= 1e-6


def test_gradient_matches_finite_differences(rng):
    G, y, lam = _instance(rng, ell=5, m=3)
    d = np.array([0.2, 0.3, 0.5])
    g = mkl_gradient(G, y, lam, d)
    h = 1e-6
    fd = [(mkl_objective(G, y, lam, d + h * e) - mkl_objective(G, y, lam, d - h * e)) / (2 * h) for e in np.eye(3)]
    np.testing.assert_allclose(g, fd, rtol=1e-5)


def test_methods_agree(rng):
    G, y, lam = _instance(rng, ell=8, m=4)
    a = fit_mkl(G, y, lam, method="newton")
    b = fit_mkl(G, y, lam, method="gradient", max_iter=20_000)
    assert a.objective == pytest.approx(b.objective, rel=1e-8)


def test_fit_mkl_validation(rng):
    G, y, lam = _instance(rng)
    with pytest.raises(ValueError):
        fit_mkl(G, y, 0.0)
    with pytest.raises(ValueError):
        fit_mkl(G, y, lam, tol=0.0)
    with pytest.raises(ValueError):
        fit_mkl(G, y[:-1], lam)
    with pytest.raises(ValueError):
        fit_mkl(G, y, lam, method="coordinate")


def test_small_lambda_still_iterates(rng):
    # J and its gradient scale with lambda; the stopping test must not
    G, y, _ = _instance(rng, ell=8, m=4)
    a = fit_mkl(G, y, 1e-3)
    b = fit_mkl(G * 1e-9, y, 1e-12)
    np.testing.assert_allclose(a.d, b.d, atol=1e-6)


def test_active_atoms():
    assert active_atoms(np.full(3, 0.001), 0.01) == []
    assert active_atoms(np.array([1.0, 0.0, 0.0]), 0.01) == [(0, 1.0)]
    assert active_atoms(np.array([0.2, 0.5, 0.3])) == [(1, 0.5), (2, 0.3), (0, 0.2)]
    with pytest.raises(ValueError):
        active_atoms(np.array([1.0]), -1)


def test_dictionary_build_and_normalize(mixed_input, rng):
    t = rng.uniform(0, 2, 7)
    basis = [warped_kernel(w, k=1) for w in (1.0, 10.0, 100.0)]
    D = KernelDictionary.build(basis, mixed_input, t)
    assert (D.m, D.ell) == (3, 7)
    np.testing.assert_array_equal(D.omegas, [1.0, 10.0, 100.0])
    for spec, G in zip(basis, D.grams):
        np.testing.assert_allclose(G, assemble_gram(spec, mixed_input, t).entries, rtol=1e-8, atol=1e-16)
    N = D.normalized()
    np.testing.assert_allclose(np.trace(N.grams, axis1=1, axis2=2), 7.0, rtol=1e-12)
    for spec, G in zip(N.basis, N.grams):
        np.testing.assert_allclose(G, assemble_gram(spec, mixed_input, t).entries, rtol=1e-7, atol=1e-14)
    d = np.array([0.2, 0.5, 0.3])
    merged = combine_kernels(N.basis, d)
    assert isinstance(merged, KernelSpec) and len(merged.atoms) == 3
    np.testing.assert_allclose(
        assemble_gram(merged, mixed_input, t).entries, N.combined(d), rtol=1e-7, atol=1e-14
    )
    with pytest.raises(ValueError):
        KernelDictionary(basis[:2], D.grams)


def test_combine_mixed_families():
    pairs = combine_kernels([tc_kernel(1.0), exponential_kernel(2.0)], [0.4, 0.6])
    assert pairs == [(0.4, tc_kernel(1.0)), (0.6, exponential_kernel(2.0))]
    merged = combine_kernels([tc_kernel(1.0), tc_kernel(5.0)], [0.0, 1.0])
    assert merged.atoms == ((1.0, 5.0),)


def test_joint_lambda_selection_matches_manual_sweep():
    gen = np.random.default_rng(7)
    G, y, _ = _instance(gen, ell=8, m=3)
    grid = np.geomspace(1e-3, 10, 6)
    sel, model = select_lambda_mkl(G, y, grid)
    assert model.lam == sel.selected and sel.scores.shape == (6,)
    manual = [gcv_score(np.tensordot(fit_mkl(G, y, lam).d, G, axes=1), y, lam) for lam in grid]
    np.testing.assert_allclose(sel.scores, manual, rtol=1e-6)
    assert sel.selected == grid[int(np.argmin(sel.scores))]
    with pytest.raises(ValueError):
        select_lambda_mkl(G, y, grid[::-1])


def test_projection_matches_bisection_reference():
    from scipy.optimize import brentq

    gen = np.random.default_rng(3)
    for _ in range(100):
        v = gen.standard_normal(int(gen.integers(1, 30))) * 3
        theta = brentq(lambda th: np.maximum(v - th, 0).sum() - 1, v.min() - 1, v.max())
        np.testing.assert_allclose(simplex_project(v), np.maximum(v - theta, 0), atol=1e-12)


def test_newton_subproblem_satisfies_kkt():
    from ltikernels.mkl import _simplex_qp

    gen = np.random.default_rng(11)
    for _ in range(100):
        m = int(gen.integers(2, 41))
        A = gen.standard_normal((m, int(gen.integers(1, m + 1))))
        H = A @ A.T
        g = gen.standard_normal(m)
        x0 = simplex_project(gen.standard_normal(m))
        x = _simplex_qp(g, H, x0)
        assert np.all(x >= 0) and x.sum() == pytest.approx(1.0, abs=1e-12)
        grad = g + H @ (x - x0)
        support = x > 1e-12
        nu = grad[support].mean()
        scale = np.abs(grad).max() + np.abs(H).max()
        assert np.ptp(grad[support]) <= 1e-8 * scale
        assert np.all(grad[~support] >= nu - 1e-8 * scale)
