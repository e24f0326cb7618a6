import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from ltikernels.errors import ParseError
from ltikernels.kernels import (
    KernelSpec,
    apply_delay,
    cosine_kernel,
    cubic_spline_G,
    exponential_kernel,
    format_kernel_spec,
    gaussian_kernel,
    heaviside_kernel,
    integrate_exponential_kernel_once,
    kernel_eval,
    kernel_matrix,
    parse_kernel_spec,
    psd_quadratic_form,
    stable_spline_kernel,
    tc_kernel,
    warped_kernel,
)

ALL_KERNELS = [
    heaviside_kernel(),
    exponential_kernel(1.0),
    exponential_kernel([0.5, 3.0], [1.0, 2.0]),
    tc_kernel(1.5),
    warped_kernel(2.0, k=1),
    warped_kernel([1.0, 4.0], k=2, mass=[0.3, 0.7]),
    stable_spline_kernel(1.0),
    stable_spline_kernel(2.0, k=1),
    cosine_kernel([1.0, 2.5], [1.0, 0.5]),
    gaussian_kernel(1.0),
    apply_delay(tc_kernel(1.0), 0.4),
    apply_delay(exponential_kernel(2.0), 1.0),
    apply_delay(warped_kernel(1.0, k=1, shape="cubicspline"), 0.2),
]

times = st.floats(-1.0, 5.0, allow_nan=False)


def test_exponential_values():
    K = exponential_kernel(1.0)
    assert kernel_eval(K, -0.5, 0.3) == 0.0
    assert kernel_eval(K, 0.0, 0.0) == 1.0


def test_tc_substitution():
    assert kernel_eval(warped_kernel(2.0, k=0), 1.0, 3.0) == pytest.approx(np.exp(-6.0), rel=1e-15)


def test_gaussian_diagonal():
    assert kernel_eval(gaussian_kernel(1.0), 2.0, 2.0) == 1.0


def test_heaviside_origin_convention():
    assert kernel_eval(heaviside_kernel(), 0.0, 0.0) == 1.0
    assert kernel_eval(heaviside_kernel(), -1e-300, 0.0) == 0.0


@pytest.mark.parametrize("K", ALL_KERNELS, ids=str)
@given(a=times, b=times)
def test_symmetry(K, a, b):
    assert kernel_eval(K, a, b) == kernel_eval(K, b, a)


@pytest.mark.parametrize("K", ALL_KERNELS, ids=str)
@given(a=times, b=times)
def test_causality(K, a, b):
    if min(a, b) < K.delay:
        assert kernel_eval(K, a, b) == 0.0


@pytest.mark.parametrize("K", ALL_KERNELS, ids=str)
def test_psd_random_point_sets(K, rng):
    for _ in range(10):
        pts = rng.uniform(-1, 5, rng.integers(1, 21))
        ev = np.linalg.eigvalsh(kernel_matrix(K, pts))
        assert ev[0] >= -1e-8 * max(ev[-1], 0.0)


@pytest.mark.parametrize("K", ALL_KERNELS, ids=str)
def test_quadratic_form_nonnegative(K, rng):
    for _ in range(10):
        pts = rng.uniform(-1, 5, 10)
        c = rng.standard_normal(10)
        assert psd_quadratic_form(K, pts, c) >= -1e-10 * (c @ c)


def test_quadratic_form_examples():
    K = exponential_kernel(1.0)
    assert psd_quadratic_form(K, [0.1, 0.2], [0.0, 0.0]) == 0.0
    assert psd_quadratic_form(K, [1.0], [1.0]) == pytest.approx(np.exp(-2.0), rel=1e-15)
    with pytest.raises(ValueError):
        psd_quadratic_form(K, [1.0, 2.0], [1.0])


def test_cubic_spline_values():
    assert cubic_spline_G(0.0, 0.7) == 0.0
    assert cubic_spline_G(1.0, 1.0) == pytest.approx(1.0 / 3.0, rel=1e-15)


def _unit_grid():
    s = np.linspace(0, 1, 100)
    return np.meshgrid(s, s)


def test_cubic_spline_product_bound_on_grid():
    S1, S2 = _unit_grid()
    assert np.all(np.abs(cubic_spline_G(S1, S2)) <= S1 * S2 / 3.0 + 1e-15)


@pytest.mark.xfail(strict=True, reason="min(s, s) = s exceeds s * s on (0, 1); the C = 1 product bound is false")
def test_min_product_bound_on_grid():
    S1, S2 = _unit_grid()
    assert np.all(np.minimum(S1, S2) <= S1 * S2 + 1e-15)


def test_min_geometric_mean_bound_on_grid():
    # the bound that does hold for the min shape
    S1, S2 = _unit_grid()
    assert np.all(np.minimum(S1, S2) <= np.sqrt(S1 * S2) + 1e-15)


@given(st.floats(0, 1), st.floats(0, 1))
def test_cubic_spline_bound_random(s1, s2):
    assert abs(cubic_spline_G(s1, s2)) <= s1 * s2 / 3.0 + 1e-15


@given(st.floats(0.1, 10.0), times, times)
def test_tc_equivalence(w, a, b):
    expected = np.exp(-w * max(a, b)) if min(a, b) >= 0 else 0.0
    assert kernel_eval(tc_kernel(w), a, b) == pytest.approx(expected, rel=1e-14, abs=0)


def test_integrated_exponential():
    assert integrate_exponential_kernel_once(1.0, 0.0, 3.0) == 0.0
    assert integrate_exponential_kernel_once(1.0, 50.0, 50.0) == pytest.approx(1.0, rel=1e-15)
    ref = integrate.dblquad(lambda a, b: np.exp(-2 * (a + b)), 0, 2, 0, 1, epsabs=1e-14)[0]
    val = integrate_exponential_kernel_once(2.0, 1.0, 2.0)
    assert val == pytest.approx(0.21220695751282987156, abs=1e-10)
    assert val == pytest.approx(ref, abs=1e-10)
    assert integrate_exponential_kernel_once(1.0, -1.0, 2.0) == 0.0
    with pytest.raises(ValueError):
        integrate_exponential_kernel_once(0.0, 1.0, 1.0)


@given(times, times)
def test_delay_zero_is_identity(a, b):
    K = warped_kernel(1.3, k=1)
    assert kernel_eval(apply_delay(K, 0.0), a, b) == kernel_eval(K, a, b)


def test_delay_examples():
    K = apply_delay(exponential_kernel(1.0), 1.0)
    assert kernel_eval(K, 0.5, 2.0) == 0.0
    assert kernel_eval(K, 1.5, 2.0) == pytest.approx(np.exp(-1.5), rel=1e-15)
    with pytest.raises(ValueError):
        apply_delay(K, -1.0)


def test_warped_section_at_origin():
    for t in (0.5, 1.0, 2.0):
        assert kernel_eval(warped_kernel(1.0, k=0), 0.0, t) > 0
        for k in (1, 2):
            assert kernel_eval(warped_kernel(1.0, k=k), 0.0, t) == 0.0


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(family="nope"),
        dict(family="exponential", atoms=()),
        dict(family="exponential", atoms=((-1.0, 1.0),)),
        dict(family="exponential", atoms=((0.0, 1.0),)),
        dict(family="exponential", atoms=((1.0, -1.0),)),
        dict(family="warped", atoms=((1.0, 1.0),), k=-1),
        dict(family="warped", atoms=((1.0, 1.0),), k=1.5),
        dict(family="warped", atoms=((1.0, 1.0),), shape="max"),
        dict(family="translation", atoms=((1.0, 1.0),), ti_shape="box"),
        dict(family="exponential", atoms=((1.0, 1.0),), delay=-0.1),
    ],
)
def test_spec_validation(kwargs):
    with pytest.raises(ValueError):
        KernelSpec(**kwargs)


def test_stable_by_construction():
    assert tc_kernel(1.0).stable_by_construction
    assert not warped_kernel([1.0, 0.0], mass=[1.0, 1.0]).stable_by_construction
    assert warped_kernel([1.0, 0.0], mass=[1.0, 0.0]).stable_by_construction
    assert not gaussian_kernel(1.0).stable_by_construction


@pytest.mark.parametrize("K", ALL_KERNELS, ids=str)
def test_text_round_trip(K):
    assert parse_kernel_spec(format_kernel_spec(K)) == K


def test_parse_case_insensitive():
    K = parse_kernel_spec("FAMILY=Warped; Atoms=0.5:2, 0.5:20; K=1; g=CubicSpline; d=0.1")
    assert K == KernelSpec("warped", ((0.5, 2.0), (0.5, 20.0)), 1, "cubicspline", delay=0.1)
    T = parse_kernel_spec("family=translation; atoms=1:3; f=cosine")
    assert T.ti_shape == "cosine"


@pytest.mark.parametrize(
    "text",
    [
        "atoms=1:1",
        "family=exponential; atoms=1:1; colour=red",
        "family=exponential; atoms=1",
        "family=exponential; atoms=1:x",
        "family=exponential; family=tc",
        "family=exponential; junk",
        "family=warped; k=two",
    ],
)
def test_parse_errors(text):
    with pytest.raises(ParseError):
        parse_kernel_spec(text)
