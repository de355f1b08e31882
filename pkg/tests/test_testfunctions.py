import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qgv.algebra import random_rotation, vector_rep_matrix
from qgv.testfunctions import (
    THETA,
    GridFunction,
    StencilError,
    TestFunction,
    overlap,
    quadrature_nodes,
    schwartz_seminorm,
    test_function_from_json,
)

centers = st.tuples(*[st.floats(-2, 2)] * 4)
widths = st.floats(0.3, 1.5)
derivs = st.tuples(*[st.integers(0, 2)] * 4)


def test_seminorm_zero_function():
    assert schwartz_seminorm(TestFunction.zero(), 2) == 0.0


def test_seminorm_unit_gaussian_order_zero():
    assert schwartz_seminorm(TestFunction.gaussian((0, 0, 0, 0), 1.0), 0) == pytest.approx(1.0, abs=1e-12)


def test_seminorm_unit_gaussian_order_one():
    # dense 81^4 grid over all |gamma| <= 4 plus Nelder-Mead polish (independent script)
    oracle = 3.1978989179368034
    val = schwartz_seminorm(TestFunction.gaussian((0, 0, 0, 0), 1.0), 1)
    assert val == pytest.approx(oracle, rel=1e-9)


@settings(max_examples=8, deadline=None)
@given(c=centers, w=widths)
def test_seminorm_monotone_in_order(c, w):
    f = TestFunction.gaussian(c, w)
    assert schwartz_seminorm(f, 0) <= schwartz_seminorm(f, 1) * (1 + 1e-12)


def test_grid_seminorm_and_stencil_limit():
    v = np.zeros((8, 8))
    v[0, 0] = 1.0
    g = GridFunction(v)
    assert schwartz_seminorm(g, 0) == 1.0
    # the (2,0) second difference at the origin is -1/2 and weight 1 there
    assert schwartz_seminorm(g, 1) >= 0.5
    with pytest.raises(StencilError):
        schwartz_seminorm(GridFunction(np.zeros((4, 4))), 1)


@settings(max_examples=30, deadline=None)
@given(c=centers, w=widths, d=derivs, seed=st.integers(0, 1000))
def test_pullback_matches_pointwise(c, w, d, seed):
    rng = np.random.default_rng(seed)
    R = vector_rep_matrix(random_rotation(rng))
    a = rng.normal(size=4)
    f = TestFunction.gaussian(c, w, 1.3, d)
    x = rng.normal(size=(5, 4))
    lhs = f.pullback(R, a)(x)
    rhs = f(x @ R.T + a)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-12)


def test_reflection_flips_time():
    f = TestFunction.gaussian((0.8, 0.1, 0.2, 0.3), 0.5, deriv=(1, 0, 1, 0))
    x = np.array([[0.3, -0.2, 0.4, 0.0]])
    np.testing.assert_allclose(f.reflected()(x), f(x @ THETA), atol=1e-15)


def test_leakage_of_positive_time_gaussian():
    f = TestFunction.gaussian((1.0, 0, 0, 0), 0.15)
    assert f.leakage() < 1e-10
    assert TestFunction.gaussian((0.0, 0, 0, 0), 0.15).leakage() == pytest.approx(0.5)


@settings(max_examples=20, deadline=None)
@given(c1=centers, w1=st.floats(0.2, 0.4), c2=centers, w2=st.floats(0.9, 1.5), d=derivs)
def test_overlap_against_gauss_hermite(c1, w1, c2, w2, d):
    # nodes of the narrow f integrate the smooth g accurately
    f = TestFunction.gaussian(c1, w1)
    g = TestFunction.gaussian(c2, w2, deriv=d)
    y, wt = quadrature_nodes(f, 16)
    direct = np.sum(wt * g(y))
    assert abs(overlap(f, g) - direct) <= 1e-8 * max(1.0, abs(direct))


@settings(max_examples=25, deadline=None)
@given(c=centers, w=widths, d=derivs, re=st.floats(-3, 3), im=st.floats(-3, 3))
def test_json_roundtrip(c, w, d, re, im):
    f = TestFunction.gaussian(c, w, complex(re, im), d) + TestFunction.gaussian((0, 0, 0, 1), 0.7)
    assert test_function_from_json(f.to_json()) == f
    g = GridFunction(np.arange(16.0).reshape(4, 4) * complex(re, im))
    back = test_function_from_json(g.to_json())
    np.testing.assert_array_equal(back.values, g.values)


def test_integral_and_algebra():
    f = TestFunction.gaussian((0, 0, 0, 0), 0.5, 2.0)
    assert f.integral() == pytest.approx(2.0 * (2 * np.pi * 0.25) ** 2)
    assert (f - f).terms == ()
    assert (f + f).terms[0].coef == 4.0
    assert f.derivative((1, 0, 0, 0)).integral() == 0
