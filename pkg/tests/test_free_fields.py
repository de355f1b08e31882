import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qgv import kernels
from qgv.algebra import random_rotation, vector_rep_matrix
from qgv.correlators import FieldIndex, smear
from qgv.free_fields import (
    euclidean_pair,
    free_scalar_family,
    maxwell_F_schwinger_2pt,
    maxwell_family,
    pairings,
    scalar_schwinger_2pt,
    scalar_wightman_2pt,
)
from qgv.testfunctions import TestFunction

# proper-time integral int ds (4 pi s)^-2 exp(-r^2/4s - m^2 s), quad at 1e-13 (independent script)
PROPER_TIME_ORACLE = [
    (1.0, 1.0, 0.01524648825161622),
    (1.0, 0.3, 0.2580306083595424),
    (1.0, 3.0, 0.000339058094396721),
    (2.5, 0.7, 0.01768393478697814),
]

PHI = FieldIndex((("phi", None),) * 2)


def phi_index(n):
    return FieldIndex((("phi", None),) * n)


@pytest.mark.parametrize("m,r,oracle", PROPER_TIME_ORACLE)
def test_schwinger_2pt_against_proper_time(m, r, oracle):
    xi = np.array([r, 0, 0, 0]) @ vector_rep_matrix(random_rotation(np.random.default_rng(1))).T
    assert scalar_schwinger_2pt(m, xi) == pytest.approx(oracle, rel=1e-8)


def test_schwinger_2pt_decay_and_scaling():
    for r in (5.0, 10.0, 20.0, 40.0):
        v = scalar_schwinger_2pt(1.0, [r, 0, 0, 0]) * math.exp(r)
        assert 0 < v < 1.0
    xi = np.array([0.3, -0.4, 0.2, 0.9])
    for m in (0.5, 2.0, 3.0):
        assert scalar_schwinger_2pt(m, xi) == pytest.approx(m * m * scalar_schwinger_2pt(1.0, m * xi), rel=1e-13)
    with pytest.raises(ValueError):
        scalar_schwinger_2pt(1.0, np.zeros(4))


def test_schwinger_2pt_rotation_invariant():
    rng = np.random.default_rng(2)
    xi = np.array([0.4, 1.1, -0.3, 0.2])
    ref = scalar_schwinger_2pt(1.0, xi)
    for _ in range(100):
        R = vector_rep_matrix(random_rotation(rng))
        assert abs(scalar_schwinger_2pt(1.0, R @ xi) - ref) <= 1e-12 * ref


@pytest.mark.parametrize("t,r", [(0.0, 1.0), (0.5, 1.2), (-0.8, 2.0), (1.0, 1.5)])
def test_wightman_spacelike_equals_wick_rotated_schwinger(t, r):
    x = np.array([t, r, 0, 0])
    w = scalar_wightman_2pt(1.0, x)
    s = scalar_schwinger_2pt(1.0, [math.sqrt(r * r - t * t), 0, 0, 0])
    assert abs(w.imag) <= 1e-6 * abs(w)
    assert abs(w.real - s) <= 1e-6 * s
    w_neg = scalar_wightman_2pt(1.0, -x)
    assert abs(w - w_neg) <= 1e-6 * abs(w)


def test_wightman_timelike_is_complex_and_closed_form_agrees():
    x = np.array([2.0, 0.5, 0.3, 0.0])
    w = scalar_wightman_2pt(1.0, x)
    r = float(np.linalg.norm(x[1:]))
    assert abs(w.imag) > 1e-3 * abs(w)
    assert abs(w - kernels.delta_plus(1.0, 2.0, r)) <= 1e-6 * abs(w)


def test_wightman_massless_limit_grows_as_inverse_square():
    # along spacelike directions |W| r^2 -> 1/(4 pi^2) as m -> 0
    r = 2.0
    vals = [abs(scalar_wightman_2pt(m, [0.0, r, 0, 0])) * r * r for m in (0.4, 0.1, 0.02)]
    assert vals[0] < vals[1] < vals[2]
    # leading correction is of order (m r)^2 log(m r)
    assert vals[2] == pytest.approx(1 / (4 * math.pi**2), rel=1e-2)


def test_smeared_pair_against_proper_time_convolution():
    # heat kernel convolved with both Gaussians, one proper-time quadrature (independent script)
    f = TestFunction.gaussian((1.0, 0.2, -0.1, 0.3), 0.4)
    g = TestFunction.gaussian((-0.2, 0.5, 0.0, -0.4), 0.6)
    assert euclidean_pair(1.0, f, g).real == pytest.approx(0.027015928982292114, rel=1e-10)


def test_narrow_smears_approach_pointwise_kernel():
    x, y = np.array([0.0, 0, 0, 0]), np.array([0.8, 0.3, 0.0, 0.5])
    point = scalar_schwinger_2pt(1.0, y - x)
    errs = []
    for w in (0.2, 0.1, 0.05):
        f, g = TestFunction.gaussian(x, w), TestFunction.gaussian(y, w)
        val = euclidean_pair(1.0, f, g).real / (f.integral().real * g.integral().real)
        errs.append(abs(val - point) / point)
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-2


def hafnian(M):
    """Independent recursive pairing sum."""
    n = M.shape[0]
    if n == 0:
        return 1.0
    total = 0.0
    for k in range(1, n):
        keep = [i for i in range(1, n) if i != k]
        total += M[0, k] * hafnian(M[np.ix_(keep, keep)])
    return total


def test_pairings_count():
    assert len(list(pairings(range(6)))) == 15
    assert len(list(pairings(range(8)))) == 105


def test_wick_six_point_against_hafnian():
    fam = free_scalar_family(1.0)
    rng = np.random.default_rng(3)
    fs = [TestFunction.gaussian(rng.normal(size=4), rng.uniform(0.4, 0.9)) for _ in range(6)]
    M = np.array([[euclidean_pair(1.0, a, b).real for b in fs] for a in fs])
    val, err = smear(fam, phi_index(6), fs)
    assert err == 0.0
    assert val.real == pytest.approx(hafnian(M), rel=1e-13)


def test_wick_low_orders():
    fam = free_scalar_family(1.0)
    f = TestFunction.gaussian((0.3, 0, 0, 0), 0.7)
    g = TestFunction.gaussian((-0.4, 0.2, 0, 0), 0.5)
    s2 = smear(fam, PHI, (f, g))[0]
    assert s2 == euclidean_pair(1.0, f, g)
    sff = smear(fam, PHI, (f, f))[0]
    assert smear(fam, phi_index(4), (f,) * 4)[0] == pytest.approx(3 * sff**2, rel=1e-14)
    assert smear(fam, phi_index(3), (f,) * 3)[0] == 0
    with pytest.raises(ValueError):
        smear(fam, phi_index(10), (f,) * 10)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_diagonal_moment_is_double_factorial(n):
    fam = free_scalar_family(1.0)
    f = TestFunction.gaussian((0.0, 0, 0, 0), 0.6)
    sff = smear(fam, PHI, (f, f))[0].real
    dfact = math.prod(range(2 * n - 1, 0, -2))
    assert smear(fam, phi_index(2 * n), (f,) * (2 * n))[0].real == pytest.approx(dfact * sff**n, rel=1e-13)


def test_two_point_reflection_positivity():
    fam = free_scalar_family(1.0)
    rng = np.random.default_rng(4)
    fs = [TestFunction.gaussian((rng.uniform(0.8, 2.0), *rng.normal(scale=0.5, size=3)), 0.15) for _ in range(6)]
    M = np.array([[smear(fam, PHI, (a.reflected().conj(), b))[0] for b in fs] for a in fs])
    assert np.abs(M - M.conj().T).max() <= 1e-13 * np.abs(M).max()
    eig = np.linalg.eigvalsh(0.5 * (M + M.conj().T))
    assert eig[0] >= -1e-10 * np.abs(eig).max()


def test_maxwell_kernel_examples():
    z = np.array([0.3, -0.7, 0.5, 1.1])
    for mn in [(0, 1), (1, 3), (2, 3)]:
        assert maxwell_F_schwinger_2pt((mn[0], mn[0]), mn, z) == 0
        assert maxwell_F_schwinger_2pt(mn, mn[::-1], z) == -maxwell_F_schwinger_2pt(mn, mn, z)
        for rs in [(0, 2), (1, 2), (0, 3)]:
            assert maxwell_F_schwinger_2pt(mn, rs, z) == pytest.approx(maxwell_F_schwinger_2pt(rs, mn, -z), rel=1e-14)
    # five-point finite-difference Hessian of 1/(4 pi^2 |z|^2) at h = 1e-3 (independent script)
    fd = -0.10132118364192946
    assert maxwell_F_schwinger_2pt((0, 1), (0, 1), np.array([1.0, 0, 0, 0])) == pytest.approx(fd, rel=1e-7)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_maxwell_smeared_antisymmetry(seed):
    rng = np.random.default_rng(seed)
    fam = maxwell_family()
    f = TestFunction.gaussian(rng.normal(size=4), 0.6)
    g = TestFunction.gaussian(rng.normal(size=4) + 1.5, 0.7)
    a = smear(fam, FieldIndex((("F", (0, 1)), ("F", (2, 3)))), (f, g))[0]
    b = smear(fam, FieldIndex((("F", (1, 0)), ("F", (2, 3)))), (f, g))[0]
    c = smear(fam, FieldIndex((("F", (2, 3)), ("F", (0, 1)))), (g, f))[0]
    assert a == pytest.approx(-b, rel=1e-13)
    assert a == pytest.approx(c, rel=1e-13)
