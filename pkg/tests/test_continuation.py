import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qgv import continuation as ct
from qgv.axioms import check_local_commutativity, check_spectral_condition
from qgv.correlators import FieldIndex, reduce_to_differences
from qgv.free_fields import euclidean_pair, free_scalar_family, scalar_wightman_2pt
from qgv.testfunctions import TestFunction

PHI = FieldIndex((("phi", None),) * 2)
TAUS = np.linspace(0.4, 6.0, 29)


def synthetic(poles, p=0.0, taus=TAUS):
    out = np.zeros_like(taus)
    for m2, rho in poles:
        om = math.sqrt(p * p + m2)
        out += rho * np.exp(-om * taus) / (2 * om)
    return out


@pytest.fixture(scope="module")
def scalar_model():
    form = reduce_to_differences(free_scalar_family(1.0), PHI)
    return ct.fit_spectral(form)


def test_cone_examples():
    assert ct.cone_member([1.0, 1.0])
    assert not ct.cone_member([1.0, 0.0])  # boundary: sum/|a| = 1 exactly
    assert not ct.cone_member([1.0, -1.0])
    assert ct.cone_member([5.0])
    assert not ct.cone_member([-5.0])
    with pytest.raises(ValueError):
        ct.cone_member([0.0, 0.0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.01, 10.0), min_size=1, max_size=6), st.floats(1e-3, 1e3))
def test_cone_near_diagonal_and_scale_invariant(xs, c):
    # the diagonal ray is interior, so small perturbations stay inside
    a = np.ones(len(xs)) + 1e-3 * np.asarray(xs) / max(xs)
    assert ct.cone_member(a)
    assert ct.cone_member(c * a)
    assert not ct.cone_member(-c * a)


def test_single_pole_from_free_scalar(scalar_model):
    (m2, rho), = scalar_model.poles
    assert m2 == pytest.approx(1.0, abs=0.01)
    assert rho == pytest.approx(1.0, abs=0.01)
    assert scalar_model.verdict == "pass"


def test_moving_slice_gives_same_mass():
    form = reduce_to_differences(free_scalar_family(1.0), PHI)
    model = ct.fit_spectral(form, p=0.7)
    assert model.poles[0][0] == pytest.approx(1.0, abs=0.01)
    with pytest.raises(ValueError):
        ct.fit_spectral(form, taus=[-1.0, 1.0])


def test_two_pole_synthetic():
    model = ct.fit_slice(TAUS, synthetic([(1.0, 1.0), (4.0, 0.3)]), n_poles=2)
    (m1, r1), (m2, r2) = model.poles
    assert m1 == pytest.approx(1.0, rel=0.02) and m2 == pytest.approx(4.0, rel=0.02)
    assert r1 == pytest.approx(1.0, rel=0.02) and r2 == pytest.approx(0.3, rel=0.02)


def test_negative_weight_is_flagged():
    data = synthetic([(1.0, 1.0), (4.0, -0.3)])
    constrained = ct.fit_slice(TAUS, data, n_poles=2)
    assert constrained.verdict == "fail"
    signed = ct.fit_slice(TAUS, data, n_poles=2, signed=True)
    assert signed.verdict == "pass"
    assert min(r for _, r in signed.poles) == pytest.approx(-0.3, rel=0.02)
    assert check_spectral_condition(signed).verdict == "fail"
    with pytest.raises(ValueError):
        ct.SpectralModel([(1.0, -0.5)])


def test_wightman_continuation_vs_direct_quadrature(scalar_model):
    rng = np.random.default_rng(5)
    worst = 0.0
    for k in range(20):
        xs = rng.normal(size=3)
        r = np.linalg.norm(xs)
        t = rng.uniform(-0.9, 0.9) * r if k % 2 == 0 else rng.choice([-1, 1]) * rng.uniform(1.2, 2.0) * r
        x = np.array([t, *xs])
        cont = ct.continue_to_wightman(scalar_model, x)
        direct = scalar_wightman_2pt(1.0, x)
        worst = max(worst, abs(cont - direct) / abs(direct))
    assert worst <= 1e-5


def test_spacelike_continuation_is_real(scalar_model):
    rng = np.random.default_rng(6)
    for _ in range(10):
        xs = rng.normal(size=3)
        x = np.array([0.5 * rng.uniform(-1, 1) * np.linalg.norm(xs), *xs])
        w = ct.continue_to_wightman(scalar_model, x)
        assert abs(w.imag) <= 1e-8 * abs(w)
        xi = np.array([math.sqrt(x[1:] @ x[1:] - x[0] ** 2), 0, 0, 0])
        assert w.real == pytest.approx(ct.euclidean_from_model(scalar_model, xi), rel=1e-10)
    assert check_local_commutativity(scalar_model).passed


def test_growth_estimate_and_constant_scaling():
    levels = [(z, ct.analytic_scalar(1.0, z)) for z in (ct.growth_grid(k) for k in range(3))]
    out = ct.verify_growth_estimate(levels)
    assert out["found"]
    # near the real time axis at r = 0 the kernel behaves like 1/eta^2
    assert out["M"] == 2
    scaled = ct.verify_growth_estimate([(z, 10 * v) for z, v in levels])
    assert (scaled["N"], scaled["M"]) == (out["N"], out["M"])
    assert scaled["C"] == pytest.approx(10 * out["C"], rel=1e-12)


def test_positivity_transport_matches_euclidean_gram(scalar_model):
    rng = np.random.default_rng(7)
    basis = [TestFunction.gaussian((rng.uniform(1.0, 1.6), *rng.normal(scale=0.3, size=3)), 0.15) for _ in range(4)]
    E = np.array([[euclidean_pair(1.0, a.reflected().conj(), b) for b in basis] for a in basis])
    out = ct.positivity_transport(scalar_model, basis, E)
    assert out["psd"]
    assert out["min_eig"] >= -1e-9 * out["norm"]
    assert out["agreement"] <= 1e-6


def test_cluster_rate_on_synthetic_decay():
    lams = np.linspace(1.0, 12.0, 30)
    y = 0.7 * np.exp(-1.3 * lams) * lams ** -1.5
    fit = ct.cluster_rate(lams, y, lam_min=2.0)
    assert fit["kappa"] == pytest.approx(1.3, abs=1e-10)
    assert fit["power"] == pytest.approx(1.5, abs=1e-9)
    assert math.isnan(ct.cluster_rate([1.0, 2.0], [1.0, 0.5])["kappa"])


def test_model_json_roundtrip(scalar_model):
    back = ct.SpectralModel.from_json(json.loads(json.dumps(scalar_model.to_json())))
    assert back.poles == scalar_model.poles
    assert back.total_weight == pytest.approx(scalar_model.total_weight)
    np.testing.assert_allclose(back.slice(TAUS), scalar_model.slice(TAUS), rtol=1e-15)


def test_cluster_transport_rate(scalar_model):
    lams = np.linspace(3.0, 15.0, 25)
    wight = [ct.continue_to_wightman(scalar_model, [0.4 * lam, lam, 0.0, 0.0]).real for lam in lams]
    eucl = [ct.euclidean_from_model(scalar_model, [lam, 0.0, 0.0, 0.0]) for lam in lams]
    # the Minkowski data decay in the invariant distance sqrt(1 - 0.4^2) lam
    kw = ct.cluster_rate(lams * math.sqrt(1 - 0.16), wight, lam_min=2.0)["kappa"]
    ke = ct.cluster_rate(lams, eucl, lam_min=2.0)["kappa"]
    assert ke == pytest.approx(1.0, rel=0.1)
    assert kw == pytest.approx(ke, rel=0.1)
