import json
import math

import numpy as np
import pytest

from qgv import axioms
from qgv.free_fields import free_scalar_family, maxwell_family
from qgv.lattice.core import Action, Lattice
from qgv.lattice.ensemble import composite_correlator, generate_ensemble
from qgv.testfunctions import TestFunction

TARGETS = {
    "sign_flipped": "reflection_positivity",
    "time_reflected": "temporal_support",
    "nonfactorizing": "cluster",
}


@pytest.fixture(scope="module")
def scalar_reports():
    return {r.axiom: r for r in axioms.run_suite(free_scalar_family(1.0))}


def test_report_validates_verdict():
    with pytest.raises(ValueError):
        axioms.AxiomReport("x", "y", "maybe")
    rep = axioms.AxiomReport("x", "y", "pass", {"z": 1 + 2j, "a": np.arange(3)})
    blob = json.loads(json.dumps(rep.to_json()))
    assert blob["quantities"]["z"] == {"re": 1.0, "im": 2.0}
    assert blob["quantities"]["a"] == [0, 1, 2]


def test_free_scalar_passes_every_applicable_checker(scalar_reports):
    for name, rep in scalar_reports.items():
        assert rep.verdict in ("pass", "inapplicable"), (name, rep.reason)
    assert scalar_reports["gauge_covariance"].verdict == "inapplicable"


def test_free_scalar_quantities(scalar_reports):
    cov = scalar_reports["euclidean_covariance"].quantities
    assert cov["max_relative_defect"] <= 1e-8 and cov["identity_bit_exact"]
    assert scalar_reports["symmetry"].quantities["max_relative_discrepancy"] <= 1e-12
    cl = scalar_reports["cluster"].quantities
    assert cl["kappa"] == pytest.approx(1.0, abs=0.05)
    rp = scalar_reports["reflection_positivity"]
    assert rp.quantities["min_eig"] >= -1e-10 * rp.quantities["norm"]
    for s in scalar_reports["temporal_support"].quantities["slices"]:
        assert s["mu2"][0] == pytest.approx(1.0, rel=1e-6)


def test_free_scalar_growth_exponent_is_one_half(scalar_reports):
    # Gaussian moments (2n-1)!! grow like sqrt(m!)
    q = scalar_reports["linear_growth"].quantities
    assert q["d"] == pytest.approx(0.5, abs=0.1)
    assert q["residual"] < 0.05


def test_growth_fit_recovers_synthetic_exponent():
    ms = [2, 4, 6, 8]
    for d, C, a in [(1.0, 0.3, 0.0), (0.5, 2.0, 0.2), (1.7, 1.0, -0.4)]:
        w = [C * math.exp(a * m) * math.factorial(m) ** d for m in ms]
        fit = axioms.growth_fit(ms, w)
        assert fit["d"] == pytest.approx(d, abs=1e-9)
        assert fit["C"] == pytest.approx(C, rel=1e-9)
        assert fit["residual"] < 1e-9


@pytest.mark.parametrize("name,target", sorted(TARGETS.items()))
def test_counterexample_fails_only_its_target(name, target):
    fam = axioms.counterexample_families()[target]
    assert fam.name == name
    reports = axioms.run_suite(fam)
    failed = [r.axiom for r in reports if r.verdict == "fail"]
    assert failed == [target]
    assert all(r.verdict in ("pass", "inapplicable") for r in reports if r.axiom != target)


def test_sign_flip_witness_is_negative():
    rep = axioms.check_reflection_positivity(axioms.sign_flipped_family())
    assert rep.quantities["min_eig"] < -rep.tolerance


def test_time_reflected_slice_fails_nonnegative_energy():
    rep = axioms.check_temporal_support(axioms.time_reflected_family())
    assert any(s["verdict"] == "fail" for s in rep.quantities["slices"])


def test_nonfactorizing_plateau_matches_constant():
    c = 0.05
    rep = axioms.check_cluster(axioms.nonfactorizing_family(c=c))
    f = TestFunction.gaussian((0, 0, 0, 0), 0.7)
    plateau = c * abs(f.integral()) ** 2
    assert rep.quantities["D"][-1] == pytest.approx(plateau, rel=1e-3)


def test_charged_scalar_results():
    fam = axioms.charged_scalar_family(1.0)
    g = axioms.check_gauge_covariance(fam)
    assert g.passed
    assert g.quantities["a_invariant_composites"] <= 1e-12
    pos = axioms.check_renormalized_positivity(fam)
    assert pos.passed and pos.quantities["form"] == "pos1"
    assert pos.quantities["paired"].real > 0 and pos.quantities["one_point"] == 0


def test_maxwell_results():
    fam = maxwell_family()
    assert axioms.check_temporal_support(fam).verdict == "inapplicable"
    g = axioms.check_gauge_covariance(fam)
    assert g.passed and g.quantities["c_potential_shift"] <= 1e-8
    pos = axioms.check_renormalized_positivity(fam)
    assert pos.passed and pos.quantities["C_terms"] == 0.0
    assert pos.quantities["paired"].real >= -1e-10 * abs(pos.quantities["paired"])


def test_run_suite_rejects_unknown_axiom():
    with pytest.raises(KeyError):
        axioms.run_suite(free_scalar_family(), ["frobnicate"])
    assert set(axioms.EUCLIDEAN_AXIOMS) < set(axioms.AXIOM_NAMES)


@pytest.mark.parametrize("kind", ["U1", "SU2", "SU3"])
def test_lattice_gauge_covariance(kind):
    ens = generate_ensemble(Lattice((4, 4)), kind, Action(2.0), seed=31, n_configs=20)
    rep = axioms.check_gauge_covariance(ens)
    assert rep.passed, rep.reason
    assert rep.tolerance <= 1e-12


def test_lattice_reflection_and_renormalized_positivity():
    ens = generate_ensemble(Lattice((8, 8)), "U1", Action(1.0, 0.2, 0.5), seed=32, n_configs=200)
    rp = axioms.check_reflection_positivity(ens)
    assert rp.passed
    assert rp.quantities["min_eig"] >= -3 * rp.quantities["min_eig_error"] or rp.quantities["min_eig"] >= 0
    pos = axioms.check_renormalized_positivity(ens)
    assert pos.passed
    fam = composite_correlator(ens, "phi2", [(0, 1), (0, 2), (0, 4)])
    assert axioms.check_linear_growth(fam).verdict == "inapplicable"
    assert axioms.check_temporal_support(fam).verdict == "inapplicable"


def test_pure_gauge_ensemble_has_no_matter_composite():
    ens = generate_ensemble(Lattice((4, 4)), "U1", Action(1.0), seed=33, n_configs=20)
    assert axioms.check_renormalized_positivity(ens).verdict == "inapplicable"
