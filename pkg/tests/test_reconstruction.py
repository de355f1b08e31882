import json

import numpy as np
import pytest

from qgv import reconstruction as rc
from qgv.algebra import SpacetimeRep, group, haar_sample
from qgv.axioms import charged_scalar_family, sign_flipped_family
from qgv.correlators import FieldIndex
from qgv.free_fields import euclidean_pair, free_scalar_family, maxwell_family
from qgv.gram import GramMatrix
from qgv.testfunctions import TestFunction

PHI1 = FieldIndex((("phi", None),))


@pytest.fixture(scope="module")
def scalar_space():
    return rc.build_physical(free_scalar_family(1.0))


def test_two_vector_example():
    # Omega and phi(f): orthogonal, norms 1 and S(theta f, f)
    fam = free_scalar_family(1.0)
    f = TestFunction.gaussian((1.0, 0.1, 0, 0), 0.2)
    basis = [rc.SequenceVector.vacuum(2), rc.SequenceVector.monomial(PHI1, (f,), cap=2)]
    space = rc.build_physical(fam, basis=basis)
    assert space.dim == 2 and space.null_dim == 0
    G = space.gram.entries
    assert G[0, 0] == 1 and abs(G[0, 1]) == 0
    oracle = euclidean_pair(1.0, f.reflected().conj(), f).real
    assert G[1, 1].real == pytest.approx(oracle, rel=1e-12)


def test_vev_gram_vs_direct(scalar_space):
    out = rc.vev_roundtrip(scalar_space)
    assert max(len(t.fs) for v in scalar_space.basis for t in v.terms) == 2
    assert out["gram_defect"] <= 1e-12
    assert out["quotient_defect"] <= 1e-12


def test_vev_through_degree_four():
    fam = free_scalar_family(1.0)
    tests = rc.positive_time_tests(2)
    basis = [rc.SequenceVector.vacuum(8)]
    for deg in range(1, 5):
        basis.append(rc.SequenceVector.monomial(FieldIndex((("phi", None),) * deg), (tests[0],) * (deg - 1) + (tests[1],), cap=8))
    space = rc.build_physical(fam, basis=basis)
    out = rc.vev_roundtrip(space)
    assert len(out["rows"]) == 4
    assert out["gram_defect"] <= 1e-12 and out["quotient_defect"] <= 1e-12


def test_quotient_inner_product_strictly_positive(scalar_space):
    ip = np.diag(scalar_space.inner_product)
    assert ip.min() > scalar_space.cutoff > 0
    C = scalar_space.coords
    np.testing.assert_allclose(C.conj().T @ C, scalar_space.gram.entries,
                               atol=1e-10 * scalar_space.gram.norm)
    assert rc.vacuum_cyclicity(scalar_space)["spans"]


def test_cauchy_schwarz_closure(scalar_space):
    # append combinations of existing vectors so the quotient has null directions
    b = scalar_space.basis
    extra = [b[1] + b[2] * 0.5, b[4] - b[5], (b[1] + b[6]) * 1j]
    space = rc.build_physical(scalar_space.family, basis=b + extra)
    assert space.null_dim == 3 and space.dim == scalar_space.dim
    assert rc.cauchy_schwarz_closure(space) <= 1e-9


def test_duplicate_basis_vector_is_null():
    fam = free_scalar_family(1.0)
    f = rc.positive_time_tests(1)[0]
    v = rc.SequenceVector.monomial(PHI1, (f,), cap=2)
    space = rc.build_physical(fam, basis=[rc.SequenceVector.vacuum(2), v, v * 2.0])
    assert space.dim == 2 and space.null_dim == 1
    (c,) = space.null_vectors()
    assert abs(c[0]) < 1e-12 and abs(c[1] + 2 * c[2]) < 1e-8 * np.abs(c).max()


def test_indefinite_family_is_rejected():
    tests = rc.positive_time_tests(3)
    with pytest.raises(rc.PositivityViolation):
        rc.build_physical(sign_flipped_family(), tests=tests)
    with pytest.raises(rc.PositivityViolation):
        rc.quotient(GramMatrix(np.array([[1.0, 2.0], [2.0, 1.0]])))


def test_double_build_intertwiner(scalar_space):
    other = rc.rebuild(scalar_space)
    out = rc.verify_uniqueness(scalar_space, other)
    assert out["dim"] == scalar_space.dim
    assert out["isometry_defect"] <= 1e-10
    assert out["omega_defect"] <= 1e-10
    assert out["isometric"]


def test_uniqueness_rejects_mismatched_spaces(scalar_space):
    small = rc.build_physical(free_scalar_family(1.0), basis=scalar_space.basis[:3])
    with pytest.raises(rc.UniquenessError):
        rc.verify_uniqueness(scalar_space, small)


def test_field_operator_preserves_null_space():
    fam = free_scalar_family(1.0)
    f = rc.positive_time_tests(1)[0]
    v = rc.SequenceVector.monomial(PHI1, (f,), cap=4)
    space = rc.build_physical(fam, basis=[rc.SequenceVector.vacuum(4), v, v * -1.0])
    X = TestFunction.gaussian((1.3, 0, 0.2, 0), 0.2)
    op = rc.FieldOperatorMap("matter", "phi")
    assert rc.quotient_well_defined(space, op, X) <= 1e-8 * np.sqrt(space.gram.norm)
    with pytest.raises(ValueError):
        rc.FieldOperatorMap("composite", ":psi2:")


def test_spatial_rotation_is_unitary(scalar_space):
    # U = V fixes the time axis; the reflection pairing is invariant under it
    U = haar_sample(group("SU2"), np.random.default_rng(3)).matrix
    rep = SpacetimeRep.euclidean(U, U, a=(0.0, 0.3, -0.2, 0.1))
    fam = scalar_space.family
    moved = [rc.act_poincare(scalar_space, rep, v) for v in scalar_space.basis]
    M = np.array([[rc.pair_vectors(fam, a, b)[0] for b in moved] for a in moved])
    assert np.abs(M - scalar_space.gram.entries).max() <= 1e-10 * scalar_space.gram.norm
    with pytest.raises(ValueError):
        rc.act_poincare(scalar_space, SpacetimeRep.euclidean(U, U, a=(0.5, 0, 0, 0)), scalar_space.basis[1])


def test_gauge_invariance_of_physical_spaces():
    eps = TestFunction.gaussian((0.2, 0, 0, 0), 1.0, 0.3)
    charged = rc.build_physical(charged_scalar_family(1.0), tests=rc.positive_time_tests(2))
    assert rc.gauge_invariance_defect(charged, eps) <= 1e-8
    assert rc.gauge_invariance_defect(charged, 0.7) <= 1e-12
    maxwell = rc.build_physical(maxwell_family(), tests=rc.positive_time_tests(2))
    assert maxwell.dim >= 2
    assert rc.gauge_invariance_defect(maxwell, eps) <= 1e-8


def test_physical_space_serialization(scalar_space, tmp_path):
    p = tmp_path / "space.json"
    scalar_space.save(p)
    blob = json.loads(p.read_text())
    assert blob["dim"] == scalar_space.dim and blob["null_dim"] == scalar_space.null_dim
    z = np.load(p.with_suffix(".npz"))
    np.testing.assert_array_equal(z["coords"], scalar_space.coords)
