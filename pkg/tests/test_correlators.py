import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qgv.correlators import (
    EMPTY,
    FieldIndex,
    Permutation,
    TranslationError,
    apply_permutation,
    reduce_to_differences,
    smear,
)
from qgv.free_fields import fermion_toy_family, free_scalar_family, maxwell_family
from qgv.testfunctions import GridFunction, TestFunction

PHI2 = FieldIndex((("phi", None),) * 2)


@pytest.fixture(scope="module")
def scalar():
    return free_scalar_family(1.0)


def gaussians(seed, n, width=0.6):
    rng = np.random.default_rng(seed)
    return [TestFunction.gaussian(rng.normal(size=4), width) for _ in range(n)]


def test_empty_index_is_one(scalar):
    assert smear(scalar, EMPTY, ()) == (1.0, 0.0)
    assert smear(maxwell_family(), EMPTY, ()) == (1.0, 0.0)
    with pytest.raises(ValueError):
        scalar.evaluate(EMPTY, (TestFunction.zero(),))


def test_smear_rejects_bad_inputs(scalar):
    f = TestFunction.gaussian((0, 0, 0, 0), 1.0)
    with pytest.raises(ValueError):
        smear(scalar, PHI2, (f,))
    with pytest.raises(ValueError):
        smear(scalar, FieldIndex((("psi", None),)), (f,))
    with pytest.raises(ValueError):
        smear(scalar, FieldIndex((("phi", None),)), (GridFunction(np.ones((4, 4))),))


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_smear_multilinear(scalar, seed, a, b):
    f, g, h = gaussians(seed, 3)
    idx = FieldIndex((("phi", None),) * 2)
    lhs = smear(scalar, idx, (a * f + b * h, g))[0]
    rhs = a * smear(scalar, idx, (f, g))[0] + b * smear(scalar, idx, (h, g))[0]
    assert abs(lhs - rhs) <= 1e-13 * max(abs(lhs), abs(rhs), 1e-300) + 1e-300
    assert smear(scalar, idx, (2.0 * f, g))[0] == 2.0 * smear(scalar, idx, (f, g))[0]


def test_permutation_identity_and_inverse_bit_exact(scalar):
    fs = gaussians(1, 4)
    idx = FieldIndex((("phi", None),) * 4)
    base = smear(scalar, idx, fs)[0]
    assert apply_permutation(scalar, idx, Permutation.identity(4, 0), fs)[0] == base
    p = Permutation((), (2, 0, 3, 1))
    from qgv.correlators import permute

    idx2, fs2 = permute(idx, p, tuple(fs))
    idx3, fs3 = permute(idx2, p.inverse(), fs2)
    assert idx3 == idx and fs3 == tuple(fs)


def test_bosonic_swap_of_field_strengths():
    fam = maxwell_family()
    f, g = gaussians(2, 2)
    idx = FieldIndex((("F", (0, 1)), ("F", (1, 2))))
    a = smear(fam, idx, (f, g))[0]
    b = apply_permutation(fam, idx, Permutation((), (1, 0)), (f, g))[0]
    assert b == pytest.approx(a, rel=1e-13)


def test_fermionic_sign_rule():
    fam = fermion_toy_family(1.0)
    idx = FieldIndex((("psi", 0),) * 2)
    p = Permutation((), (1, 0))
    assert p.sign(idx, fam.catalog) == -1
    assert Permutation((), (1, 2, 0)).sign(FieldIndex((("psi", 0),) * 3), fam.catalog) == 1
    f, g = gaussians(3, 2)
    direct = smear(fam, FieldIndex((("psi", 0),) * 2), (g, f))[0]
    assert apply_permutation(fam, idx, p, (f, g))[0] == -direct


def test_permutation_validation():
    with pytest.raises(ValueError):
        Permutation((), (0, 0))
    scalar = free_scalar_family(1.0)
    with pytest.raises(ValueError):
        apply_permutation(scalar, PHI2, Permutation((), (0, 1, 2)), gaussians(4, 3))


def test_difference_form_roundtrip(scalar):
    form = reduce_to_differences(scalar, PHI2)
    assert form.translation_defect <= 1e-13
    xi = np.array([[0.3, -0.5, 0.8, 0.1]])
    v0 = form(xi)[0]
    for anchor in ([1.0, 2.0, -3.0, 0.5], [-7.0, 0.1, 0.1, 4.0]):
        pts = form.placement(xi, anchor)
        assert abs(scalar.kernel(PHI2, pts)[0] - v0) <= 1e-14 * abs(v0)


def test_difference_form_single_argument(scalar):
    form = reduce_to_differences(scalar, FieldIndex((("phi", None),)))
    assert form(np.zeros((0, 4)))[0] == 0
    assert form(np.zeros((0, 4)), anchor=[3.0, 1.0, 0, 0])[0] == 0


def test_non_translation_invariant_family_is_rejected():
    fam = free_scalar_family(1.0)
    fam.translation_invariant = False
    with pytest.raises(TranslationError):
        reduce_to_differences(fam, PHI2)
    with pytest.raises(TranslationError):
        reduce_to_differences(fermion_toy_family(), FieldIndex((("psi", 0),) * 2))


def test_index_json_roundtrip():
    idx = FieldIndex((("F", (0, 1)), ("phi", None)), ((0, 2), (0, 3)))
    assert FieldIndex.from_json(json.loads(json.dumps(idx.to_json()))) == idx
    with pytest.raises(ValueError):
        FieldIndex((), ((0, 4),)).validate({}, None)


def test_descriptor_is_serializable(scalar):
    d = scalar.descriptor()
    assert json.loads(json.dumps(d))["name"] == "free_scalar"
    assert scalar.content_hash() == free_scalar_family(1.0).content_hash()
    assert scalar.content_hash() != free_scalar_family(2.0).content_hash()
