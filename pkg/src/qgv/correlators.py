"""Indexed correlator families, permutations with fermionic signs and the
translation-reduced difference form.

Argument order convention: matter slots x_1..x_j first, then gauge slots
y_1..y_n.  A family is known only through its pairing with test functions
(``evaluator``); exact and lattice families may also carry a pointwise
``kernel`` used by the difference form.
"""
from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .algebra import GaugeGroup, Metric, SpinorIndexSet
from .testfunctions import DIM, WORKING_SET, GridFunction, TestFunction


class Source(str, enum.Enum):
    EXACT_FREE = "exact_free"
    LATTICE_ESTIMATE = "lattice_estimate"
    RECONSTRUCTED = "reconstructed"


@dataclass(frozen=True)
class FieldIndex:
    """``matter``: ((label, component), ...); ``gauge``: ((alpha, mu), ...)."""

    matter: tuple = ()
    gauge: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "matter", tuple((str(k), _freeze(v)) for k, v in self.matter))
        object.__setattr__(self, "gauge", tuple((int(a), int(mu)) for a, mu in self.gauge))

    @property
    def j(self) -> int:
        return len(self.matter)

    @property
    def n(self) -> int:
        return len(self.gauge)

    @property
    def degree(self) -> int:
        return self.j + self.n

    def validate(self, catalog: dict, grp: GaugeGroup | None = None) -> None:
        for k, _ in self.matter:
            if k not in catalog:
                raise ValueError(f"matter label {k!r} not in catalog {sorted(catalog)}")
        for a, mu in self.gauge:
            if grp is not None and not 0 <= a < grp.dim_algebra:
                raise ValueError(f"gauge index {a} out of range for {grp.kind.value}")
            if not 0 <= mu < DIM:
                raise ValueError(f"vector index {mu} out of range")

    def concat(self, other: FieldIndex) -> FieldIndex:
        return FieldIndex(self.matter + other.matter, self.gauge + other.gauge)

    def to_json(self) -> dict:
        return {"matter": [[k, _thaw(v)] for k, v in self.matter], "gauge": [list(g) for g in self.gauge]}

    @classmethod
    def from_json(cls, d: dict) -> FieldIndex:
        return cls(tuple((k, v) for k, v in d.get("matter", [])), tuple(tuple(g) for g in d.get("gauge", [])))


def _freeze(v):
    if isinstance(v, (list, tuple)):
        return tuple(_freeze(x) for x in v)
    return v


def _thaw(v):
    if isinstance(v, tuple):
        return [_thaw(x) for x in v]
    return v


EMPTY = FieldIndex()


def _parity(perm) -> int:
    perm = list(perm)
    seen = [False] * len(perm)
    sign = 1
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


@dataclass(frozen=True)
class Permutation:
    """New slot ``i`` takes old slot ``sigma[i]`` (gauge) / ``pi[i]`` (matter)."""

    sigma: tuple = ()
    pi: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "sigma", tuple(int(i) for i in self.sigma))
        object.__setattr__(self, "pi", tuple(int(i) for i in self.pi))
        for p in (self.sigma, self.pi):
            if sorted(p) != list(range(len(p))):
                raise ValueError(f"{p} is not a permutation")

    @classmethod
    def identity(cls, j: int, n: int) -> Permutation:
        return cls(tuple(range(n)), tuple(range(j)))

    def inverse(self) -> Permutation:
        return Permutation(tuple(np.argsort(self.sigma)), tuple(np.argsort(self.pi)))

    def sign(self, idx: FieldIndex, catalog: dict) -> int:
        """-1 iff the induced permutation of fermionic matter slots is odd."""
        ferm = [i for i, (k, _) in enumerate(idx.matter) if catalog[k].fermionic]
        pos = {old: r for r, old in enumerate(ferm)}
        induced = [pos[old] for old in self.pi if old in pos]
        return _parity(induced)


def fermionic_label(v: SpinorIndexSet) -> bool:
    return v.fermionic


@dataclass
class CorrelatorFamily:
    name: str
    metric: Metric
    source: Source
    evaluator: Callable
    catalog: dict = field(default_factory=dict)
    group: GaugeGroup | None = None
    kernel: Callable | None = None
    translation_invariant: bool = True
    degree_cap: int = 8
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.metric = Metric(self.metric)
        self.source = Source(self.source)

    @property
    def exact(self) -> bool:
        return self.source is not Source.LATTICE_ESTIMATE

    def evaluate(self, idx: FieldIndex, fs: tuple) -> tuple[complex, float]:
        if idx.degree == 0:
            if fs:
                raise ValueError("empty index takes no test functions")
            return 1.0 + 0.0j, 0.0
        if idx.degree > self.degree_cap:
            raise ValueError(f"degree {idx.degree} exceeds family cap {self.degree_cap}")
        val, err = self.evaluator(idx, tuple(fs))
        if self.source is Source.EXACT_FREE:
            err = 0.0
        return complex(val), float(err)

    def descriptor(self) -> dict:
        d = {"name": self.name, "metric": self.metric.value, "source": self.source.value,
             "catalog": {k: [v.undotted, v.dotted] for k, v in self.catalog.items()},
             "group": self.group.kind.value if self.group else None,
             "working_set": WORKING_SET}
        d.update({k: v for k, v in self.meta.items() if _jsonable(v)})
        return d

    def content_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.descriptor(), sort_keys=True, default=str).encode()).hexdigest()


def _jsonable(v) -> bool:
    try:
        json.dumps(v)
        return True
    except TypeError:
        return False


def smear(fam: CorrelatorFamily, idx: FieldIndex, fs) -> tuple[complex, float]:
    """Pair the family with one test function per slot (no conjugation)."""
    fs = tuple(fs)
    if len(fs) != idx.degree:
        raise ValueError(f"index has {idx.degree} slots but {len(fs)} test functions were given")
    for f in fs:
        if not isinstance(f, (TestFunction, GridFunction)):
            raise TypeError(f"unsupported test function {type(f).__name__}")
        if isinstance(f, GridFunction) and fam.source is not Source.LATTICE_ESTIMATE:
            raise ValueError("grid test functions require a lattice family")
    idx.validate(fam.catalog, fam.group)
    return fam.evaluate(idx, fs)


def permute(idx: FieldIndex, perm: Permutation, args) -> tuple[FieldIndex, tuple]:
    if len(perm.pi) != idx.j or len(perm.sigma) != idx.n or len(args) != idx.degree:
        raise ValueError("permutation does not match the index lengths")
    m_args, g_args = args[: idx.j], args[idx.j:]
    new_idx = FieldIndex(tuple(idx.matter[i] for i in perm.pi), tuple(idx.gauge[i] for i in perm.sigma))
    new_args = tuple(m_args[i] for i in perm.pi) + tuple(g_args[i] for i in perm.sigma)
    return new_idx, new_args


def apply_permutation(fam: CorrelatorFamily, idx: FieldIndex, perm: Permutation, args) -> tuple[complex, float]:
    new_idx, new_args = permute(idx, perm, tuple(args))
    val, err = smear(fam, new_idx, new_args)
    return perm.sign(idx, fam.catalog) * val, err


# --- difference form ---------------------------------------------------------------


class TranslationError(ValueError):
    """Family failed the randomized translation test."""


@dataclass
class DifferenceForm:
    """Pointwise kernel as a function of consecutive differences.

    Differences are taken along the concatenated argument list
    (x_1..x_j, y_1..y_n): ``d_i = z_{i+1} - z_i``.  ``slice_override`` lets a
    family supply its own spatial-momentum slices C(tau, p).
    """

    family: CorrelatorFamily
    idx: FieldIndex
    translation_defect: float = 0.0
    slice_override: Callable | None = None

    def placement(self, diffs, anchor=None) -> np.ndarray:
        diffs = np.asarray(diffs, dtype=float).reshape(-1, DIM)
        if diffs.shape[0] != max(self.idx.degree - 1, 0):
            raise ValueError("wrong number of difference vectors")
        anchor = np.zeros(DIM) if anchor is None else np.asarray(anchor, dtype=float)
        pts = [anchor]
        for d in diffs:
            pts.append(pts[-1] + d)
        return np.array(pts)

    def __call__(self, diffs, anchor=None) -> tuple[complex, float]:
        return self.family.kernel(self.idx, self.placement(diffs, anchor))

    def momentum_slice(self, tau, p: float) -> np.ndarray:
        """Spatial Fourier transform ``C(tau, p) = int d^3x e^{-i p.x} K(tau, x)`` of a 2-point form."""
        if self.idx.degree != 2:
            raise ValueError("momentum slices are defined for 2-point forms")
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        if self.slice_override is not None:
            return np.asarray(self.slice_override(tau, p), dtype=float)
        if "radial" in self.family.meta:
            radial = self.family.meta["radial"]
        else:
            def radial(rr):
                return np.array([self(np.array([0.0, r_, 0.0, 0.0]))[0].real for r_ in np.atleast_1d(rr)])
        return np.array([_radial_slice(radial, t, p) for t in tau])


def _radial_slice(radial: Callable, tau: float, p: float) -> float:
    from scipy import integrate

    def k(r):
        return radial(math.hypot(tau, r))

    if p == 0:
        val = integrate.quad(lambda r: 4 * math.pi * r * r * k(r), 0, np.inf, epsabs=0, epsrel=1e-11, limit=400)[0]
    else:
        val = integrate.quad(lambda r: 4 * math.pi * r * k(r) / p, 0, np.inf, weight="sin", wvar=p, limlst=200)[0]
    return float(val)


def reduce_to_differences(fam: CorrelatorFamily, idx: FieldIndex, rng=None, trials: int = 5) -> DifferenceForm:
    """Reduce a translation-invariant family to its difference form.

    A randomized translation test is run first; exact families must agree to
    1e-12 relative, estimated ones within 5 sigma.
    """
    if fam.kernel is None:
        raise TranslationError(f"family {fam.name} has no pointwise kernel")
    if not fam.translation_invariant:
        raise TranslationError(f"family {fam.name} is not declared translation-invariant")
    rng = np.random.default_rng(0) if rng is None else rng
    form = DifferenceForm(fam, idx, slice_override=fam.meta.get("slice_override"))
    worst = 0.0
    for _ in range(trials):
        k = max(idx.degree - 1, 0)
        diffs = fam.meta.get("diff_sampler", lambda r, k_: r.normal(size=(k_, DIM)) + 1.5)(rng, k)
        shift = fam.meta.get("translation_sampler", lambda r: r.normal(scale=3.0, size=DIM))(rng)
        v0, e0 = form(diffs)
        v1, e1 = form(diffs, anchor=shift)
        dev = abs(v1 - v0)
        if fam.exact:
            rel = dev / max(abs(v0), 1e-300)
            worst = max(worst, rel)
            if rel > 1e-12:
                raise TranslationError(f"translation defect {rel:.2e} exceeds 1e-12")
        else:
            sig = math.hypot(e0, e1)
            z = dev / sig if sig > 0 else (0.0 if dev == 0 else math.inf)
            worst = max(worst, z)
            if z > 5:
                raise TranslationError(f"translation defect {z:.1f} sigma exceeds 5 sigma")
    form.translation_defect = worst
    return form
