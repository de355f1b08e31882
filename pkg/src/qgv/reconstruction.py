"""Finite-truncation reconstruction: sequence space, scalar product, null
quotient, field operators, symmetry and gauge actions, uniqueness.

Vectors are finite sums of terms ``c * O_1(f_1) ... O_k(f_k) Omega``.  The
scalar product of two terms is the family evaluated on the starred first term
followed by the second one; for Euclidean families the star is the time
reflection (reflection positivity pairing), for Minkowski families it is
conjugation and slot reversal.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import kernels
from .algebra import Metric, SpacetimeRep, vector_rep_matrix
from .axioms import CONJUGATE_LABEL, theta
from .correlators import EMPTY, CorrelatorFamily, FieldIndex, smear
from .free_fields import gauge_shift_field, maxwell_tensor
from .gram import GramMatrix
from .testfunctions import DIM, THETA, TestFunction, multiply, overlap, quadrature_nodes

NULL_EPS = 1e-10
DEFAULT_CAP = 4
COMPOSITES = (":phi2:", ":F2:")
PROJECTION_TOL = 1e-6


class PositivityViolation(ValueError):
    """Gram matrix has an eigenvalue below the tolerance."""


class UniquenessError(ValueError):
    """Two builds of the same physical space disagree in dimension."""


# --- vectors ------------------------------------------------------------------------


@dataclass(frozen=True)
class Term:
    idx: FieldIndex
    coef: complex
    fs: tuple
    eps: TestFunction | None = None  # abelian gauge parameter carried by composite slots

    @property
    def degree(self) -> int:
        return self.idx.degree

    @property
    def composite(self) -> bool:
        return any(k in COMPOSITES for k, _ in self.idx.matter)

    def key(self) -> str:
        return json.dumps({"idx": self.idx.to_json(), "fs": [f.to_json() for f in self.fs],
                           "eps": None if self.eps is None else self.eps.to_json()}, sort_keys=True, default=str)


@dataclass(frozen=True)
class SequenceVector:
    terms: tuple = ()
    cap: int = DEFAULT_CAP
    label: str = ""

    def __post_init__(self):
        for t in self.terms:
            if t.degree > self.cap:
                raise ValueError(f"term degree {t.degree} exceeds cap {self.cap}")

    @classmethod
    def vacuum(cls, cap: int = DEFAULT_CAP) -> SequenceVector:
        return cls((Term(EMPTY, 1.0 + 0j, ()),), cap, "Omega")

    @classmethod
    def monomial(cls, idx: FieldIndex, fs, coef=1.0, cap: int = DEFAULT_CAP, label: str = "") -> SequenceVector:
        return cls((Term(idx, complex(coef), tuple(fs)),), cap, label)

    @property
    def degree(self) -> int:
        return max((t.degree for t in self.terms), default=0)

    def __add__(self, other: SequenceVector) -> SequenceVector:
        return SequenceVector(self.terms + other.terms, max(self.cap, other.cap))

    def __mul__(self, c) -> SequenceVector:
        return SequenceVector(tuple(Term(t.idx, t.coef * c, t.fs, t.eps) for t in self.terms), self.cap, self.label)

    __rmul__ = __mul__

    def __sub__(self, other: SequenceVector) -> SequenceVector:
        return self + other * -1.0

    def descriptor(self) -> str:
        return self.label or "+".join(f"{t.coef:.3g}*{[k for k, _ in t.idx.matter] + list(t.idx.gauge)}" for t in self.terms)


@dataclass(frozen=True)
class FieldOperatorMap:
    """``kind``: 'matter' (label, component), 'gauge' (alpha, mu) or 'composite' (':phi2:' / ':F2:')."""

    kind: str
    label: object = None
    component: object = None

    def __post_init__(self):
        if self.kind not in ("matter", "gauge", "composite"):
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if self.kind == "composite" and self.label not in COMPOSITES:
            raise ValueError(f"composite must be one of {COMPOSITES}")

    @property
    def arity(self) -> int:
        return 1


def apply_field(opmap: FieldOperatorMap, v: SequenceVector, X: TestFunction) -> SequenceVector:
    """Prepend one smearing slot to every term (linear in v and X)."""
    out = []
    for t in v.terms:
        if t.degree + opmap.arity > v.cap:
            raise ValueError(f"applying the operator exceeds the degree cap {v.cap}")
        m_fs, g_fs = t.fs[: t.idx.j], t.fs[t.idx.j:]
        if opmap.kind == "gauge":
            idx = FieldIndex(t.idx.matter, ((opmap.label, opmap.component),) + t.idx.gauge)
            fs = m_fs + (X,) + g_fs
        else:
            idx = FieldIndex(((opmap.label, opmap.component),) + t.idx.matter, t.idx.gauge)
            fs = (X,) + m_fs + g_fs
        out.append(Term(idx, t.coef, fs, t.eps))
    return SequenceVector(tuple(out), v.cap)


# --- scalar product -----------------------------------------------------------------


def _star(fam: CorrelatorFamily, idx: FieldIndex, fs):
    """Conjugated, slot-reversed term (Minkowski star)."""
    matter = []
    for k, comp in reversed(idx.matter):
        if "phibar" in fam.catalog:
            k = CONJUGATE_LABEL.get(k, k)
        matter.append((k, comp))
    gauge = tuple(reversed(idx.gauge))
    m_fs, g_fs = fs[: idx.j], fs[idx.j:]
    new = tuple(f.conj() for f in reversed(m_fs)) + tuple(f.conj() for f in reversed(g_fs))
    return FieldIndex(tuple(matter), gauge), new, 1.0


def _composite_density(kind: str, m: float, z: np.ndarray) -> np.ndarray:
    r = np.linalg.norm(z, axis=-1)
    if kind == ":phi2:":
        return kernels.euclidean_propagator(m, r) ** 2
    # sum_{mnrs} D_mnrs^2 = 8 sum H^2 + 4 (tr H)^2 for the antisymmetrized Hessian
    H = kernels.euclidean_propagator_hessian(0.0, z)
    return 2.0 * (8.0 * np.einsum("...ij,...ij->...", H, H) + 4.0 * np.einsum("...ii->...", H) ** 2)


def composite_pair(kind: str, fam: CorrelatorFamily, a: Term, b: Term, n: int = 5) -> complex:
    """``<:O:(Theta f_a) :O:(f_b)>`` by quadrature on the nodes (normal-ordered, free fields)."""
    fa, fb = a.fs[0], b.fs[0]
    ya, wa = quadrature_nodes(fa, n)
    x, wa = ya @ THETA.T, np.conj(wa)
    yb, wb = quadrature_nodes(fb, n)
    z = x[:, None, :] - yb[None, :, :]
    m = float(fam.meta.get("mass", 0.0))
    dens = _composite_density(kind, m, z)
    val = np.einsum("i,ij,j->", wa, dens, wb)
    if kind == ":phi2:":
        if a.eps is not None or b.eps is not None:
            ex = a.eps(x).real if a.eps is not None else np.zeros(len(x))
            ey = b.eps(yb).real if b.eps is not None else np.zeros(len(yb))
            ph = np.exp(1j * (ey[None, :] - ex[:, None]))
            S = kernels.euclidean_propagator(m, np.linalg.norm(z, axis=-1))
            val = np.einsum("i,ij,j->", wa, (S * ph) * (S * np.conj(ph)), wb)
        return complex(val)
    # F -> F + s: cross terms and squares of the c-number shift
    sx = _reflected_shift(a.eps, ya) if a.eps is not None else None
    sy = gauge_shift_field(b.eps, yb) if b.eps is not None else None
    if sx is not None or sy is not None:
        sx = np.zeros((len(x), DIM, DIM), complex) if sx is None else sx
        sy = np.zeros((len(yb), DIM, DIM), complex) if sy is None else sy
        # s D t = -4 s_mn H_mr t_rn for antisymmetric s, t
        H = kernels.euclidean_propagator_hessian(0.0, z)
        val += -16.0 * np.einsum("i,imn,ijmr,jrn,j->", wa, sx, H, sy, wb, optimize=True)
        val += np.sum(wa * np.einsum("imn,imn->i", sx, sx)) * np.sum(wb * np.einsum("jmn,jmn->j", sy, sy))
    return complex(val)


def _reflected_shift(eps, y):
    s = gauge_shift_field(eps, y)
    sign = np.ones((DIM, DIM))
    sign[0, :] *= -1
    sign[:, 0] *= -1
    return np.conj(s) * sign


def _composite_one_point(kind: str, t: Term, n: int = 5) -> complex:
    """Normal-ordered one-point value: zero unless a gauge shift adds s^2."""
    if kind == ":F2:" and t.eps is not None:
        y, w = quadrature_nodes(t.fs[0], n)
        s = gauge_shift_field(t.eps, y)
        return complex(np.sum(w * np.einsum("jmn,jmn->j", s, s)))
    return 0.0 + 0.0j


class BorchersSpace:
    """Truncated sequence space with the family's (generally indefinite) scalar product."""

    def __init__(self, family: CorrelatorFamily, basis, gram: GramMatrix, errors: np.ndarray, mode: str):
        self.family = family
        self.basis = list(basis)
        self.gram = gram
        self.errors = errors
        self.mode = mode

    def pair(self, v: SequenceVector, w: SequenceVector) -> tuple[complex, float]:
        return pair_vectors(self.family, v, w, self.mode)


def _mode(fam: CorrelatorFamily) -> str:
    return "os" if fam.metric is Metric.EUCLIDEAN else "wightman"


def pair_terms(fam: CorrelatorFamily, a: Term, b: Term, mode: str) -> tuple[complex, float]:
    ca, cb = a.composite, b.composite
    if ca or cb:
        if mode != "os":
            raise ValueError("composite vectors are paired on the Euclidean side only")
        if ca and cb:
            if a.degree != 1 or b.degree != 1 or a.idx.matter[0][0] != b.idx.matter[0][0]:
                raise ValueError("only single composites of one kind are paired")
            return np.conj(a.coef) * b.coef * composite_pair(a.idx.matter[0][0], fam, a, b), 0.0
        other, comp = (b, a) if ca else (a, b)
        if other.degree != 0:
            raise ValueError("mixed composite and elementary pairings are not supported")
        one = _composite_one_point(comp.idx.matter[0][0], comp)
        val = np.conj(one) if ca else one
        return np.conj(a.coef) * b.coef * val, 0.0
    star = theta if mode == "os" else _star
    sidx, sfs, sign = star(fam, a.idx, a.fs)
    idx = sidx.concat(b.idx)
    args = sfs[: sidx.j] + b.fs[: b.idx.j] + sfs[sidx.j:] + b.fs[b.idx.j:]
    if idx.degree == 0:
        v, e = 1.0 + 0j, 0.0
    else:
        v, e = smear(fam, idx, args)
    return np.conj(a.coef) * b.coef * sign * v, abs(a.coef * b.coef) * e


def pair_vectors(fam, v: SequenceVector, w: SequenceVector, mode: str | None = None) -> tuple[complex, float]:
    mode = mode or _mode(fam)
    total, err = 0.0 + 0j, 0.0
    for a in v.terms:
        for b in w.terms:
            val, e = pair_terms(fam, a, b, mode)
            total += val
            err = math.hypot(err, e)
    return total, err


def build_borchers(family: CorrelatorFamily, basis) -> BorchersSpace:
    """Gram matrix of pairwise scalar products over ``basis``."""
    basis = list(basis)
    maxdeg = max((v.degree for v in basis), default=0)
    if family.degree_cap < 2 * maxdeg and not any(t.composite for v in basis for t in v.terms):
        raise ValueError(f"family degree cap {family.degree_cap} is below twice the basis degree {maxdeg}")
    mode = _mode(family)
    n = len(basis)
    M = np.zeros((n, n), dtype=complex)
    E = np.zeros((n, n))
    for i, j in itertools.product(range(n), repeat=2):
        M[i, j], E[i, j] = pair_vectors(family, basis[i], basis[j], mode)
    G = GramMatrix(M, [v.descriptor() for v in basis])
    if family.exact and G.asymmetry > 1e-12 and mode == "os":
        G.descriptors.append(f"hermiticity defect {G.asymmetry:.2e}")
    return BorchersSpace(family, basis, G, E, mode)


# --- physical space -------------------------------------------------------------------


def _eig(M: np.ndarray, backend: str):
    if backend == "numpy":
        return np.linalg.eigh(M)
    if backend == "scipy":
        return scipy.linalg.eigh(M, driver="evr")
    if backend == "svd":
        # PSD part: singular vectors coincide with eigenvectors up to phases
        U, s, Vh = np.linalg.svd(M)
        signs = np.sign(np.real(np.einsum("ij,ji->i", Vh, U)))
        lam = s * signs
        order = np.argsort(lam)
        return lam[order], U[:, order]
    raise ValueError(f"unknown eigen backend {backend!r}")


@dataclass
class PhysicalSpace:
    """Null quotient of the gauge-invariant truncated space.

    ``coords`` (r x n) are the quotient coordinates of the basis vectors; the
    inner product of basis vectors i, j is ``coords[:, i]^dag coords[:, j]``.
    """

    family_name: str
    basis: list
    gram: GramMatrix
    coords: np.ndarray
    spectrum: np.ndarray
    null_dim: int
    cutoff: float
    omega_index: int = 0
    backend: str = "numpy"
    family: CorrelatorFamily | None = None
    notes: list = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.coords.shape[0]

    @property
    def inner_product(self) -> np.ndarray:
        """Quotient inner product on the retained eigendirections (diagonal, strictly PD)."""
        return np.diag(self.spectrum[self.spectrum > self.cutoff])

    @property
    def omega(self) -> np.ndarray:
        return self.coords[:, self.omega_index]

    def inner(self, i: int, j: int) -> complex:
        return complex(np.vdot(self.coords[:, i], self.coords[:, j]))

    def normalized_gram(self) -> tuple[np.ndarray, np.ndarray]:
        return _unit_diagonal(self.gram.entries)

    def null_vectors(self) -> list:
        """Null combinations of basis vectors (coefficient arrays in the original basis)."""
        N, d = self.normalized_gram()
        lam, U = _eig(N, "numpy")
        return [U[:, k] * d for k in range(len(lam)) if lam[k] <= self.cutoff]

    def to_json(self) -> dict:
        return {"family": self.family_name, "basis": [v.descriptor() for v in self.basis], "gram": self.gram.to_json(),
                "spectrum": self.spectrum.tolist(), "null_dim": self.null_dim, "cutoff": self.cutoff,
                "dim": self.dim, "omega": {"re": self.omega.real.tolist(), "im": self.omega.imag.tolist()},
                "backend": self.backend, "notes": self.notes}

    def save(self, path) -> None:
        """JSON descriptor plus a binary ``.npz`` blob with the gram and coordinates."""
        from pathlib import Path

        p = Path(path)
        p.write_text(json.dumps(self.to_json(), indent=1))
        np.savez(p.with_suffix(".npz"), gram=self.gram.entries, coords=self.coords, spectrum=self.spectrum)


def _unit_diagonal(M: np.ndarray):
    """``D M D`` with ``D = diag^-1/2``; vectors of exactly zero norm get ``D = 0``."""
    diag = np.real(np.diag(M))
    d = np.where(diag > 0, 1.0 / np.sqrt(np.where(diag > 0, diag, 1.0)), 0.0)
    return d[:, None] * M * d[None, :], d


def quotient(G: GramMatrix, exact: bool = True, sigma: float = 0.0, backend: str = "numpy"):
    """Unit-diagonal rescaling, then eigen-decomposition; null directions are dropped.

    Returns (coords, spectrum of the rescaled gram, null dimension, cutoff).
    Vectors with vanishing norm are null outright.
    """
    M = G.entries
    diag = np.real(np.diag(M))
    scale = max(float(np.abs(diag).max()), 1e-300)
    if diag.min() < -(NULL_EPS * scale if exact else max(NULL_EPS * scale, 3 * sigma)):
        raise PositivityViolation(f"negative norm {diag.min():.3e} in the basis")
    N, d = _unit_diagonal(M)
    live = d > 0
    lam, U = _eig(N, backend)
    norm = max(float(np.abs(lam).max()), 1e-300)
    cutoff = NULL_EPS * norm
    tol = cutoff if exact else max(cutoff, 3 * sigma * float(d.max() ** 2))
    if lam[0] < -tol:
        raise PositivityViolation(f"gram eigenvalue {lam[0]:.3e} below -{tol:.3e} (unit-diagonal scale)")
    keep = lam > cutoff
    root = np.where(live, np.sqrt(np.clip(diag, 0, None)), 0.0)
    coords = np.sqrt(lam[keep])[:, None] * (U[:, keep].conj().T * root[None, :])
    return coords, lam, int((~keep).sum()), cutoff


def _default_physical_basis(family: CorrelatorFamily, tests, cap: int):
    kind = family.meta.get("kind", "")
    basis = [SequenceVector.vacuum(cap)]
    if kind == "free_maxwell_F":
        basis += [SequenceVector.monomial(FieldIndex(((":F2:", None),)), (f,), cap=cap, label=f":F2:(f{i})")
                  for i, f in enumerate(tests)]
    elif kind == "charged_scalar":
        basis += [SequenceVector.monomial(FieldIndex(((":phi2:", None),)), (f,), cap=cap, label=f":phi2:(f{i})")
                  for i, f in enumerate(tests)]
    elif family.group is None:
        # no gauge constraint: field monomials up to half the cap
        label = next(iter(family.catalog))
        for deg in range(1, cap // 2 + 1):
            for combo in itertools.combinations_with_replacement(range(len(tests)), deg):
                idx = FieldIndex(((label, None),) * deg)
                basis.append(SequenceVector.monomial(idx, tuple(tests[c] for c in combo), cap=cap,
                                                     label=f"{label}^{deg}{combo}"))
    else:
        raise ValueError(f"no gauge-invariant generators tabulated for {family.name}")
    return basis


def build_physical(family: CorrelatorFamily, tests=None, basis=None, cap: int = DEFAULT_CAP,
                   backend: str = "numpy") -> PhysicalSpace:
    """Gauge-invariant generators, Gram matrix, null quotient; Omega is basis vector 0."""
    if basis is None:
        tests = tests if tests is not None else positive_time_tests()
        basis = _default_physical_basis(family, tests, cap)
    space = build_borchers(family, basis)
    coords, lam, null_dim, cutoff = quotient(space.gram, family.exact, float(space.errors.max(initial=0.0)), backend)
    omega_idx = next((i for i, v in enumerate(basis) if v.label == "Omega"), 0)
    ps = PhysicalSpace(family.name, basis, space.gram, coords, lam, null_dim, cutoff, omega_idx, backend, family)
    norm_omega = math.sqrt(abs(ps.inner(omega_idx, omega_idx)))
    if abs(norm_omega - 1) > 1e-8:
        ps.notes.append(f"Omega norm {norm_omega:.12f}")
    return ps


def positive_time_tests(n: int = 3, width: float = 0.15, seed: int = 12) -> list:
    """Narrow Gaussians centred at positive times (leakage below 1e-10)."""
    rng = np.random.default_rng(seed)
    taus = np.linspace(1.0, 1.6, n)
    return [TestFunction.gaussian((t, *rng.normal(scale=0.3, size=3)), width) for t in taus]


# --- properties ---------------------------------------------------------------------


def vev_roundtrip(space: PhysicalSpace) -> dict:
    """<Omega, v> through the quotient coordinates and the gram vs the direct family smear."""
    fam = space.family
    worst_gram, worst_coords, rows = 0.0, 0.0, []
    for j, v in enumerate(space.basis):
        if v.label == "Omega" or any(t.composite for t in v.terms):
            continue
        direct = sum(t.coef * smear(fam, t.idx, t.fs)[0] for t in v.terms)
        via_gram = space.gram.entries[space.omega_index, j]
        via_coords = space.inner(space.omega_index, j)
        scale = max(abs(direct), 1e-300)
        worst_gram = max(worst_gram, abs(via_gram - direct) / max(scale, 1.0))
        worst_coords = max(worst_coords, abs(via_coords - direct) / max(scale, 1.0))
        rows.append({"vector": v.descriptor(), "direct": direct, "gram": via_gram, "quotient": via_coords})
    return {"gram_defect": worst_gram, "quotient_defect": worst_coords, "rows": rows}


def cauchy_schwarz_closure(space: PhysicalSpace) -> float:
    """max |<v, w>| / (|v| |w| |G|) over unit null directions v and basis vectors w (rescaled metric)."""
    N, _ = space.normalized_gram()
    lam, U = _eig(N, "numpy")
    norm = max(float(np.abs(lam).max()), 1e-300)
    worst = 0.0
    for k in range(len(lam)):
        if lam[k] <= space.cutoff:
            worst = max(worst, float(np.abs(N @ U[:, k]).max()) / norm)
    return worst


def combine(space: PhysicalSpace, coeffs) -> SequenceVector:
    terms = []
    for c, v in zip(coeffs, space.basis):
        if c != 0:
            terms.extend((v * c).terms)
    return SequenceVector(tuple(terms), max(v.cap for v in space.basis))


def quotient_well_defined(space: PhysicalSpace, opmap: FieldOperatorMap, X: TestFunction) -> float:
    """Norm of op(v) for null vectors v (should vanish)."""
    worst = 0.0
    for c in space.null_vectors():
        v = combine(space, c)
        try:
            w = apply_field(opmap, v, X)
        except ValueError:
            continue
        val, _ = pair_vectors(space.family, w, w)
        worst = max(worst, math.sqrt(abs(val)))
    return worst


def vacuum_cyclicity(space: PhysicalSpace) -> dict:
    N, _ = space.normalized_gram()
    rank = int(np.sum(np.linalg.eigvalsh(N) > space.cutoff))
    return {"gram_rank": rank, "dim": space.dim, "spans": rank == space.dim}


# --- symmetry and gauge actions ---------------------------------------------------------


def _is_orthogonal(R) -> bool:
    return bool(np.allclose(R @ R.T, np.eye(DIM), atol=1e-12))


def act_poincare(space, rep: SpacetimeRep, v: SequenceVector) -> SequenceVector:
    """``(U v)``: every slot's test function moved by x -> R x + a, components rotated."""
    R = vector_rep_matrix(rep)
    a = np.asarray(rep.a, dtype=float)
    if not _is_orthogonal(R):
        raise ValueError("isotropic Gaussians are closed only under orthogonal affine maps")
    mode = getattr(space, "mode", None) or _mode(space.family)
    if mode == "os" and (abs(R[0, 0] - 1) > 1e-12 or abs(a[0]) > 0):
        raise ValueError("the reflection pairing is invariant only under spatial rotations and translations")
    out = []
    for t in v.terms:
        fs = tuple(f.pullback(R.T, -R.T @ a) for f in t.fs)
        options = []
        for k, comp in t.idx.matter:
            if k == "F":
                mu, nu = comp
                opts = [((k, (p, q)), R[p, mu] * R[q, nu] - R[q, mu] * R[p, nu])
                        for p, q in itertools.combinations(range(DIM), 2)]
                options.append([o for o in opts if o[1] != 0])
            else:
                options.append([((k, comp), 1.0)])
        for combo in itertools.product(*options):
            w = np.prod([c[1] for c in combo]) if combo else 1.0
            eps = None if t.eps is None else t.eps.pullback(R.T, -R.T @ a)
            out.append(Term(FieldIndex(tuple(c[0] for c in combo), t.idx.gauge), t.coef * w, fs, eps))
    return SequenceVector(tuple(out), v.cap, v.label)


def phase_series(eps: TestFunction, f: TestFunction, charge: float, order: int = 12):
    """exp(i q eps) f projected onto the Gaussian class by a truncated series; returns (function, error bound)."""
    if eps.max_order or f.max_order:
        raise ValueError("phase projection needs undifferentiated Gaussians")
    sup = float(sum(abs(t.coef) for t in eps.terms)) * abs(charge)
    out = f
    power = f
    for k in range(1, order + 1):
        power = multiply(eps, power) * (1j * charge / k)
        out = out + power
    l1 = float(sum(abs(t.coef) * t.mass for t in f.terms))
    bound = sup ** (order + 1) / math.factorial(order + 1) * math.exp(sup) * l1
    if bound > PROJECTION_TOL:
        raise ValueError(f"projection error bound {bound:.1e} exceeds {PROJECTION_TOL:.0e}; gauge function too large")
    return out.simplified(), bound


def act_gauge(space, eps, v: SequenceVector, charge: float = 1.0, order: int = 12) -> SequenceVector:
    """Abelian gauge action g = exp(i eps): matter phases, A -> A + d eps, composites carry eps.

    ``eps`` may be a TestFunction or a real constant (constant g: no inhomogeneous term).
    """
    constant = not isinstance(eps, TestFunction)
    out = []
    for t in v.terms:
        if t.composite:
            out.append(Term(t.idx, t.coef, t.fs, None if constant else eps))
            continue
        coef = t.coef
        fs = list(t.fs)
        for i, (k, _) in enumerate(t.idx.matter):
            q = charge if k == "phi" else (-charge if k == "phibar" else 0.0)
            if q == 0:
                continue
            if constant:
                coef = coef * np.exp(1j * q * float(eps))
            else:
                fs[i] = phase_series(eps, fs[i], q, order)[0]
        if constant or t.idx.n == 0:
            out.append(Term(t.idx, coef, tuple(fs), t.eps))
            continue
        # A_mu(X) -> A_mu(X) + int X d_mu eps: expand over subsets of gauge slots
        j = t.idx.j
        for subset in itertools.product((False, True), repeat=t.idx.n):
            c = coef
            gauge, gfs = [], []
            for s, (a, mu), X in zip(subset, t.idx.gauge, fs[j:]):
                if s:
                    c = c * -overlap(X.derivative(tuple(int(d) for d in np.eye(DIM, dtype=int)[mu])), eps)
                else:
                    gauge.append((a, mu))
                    gfs.append(X)
            out.append(Term(FieldIndex(t.idx.matter, tuple(gauge)), c, tuple(fs[:j]) + tuple(gfs), t.eps))
    return SequenceVector(tuple(out), v.cap, v.label)


def gauge_invariance_defect(space: PhysicalSpace, eps) -> float:
    """max relative change of physical pairings under the gauge action."""
    fam = space.family
    moved = [act_gauge(space, eps, v) for v in space.basis]
    worst = 0.0
    scale = max(space.gram.norm, 1e-300)
    for i, j in itertools.product(range(len(moved)), repeat=2):
        val, _ = pair_vectors(fam, moved[i], moved[j])
        worst = max(worst, abs(val - space.gram.entries[i, j]) / scale)
    return worst


# --- uniqueness ---------------------------------------------------------------------------


def rebuild(space: PhysicalSpace, order=None, backend: str = "svd") -> PhysicalSpace:
    """Second build of the same space with a permuted basis and another eigen backend."""
    n = len(space.basis)
    order = list(range(n))[::-1] if order is None else list(order)
    basis = [space.basis[i] for i in order]
    return build_physical(space.family, basis=basis, backend=backend)


def verify_uniqueness(space_a: PhysicalSpace, space_b: PhysicalSpace) -> dict:
    """Intertwiner L = Phi_b P Phi_a^+ on the common basis; checks isometry and L Omega_a = Omega_b."""
    if space_a.dim != space_b.dim:
        raise UniquenessError(f"dimensions differ ({space_a.dim} vs {space_b.dim}); spectra "
                              f"{space_a.spectrum.tolist()} / {space_b.spectrum.tolist()}")
    keys_b = {}
    for i, v in enumerate(space_b.basis):
        keys_b.setdefault(_vkey(v), []).append(i)
    perm = []
    for v in space_a.basis:
        lst = keys_b.get(_vkey(v))
        if not lst:
            raise UniquenessError("the two spaces are not built on a common basis")
        perm.append(lst.pop(0))
    Pa = space_a.coords
    Pb = space_b.coords[:, perm]
    L = Pb @ np.linalg.pinv(Pa)
    iso = float(np.abs(L.conj().T @ L - np.eye(space_a.dim)).max()) if space_a.dim else 0.0
    Ga = Pa.conj().T @ Pa
    pair_defect = float(np.abs((L @ Pa).conj().T @ (L @ Pa) - Ga).max() / max(np.abs(Ga).max(), 1e-300))
    omega = float(np.abs(L @ space_a.omega - space_b.coords[:, space_b.omega_index]).max())
    # the isometry statement is pair preservation; L^dag L - 1 is a conditioning diagnostic
    return {"isometry_defect": pair_defect, "operator_defect": iso, "omega_defect": omega, "L": L,
            "dim": space_a.dim, "isometric": pair_defect <= 1e-10 and omega <= 1e-10}


def _vkey(v: SequenceVector) -> str:
    return "|".join(t.key() + f"#{t.coef}" for t in v.terms)
