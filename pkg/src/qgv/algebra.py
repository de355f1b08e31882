"""Compact gauge groups, their Lie algebras, and the spacetime symmetry representations.

Generator convention: anti-Hermitian basis ``t_a`` with ``tr(t_a t_b) = -delta_ab / 2``
for SU(N), so that ``[t_a, t_b] = C^c_ab t_c`` with real, totally antisymmetric ``C``.
U(1) uses the charge normalization ``t = -i``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

MATRIX_TOL = 1e-12

GENERATOR_NORMALIZATION = "anti-Hermitian, tr(t_a t_b) = -delta_ab/2 (SU(N)); t = -i (U(1))"


class GroupKind(str, enum.Enum):
    U1 = "U1"
    SU2 = "SU2"
    SU3 = "SU3"


_PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


def _gell_mann() -> np.ndarray:
    lam = np.zeros((8, 3, 3), dtype=complex)
    lam[0][0, 1] = lam[0][1, 0] = 1
    lam[1][0, 1], lam[1][1, 0] = -1j, 1j
    lam[2][0, 0], lam[2][1, 1] = 1, -1
    lam[3][0, 2] = lam[3][2, 0] = 1
    lam[4][0, 2], lam[4][2, 0] = -1j, 1j
    lam[5][1, 2] = lam[5][2, 1] = 1
    lam[6][1, 2], lam[6][2, 1] = -1j, 1j
    lam[7] = np.diag([1, 1, -2]) / np.sqrt(3)
    return lam


@dataclass(frozen=True)
class GaugeGroup:
    kind: GroupKind

    def __post_init__(self):
        object.__setattr__(self, "kind", GroupKind(self.kind))

    @property
    def dim_algebra(self) -> int:
        return {GroupKind.U1: 1, GroupKind.SU2: 3, GroupKind.SU3: 8}[self.kind]

    @property
    def matrix_dim(self) -> int:
        return {GroupKind.U1: 1, GroupKind.SU2: 2, GroupKind.SU3: 3}[self.kind]

    @property
    def abelian(self) -> bool:
        return self.kind is GroupKind.U1

    @property
    def notes(self) -> str:
        # U(1) is not simple; it is admitted for abelian exemplars
        return "abelian extension" if self.abelian else ""

    def generators(self) -> np.ndarray:
        """Basis ``t_a`` as an array of shape (dim_algebra, N, N)."""
        return _generators(self.kind).copy()


@lru_cache(maxsize=None)
def _generators(kind: GroupKind) -> np.ndarray:
    if kind is GroupKind.U1:
        return np.array([[[-1j]]])
    if kind is GroupKind.SU2:
        return -0.5j * _PAULI
    return -0.5j * _gell_mann()


def group(kind) -> GaugeGroup:
    return GaugeGroup(GroupKind(kind))


@dataclass(frozen=True)
class AlgebraElement:
    group: GaugeGroup
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float).reshape(-1)
        if c.shape != (self.group.dim_algebra,):
            raise ValueError(
                f"expected {self.group.dim_algebra} coefficients, got {c.shape[0]}"
            )
        object.__setattr__(self, "coefficients", c)

    def matrix(self) -> np.ndarray:
        return np.tensordot(self.coefficients, self.group.generators(), axes=1)


@dataclass(frozen=True)
class GroupElement:
    group: GaugeGroup
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        n = self.group.matrix_dim
        if m.shape != (n, n):
            raise ValueError(f"expected a {n}x{n} matrix, got {m.shape}")
        object.__setattr__(self, "matrix", m)

    def unitarity_defect(self) -> float:
        n = self.group.matrix_dim
        return float(np.abs(self.matrix.conj().T @ self.matrix - np.eye(n)).max())

    def det_defect(self) -> float:
        if self.group.abelian:
            return 0.0
        return float(abs(np.linalg.det(self.matrix) - 1))

    def inverse(self) -> GroupElement:
        return GroupElement(self.group, self.matrix.conj().T)

    def __matmul__(self, other: GroupElement) -> GroupElement:
        return GroupElement(self.group, self.matrix @ other.matrix)


def structure_constants(g: GaugeGroup) -> np.ndarray:
    """Real array ``C[c, a, b]`` with ``[t_a, t_b] = sum_c C[c, a, b] t_c``."""
    return _structure_constants(g.kind).copy()


@lru_cache(maxsize=None)
def _structure_constants(kind: GroupKind) -> np.ndarray:
    t = _generators(kind)
    d = t.shape[0]
    if kind is GroupKind.U1:
        return np.zeros((1, 1, 1))
    comm = np.einsum("aij,bjk->abik", t, t) - np.einsum("bij,ajk->abik", t, t)
    # project with the trace form tr(t_c t_d) = -delta_cd/2
    c = -2.0 * np.einsum("abik,cki->cab", comm, t)
    if np.abs(c.imag).max() > MATRIX_TOL:
        raise ArithmeticError("structure constants are not real")
    out = np.ascontiguousarray(c.real)
    out[np.abs(out) < 1e-15] = 0.0
    assert out.shape == (d, d, d)
    return out


def adjoint_generator(g: GaugeGroup, gamma: int) -> np.ndarray:
    """Adjoint matrix with entries ``(t_gamma)^a_d = -i C^a_{d gamma}``.

    These are Hermitian and obey ``[T_a, T_b] = i C^c_ab T_c``; the
    anti-Hermitian ``-i T_a`` reproduce the defining bracket.
    """
    d = g.dim_algebra
    if not 0 <= gamma < d:
        raise IndexError(f"generator index {gamma} out of range for {g.kind.value}")
    c = _structure_constants(g.kind)
    return -1j * c[:, :, gamma]


def adjoint_matrix(u: GroupElement) -> np.ndarray:
    """Real matrix ``Ad(u)`` with ``u t_a u^-1 = sum_b Ad(u)[b, a] t_b``."""
    t = u.group.generators()
    conj = np.einsum("ij,ajk,kl->ail", u.matrix, t, u.matrix.conj().T)
    ad = -2.0 * np.einsum("aik,bki->ba", conj, t)
    if u.group.abelian:
        return np.ones((1, 1))
    return ad.real


def exp_map(x: AlgebraElement, scale: float = 1.0) -> GroupElement:
    """``exp(scale * sum_a x_a t_a)`` via the spectral decomposition of the Hermitian ``i X``."""
    if not np.all(np.isfinite(x.coefficients)) or not np.isfinite(scale):
        raise ValueError("exp_map requires finite coefficients")
    h = 1j * scale * x.matrix()
    h = 0.5 * (h + h.conj().T)
    w, v = np.linalg.eigh(h)
    return GroupElement(x.group, (v * np.exp(-1j * w)) @ v.conj().T)


def haar_sample(g: GaugeGroup, rng: np.random.Generator, size=None):
    """Haar-distributed element(s).

    With ``size=None`` a single :class:`GroupElement` is returned; otherwise an
    array of matrices with shape ``(*size, N, N)``.
    """
    shape = () if size is None else tuple(np.atleast_1d(size))
    mats = haar_matrices(g, rng, shape)
    if size is None:
        return GroupElement(g, mats)
    return mats


def haar_matrices(g: GaugeGroup, rng: np.random.Generator, shape: tuple) -> np.ndarray:
    n = g.matrix_dim
    if g.abelian:
        theta = rng.uniform(-np.pi, np.pi, size=shape)
        return np.exp(1j * theta)[..., None, None]
    z = (rng.standard_normal(shape + (n, n)) + 1j * rng.standard_normal(shape + (n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    q = q * (d / np.abs(d))[..., None, :]
    det = np.linalg.det(q)
    return q / (det ** (1.0 / n))[..., None, None]


# --- spacetime representations -------------------------------------------------


@dataclass(frozen=True)
class SpinorIndexSet:
    undotted: int = 0
    dotted: int = 0
    label: str = ""

    def __post_init__(self):
        if self.undotted < 0 or self.dotted < 0:
            raise ValueError("spinor index counts must be non-negative")

    @property
    def dimension(self) -> int:
        return 2 ** (self.undotted + self.dotted)

    @property
    def fermionic(self) -> bool:
        return (self.undotted + self.dotted) % 2 == 1


class Metric(str, enum.Enum):
    LORENTZ = "Lorentz"
    EUCLIDEAN = "Euclidean"


MINKOWSKI_ETA = np.diag([1.0, -1.0, -1.0, -1.0])


@dataclass(frozen=True)
class SpacetimeRep:
    """Element of the (covering) spacetime symmetry group.

    Lorentz: ``(a, A)`` with ``A`` in SL(2, C).  Euclidean: ``(a, U, V)`` with
    ``U, V`` in SU(2) acting on ``X = x0 + i x.sigma`` by ``X -> U X V^dagger``.
    """

    kind: Metric
    a: np.ndarray
    A: np.ndarray | None = None
    U: np.ndarray | None = None
    V: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Metric(self.kind))
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float).reshape(4))
        if self.kind is Metric.LORENTZ:
            if self.A is None:
                raise ValueError("Lorentz element needs A")
            A = np.asarray(self.A, dtype=complex)
            if abs(np.linalg.det(A) - 1) > 1e-10:
                raise ValueError("A must lie in SL(2, C)")
            object.__setattr__(self, "A", A)
        else:
            if self.U is None or self.V is None:
                raise ValueError("Euclidean element needs U and V")
            object.__setattr__(self, "U", np.asarray(self.U, dtype=complex))
            object.__setattr__(self, "V", np.asarray(self.V, dtype=complex))

    @classmethod
    def lorentz(cls, A, a=(0, 0, 0, 0)) -> SpacetimeRep:
        return cls(Metric.LORENTZ, np.asarray(a, float), A=A)

    @classmethod
    def euclidean(cls, U, V, a=(0, 0, 0, 0)) -> SpacetimeRep:
        return cls(Metric.EUCLIDEAN, np.asarray(a, float), U=U, V=V)

    @classmethod
    def identity(cls, kind=Metric.EUCLIDEAN) -> SpacetimeRep:
        if Metric(kind) is Metric.LORENTZ:
            return cls.lorentz(np.eye(2))
        return cls.euclidean(np.eye(2), np.eye(2))

    def compose(self, other: SpacetimeRep) -> SpacetimeRep:
        """``self * other`` acting as ``x -> L1 (L2 x + a2) + a1``."""
        if self.kind is not other.kind:
            raise ValueError("cannot compose Lorentz and Euclidean elements")
        lam = vector_rep_matrix(self)
        a = lam @ other.a + self.a
        if self.kind is Metric.LORENTZ:
            return SpacetimeRep.lorentz(self.A @ other.A, a)
        return SpacetimeRep.euclidean(self.U @ other.U, self.V @ other.V, a)

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x @ vector_rep_matrix(self).T + self.a


_SIGMA4 = np.concatenate([np.eye(2, dtype=complex)[None], _PAULI])
_QUAT = np.concatenate([np.eye(2, dtype=complex)[None], 1j * _PAULI])


def vector_rep_matrix(rep: SpacetimeRep) -> np.ndarray:
    """Real 4x4 vector representation: Lambda(A) or R(U, V)."""
    if rep.kind is Metric.LORENTZ:
        A = rep.A
        m = 0.5 * np.einsum("mij,jk,nkl,li->mn", _SIGMA4, A, _SIGMA4, A.conj().T)
        return m.real
    U, V = rep.U, rep.V
    m = 0.5 * np.einsum("mji,jk,nkl,li->mn", _QUAT.conj(), U, _QUAT, V.conj().T)
    return m.real


def spinor_rep_matrix(v: SpinorIndexSet, rep: SpacetimeRep, metric=None) -> np.ndarray:
    """Tensor product of ``undotted`` defining and ``dotted`` conjugate factors."""
    if metric is not None and Metric(metric) is not rep.kind:
        raise ValueError(f"representation is {rep.kind.value}, requested {Metric(metric).value}")
    if rep.kind is Metric.LORENTZ:
        left, right = rep.A, rep.A.conj()
    else:
        left, right = rep.U, rep.V
    out = np.ones((1, 1), dtype=complex)
    for _ in range(v.undotted):
        out = np.kron(out, left)
    for _ in range(v.dotted):
        out = np.kron(out, right)
    return out


def random_sl2c(rng: np.random.Generator, scale: float = 0.5) -> np.ndarray:
    z = scale * (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
    m = np.eye(2) + z
    return m / np.sqrt(np.linalg.det(m))


def random_su2(rng: np.random.Generator) -> np.ndarray:
    return haar_matrices(GaugeGroup(GroupKind.SU2), rng, ())


def random_rotation(rng: np.random.Generator) -> SpacetimeRep:
    return SpacetimeRep.euclidean(random_su2(rng), random_su2(rng))


def spatial_rotation(rng: np.random.Generator) -> SpacetimeRep:
    """Random rotation fixing the time axis (``U = V``)."""
    u = random_su2(rng)
    return SpacetimeRep.euclidean(u, u)
