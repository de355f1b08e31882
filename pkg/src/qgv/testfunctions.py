"""Test functions: finite sums of Gaussian bumps and lattice grid functions.

A closed-form test function is a sum of terms

    coef * d^gamma exp(-|x - c|^2 / (2 w^2)),     x in R^4,

i.e. Gaussians times Hermite polynomial prefactors.  The class is closed under
derivatives, Euclidean motions and products of Gaussians, which is what the
correlator machinery needs.  Coordinate 0 is (Euclidean) time.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import hermite_e as He
from scipy import optimize, special

DIM = 4
THETA = np.diag([-1.0, 1.0, 1.0, 1.0])

WORKING_SET = "finite sums of isotropic Gaussians with Hermite prefactors; lattice grid functions"


@dataclass(frozen=True)
class GaussianTerm:
    coef: complex
    center: tuple
    width: float
    deriv: tuple = (0, 0, 0, 0)

    def __post_init__(self):
        c = tuple(float(v) for v in np.asarray(self.center, dtype=float).reshape(DIM))
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "coef", complex(self.coef))
        object.__setattr__(self, "width", float(self.width))
        d = tuple(int(k) for k in self.deriv)
        if len(d) != DIM or min(d) < 0:
            raise ValueError(f"bad derivative multi-index {self.deriv}")
        object.__setattr__(self, "deriv", d)
        if not self.width > 0:
            raise ValueError("Gaussian width must be positive")

    @property
    def order(self) -> int:
        return sum(self.deriv)

    @property
    def mass(self) -> float:
        """Integral of the underlying (undifferentiated) Gaussian."""
        return (2 * math.pi * self.width**2) ** (DIM / 2)

    def key(self):
        return (self.center, self.width, self.deriv)


def _hermite_factor(u: np.ndarray, k: int, w: float) -> np.ndarray:
    """d^k/du^k exp(-u^2/(2 w^2))."""
    coeffs = np.zeros(k + 1)
    coeffs[k] = 1.0
    return (-1.0 / w) ** k * He.hermeval(u / w, coeffs) * np.exp(-0.5 * (u / w) ** 2)


@dataclass(frozen=True)
class TestFunction:
    """Closed-form test function on R^4 (one smearing slot)."""

    terms: tuple = field(default_factory=tuple)
    kind = "gaussian"
    __test__ = False  # not a pytest class despite the name

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))

    # construction -----------------------------------------------------------
    @classmethod
    def gaussian(cls, center, width=1.0, amplitude=1.0, deriv=(0, 0, 0, 0)) -> TestFunction:
        return cls((GaussianTerm(amplitude, center, width, deriv),))

    @classmethod
    def zero(cls) -> TestFunction:
        return cls(())

    # algebra ----------------------------------------------------------------
    def __add__(self, other: TestFunction) -> TestFunction:
        return TestFunction(self.terms + other.terms).simplified()

    def __sub__(self, other: TestFunction) -> TestFunction:
        return self + (-1.0) * other

    def __mul__(self, scalar) -> TestFunction:
        s = complex(scalar)
        return TestFunction(tuple(GaussianTerm(t.coef * s, t.center, t.width, t.deriv) for t in self.terms))

    __rmul__ = __mul__

    def __neg__(self) -> TestFunction:
        return (-1.0) * self

    def conj(self) -> TestFunction:
        return TestFunction(tuple(GaussianTerm(t.coef.conjugate(), t.center, t.width, t.deriv) for t in self.terms))

    def simplified(self) -> TestFunction:
        acc: dict = {}
        for t in self.terms:
            acc[t.key()] = acc.get(t.key(), 0.0) + t.coef
        return TestFunction(tuple(GaussianTerm(c, k[0], k[1], k[2]) for k, c in acc.items() if c != 0))

    @property
    def is_real(self) -> bool:
        return all(t.coef.imag == 0 for t in self.terms)

    @property
    def max_order(self) -> int:
        return max((t.order for t in self.terms), default=0)

    # evaluation -------------------------------------------------------------
    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1], dtype=complex)
        for t in self.terms:
            val = np.full(x.shape[:-1], t.coef)
            for i in range(DIM):
                val = val * _hermite_factor(x[..., i] - t.center[i], t.deriv[i], t.width)
            out = out + val
        return out

    def derivative(self, gamma) -> TestFunction:
        gamma = tuple(int(g) for g in gamma)
        return TestFunction(
            tuple(GaussianTerm(t.coef, t.center, t.width, tuple(a + b for a, b in zip(t.deriv, gamma))) for t in self.terms)
        )

    def integral(self) -> complex:
        return sum((t.coef * t.mass for t in self.terms if t.order == 0), 0.0)

    # geometry -----------------------------------------------------------------
    def translated(self, a) -> TestFunction:
        """``x -> f(x - a)``."""
        a = np.asarray(a, dtype=float)
        return TestFunction(tuple(GaussianTerm(t.coef, np.add(t.center, a), t.width, t.deriv) for t in self.terms))

    def pullback(self, R, a=(0, 0, 0, 0)) -> TestFunction:
        """``x -> f(R x + a)`` for orthogonal ``R``."""
        R = np.asarray(R, dtype=float)
        if np.abs(R.T @ R - np.eye(DIM)).max() > 1e-10:
            raise ValueError("Gaussian test functions are closed only under orthogonal affine maps")
        a = np.asarray(a, dtype=float)
        out = []
        for t in self.terms:
            c_new = R.T @ (np.asarray(t.center) - a)
            # (d^gamma G)(Rx + a) = prod over derivative slots of (sum_j R_ij d_j) applied to G(Rx + a)
            slots = [i for i in range(DIM) for _ in range(t.deriv[i])]
            expansion: dict = {}
            for choice in itertools.product(range(DIM), repeat=len(slots)):
                w = 1.0
                for i, j in zip(slots, choice):
                    w *= R[i, j]
                if w == 0.0:
                    continue
                g = [0] * DIM
                for j in choice:
                    g[j] += 1
                expansion[tuple(g)] = expansion.get(tuple(g), 0.0) + w
            for g, w in expansion.items():
                if abs(w) > 1e-15:
                    out.append(GaussianTerm(t.coef * w, c_new, t.width, g))
        return TestFunction(tuple(out)).simplified()

    def reflected(self) -> TestFunction:
        """Time reflection ``x -> f(theta x)`` (no complex conjugation)."""
        return self.pullback(THETA)

    def min_time(self, nsigma: float = 0.0) -> float:
        return min((t.center[0] - nsigma * t.width for t in self.terms), default=math.inf)

    def leakage(self, t0: float = 0.0) -> float:
        """Bound on the L1 mass of ``f`` at times below ``t0`` (relative to its total)."""
        tot, out = 0.0, 0.0
        for t in self.terms:
            z = (t.center[0] - t0) / (t.width * math.sqrt(2))
            frac = 0.5 * special.erfc(z)
            scale = abs(t.coef) * t.mass * (1 + t.order) ** 2 / t.width ** t.order
            tot += scale
            out += scale * frac
        return out / tot if tot else 0.0

    # serialization -----------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "kind": "gaussian",
            "terms": [
                {"coef": [t.coef.real, t.coef.imag], "center": list(t.center), "width": t.width, "deriv": list(t.deriv)}
                for t in self.terms
            ],
        }

    @classmethod
    def from_json(cls, d: dict) -> TestFunction:
        if d.get("kind") != "gaussian":
            raise ValueError(f"not a gaussian test function: {d.get('kind')}")
        return cls(
            tuple(GaussianTerm(complex(*t["coef"]), t["center"], t["width"], tuple(t["deriv"])) for t in d["terms"])
        )


def gaussian_product(a: GaussianTerm, b: GaussianTerm) -> GaussianTerm:
    """Pointwise product of two undifferentiated Gaussian terms (again a Gaussian term)."""
    if a.order or b.order:
        raise ValueError("only undifferentiated terms multiply in closed form")
    pa, pb = 1 / a.width**2, 1 / b.width**2
    p = pa + pb
    ca, cb = np.asarray(a.center), np.asarray(b.center)
    c = (pa * ca + pb * cb) / p
    expo = -0.5 * pa * pb / p * float(np.sum((ca - cb) ** 2))
    return GaussianTerm(a.coef * b.coef * math.exp(expo), c, 1 / math.sqrt(p))


def multiply(f: TestFunction, g: TestFunction) -> TestFunction:
    return TestFunction(tuple(gaussian_product(a, b) for a in f.terms for b in g.terms)).simplified()


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Test function sampled on lattice sites (periodic lattice, spacing ``a``)."""

    values: np.ndarray
    spacing: float = 1.0
    kind = "grid"

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values))

    @property
    def shape(self) -> tuple:
        return self.values.shape

    def __add__(self, other: GridFunction) -> GridFunction:
        return GridFunction(self.values + other.values, self.spacing)

    def __mul__(self, s) -> GridFunction:
        return GridFunction(self.values * s, self.spacing)

    __rmul__ = __mul__

    def conj(self) -> GridFunction:
        return GridFunction(np.conj(self.values), self.spacing)

    def translated(self, shift) -> GridFunction:
        return GridFunction(np.roll(self.values, tuple(int(s) for s in shift), axis=tuple(range(len(shift)))), self.spacing)

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values) or bool(np.all(self.values.imag == 0))

    def to_json(self) -> dict:
        v = np.asarray(self.values)
        return {"kind": "grid", "shape": list(v.shape), "spacing": self.spacing,
                "re": v.real.ravel().tolist(), "im": np.imag(v).ravel().tolist()}

    @classmethod
    def from_json(cls, d: dict) -> GridFunction:
        v = np.asarray(d["re"]) + 1j * np.asarray(d["im"])
        return cls(v.reshape(d["shape"]), d["spacing"])


def test_function_from_json(d: dict):
    return GridFunction.from_json(d) if d["kind"] == "grid" else TestFunction.from_json(d)


test_function_from_json.__test__ = False


# --- seminorms -------------------------------------------------------------------


class StencilError(ValueError):
    """Grid too coarse for the requested derivative order."""


def _multi_indices(max_order: int, dim: int = DIM):
    for gamma in itertools.product(range(max_order + 1), repeat=dim):
        if sum(gamma) <= max_order:
            yield gamma


def schwartz_seminorm(f, c: int, points_per_dim: int = 21, refine: int = 8) -> float:
    """``sup_x sup_{|gamma| <= 4c} (1 + |x|^2)^{c/2} |d^gamma f(x)|``.

    Closed-form functions: exact derivatives sampled on a tensor grid, with the
    best candidates polished by a local optimizer.  Grid functions: repeated
    central differences (second-order stencil), ``StencilError`` when the
    lattice cannot support the order.
    """
    if c < 0:
        raise ValueError("seminorm index must be non-negative")
    if isinstance(f, GridFunction):
        return _grid_seminorm(f, c)
    if not f.terms:
        return 0.0
    order = 4 * c
    lo = np.min([np.asarray(t.center) - 7 * t.width for t in f.terms], axis=0)
    hi = np.max([np.asarray(t.center) + 7 * t.width for t in f.terms], axis=0)
    lo, hi = np.minimum(lo, 0.0), np.maximum(hi, 0.0)
    axes = [np.linspace(lo[i], hi[i], points_per_dim) for i in range(DIM)]
    # 1D factor tables: tab[term][axis][k] -> values on the grid axis
    maxk = order + f.max_order
    tabs = [
        [[_hermite_factor(axes[i] - t.center[i], k, t.width) for k in range(maxk + 1)] for i in range(DIM)]
        for t in f.terms
    ]
    r2 = sum(np.meshgrid(*[ax**2 for ax in axes], indexing="ij", sparse=True))
    weight = (1.0 + r2) ** (c / 2)
    candidates = []
    for gamma in _multi_indices(order):
        val = 0.0
        for t, tab in zip(f.terms, tabs):
            g = [gamma[i] + t.deriv[i] for i in range(DIM)]
            prod = t.coef * np.einsum("i,j,k,l->ijkl", *(tab[i][g[i]] for i in range(DIM)))
            val = val + prod
        w = np.abs(val) * weight
        idx = np.unravel_index(int(np.argmax(w)), w.shape)
        candidates.append((float(w[idx]), gamma, np.array([axes[i][idx[i]] for i in range(DIM)])))
    candidates.sort(key=lambda c_: -c_[0])
    best = candidates[0][0]
    for val0, gamma, x0 in candidates[:refine]:
        g_f = f.derivative(gamma)

        def neg(x):
            return -abs(complex(g_f(x))) * (1.0 + float(x @ x)) ** (c / 2)

        res = optimize.minimize(neg, x0, method="Nelder-Mead", options={"xatol": 1e-9, "fatol": 1e-14, "maxiter": 4000})
        best = max(best, -float(res.fun))
    return best


def _grid_seminorm(f: GridFunction, c: int) -> float:
    order = 4 * c
    v = np.asarray(f.values, dtype=complex)
    nd = v.ndim
    if order > min(v.shape) - 1:
        raise StencilError(f"derivative order {order} exceeds the stencil capability of a {v.shape} grid")
    h = f.spacing
    coords = np.meshgrid(*[np.arange(n) * h for n in v.shape], indexing="ij")
    # distance from the origin with periodic wrap-around
    r2 = sum(np.minimum(x, n * h - x) ** 2 for x, n in zip(coords, v.shape))
    weight = (1.0 + r2) ** (c / 2)
    best = 0.0
    cache = {(0,) * nd: v}

    def deriv(gamma):
        if gamma in cache:
            return cache[gamma]
        i = next(k for k in range(nd) if gamma[k] > 0)
        lower = list(gamma)
        lower[i] -= 1
        base = deriv(tuple(lower))
        out = (np.roll(base, -1, axis=i) - np.roll(base, 1, axis=i)) / (2 * h)
        cache[gamma] = out
        return out

    for gamma in _multi_indices(order, nd):
        best = max(best, float(np.max(np.abs(deriv(gamma)) * weight)))
    return best


GRID_STENCIL = "central difference, second order, periodic"


def _normal_density_deriv(z: np.ndarray, s: float, gamma) -> float:
    """``d^gamma`` of the normalized 4D Gaussian of variance ``s`` at ``z``."""
    val = (2 * math.pi * s) ** (-DIM / 2) * math.exp(-0.5 * float(z @ z) / s)
    for zi, g in zip(z, gamma):
        if g:
            coeffs = np.zeros(g + 1)
            coeffs[g] = 1.0
            val *= (-1) ** g * s ** (-g / 2) * He.hermeval(zi / math.sqrt(s), coeffs)
    return val


def overlap(f: TestFunction, g: TestFunction) -> complex:
    """``int f(x) g(x) dx`` in closed form (bilinear, no conjugation)."""
    total = 0.0 + 0.0j
    for a in f.terms:
        for b in g.terms:
            s = a.width**2 + b.width**2
            gam = tuple(p + q for p, q in zip(a.deriv, b.deriv))
            z = np.subtract(a.center, b.center)
            total += a.coef * b.coef * a.mass * b.mass * (-1) ** a.order * _normal_density_deriv(z, s, gam)
    return total


def quadrature_nodes(f: TestFunction, n: int = 6) -> tuple[np.ndarray, np.ndarray]:
    """Signed point measure reproducing ``int f h`` for smooth ``h`` (tensor Gauss-Hermite).

    Only undifferentiated terms are supported.
    """
    u, w = He.hermegauss(n)
    w = w / math.sqrt(2 * math.pi)
    grid = np.stack(np.meshgrid(u, u, u, u, indexing="ij"), axis=-1).reshape(-1, DIM)
    wt = np.einsum("i,j,k,l->ijkl", w, w, w, w).ravel()
    pts, wts = [], []
    for t in f.terms:
        if t.order:
            raise ValueError("quadrature nodes need undifferentiated Gaussian terms")
        pts.append(np.asarray(t.center) + t.width * grid)
        wts.append(t.coef * t.mass * wt)
    return np.concatenate(pts), np.concatenate(wts)
