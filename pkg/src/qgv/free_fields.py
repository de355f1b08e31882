"""Exact Gaussian correlator families: free scalar, free charged scalar,
free Maxwell field strength, and a symbolic fermionic toy family.

These are the known-good inputs for the axiom checks.  Gauge-variant
potential correlators are used internally only (see ``_potential_*``).
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .algebra import GroupKind, Metric, SpinorIndexSet, group
from .correlators import CorrelatorFamily, FieldIndex, Source
from .testfunctions import DIM, THETA, TestFunction, quadrature_nodes

WICK_CAP = 8

SCALAR_CATALOG = {"phi": SpinorIndexSet(0, 0, "phi")}
CHARGED_CATALOG = {"phi": SpinorIndexSet(0, 0, "phi"), "phibar": SpinorIndexSet(0, 0, "phibar")}
MAXWELL_CATALOG = {"F": SpinorIndexSet(1, 1, "F")}
FERMION_CATALOG = {"psi": SpinorIndexSet(1, 0, "psi")}

NORMAL_ORDERING = "normal ordering (thin-diagonal composites have vanishing one-point functions)"


@dataclass(frozen=True)
class FreeScalarTheory:
    m: float = 1.0

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError("mass must be positive")


@dataclass(frozen=True)
class FreeMaxwellTheory:
    """Massless U(1) field-strength sector."""


# --- pointwise kernels -------------------------------------------------------------


def scalar_schwinger_2pt(m: float, xi) -> float:
    xi = np.asarray(xi, dtype=float)
    r = float(np.linalg.norm(xi))
    if r == 0:
        raise ValueError("kernel is singular at coincident points; smear instead")
    return float(kernels.euclidean_propagator(m, r))


def scalar_wightman_2pt(m: float, x, return_error: bool = False):
    """Positive-frequency Wightman 2-point function from the on-shell momentum integral."""
    x = np.asarray(x, dtype=float)
    if not np.any(x):
        raise ValueError("kernel is singular at the origin")
    r = float(np.linalg.norm(x[1:]))
    res = kernels.onshell_wightman(m, float(x[0]), r)
    if res.error > 100 * kernels.QUAD_RTOL * max(abs(res.value), 1e-300):
        raise kernels.QuadratureError(f"on-shell quadrature reached only {res.error:.2e}", res.error)
    return (res.value, res.error) if return_error else res.value


def _antisym_tensor(H: np.ndarray) -> np.ndarray:
    """``-[d_ns H_mr - d_nr H_ms - d_ms H_nr + d_mr H_ns]`` as a rank-4 array (m, n, r, s)."""
    d = np.eye(DIM)
    return -(
        np.einsum("ns,...mr->...mnrs", d, H)
        - np.einsum("nr,...ms->...mnrs", d, H)
        - np.einsum("ms,...nr->...mnrs", d, H)
        + np.einsum("mr,...ns->...mnrs", d, H)
    )


def maxwell_F_schwinger_2pt(mn, rs, zeta) -> float:
    """``<F_mn(0) F_rs(zeta)>`` for the free Euclidean Maxwell field."""
    zeta = np.asarray(zeta, dtype=float)
    if not np.any(zeta):
        raise ValueError("kernel is singular at coincident points")
    # <F(0) F(zeta)> depends on 0 - zeta; the Hessian is even so the sign drops out
    H = kernels.euclidean_propagator_hessian(0.0, -zeta)
    return float(_antisym_tensor(H)[mn[0], mn[1], rs[0], rs[1]])


def maxwell_tensor(z: np.ndarray) -> np.ndarray:
    """``D_{mnrs}(z) = <F_mn(x) F_rs(y)>`` at ``z = x - y`` (vectorized)."""
    return _antisym_tensor(kernels.euclidean_propagator_hessian(0.0, z))


# --- pairings ----------------------------------------------------------------------


def pairings(items):
    """All perfect matchings of ``items`` (a list), in a fixed recursive order."""
    items = list(items)
    if not items:
        yield []
        return
    first = items[0]
    for k in range(1, len(items)):
        rest = items[1:k] + items[k + 1:]
        for p in pairings(rest):
            yield [(first, items[k])] + p


def wick_sum(n: int, pair, cap: int = WICK_CAP) -> complex:
    """Sum over pairings of products of ``pair(i, j)`` (``i < j`` in slot order)."""
    if n > cap:
        raise ValueError(f"degree {n} exceeds the Wick cap {cap}")
    if n % 2:
        return 0.0
    cache: dict = {}

    def pv(i, j):
        if (i, j) not in cache:
            cache[(i, j)] = pair(i, j)
        return cache[(i, j)]

    total = 0.0 + 0.0j
    for p in pairings(range(n)):
        prod = 1.0 + 0.0j
        for i, j in p:
            prod *= pv(i, j)
            if prod == 0:
                break
        total += prod
    return total


@functools.lru_cache(maxsize=200_000)
def _cached_smeared(m, s, z, gamma):
    return kernels.smeared_kernel(m, s, np.array(z), gamma)


def euclidean_pair(m: float, f: TestFunction, g: TestFunction, extra=(0, 0, 0, 0)) -> complex:
    total = 0.0 + 0.0j
    for a in f.terms:
        for b in g.terms:
            s = a.width**2 + b.width**2
            z = tuple(float(v) for v in np.subtract(a.center, b.center))
            gam = tuple(p + q + e for p, q, e in zip(a.deriv, b.deriv, extra))
            total += a.coef * b.coef * a.mass * b.mass * (-1) ** a.order * _cached_smeared(float(m), s, z, gam)
    return total


def maxwell_pair(mn, rs, f: TestFunction, g: TestFunction) -> complex:
    """``<F_mn(f) F_rs(g)>`` from smeared second derivatives of the massless kernel."""
    m_, n_ = mn
    r_, s_ = rs
    d = np.eye(DIM, dtype=int)

    def hess(i, k):
        return euclidean_pair(0.0, f, g, tuple(d[i] + d[k]))

    total = 0.0 + 0.0j
    if n_ == s_:
        total += hess(m_, r_)
    if n_ == r_:
        total -= hess(m_, s_)
    if m_ == s_:
        total -= hess(n_, r_)
    if m_ == r_:
        total += hess(n_, s_)
    return -total


def wightman_pair(m: float, f: TestFunction, g: TestFunction) -> complex:
    return kernels.wightman_pair(m, f, g)


# --- theory dispatch ---------------------------------------------------------------


def wick_npoint(theory, idx: FieldIndex, fs, cap: int = WICK_CAP, metric=Metric.EUCLIDEAN) -> complex:
    """Sum over pairings of smeared 2-point values."""
    fs = tuple(fs)
    if len(fs) != idx.degree:
        raise ValueError("one test function per slot is required")
    if idx.degree > cap:
        raise ValueError(f"degree {idx.degree} exceeds the Wick cap {cap}")
    metric = Metric(metric)
    if isinstance(theory, FreeScalarTheory):
        labels = [k for k, _ in idx.matter]
        if idx.n or any(k not in ("phi", "phibar") for k in labels):
            raise ValueError("scalar theory has matter labels phi/phibar only")
        charged = "phibar" in labels

        def pair(i, j):
            if charged and labels[i] == labels[j]:
                return 0.0
            if metric is Metric.EUCLIDEAN:
                return euclidean_pair(theory.m, fs[i], fs[j])
            return wightman_pair(theory.m, fs[i], fs[j])

        return wick_sum(idx.degree, pair, cap)
    if isinstance(theory, FreeMaxwellTheory):
        if metric is not Metric.EUCLIDEAN:
            raise ValueError("Maxwell family is Euclidean")
        comps = [v for _, v in idx.matter]

        def pair(i, j):
            return maxwell_pair(comps[i], comps[j], fs[i], fs[j])

        return wick_sum(idx.degree, pair, cap)
    raise TypeError(f"unknown theory {theory!r}")


# --- family constructors -----------------------------------------------------------


def free_scalar_family(m: float = 1.0, metric=Metric.EUCLIDEAN, charged: bool = False) -> CorrelatorFamily:
    theory = FreeScalarTheory(m)
    metric = Metric(metric)

    def evaluator(idx, fs):
        return wick_npoint(theory, idx, fs, metric=metric), 0.0

    def kernel(idx, pts):
        pts = np.asarray(pts, dtype=float)
        labels = [k for k, _ in idx.matter]

        def pair(i, j):
            if charged and labels[i] == labels[j]:
                return 0.0
            if metric is Metric.EUCLIDEAN:
                return scalar_schwinger_2pt(m, pts[j] - pts[i])
            return scalar_wightman_2pt(m, pts[i] - pts[j])

        return wick_sum(len(pts), pair), 0.0

    name = ("charged_scalar" if charged else "free_scalar") + ("" if metric is Metric.EUCLIDEAN else "_minkowski")
    meta = {"kind": name, "mass": m, "theory": "free scalar", "normal_ordering": NORMAL_ORDERING}
    if metric is Metric.EUCLIDEAN:
        meta["radial"] = lambda r: kernels.euclidean_propagator(m, r)
    return CorrelatorFamily(name, metric, Source.EXACT_FREE, evaluator,
                            catalog=CHARGED_CATALOG if charged else SCALAR_CATALOG,
                            group=group(GroupKind.U1) if charged else None, kernel=kernel, meta=meta)


def maxwell_family() -> CorrelatorFamily:
    theory = FreeMaxwellTheory()

    def evaluator(idx, fs):
        return wick_npoint(theory, idx, fs), 0.0

    def kernel(idx, pts):
        comps = [v for _, v in idx.matter]
        pts = np.asarray(pts, dtype=float)

        def pair(i, j):
            return maxwell_F_schwinger_2pt(comps[i], comps[j], pts[j] - pts[i])

        return wick_sum(len(pts), pair), 0.0

    return CorrelatorFamily("free_maxwell_F", Metric.EUCLIDEAN, Source.EXACT_FREE, evaluator,
                            catalog=MAXWELL_CATALOG, group=group(GroupKind.U1), kernel=kernel,
                            meta={"kind": "free_maxwell_F", "normal_ordering": NORMAL_ORDERING})


def fermion_toy_family(m: float = 1.0) -> CorrelatorFamily:
    """Symbolic spinor toy: 2-point pairing is d_0 of the scalar kernel (odd under exchange)."""

    def pair(f, g):
        return euclidean_pair(m, f, g, (1, 0, 0, 0))

    def evaluator(idx, fs):
        if any(k != "psi" for k, _ in idx.matter) or idx.n:
            raise ValueError("toy family has the single label psi")
        # antisymmetric pairing sum with the pairing sign
        n = idx.degree
        if n % 2:
            return 0.0, 0.0
        total = 0.0
        for p in pairings(range(n)):
            perm = [i for pr in p for i in pr]
            sign = _perm_sign(perm)
            prod = 1.0
            for i, j in p:
                prod *= pair(fs[i], fs[j])
            total += sign * prod
        return total, 0.0

    return CorrelatorFamily("fermion_toy", Metric.EUCLIDEAN, Source.EXACT_FREE, evaluator,
                            catalog=FERMION_CATALOG, meta={"kind": "fermion_toy", "mass": m})


def _perm_sign(perm) -> int:
    perm = list(perm)
    sign = 1
    for i in range(len(perm)):
        for k in range(i + 1, len(perm)):
            if perm[i] > perm[k]:
                sign = -sign
    return sign


# --- gauge potential (internal, gauge-variant) ---------------------------------------


def _potential_euclidean_pair(mu: int, nu: int, f: TestFunction, g: TestFunction) -> complex:
    """Feynman-gauge <A_mu(f) A_nu(g)> (Euclidean); used for gauge-shift checks only."""
    return euclidean_pair(0.0, f, g) if mu == nu else 0.0


def _potential_wightman_pair(mu: int, nu: int, f: TestFunction, g: TestFunction) -> complex:
    """Feynman-gauge <A_mu(f) A_nu(g)> = -eta_mu_nu W_0(f, g) (Minkowski); indefinite in mu = 0."""
    eta = (1.0, -1.0, -1.0, -1.0)
    return -eta[mu] * kernels.wightman_pair(0.0, f, g) if mu == nu else 0.0


def potential_wightman_family() -> CorrelatorFamily:
    """Gauge-sector Wightman family for indefiniteness witnesses (not a physical family)."""
    u1 = group(GroupKind.U1)

    def evaluator(idx, fs):
        mus = [mu for _, mu in idx.gauge]

        def pair(i, j):
            return _potential_wightman_pair(mus[i], mus[j], fs[i], fs[j])

        return wick_sum(idx.degree, pair), 0.0

    return CorrelatorFamily("potential_feynman_gauge", Metric.LORENTZ, Source.EXACT_FREE, evaluator,
                            catalog={}, group=u1, meta={"kind": "potential_feynman_gauge", "gauge_variant": True})


# --- normal-ordered composites on the thin diagonal ----------------------------------


def composite_nodes(f: TestFunction, n: int = 6):
    """Quadrature nodes of ``f`` and of its time reflection (x nodes = theta y nodes)."""
    y, w = quadrature_nodes(f, n)
    return y @ THETA.T, y, w


def phi2_reflected_form(m: float, f: TestFunction, eps=None, charge: float = 1.0, n: int = 6) -> complex:
    """``<:phibar phi:(Theta f) :phibar phi:(f)>`` for the free charged scalar.

    ``eps`` (a real TestFunction) applies the local phase ``phi -> e^{i q eps} phi``
    at every node before contracting.
    """
    x, y, w = composite_nodes(f, n)
    z = x[:, None, :] - y[None, :, :]
    S = kernels.euclidean_propagator(m, np.linalg.norm(z, axis=-1))
    if eps is None:
        prop_bar, prop = S, S
    else:
        ex, ey = eps(x).real, eps(y).real
        # <phibar(x) phi(y)> and <phi(x) phibar(y)> pick up opposite phases
        ph = np.exp(1j * charge * (ey[None, :] - ex[:, None]))
        prop_bar, prop = S * ph, S * np.conj(ph)
    return complex(np.einsum("i,ij,j->", w, prop_bar * prop, w))


def phi2_one_point(f: TestFunction, eps=None) -> complex:
    """Normal-ordered one-point value (identically zero; phases multiply zero)."""
    return 0.0 + 0.0j


def gauge_shift_field(eps: TestFunction, x: np.ndarray, euclidean_replace: bool = True) -> np.ndarray:
    """``s_mn = D_m D_n eps - D_n D_m eps`` at points ``x`` with ``D = (-i d_0, grad)``.

    The two orders are evaluated as separate derivative chains so the
    cancellation is a genuine numerical statement.
    """
    d = np.eye(DIM, dtype=int)
    fac = np.array([-1j if euclidean_replace else 1.0, 1, 1, 1])
    out = np.zeros(x.shape[:-1] + (DIM, DIM), dtype=complex)
    for m_ in range(DIM):
        first = eps.derivative(d[m_])
        for n_ in range(DIM):
            mn = fac[n_] * (fac[m_] * first).derivative(d[n_])(x)
            nm = fac[m_] * (fac[n_] * eps.derivative(d[n_])).derivative(d[m_])(x)
            out[..., m_, n_] = mn - nm
    return out


def F2_reflected_form(f: TestFunction, eps=None, n: int = 5) -> dict:
    """Paired normal-ordered ``:F^2:`` form ``<:F^2:(Theta f) :F^2:(f)>`` with optional abelian gauge shift.

    F shifts by the c-number ``s = D D eps - D D eps``; the transformed value is
    2 sum D^2 + 4 s(x) D s(y) + s^2(x) s^2(y), integrated over the nodes.
    """
    x, y, w = composite_nodes(f, n)
    z = x[:, None, :] - y[None, :, :]
    D = maxwell_tensor(z)
    base = 2.0 * np.einsum("ijmnrs,ijmnrs->ij", D, D)
    val = complex(np.einsum("i,ij,j->", w, base, w))
    out = {"paired": val, "shift_cross": 0.0j, "shift_square": 0.0j, "one_point": 0.0j}
    if eps is not None:
        sx, sy = gauge_shift_field(eps, x), gauge_shift_field(eps, y)
        cross = 4.0 * np.einsum("imn,ijmnrs,jrs->ij", sx, D, sy)
        sq = np.einsum("imn,imn->i", sx, sx)[:, None] * np.einsum("jmn,jmn->j", sy, sy)[None, :]
        out["shift_cross"] = complex(np.einsum("i,ij,j->", w, cross, w))
        out["shift_square"] = complex(np.einsum("i,ij,j->", w, sq, w))
        out["one_point"] = complex(np.sum(w * np.einsum("jmn,jmn->j", sy, sy)))
        out["paired"] = val + out["shift_cross"] + out["shift_square"]
    return out
