"""Numerical checkers for the axioms of an indexed correlator family.

Every checker returns an :class:`AxiomReport`.  Exact families are judged
against fixed numerical tolerances, lattice estimates against a multiple of
their jackknife errors.  Checkers that do not apply to a target report the
verdict ``inapplicable`` with a reason instead of raising.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import continuation, kernels
from .algebra import Metric, SpacetimeRep, random_rotation, random_sl2c, structure_constants, vector_rep_matrix
from .correlators import (EMPTY, CorrelatorFamily, FieldIndex, Permutation, Source, TranslationError,
                          apply_permutation, reduce_to_differences, smear)
from .free_fields import (F2_reflected_form, SCALAR_CATALOG, _potential_euclidean_pair,
                          euclidean_pair, gauge_shift_field, phi2_one_point, phi2_reflected_form, wick_sum)
from .testfunctions import DIM, GridFunction, TestFunction, overlap, quadrature_nodes, schwartz_seminorm

EXACT_TOL = 1e-10
SYMMETRY_TOL = 1e-12
GAUGE_TOL = 1e-8
LATTICE_GAUGE_TOL = 1e-12
NSIGMA = 3.0
SUPPORT_LEAKAGE = 1e-10
CLUSTER_TOL = 1e-3
GROWTH_ORDER = 2
GROWTH_RESIDUAL = 0.5
CONJUGATE_LABEL = {"phi": "phibar", "phibar": "phi"}

VERDICTS = ("pass", "fail", "inconclusive", "inapplicable")


@dataclass
class AxiomReport:
    axiom: str
    family: str
    verdict: str
    quantities: dict = field(default_factory=dict)
    tolerance: float | None = None
    sigma: float | None = None
    reason: str = ""
    provenance: str = ""

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_json(self) -> dict:
        return {"axiom": self.axiom, "family": self.family, "verdict": self.verdict,
                "quantities": _plain(self.quantities), "tolerance": self.tolerance, "sigma": self.sigma,
                "reason": self.reason, "provenance": self.provenance}

    def summary(self) -> str:
        return f"{self.axiom:<26s} {self.family:<28s} {self.verdict:<13s} {self.reason}"


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return _plain(v.tolist())
    if isinstance(v, (complex, np.complexfloating)):
        return {"re": float(v.real), "im": float(v.imag)}
    if isinstance(v, np.generic):
        return v.item()
    return v


def _report(axiom, fam, verdict, q, tol=None, sigma=None, reason=""):
    name = getattr(fam, "name", None) or "ensemble"
    prov = fam.content_hash() if hasattr(fam, "content_hash") else ""
    return AxiomReport(axiom, name, verdict, q, tol, sigma, reason, prov)


def _inapplicable(axiom, fam, reason):
    return _report(axiom, fam, "inapplicable", {}, reason=reason)


# --- probes ------------------------------------------------------------------------


def probe_index(fam: CorrelatorFamily, degree: int, rng=None) -> FieldIndex:
    """A valid field index of the given degree for the family's catalog."""
    rng = np.random.default_rng(0) if rng is None else rng
    cat = fam.catalog
    if "F" in cat:
        comps = []
        for _ in range(degree):
            mu, nu = sorted(rng.choice(DIM, size=2, replace=False))
            comps.append(("F", (int(mu), int(nu))))
        return FieldIndex(tuple(comps))
    if "phibar" in cat:
        return FieldIndex(tuple(("phi" if i % 2 == 0 else "phibar", None) for i in range(degree)))
    label = next(iter(cat))
    comp = 0 if cat[label].fermionic else None
    return FieldIndex(tuple((label, comp) for _ in range(degree)))


def random_gaussian(rng, spread: float = 1.0, width=(0.6, 1.0), deriv=False) -> TestFunction:
    d = (0, 0, 0, 0)
    if deriv:
        d = tuple(int(v) for v in np.eye(DIM, dtype=int)[rng.integers(DIM)])
    return TestFunction.gaussian(rng.normal(scale=spread, size=DIM), rng.uniform(*width), 1.0, d)


def random_grid_function(dims, rng, sites: int = 3) -> GridFunction:
    v = np.zeros(dims)
    for _ in range(sites):
        v[tuple(rng.integers(0, L) for L in dims)] += rng.uniform(0.5, 1.5)
    return GridFunction(v)


def _is_lattice(fam) -> bool:
    return isinstance(fam, CorrelatorFamily) and fam.source is Source.LATTICE_ESTIMATE


def _tolerance(fam, value_scale: float, sigma: float = 0.0, rel: float = EXACT_TOL) -> float:
    if fam.exact:
        return rel * max(value_scale, 1e-300)
    return max(rel * value_scale, NSIGMA * sigma)


# --- Euclidean covariance ------------------------------------------------------------


def _component_matrix(fam, label) -> str:
    v = fam.catalog[label]
    if v.undotted == 0 and v.dotted == 0:
        return "scalar"
    if label == "F":
        return "antisymmetric_tensor"
    return "unsupported"


def _rotated_value(fam, idx, fs, R):
    """sum over component indices of prod R-factors times S(idx', fs)."""
    kinds = [_component_matrix(fam, k) for k, _ in idx.matter]
    options = []
    for (k, comp), kind in zip(idx.matter, kinds):
        if kind == "scalar":
            options.append([((k, comp), 1.0)])
        else:
            mu, nu = comp
            opts = []
            for a, b in itertools.combinations(range(DIM), 2):
                w = R[mu, a] * R[nu, b] - R[mu, b] * R[nu, a]
                if w != 0:
                    opts.append(((k, (a, b)), w))
            options.append(opts)
    total, err, size = 0.0, 0.0, 0.0
    for combo in itertools.product(*options):
        w = np.prod([c[1] for c in combo])
        new = FieldIndex(tuple(c[0] for c in combo), idx.gauge)
        v, e = smear(fam, new, fs)
        total += w * v
        err += abs(w) * e
        size += abs(w * v)
    return total, err, size


def check_euclidean_covariance(fam, rng=None, samples: int = 3, degrees=(2, 4)) -> AxiomReport:
    """S(g.f) = D(g) S(f) for random rotations plus translations; identity is bit-exact."""
    axiom = "euclidean_covariance"
    rng = np.random.default_rng(1) if rng is None else rng
    if _is_lattice(fam):
        return _lattice_covariance(fam, rng)
    if fam.metric is not Metric.EUCLIDEAN:
        return _inapplicable(axiom, fam, "Minkowski family; see relativistic covariance")
    labels = {k for k in fam.catalog}
    if any(_component_matrix(fam, k) == "unsupported" for k in labels):
        return _inapplicable(axiom, fam, "component representation not tabulated for this catalog")
    worst, identity_exact, rows = 0.0, True, []
    for deg in degrees:
        if deg > fam.degree_cap:
            continue
        for s in range(samples):
            idx = probe_index(fam, deg, rng)
            fs = tuple(random_gaussian(rng, deriv=(s == 0 and i == 0)) for i in range(deg))
            base, _ = smear(fam, idx, fs)
            # identity transformation: bit-level equality
            same, _ = smear(fam, idx, tuple(f.pullback(np.eye(DIM)) for f in fs))
            identity_exact &= same == base
            rep = random_rotation(rng)
            R = vector_rep_matrix(rep)
            a = rng.normal(scale=1.0, size=DIM)
            # (g f)(x) = f(R^T (x - a))
            moved = tuple(f.pullback(R.T, -R.T @ a) for f in fs)
            lhs, _ = smear(fam, idx, moved)
            rhs, _, size = _rotated_value(fam, idx, fs, R)
            # vanishing components are judged against the size of the contributing terms
            scale = max(abs(lhs), abs(rhs), abs(base), size, 1e-300)
            rel = abs(lhs - rhs) / scale
            worst = max(worst, rel)
            rows.append({"degree": deg, "value": base, "transformed": lhs, "rotated": rhs, "relative_defect": rel})
    ok = identity_exact and worst <= 1e-8
    return _report(axiom, fam, "pass" if ok else "fail",
                   {"max_relative_defect": worst, "identity_bit_exact": identity_exact, "samples": rows}, 1e-8,
                   reason="" if ok else ("identity not bit-exact" if not identity_exact else f"defect {worst:.2e}"))


def _lattice_covariance(fam, rng) -> AxiomReport:
    """Hypercubic subgroup (axis permutations among equal extents, reflections) and lattice translations."""
    dims = fam.meta["dims"]
    d = len(dims)
    idx = FieldIndex(((fam.meta["composite"], None),) * 2)
    worst, rows = 0.0, []
    seps = [np.array(s) for s in ([1] + [0] * (d - 1), [0] * (d - 1) + [1], [1, 1] + [0] * (d - 2), [2] + [0] * (d - 1))]
    perms = [p for p in itertools.permutations(range(d)) if all(dims[p[i]] == dims[i] for i in range(d))]
    for sep in seps:
        v0, e0 = fam.kernel(idx, np.array([np.zeros(d), sep]))
        for p in perms[:6]:
            for flip in (1, -1):
                s2 = flip * sep[list(p)]
                anchor = rng.integers(0, min(dims), size=d)
                v1, e1 = fam.kernel(idx, np.array([anchor, anchor + s2]))
                z = abs(v1 - v0) / max(math.hypot(e0, e1), 1e-300)
                worst = max(worst, z)
                rows.append({"sep": sep.tolist(), "image": s2.tolist(), "z": z})
    ok = worst <= 5.0
    return _report("euclidean_covariance", fam, "pass" if ok else "fail",
                   {"max_z": worst, "subgroup": "hypercubic (axis permutations of equal extents, reflections) + lattice translations",
                    "samples": rows[:20]}, None, NSIGMA, reason="hypercubic subgroup only" if ok else f"{worst:.1f} sigma")


# --- temporal support ----------------------------------------------------------------


def check_temporal_support(fam, momenta=(0.0, 0.7), n_poles: int = 1) -> AxiomReport:
    """Spatial-momentum slices must be sums of exp(-omega tau) with omega >= |p| (signed weights)."""
    axiom = "temporal_support"
    if _is_lattice(fam):
        return _inapplicable(axiom, fam, "statistical kernel (no spectral slice fit on lattice estimates)")
    if fam.metric is not Metric.EUCLIDEAN:
        return _inapplicable(axiom, fam, "Minkowski family")
    if "radial" not in fam.meta and "slice_override" not in fam.meta:
        return _inapplicable(axiom, fam, "no scalar radial 2-point kernel to slice")
    try:
        form = reduce_to_differences(fam, probe_index(fam, 2))
    except TranslationError as exc:
        return _report(axiom, fam, "fail", {}, reason=str(exc))
    fits, ok, inconclusive = [], True, False
    for p in momenta:
        if p == 0 and fam.meta.get("zero_mode"):
            continue
        model = continuation.fit_spectral(form, {"poles": n_poles, "signed": True}, p=p)
        fits.append({"p": p, "mu2": [m for m, _ in model.poles], "rho": [r for _, r in model.poles],
                     "residual": model.residual, "verdict": model.verdict, "unconstrained": model.unconstrained})
        ok &= model.verdict == "pass"
        inconclusive |= model.verdict == "inconclusive"
    verdict = "pass" if ok else ("inconclusive" if inconclusive else "fail")
    return _report(axiom, fam, verdict, {"slices": fits}, continuation.FIT_RTOL,
                   reason="" if ok else "slice not representable with nonnegative energies")


# --- symmetry -------------------------------------------------------------------------


def _slot_permutations(idx: FieldIndex, full_upto: int = 4):
    j, n = idx.j, idx.n
    if idx.degree <= full_upto:
        for pi in itertools.permutations(range(j)):
            for sigma in itertools.permutations(range(n)):
                yield Permutation(sigma, pi)
        return
    for a, b in itertools.combinations(range(j), 2):
        pi = list(range(j))
        pi[a], pi[b] = pi[b], pi[a]
        yield Permutation(tuple(range(n)), tuple(pi))
    for a, b in itertools.combinations(range(n), 2):
        sigma = list(range(n))
        sigma[a], sigma[b] = sigma[b], sigma[a]
        yield Permutation(tuple(sigma), tuple(range(j)))


def check_symmetry(fam, rng=None, degrees=(2, 4, 6), probes: int = 2) -> AxiomReport:
    """Graded symmetry under slot permutations (all permutations up to degree 4, transpositions above)."""
    axiom = "symmetry"
    rng = np.random.default_rng(2) if rng is None else rng
    worst, worst_sigma, count = 0.0, 0.0, 0
    for deg in degrees:
        if deg > min(fam.degree_cap, 6):
            continue
        for _ in range(probes):
            idx = probe_index(fam, deg, rng)
            if _is_lattice(fam):
                fs = tuple(random_grid_function(tuple(fam.meta["dims"]), rng) for _ in range(deg))
            else:
                fs = tuple(random_gaussian(rng) for _ in range(deg))
            base, e0 = smear(fam, idx, fs)
            for perm in _slot_permutations(idx):
                v, e = apply_permutation(fam, idx, perm, fs)
                scale = max(abs(base), 1e-300)
                worst = max(worst, abs(v - base) / scale)
                worst_sigma = max(worst_sigma, math.hypot(e, e0) / scale)
                count += 1
    tol = SYMMETRY_TOL if fam.exact else max(SYMMETRY_TOL, NSIGMA * worst_sigma)
    ok = worst <= tol
    return _report(axiom, fam, "pass" if ok else "fail",
                   {"max_relative_discrepancy": worst, "permutations_checked": count}, tol,
                   None if fam.exact else NSIGMA, "" if ok else f"discrepancy {worst:.2e}")


# --- cluster ------------------------------------------------------------------------


def check_cluster(fam, direction=(0, 1, 0, 0), lams=None) -> AxiomReport:
    """D(lam) = |S(f x g_lam) - S(f) S(g_lam)| must decay; reports the fitted decay rate."""
    axiom = "cluster"
    if _is_lattice(fam):
        return _lattice_cluster(fam)
    m = float(fam.meta.get("mass", 0.0))
    if lams is None:
        lams = np.linspace(0.0, 10.0 / m if m > 0 else 20.0, 21)
    a = np.asarray(direction, dtype=float)
    a = a / np.linalg.norm(a)
    idx = probe_index(fam, 2, np.random.default_rng(3))
    i1, i2 = FieldIndex(idx.matter[:1], ()), FieldIndex(idx.matter[1:], ())
    f = TestFunction.gaussian((0, 0, 0, 0), 0.7)
    g = TestFunction.gaussian((0.3, 0, 0, 0), 0.7)
    D = []
    for lam in lams:
        gl = g.translated(lam * a)
        full, _ = smear(fam, idx, (f, gl))
        s1, _ = smear(fam, i1, (f,))
        s2, _ = smear(fam, i2, (gl,))
        D.append(abs(full - s1 * s2))
    D = np.array(D)
    peak = float(D.max())
    tail = D[len(D) // 2:]
    monotone = bool(np.all(np.diff(tail) <= 1e-12 * peak))
    final_ok = D[-1] <= CLUSTER_TOL * peak
    q = {"lambda": np.asarray(lams).tolist(), "D": D.tolist(), "final_over_peak": float(D[-1] / peak) if peak else 0.0,
         "tail_monotone": monotone}
    if m > 0:
        q.update(continuation.cluster_rate(lams, D, lam_min=3.0 / m))
    ok = monotone and final_ok
    return _report(axiom, fam, "pass" if ok else "fail", q, CLUSTER_TOL,
                   reason="" if ok else "connected part does not decay")


def _lattice_cluster(fam) -> AxiomReport:
    table = fam.meta.get("table") or []
    if len(table) < 2:
        return _inapplicable("cluster", fam, "need correlator table at two or more separations")
    rows = sorted(table, key=lambda r: np.linalg.norm(r["sep"]))
    last = rows[-1]
    z_last = abs(last["connected"]) / max(last["connected_err"], 1e-300)
    mags = [abs(r["connected"]) for r in rows]
    errs = [r["connected_err"] for r in rows]
    monotone = all(mags[i + 1] <= mags[i] + NSIGMA * math.hypot(errs[i], errs[i + 1]) for i in range(len(rows) - 1))
    ok = z_last <= NSIGMA and monotone
    return _report("cluster", fam, "pass" if ok else "fail",
                   {"connected": [r["connected"] for r in rows], "errors": errs, "z_last": z_last,
                    "monotone_within_errors": monotone}, None, NSIGMA,
                   "" if ok else "connected correlator at largest separation not consistent with zero")


# --- linear growth -------------------------------------------------------------------


@lru_cache(maxsize=64)
def _seminorm_cached(key: str, c: int) -> float:
    import json

    return schwartz_seminorm(TestFunction.from_json(json.loads(key)), c)


def seminorm(f, c: int = GROWTH_ORDER) -> float:
    import json

    if isinstance(f, TestFunction):
        return _seminorm_cached(json.dumps(f.to_json(), sort_keys=True), c)
    return schwartz_seminorm(f, c)


def growth_fit(ms, w) -> dict:
    """Fit log w_m = log C + a m + d log m! (a omitted with fewer than three points)."""
    ms = np.asarray(ms, dtype=float)
    lw = np.log(np.asarray(w, dtype=float))
    if len(ms) == 1:
        return {"C": float(w[0]), "d": 0.0, "a": 0.0, "residual": 0.0}
    lf = np.array([math.lgamma(m + 1) for m in ms])
    cols = [np.ones_like(ms), lf] if len(ms) < 3 else [np.ones_like(ms), ms, lf]
    A = np.stack(cols, axis=1)
    coef, *_ = np.linalg.lstsq(A, lw, rcond=None)
    res = float(np.sqrt(np.mean((A @ coef - lw) ** 2)))
    out = {"C": float(math.exp(coef[0])), "d": float(coef[-1]), "residual": res}
    out["a"] = float(coef[1]) if len(cols) == 3 else 0.0
    return out


def check_linear_growth(fam, n_max: int = 8, probes=None, c: int = GROWTH_ORDER) -> AxiomReport:
    """w_m = sup |S_m(f,...,f)| / |f|_c^m over probes, fitted against (m!)^d."""
    axiom = "linear_growth"
    if _is_lattice(fam):
        return _inapplicable(axiom, fam, "higher-point lattice estimates are noise dominated at these degrees")
    probes = probes or [TestFunction.gaussian((0, 0, 0, 0), 0.8)]
    n_max = min(n_max, fam.degree_cap)
    ms = list(range(2, n_max + 1, 2))
    w = []
    for m_ in ms:
        idx = probe_index(fam, m_, np.random.default_rng(4))
        if "F" in fam.catalog:
            idx = FieldIndex((("F", (0, 1)),) * m_)
        best = 0.0
        for f in probes:
            v, _ = smear(fam, idx, (f,) * m_)
            best = max(best, abs(v) / seminorm(f, c) ** m_)
        w.append(best)
    if any(x == 0 for x in w):
        return _report(axiom, fam, "inconclusive", {"m": ms, "w": w}, reason="vanishing probe values")
    fit = growth_fit(ms, w)
    pairs = growth_fit([m_ // 2 for m_ in ms], w)
    ok = math.isfinite(fit["d"]) and fit["residual"] <= GROWTH_RESIDUAL
    q = {"m": ms, "w": w, "C": fit["C"], "d": fit["d"], "a": fit["a"], "residual": fit["residual"],
         "seminorm_order": c, "d_pair_count": pairs["d"]}
    return _report(axiom, fam, "pass" if ok else "fail", q, GROWTH_RESIDUAL,
                   reason="" if ok else "growth fit not bounded")


# --- reflection positivity -------------------------------------------------------------


class SupportError(ValueError):
    """Test function is not supported at positive times within the leakage budget."""


def default_rp_basis(fam, n: int = 3) -> list:
    """Vacuum, single-field and one two-field functional built from narrow positive-time Gaussians."""
    rng = np.random.default_rng(5)
    taus = (1.0, 1.25, 1.5, 1.8)[:n]
    fs = [TestFunction.gaussian((t, *rng.normal(scale=0.4, size=3)), 0.15) for t in taus]
    basis = [(EMPTY, ())]
    for i, f in enumerate(fs):
        basis.append((probe_index(fam, 1, np.random.default_rng(10 + i)), (f,)))
    idx2 = probe_index(fam, 2, np.random.default_rng(20))
    basis.append((idx2, (fs[0], fs[1])))
    return basis


def theta(fam, idx: FieldIndex, fs) -> tuple[FieldIndex, tuple, float]:
    """Reflected, conjugated and slot-reversed functional; returns (index, test functions, sign)."""
    sign = 1.0
    matter = []
    for k, comp in reversed(idx.matter):
        if "phibar" in fam.catalog:
            k = CONJUGATE_LABEL.get(k, k)
        if k == "F":
            sign *= (-1.0) ** sum(1 for c in comp if c == 0)
        matter.append((k, comp))
    gauge = []
    for a, mu in reversed(idx.gauge):
        if mu == 0:
            sign = -sign
        gauge.append((a, mu))
    m_args, g_args = fs[: idx.j], fs[idx.j:]
    r = lambda f: f.conj().reflected()  # noqa: E731
    new_fs = tuple(r(f) for f in reversed(m_args)) + tuple(r(f) for f in reversed(g_args))
    return FieldIndex(tuple(matter), tuple(gauge)), new_fs, sign


def _reflection_gram(fam, basis):
    for idx, fs in basis:
        for f in fs:
            leak = f.leakage(0.0)
            if leak > SUPPORT_LEAKAGE:
                raise SupportError(f"test function leaks {leak:.1e} into negative times")
    n = len(basis)
    M = np.zeros((n, n), dtype=complex)
    E = np.zeros((n, n))
    for i, (ia, fa) in enumerate(basis):
        ti, tf, sgn = theta(fam, ia, fa)
        for j, (ib, fb) in enumerate(basis):
            idx = ti.concat(ib)
            args = tf[: ti.j] + fb[: ib.j] + tf[ti.j:] + fb[ib.j:]
            v, e = smear(fam, idx, args)
            M[i, j] = sgn * v
            E[i, j] = e
    return M, E


def check_reflection_positivity(target, basis=None) -> AxiomReport:
    """Gram matrix of reflected pairings over positive-time functionals must be PSD."""
    from .gram import GramMatrix
    from .lattice.ensemble import Ensemble, os_gram, plaquette_string

    axiom = "reflection_positivity"
    if isinstance(target, Ensemble):
        # strings of length k occupy times 0..k and must stay below the reflection image
        kmax = min(4, target.lattice.dims[0] // 2 - 1)
        basis = basis or [plaquette_string(k) for k in range(1, kmax + 1)]
        G = os_gram(target, basis)
        tol = max(1e-10 * G.norm, NSIGMA * G.min_eig_error)
        ok = G.min_eig >= -tol
        q = {"eigenvalues": G.eigenvalues, "eig_errors": G.eig_errors, "min_eig": G.min_eig,
             "min_eig_error": G.min_eig_error, "asymmetry": G.asymmetry, "basis": G.descriptors}
        rep = AxiomReport(axiom, f"lattice_{target.group.kind.value}", "pass" if ok else "fail", q, tol, NSIGMA,
                          "" if ok else f"min eigenvalue {G.min_eig:.2e} below -{tol:.2e}", target.content_hash())
        return rep
    if target.metric is not Metric.EUCLIDEAN:
        return _inapplicable(axiom, target, "Minkowski family")
    basis = basis or default_rp_basis(target)
    M, E = _reflection_gram(target, basis)
    G = GramMatrix(M, [str(b[0].to_json()) for b in basis])
    if target.exact:
        tol = EXACT_TOL * max(G.norm, 1e-300)
    else:
        tol = max(1e-10 * G.norm, NSIGMA * float(np.linalg.norm(E, 2)))
    ok = G.min_eig >= -tol
    return _report(axiom, target, "pass" if ok else "fail",
                   {"eigenvalues": G.eigenvalues, "min_eig": G.min_eig, "norm": G.norm, "asymmetry": G.asymmetry,
                    "basis_size": len(basis)}, tol, None if target.exact else NSIGMA,
                   "" if ok else f"negative eigenvalue {G.min_eig:.3e}")


# --- gauge covariance ----------------------------------------------------------------


def _default_eps() -> TestFunction:
    return TestFunction.gaussian((0.4, 0.2, -0.1, 0.3), 1.1, 0.8) + TestFunction.gaussian((-0.5, 0, 0.6, 0), 0.9, -0.5)


def check_gauge_covariance(target, rng=None, eps=None, n_configs: int = 4) -> AxiomReport:
    """(a) invariant correlators unchanged, (b) positivity forms unchanged, (c) gauge sector shifts covariantly."""
    from .lattice.core import gauge_transform, random_gauge_field
    from .lattice.ensemble import Ensemble
    from .lattice.observables import all_observables

    axiom = "gauge_covariance"
    rng = np.random.default_rng(6) if rng is None else rng
    if isinstance(target, Ensemble):
        worst = 0.0
        for cfg in target.configs[:n_configs]:
            g = random_gauge_field(cfg.lattice, cfg.group, rng)
            before, after = all_observables(cfg), all_observables(gauge_transform(cfg, g))
            for k in before:
                scale = max(np.abs(before[k]).max(), 1e-300)
                worst = max(worst, float(np.abs(before[k] - after[k]).max() / scale))
        ok = worst <= LATTICE_GAUGE_TOL
        return AxiomReport(axiom, f"lattice_{target.group.kind.value}", "pass" if ok else "fail",
                           {"a_invariant_observables": worst, "b_positivity_forms": worst,
                            "c_gauge_sector": "no gauge-variant lattice correlators are measured"},
                           LATTICE_GAUGE_TOL, None, "" if ok else f"defect {worst:.2e}", target.content_hash())
    kind = target.meta.get("kind", "")
    eps = eps or _default_eps()
    if kind == "free_maxwell_F":
        return _maxwell_gauge(target, eps)
    if kind == "charged_scalar":
        f = TestFunction.gaussian((1.0, 0, 0, 0), 0.15)
        m = target.meta["mass"]
        base, shifted = phi2_reflected_form(m, f), phi2_reflected_form(m, f, eps)
        dev = abs(shifted - base) / max(abs(base), 1e-300)
        one = abs(phi2_one_point(f, eps) - phi2_one_point(f))
        worst = max(dev, one)
        ok = worst <= GAUGE_TOL
        return _report(axiom, target, "pass" if ok else "fail",
                       {"a_invariant_composites": dev, "b_positivity_forms": worst,
                        "c_gauge_sector": "matter phases only; no gauge potential in this family"},
                       GAUGE_TOL, reason="" if ok else f"defect {worst:.2e}")
    return _inapplicable(axiom, target, "no charged or gauge slots")


def _smeared_shift(f: TestFunction, eps: TestFunction, mu: int, nu: int, n: int = 6) -> complex:
    """int f(x) s_mn(x) over Gauss-Hermite nodes of f."""
    y, w = quadrature_nodes(f, n)
    return complex(np.sum(w * gauge_shift_field(eps, y)[:, mu, nu]))


def _maxwell_gauge(fam, eps) -> AxiomReport:
    rng = np.random.default_rng(7)
    # (a) F correlators: F -> F + s with s a c-number; the shifted 2-point is S + s(f) s(g)
    worst_a = 0.0
    for _ in range(3):
        f, g = random_gaussian(rng), random_gaussian(rng)
        (m1, n1), (m2, n2) = sorted(rng.choice(DIM, 2, replace=False)), sorted(rng.choice(DIM, 2, replace=False))
        idx = FieldIndex((("F", (int(m1), int(n1))), ("F", (int(m2), int(n2)))))
        base, _ = smear(fam, idx, (f, g))
        shifted = base + _smeared_shift(f, eps, m1, n1) * _smeared_shift(g, eps, m2, n2)
        worst_a = max(worst_a, abs(shifted - base) / max(abs(base), 1e-300))
    # (b) positivity form of :F^2:
    f = TestFunction.gaussian((1.0, 0, 0, 0), 0.2)
    b0, b1 = F2_reflected_form(f), F2_reflected_form(f, eps)
    worst_b = abs(b1["paired"] - b0["paired"]) / max(abs(b0["paired"]), 1e-300)
    # (c) potential sector: A -> A + d eps; shifted 2-point = S + (int f d_mu eps)(int g d_nu eps)
    worst_c = 0.0
    for mu, nu in ((0, 0), (1, 1), (0, 2)):
        f, g = random_gaussian(rng), random_gaussian(rng)
        base = _potential_euclidean_pair(mu, nu, f, g)
        e_mu = tuple(int(v) for v in np.eye(DIM, dtype=int)[mu])
        e_nu = tuple(int(v) for v in np.eye(DIM, dtype=int)[nu])
        # direct: derivative on eps; predicted: integration by parts onto the test functions
        direct = base + overlap(f, eps.derivative(e_mu)) * overlap(g, eps.derivative(e_nu))
        pred = base + (-overlap(f.derivative(e_mu), eps)) * (-overlap(g.derivative(e_nu), eps))
        worst_c = max(worst_c, abs(direct - pred) / max(abs(pred), 1e-300))
    worst = max(worst_a, worst_b, worst_c)
    ok = worst <= GAUGE_TOL
    return _report("gauge_covariance", fam, "pass" if ok else "fail",
                   {"a_invariant_correlators": worst_a, "b_positivity_forms": worst_b, "c_potential_shift": worst_c},
                   GAUGE_TOL, reason="" if ok else f"defect {worst:.2e}")


# --- renormalized positivity -----------------------------------------------------------


def check_renormalized_positivity(target, f=None) -> AxiomReport:
    """Positivity of normal-ordered composite forms (pos1 for |phi|^2, pos2 for F^2)."""
    from .lattice.ensemble import Ensemble, jackknife

    axiom = "renormalized_positivity"
    if isinstance(target, Ensemble):
        if not target.action.has_matter:
            return AxiomReport(axiom, f"lattice_{target.group.kind.value}", "inapplicable", {},
                               reason="pure gauge ensemble (no |phi|^2 composite)", provenance=target.content_hash())
        O = target.fields("phi2")
        n = len(target)
        rng = np.random.default_rng(8)
        w = random_grid_function(target.lattice.dims, rng, 4).values
        one = np.tensordot(O, w, axes=target.lattice.ndim)
        v1, e1, _ = jackknife(one)
        v2, e2, _ = jackknife(one * one)
        ok = v1 >= -NSIGMA * e1 and v2 >= -NSIGMA * e2
        return AxiomReport(axiom, f"lattice_{target.group.kind.value}", "pass" if ok else "fail",
                           {"one_point": v1, "one_point_err": e1, "paired": v2, "paired_err": e2, "n_configs": n},
                           None, NSIGMA, "" if ok else "negative smeared composite", target.content_hash())
    kind = target.meta.get("kind", "")
    f = f or TestFunction.gaussian((1.0, 0, 0, 0), 0.15)
    if kind == "charged_scalar":
        val = phi2_reflected_form(target.meta["mass"], f)
        one = phi2_one_point(f)
        ok = val.real >= -EXACT_TOL * abs(val) and abs(one) == 0
        return _report(axiom, target, "pass" if ok else "fail",
                       {"form": "pos1", "paired": val, "one_point": one, "imag_over_real": abs(val.imag) / abs(val.real)},
                       EXACT_TOL, reason="" if ok else "negative paired form")
    if kind == "free_maxwell_F":
        out = F2_reflected_form(f)
        C = structure_constants(target.group)
        c_terms = float(np.abs(C).sum())  # every C-contraction carries a factor of C
        val = out["paired"]
        ok = val.real >= -EXACT_TOL * abs(val) and c_terms == 0.0
        return _report(axiom, target, "pass" if ok else "fail",
                       {"form": "pos2", "paired": val, "diagonal_one_point": out["one_point"],
                        "C_terms": c_terms, "C_terms_exact_zero": c_terms == 0.0},
                       EXACT_TOL, reason="" if ok else "negative paired form")
    return _inapplicable(axiom, target, "no gauge-charged composite in this family")


# --- Minkowski side (2-point) ----------------------------------------------------------


def check_spectral_condition(model: continuation.SpectralModel, fam=None, rng=None) -> AxiomReport:
    """Spectral weights are nonnegative with mu^2 >= 0; optional W(conj f, f) >= 0 on a Minkowski family."""
    rng = np.random.default_rng(9) if rng is None else rng
    comps = model.components()
    ok_model = all(m2 >= 0 and r >= 0 for m2, r in comps)
    q = {"poles": model.poles, "min_mu2": min((m2 for m2, _ in comps), default=0.0),
         "min_rho": min((r for _, r in comps), default=0.0)}
    ok = ok_model
    if fam is not None:
        vals = []
        for _ in range(4):
            f = random_gaussian(rng)
            v, _ = smear(fam, probe_index(fam, 2), (f.conj(), f))
            vals.append(v)
        q["wightman_diagonal"] = vals
        ok &= all(v.real >= -1e-10 * abs(v) and abs(v.imag) <= 1e-8 * abs(v) for v in vals)
    name = fam.name if fam is not None else "spectral_model"
    return AxiomReport("spectral_condition", name, "pass" if ok else "fail", q, 1e-10,
                       reason="" if ok else "negative weight or tachyonic pole")


def check_local_commutativity(model: continuation.SpectralModel, rng=None, samples: int = 8) -> AxiomReport:
    """[phi(x), phi(0)] = W(x) - W(-x) vanishes at spacelike x; reported also at timelike x for contrast."""
    rng = np.random.default_rng(10) if rng is None else rng
    worst, timelike = 0.0, []
    for _ in range(samples):
        xs = rng.normal(size=3)
        r = np.linalg.norm(xs)
        t = rng.uniform(-0.9, 0.9) * r
        x = np.array([t, *xs])
        w1, w2 = continuation.continue_to_wightman(model, x), continuation.continue_to_wightman(model, -x)
        worst = max(worst, abs(w1 - w2) / max(abs(w1), 1e-300))
        y = np.array([1.5 * r, *xs])
        timelike.append(abs(continuation.continue_to_wightman(model, y) - continuation.continue_to_wightman(model, -y)))
    ok = worst <= 1e-10
    return AxiomReport("local_commutativity", "spectral_model", "pass" if ok else "fail",
                       {"max_spacelike_commutator": worst, "timelike_commutator": timelike}, 1e-10,
                       reason="" if ok else "nonzero spacelike commutator")


def check_relativistic_covariance(fam: CorrelatorFamily, rng=None, samples: int = 6) -> AxiomReport:
    """W(Lambda x) = W(x) for random proper orthochronous Lorentz transformations (pointwise kernel)."""
    rng = np.random.default_rng(11) if rng is None else rng
    if fam.metric is not Metric.LORENTZ or fam.kernel is None:
        return _inapplicable("relativistic_covariance", fam, "needs a Minkowski family with a pointwise kernel")
    idx = probe_index(fam, 2)
    worst = 0.0
    for s in range(samples):
        L = vector_rep_matrix(SpacetimeRep.lorentz(random_sl2c(rng, 0.3)))
        xs = rng.normal(size=3)
        r = np.linalg.norm(xs)
        t = (rng.uniform(-0.8, 0.8) if s % 2 == 0 else rng.choice([-1, 1]) * rng.uniform(1.3, 2.0)) * r
        x = np.array([t, *xs])
        try:
            v0, _ = fam.kernel(idx, np.array([x, np.zeros(DIM)]))
            v1, _ = fam.kernel(idx, np.array([L @ x, np.zeros(DIM)]))
        except kernels.QuadratureError:
            continue
        worst = max(worst, abs(v1 - v0) / max(abs(v0), 1e-300))
    ok = worst <= 1e-6
    return _report("relativistic_covariance", fam, "pass" if ok else "fail", {"max_relative_defect": worst}, 1e-6,
                   reason="" if ok else f"defect {worst:.2e}")


# --- counterexamples -------------------------------------------------------------------


def _scalar_like(name, pair, kernel2, meta, evaluator=None):
    def ev(idx, fs):
        if idx.n or any(k != "phi" for k, _ in idx.matter):
            raise ValueError("counterexample families carry the single label phi")
        return wick_sum(idx.degree, lambda i, j: pair(fs[i], fs[j])), 0.0

    def kernel(idx, pts):
        pts = np.asarray(pts, dtype=float)
        return wick_sum(len(pts), lambda i, j: kernel2(pts[j] - pts[i])), 0.0

    return CorrelatorFamily(name, Metric.EUCLIDEAN, Source.EXACT_FREE, evaluator or ev, catalog=SCALAR_CATALOG,
                            kernel=kernel, meta=meta)


def sign_flipped_family(m: float = 1.0) -> CorrelatorFamily:
    """Free scalar with the 2-point function multiplied by -1 (violates reflection positivity)."""
    return _scalar_like("sign_flipped", lambda f, g: -euclidean_pair(m, f, g),
                        lambda z: -kernels.euclidean_propagator(m, float(np.linalg.norm(z))),
                        {"kind": "sign_flipped", "mass": m, "targets": "reflection_positivity",
                         "radial": lambda r: -kernels.euclidean_propagator(m, r)})


TIME_REFLECTION_T = 6.4


def time_reflected_family(m: float = 1.0, T: float = TIME_REFLECTION_T) -> CorrelatorFamily:
    """Free scalar whose momentum slices are replaced by C(T - tau): growing in tau (violates temporal support)."""
    from .correlators import _radial_slice

    def slices(tau, p):
        return np.array([_radial_slice(lambda r: kernels.euclidean_propagator(m, r), T - t, p) for t in tau])

    return _scalar_like("time_reflected", lambda f, g: euclidean_pair(m, f, g),
                        lambda z: kernels.euclidean_propagator(m, float(np.linalg.norm(z))),
                        {"kind": "time_reflected", "mass": m, "targets": "temporal_support", "reflection_time": T,
                         "slice_override": slices})


def nonfactorizing_family(m: float = 1.0, c: float = 0.05) -> CorrelatorFamily:
    """Free scalar plus the constant c int f int g in every pair (violates clustering)."""
    from .correlators import _radial_slice

    def pair(f, g):
        return euclidean_pair(m, f, g) + c * f.integral() * g.integral()

    def slices(tau, p):
        if p == 0:
            raise ValueError("the constant term puts a delta function at p = 0")
        return np.array([_radial_slice(lambda r: kernels.euclidean_propagator(m, r), t, p) for t in tau])

    return _scalar_like("nonfactorizing", pair, lambda z: kernels.euclidean_propagator(m, float(np.linalg.norm(z))) + c,
                        {"kind": "nonfactorizing", "mass": m, "constant": c, "targets": "cluster",
                         "slice_override": slices, "zero_mode": True})


def counterexample_families(m: float = 1.0) -> dict:
    return {"reflection_positivity": sign_flipped_family(m), "temporal_support": time_reflected_family(m),
            "cluster": nonfactorizing_family(m)}


# --- suite ------------------------------------------------------------------------------


EUCLIDEAN_AXIOMS = {
    "euclidean_covariance": check_euclidean_covariance,
    "temporal_support": check_temporal_support,
    "symmetry": check_symmetry,
    "cluster": check_cluster,
    "linear_growth": check_linear_growth,
    "reflection_positivity": check_reflection_positivity,
    "gauge_covariance": check_gauge_covariance,
    "renormalized_positivity": check_renormalized_positivity,
}

AXIOM_NAMES = tuple(EUCLIDEAN_AXIOMS) + ("spectral_condition", "local_commutativity", "relativistic_covariance")


def run_suite(fam, names=None) -> list[AxiomReport]:
    """Run the Euclidean checkers (all by default) on a family."""
    names = names or list(EUCLIDEAN_AXIOMS)
    out = []
    for name in names:
        if name not in EUCLIDEAN_AXIOMS:
            raise KeyError(f"unknown axiom {name!r}; valid: {sorted(EUCLIDEAN_AXIOMS)}")
        out.append(EUCLIDEAN_AXIOMS[name](fam))
    return out


def charged_scalar_family(m: float = 1.0) -> CorrelatorFamily:
    from .free_fields import free_scalar_family

    return free_scalar_family(m, charged=True)

