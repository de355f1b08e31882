"""Euclidean -> relativistic continuation at the 2-point level.

Spatial-momentum slices of a Euclidean 2-point function are fitted by
spectral models C(tau; p) = sum_i rho_i exp(-omega_i tau) / (2 omega_i) with
omega_i = sqrt(p^2 + mu_i^2).  The fitted model is continued to the
Wightman function as sum_i rho_i Delta+(x; mu_i).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from . import kernels
from .gram import GramMatrix
from .testfunctions import TestFunction

FIT_RTOL = 1e-4
COND_MAX = 1e12


@dataclass
class SpectralModel:
    """Poles ``(mu^2, rho)`` with rho the Kallen-Lehmann weight, plus an optional tabulated continuum."""

    poles: list = field(default_factory=list)
    continuum: tuple | None = None  # (mu2 grid, density)
    residual: float = 0.0
    covariance: list | None = None
    condition: float = 1.0
    momentum: float = 0.0
    signed: bool = False
    amplitudes: list = field(default_factory=list)
    unconstrained: dict = field(default_factory=dict)
    verdict: str = "pass"
    notes: str = ""

    def __post_init__(self):
        self.poles = [(float(m2), float(r)) for m2, r in self.poles]
        if not self.signed:
            for m2, r in self.poles:
                if m2 < 0 or r < 0:
                    raise ValueError("spectral poles need mu^2 >= 0 and rho >= 0")
        else:
            for m2, _ in self.poles:
                if m2 < 0:
                    raise ValueError("spectral poles need mu^2 >= 0")

    @property
    def total_weight(self) -> float:
        w = sum(r for _, r in self.poles)
        if self.continuum is not None:
            grid, dens = self.continuum
            w += float(np.trapezoid(dens, grid))
        return w

    def components(self):
        """(mu^2, rho) pairs including a discretized continuum."""
        out = list(self.poles)
        if self.continuum is not None:
            grid, dens = (np.asarray(a, dtype=float) for a in self.continuum)
            wts = np.gradient(grid) * dens
            out += [(float(a), float(b)) for a, b in zip(grid, wts) if b != 0]
        return out

    def slice(self, tau, p: float = 0.0) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        out = np.zeros_like(tau)
        for m2, rho in self.components():
            om = math.sqrt(p * p + m2)
            out = out + rho * np.exp(-om * tau) / (2 * om)
        return out

    def to_json(self) -> dict:
        return {"poles": [{"mu2": m2, "rho": r} for m2, r in self.poles],
                "continuum": None if self.continuum is None else [np.asarray(a).tolist() for a in self.continuum],
                "residual": self.residual, "covariance": self.covariance, "condition": self.condition,
                "momentum": self.momentum, "signed": self.signed, "amplitudes": self.amplitudes,
                "unconstrained": self.unconstrained, "verdict": self.verdict, "notes": self.notes}

    @classmethod
    def from_json(cls, d: dict) -> SpectralModel:
        cont = d.get("continuum")
        return cls([(p["mu2"], p["rho"]) for p in d["poles"]], None if cont is None else tuple(np.asarray(c) for c in cont),
                   d.get("residual", 0.0), d.get("covariance"), d.get("condition", 1.0), d.get("momentum", 0.0),
                   d.get("signed", False), d.get("amplitudes", []), d.get("unconstrained", {}),
                   d.get("verdict", "pass"), d.get("notes", ""))


# --- cone ---------------------------------------------------------------------------


def cone_member(a) -> bool:
    """``sum(a) / |a| > sqrt(dim - 1)`` (strict)."""
    a = np.asarray(a, dtype=float).ravel()
    norm = float(np.linalg.norm(a))
    if norm == 0:
        raise ValueError("cone membership is undefined for the zero vector")
    return bool(a.sum() / norm > math.sqrt(a.size - 1))


# --- fitting ------------------------------------------------------------------------


def _design(taus, p, mu2s):
    om = np.sqrt(p * p + np.asarray(mu2s))
    return np.exp(-np.outer(taus, om)) / (2 * om)


def _inner(A, y, signed):
    if signed:
        c, *_ = np.linalg.lstsq(A, y, rcond=None)
    else:
        c, _ = optimize.nnls(A, y, maxiter=1000)
    return c


def fit_slice(taus, data, p: float = 0.0, n_poles: int = 1, signed: bool = False, continuum=None,
              starts=None, rtol: float = FIT_RTOL) -> SpectralModel:
    """Variable-projection fit of one momentum slice (relative residuals)."""
    taus = np.asarray(taus, dtype=float)
    data = np.asarray(data, dtype=float)
    scale = np.abs(data)
    scale = np.where(scale > 0, scale, np.max(np.abs(data)) or 1.0)
    y = data / scale

    cont_A = None
    if continuum is not None:
        grid = np.asarray(continuum, dtype=float)
        cont_A = _design(taus, p, grid) * np.gradient(grid)

    def full_design(mu2s):
        A = _design(taus, p, mu2s)
        if cont_A is not None:
            A = np.hstack([A, cont_A])
        return A / scale[:, None]

    def resid(mu2s):
        A = full_design(mu2s)
        c = _inner(A, y, signed)
        return A @ c - y

    if starts is None:
        base = np.geomspace(0.05, 50.0, 9)
        starts = [list(s) for s in itertools.combinations(base, n_poles)]
    best = None
    for s0 in starts:
        try:
            res = optimize.least_squares(resid, np.asarray(s0, float), bounds=(0.0, np.inf), method="trf",
                                         x_scale="jac", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=4000)
        except ValueError:
            continue
        if best is None or res.cost < best.cost:
            best = res
    mu2 = np.sort(best.x)
    A = full_design(mu2)
    c = _inner(A, y, signed)
    r = A @ c - y
    rms = float(np.sqrt(np.mean(r**2)))
    cond = float(np.linalg.cond(A)) if A.size else 1.0
    om = np.sqrt(p * p + mu2)
    rhos = c[: len(mu2)]
    amps = rhos / (2 * om)
    poles = [(float(m), float(r)) for m, r in zip(mu2, rhos)]
    cov = None
    if best.jac is not None and len(taus) > len(mu2):
        J = best.jac
        s2 = 2 * best.cost / max(len(taus) - len(mu2) - len(c), 1)
        try:
            cov = (np.linalg.inv(J.T @ J) * s2).tolist()
        except np.linalg.LinAlgError:
            cov = None
    continuum_out = None
    if cont_A is not None:
        continuum_out = (np.asarray(continuum, float), c[len(mu2):])
    model = SpectralModel(poles if (signed or all(pp[1] >= 0 for pp in poles)) else [], continuum_out, rms, cov,
                          cond, p, signed, [float(a) for a in amps])
    model.unconstrained = _unconstrained_fit(taus, data, scale, p, n_poles)
    if cond > COND_MAX:
        model.verdict, model.notes = "inconclusive", f"ill-conditioned design (cond {cond:.2e})"
    elif rms > rtol:
        model.verdict, model.notes = "fail", f"relative residual {rms:.2e} exceeds {rtol:.0e}"
    return model


def _unconstrained_fit(taus, data, scale, p, n_poles) -> dict:
    """Signed amplitudes and unrestricted real energies (growth allowed), for visibility."""
    y = data / scale

    def resid(oms):
        A = np.exp(-np.outer(taus, oms)) / scale[:, None]
        c, *_ = np.linalg.lstsq(A, y, rcond=None)
        return A @ c - y

    best = None
    for s0 in itertools.combinations(np.linspace(-2.0, 6.0, 9), n_poles):
        res = optimize.least_squares(resid, np.asarray(s0), method="lm", xtol=1e-14, ftol=1e-14, max_nfev=4000)
        if best is None or res.cost < best.cost:
            best = res
    oms = np.sort(best.x)
    A = np.exp(-np.outer(taus, oms)) / scale[:, None]
    c, *_ = np.linalg.lstsq(A, y, rcond=None)
    mu2 = [float(o * abs(o) - p * p) for o in oms]
    return {"omega": oms.tolist(), "amplitude": c.tolist(), "mu2": mu2,
            "residual": float(np.sqrt(np.mean((A @ c - y) ** 2)))}


DEFAULT_TAUS = np.linspace(0.4, 6.0, 29)


def fit_spectral(difform, model_shape=None, p: float = 0.0, taus=None) -> SpectralModel:
    """Fit a spectral model to the spatial-momentum slice of a 2-point difference form.

    ``model_shape``: dict with ``poles`` (int), ``signed`` (bool), ``continuum`` (mu^2 grid or None).
    """
    shape = {"poles": 1, "signed": False, "continuum": None}
    shape.update(model_shape or {})
    taus = DEFAULT_TAUS if taus is None else np.asarray(taus, dtype=float)
    if np.any(taus <= 0):
        raise ValueError("slices are taken at positive Euclidean times")
    data = difform.momentum_slice(taus, p)
    return fit_slice(taus, data, p, shape["poles"], shape["signed"], shape["continuum"])


# --- continuation -------------------------------------------------------------------


def continue_to_wightman(model: SpectralModel, x) -> complex:
    """``W(x) = sum_i rho_i Delta+(x; mu_i)`` (closed-form Delta+, boundary value t - i0)."""
    x = np.asarray(x, dtype=float)
    t, r = float(x[0]), float(np.linalg.norm(x[1:]))
    total = 0.0 + 0.0j
    for m2, rho in model.components():
        total += rho * kernels.delta_plus(math.sqrt(m2), t, r)
    return total


def euclidean_from_model(model: SpectralModel, xi) -> float:
    """Euclidean kernel of the model at the point ``xi`` (for boundary-value comparisons)."""
    rr = float(np.linalg.norm(xi))
    return float(sum(rho * kernels.euclidean_propagator(math.sqrt(m2), rr) for m2, rho in model.components()))


# --- growth estimate ------------------------------------------------------------------


def growth_grid(level: int, n: int = 9):
    """Points z = x0 - i eta approaching the real axis as ``level`` grows (spatial part 0)."""
    etas = np.geomspace(10.0 ** -(level + 1), 4.0, n * (level + 1))
    xs = np.linspace(-6.0, 6.0, 2 * n + 1)
    E, X = np.meshgrid(etas, xs, indexing="ij")
    z = np.zeros(E.shape + (4,), dtype=complex)
    z[..., 0] = X - 1j * E
    return z.reshape(-1, 4)


def analytic_scalar(m: float, z) -> np.ndarray:
    """Continued free 2-point function at complex time ``z0 = x0 - i eta``, zero spatial separation.

    Equals the Euclidean kernel at complex Euclidean time tau = eta + i x0.
    """
    from scipy import special

    z = np.asarray(z)
    tau = 1j * z[..., 0]  # i (x0 - i eta) = eta + i x0
    rho = np.sqrt(tau * tau + np.sum(np.real(z[..., 1:]) ** 2, axis=-1))
    return m * special.kv(1, m * rho) / (4 * math.pi**2 * rho)


def verify_growth_estimate(levels, candidates=None, stability: float = 1.5) -> dict:
    """Find the smallest (N, M) with |S(z)| <= C (1 + |z|)^N (1 + |Im z|^-M) on all refinement levels.

    ``levels``: list of (points, values) from successively finer grids near the real axis.
    A pair works when the required C does not grow by more than ``stability`` across levels.
    """
    if candidates is None:
        candidates = [(n, m) for n in range(0, 4) for m in range(0, 5)]
    candidates = sorted(candidates, key=lambda nm: (nm[0] + nm[1], nm[1]))
    table = []
    chosen = None
    for N, M in candidates:
        cs = []
        for pts, vals in levels:
            pts = np.asarray(pts)
            norm = np.linalg.norm(pts, axis=-1)
            im = np.linalg.norm(pts.imag, axis=-1)
            env = (1 + norm) ** N * (1 + im ** (-float(M)))
            cs.append(float(np.max(np.abs(vals) / env)))
        ok = all(np.isfinite(cs)) and cs[-1] <= stability * cs[0]
        table.append({"N": N, "M": M, "C_levels": cs, "works": ok})
        if ok and chosen is None:
            chosen = (cs[-1], N, M)
    out = {"table": table}
    if chosen:
        out.update({"C": chosen[0], "N": chosen[1], "M": chosen[2], "found": True})
    else:
        out.update({"found": False})
    return out


# --- positivity and cluster transport ------------------------------------------------


def laplace_gram(model: SpectralModel, basis) -> np.ndarray:
    """Momentum-space form sum rho int d^3p/((2pi)^3 2 omega) conj(u_i) u_j, u = int f e^{-omega tau - i p.x}.

    For undifferentiated Gaussian bases supported (up to leakage) at positive times.
    """
    n = len(basis)
    M = np.zeros((n, n), dtype=complex)
    for i, j in itertools.product(range(n), repeat=2):
        if j < i:
            M[i, j] = np.conj(M[j, i])
            continue
        total = 0.0
        for a in basis[i].terms:
            for b in basis[j].terms:
                if a.order or b.order:
                    raise ValueError("Laplace transport needs undifferentiated Gaussians")
                r = float(np.linalg.norm(np.subtract(a.center[1:], b.center[1:])))
                for m2, rho in model.components():
                    def integ(p):
                        om = math.sqrt(p * p + m2)
                        if om == 0:
                            return 0.0
                        sinc = math.sin(p * r) / (p * r) if p * r > 1e-8 else 1.0
                        # time factors: Gaussian Laplace transforms; space: Gaussian Fourier transforms
                        expo = (-om * (a.center[0] + b.center[0]) + 0.5 * om * om * (a.width**2 + b.width**2)
                                - 0.5 * p * p * (a.width**2 + b.width**2))
                        return p * p / om * sinc * math.exp(expo)

                    val = integrate.quad(integ, 0, np.inf, epsabs=0, epsrel=1e-12, limit=400)[0]
                    total += np.conj(a.coef) * b.coef * a.mass * b.mass * rho * val / (4 * math.pi**2)
        M[i, j] = total
    return M


def positivity_transport(model: SpectralModel, basis, euclidean_gram: np.ndarray | None = None) -> dict:
    """Compare the spectral (Minkowski) Gram with the Euclidean OS Gram over a positive-time basis."""
    M = GramMatrix(laplace_gram(model, basis), [f"f{i}" for i in range(len(basis))])
    out = {"min_eig": M.min_eig, "norm": M.norm, "relative_min_eig": M.min_eig / M.norm if M.norm else 0.0,
           "psd": M.min_eig >= -1e-9 * M.norm, "gram": M}
    if euclidean_gram is not None:
        E = np.asarray(euclidean_gram)
        out["euclidean_min_eig"] = float(np.linalg.eigvalsh(0.5 * (E + E.conj().T))[0])
        out["agreement"] = float(np.abs(M.entries - E).max() / max(np.abs(E).max(), 1e-300))
    return out


def cluster_rate(lams, values, lam_min: float = 3.0) -> dict:
    """Fit log y = c - kappa lam - p log lam over the tail ``lam >= lam_min``."""
    lams = np.asarray(lams, dtype=float)
    y = np.abs(np.asarray(values, dtype=float))
    sel = (lams >= lam_min) & (y > 0)
    if sel.sum() < 3:
        return {"kappa": math.nan, "power": math.nan, "residual": math.inf}
    A = np.stack([np.ones(sel.sum()), -lams[sel], -np.log(lams[sel])], axis=1)
    coef, *_ = np.linalg.lstsq(A, np.log(y[sel]), rcond=None)
    res = float(np.sqrt(np.mean((A @ coef - np.log(y[sel])) ** 2)))
    return {"kappa": float(coef[1]), "power": float(coef[2]), "log_amplitude": float(coef[0]), "residual": res}
