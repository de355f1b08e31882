"""Checkerboard update kernels.

Links of one direction and one site parity never share a staple, so each
(direction, parity) block is updated at once with array operations.  Matter
sites of one parity likewise only see neighbours of the other parity.
"""
from __future__ import annotations

import math

import numpy as np

from ..algebra import GroupKind
from .core import Action, LatticeConfig, dagger, reunitarize, shift, staple, trace

_PAULI = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)
SU3_SUBGROUPS = ((0, 1), (1, 2), (0, 2))


# --- SU(2) heatbath ------------------------------------------------------------------


def sample_x0(alpha: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw ``x0`` in [-1, 1] with density ``sqrt(1 - x0^2) exp(alpha x0)``.

    Kennedy-Pendleton for ``alpha >= 2``, Creutz's method below that; both exact.
    """
    alpha = np.asarray(alpha, dtype=float)
    out = np.empty_like(alpha)
    todo = np.arange(alpha.size)
    flat = alpha.ravel()
    res = out.ravel()
    while todo.size:
        a = flat[todo]
        kp = a >= 2.0
        x0 = np.empty(todo.size)
        ok = np.zeros(todo.size, dtype=bool)
        if kp.any():
            ak = a[kp]
            r1, r2, r3, r4 = (1.0 - rng.random(ak.size) for _ in range(4))
            lam2 = -(np.log(r1) + np.cos(2 * math.pi * r2) ** 2 * np.log(r3)) / (2 * ak)
            x0[kp] = 1 - 2 * lam2
            ok[kp] = r4**2 <= 1 - lam2
        if (~kp).any():
            ac = a[~kp]
            u = rng.random(ac.size)
            v = rng.random(ac.size)
            with np.errstate(divide="ignore", invalid="ignore"):
                lo = np.exp(-2 * ac)
                xc = np.where(ac > 1e-12, 1 + np.log(lo + u * (1 - lo)) / np.where(ac > 1e-12, ac, 1.0), 2 * u - 1)
            x0[~kp] = xc
            ok[~kp] = v**2 <= 1 - xc**2
        res[todo[ok]] = x0[ok]
        todo = todo[~ok]
    return res.reshape(alpha.shape)


def _su2_from_quaternion(q: np.ndarray) -> np.ndarray:
    return q[..., 0, None, None] * np.eye(2) + 1j * np.einsum("...k,kij->...ij", q[..., 1:], _PAULI)


def su2_heatbath(w: np.ndarray, coupling: float, rng: np.random.Generator) -> np.ndarray:
    """Draw ``r`` in SU(2) with weight ``exp(coupling * Re tr(r w))`` for 2x2 blocks ``w``."""
    a0 = 0.5 * (w[..., 0, 0] + w[..., 1, 1]).real
    a3 = 0.5 * (w[..., 0, 0] - w[..., 1, 1]).imag
    a1 = 0.5 * (w[..., 0, 1] + w[..., 1, 0]).imag
    a2 = 0.5 * (w[..., 0, 1] - w[..., 1, 0]).real
    a = np.stack([a0, a1, a2, a3], axis=-1)
    k = np.linalg.norm(a, axis=-1)
    safe = np.where(k > 0, k, 1.0)
    V = _su2_from_quaternion(a / safe[..., None])
    x0 = sample_x0(2 * coupling * k, rng)
    d = rng.normal(size=x0.shape + (3,))
    d /= np.linalg.norm(d, axis=-1, keepdims=True)
    x = np.concatenate([x0[..., None], np.sqrt(np.clip(1 - x0**2, 0, None))[..., None] * d], axis=-1)
    X = _su2_from_quaternion(x)
    r = X @ dagger(V)
    # k = 0: any V works, X is then Haar distributed
    return r


def _embed(r: np.ndarray, n: int, sub: tuple) -> np.ndarray:
    R = np.broadcast_to(np.eye(n, dtype=complex), r.shape[:-2] + (n, n)).copy()
    i, j = sub
    R[..., i, i], R[..., i, j], R[..., j, i], R[..., j, j] = r[..., 0, 0], r[..., 0, 1], r[..., 1, 0], r[..., 1, 1]
    return R


# --- individual kernels -------------------------------------------------------------


def metropolis_u1_link(U: np.ndarray, B: np.ndarray, step: float, rng: np.random.Generator):
    """One Metropolis hit for U(1) links with local action ``-Re(U B)``; returns (U, accepted)."""
    delta = rng.uniform(-step, step, size=U.shape)
    Unew = U * np.exp(1j * delta)
    dS = -((Unew - U) * B).real
    acc = rng.random(U.shape) < np.exp(-np.clip(dS, -50, None))
    return np.where(acc, Unew, U), acc


def metropolis_sun_link(U, A, coupling, step, rng, grp):
    """Metropolis hit with ``U -> exp(X) U`` for SU(N); local action ``-coupling Re tr(U A)``."""
    gens = grp.generators()
    coeff = rng.normal(scale=step, size=U.shape[:-2] + (len(gens),))
    X = np.einsum("...a,aij->...ij", coeff, gens)
    # exact exponential of anti-Hermitian X via eigh of iX
    w, v = np.linalg.eigh(1j * X)
    E = v @ (np.exp(-1j * w)[..., None] * dagger(v))
    # symmetric proposal: X and -X equally likely
    Unew = E @ U
    dS = -coupling * (trace(Unew @ A) - trace(U @ A)).real
    acc = rng.random(dS.shape) < np.exp(-np.clip(dS, -50, None))
    return np.where(acc[..., None, None], Unew, U), acc


def _link_update(cfg: LatticeConfig, action: Action, mu: int, mask: np.ndarray, rng, method, hits, step):
    n = cfg.group.matrix_dim
    A = staple(cfg, mu)[mask]
    U = cfg.links[mu][mask]
    acc_total, count = 0.0, 0
    if cfg.group.kind is GroupKind.U1:
        B = action.beta * A[..., 0, 0]
        if action.has_matter and cfg.matter is not None:
            phi = cfg.matter
            B = B + 2 * action.kappa * (shift(phi, mu) * np.conj(phi))[mask]
        u = U[..., 0, 0]
        for _ in range(hits):
            u, acc = metropolis_u1_link(u, B, step, rng)
            acc_total += acc.sum()
            count += acc.size
        U = u[..., None, None]
    elif method == "heatbath":
        coupling = action.beta / n
        subs = ((0, 1),) if n == 2 else SU3_SUBGROUPS
        for sub in subs:
            W = U @ A
            w = W[..., np.ix_(sub, sub)[0], np.ix_(sub, sub)[1]]
            r = su2_heatbath(w, coupling, rng)
            U = _embed(r, n, sub) @ U
        acc_total, count = 1.0, 1
    else:
        for _ in range(hits):
            U, acc = metropolis_sun_link(U, A, action.beta / n, step, rng, cfg.group)
            acc_total += acc.sum()
            count += acc.size
    cfg.links[mu][mask] = U
    return acc_total, count


def _matter_update(cfg: LatticeConfig, action: Action, mask, rng, hits, step):
    phi = cfg.matter
    h = np.zeros_like(phi)
    for mu in range(cfg.lattice.ndim):
        Umu = cfg.links[mu][..., 0, 0]
        h += Umu * shift(phi, mu) + shift(np.conj(Umu) * phi, mu, -1)
    h = h[mask]
    p = phi[mask]

    def local(v):
        a2 = np.abs(v) ** 2
        return a2 + action.lam * (a2 - 1) ** 2 - 2 * action.kappa * (np.conj(v) * h).real

    acc_total, count = 0.0, 0
    for _ in range(hits):
        prop = p + rng.uniform(-step, step, p.shape) + 1j * rng.uniform(-step, step, p.shape)
        dS = local(prop) - local(p)
        acc = rng.random(p.shape) < np.exp(-np.clip(dS, -50, None))
        p = np.where(acc, prop, p)
        acc_total += acc.sum()
        count += acc.size
    cfg.matter[mask] = p
    return acc_total, count


def sweep(cfg: LatticeConfig, action: Action, rng: np.random.Generator, method: str | None = None,
          hits: int = 4, step: float | None = None, matter_step: float = 0.6) -> LatticeConfig:
    """One full checkerboard sweep; returns a new config with ``stats`` filled in.

    U(1): multi-hit Metropolis.  SU(2): heatbath.  SU(3): Cabibbo-Marinari
    SU(2)-subgroup heatbath.  ``method="metropolis"`` forces Metropolis for SU(N).
    """
    out = cfg.copy()
    kind = cfg.group.kind
    if method is None:
        method = "metropolis" if kind is GroupKind.U1 else "heatbath"
    if step is None:
        step = 1.0 if kind is GroupKind.U1 else 0.4
    acc, cnt = 0.0, 0
    macc, mcnt = 0.0, 0
    for parity in (0, 1):
        mask = cfg.lattice.parity_mask(parity)
        for mu in range(cfg.lattice.ndim):
            a, c = _link_update(out, action, mu, mask, rng, method, hits, step)
            acc += a
            cnt += c
    if action.has_matter and out.matter is not None:
        for parity in (0, 1):
            a, c = _matter_update(out, action, cfg.lattice.parity_mask(parity), rng, hits, matter_step)
            macc += a
            mcnt += c
    out.links = reunitarize(out.links, cfg.group)
    out.stats = {"acceptance": float(acc / cnt) if cnt else 1.0, "method": method}
    if mcnt:
        out.stats["matter_acceptance"] = float(macc / mcnt)
    return out
