"""Gauge-invariant lattice observables and link reflection."""
from __future__ import annotations

import re

import numpy as np

from .core import LatticeConfig, dagger, plaquette, shift, trace


def plaquette_field(cfg: LatticeConfig, plane=None) -> np.ndarray:
    """``Re tr U_p / N`` per site, for one plane or averaged over all planes."""
    n = cfg.group.matrix_dim
    if plane is not None:
        return trace(plaquette(cfg, *plane)).real / n
    d = cfg.lattice.ndim
    planes = [(mu, nu) for mu in range(d) for nu in range(mu + 1, d)]
    return sum(trace(plaquette(cfg, mu, nu)).real / n for mu, nu in planes) / len(planes)


def _line(cfg: LatticeConfig, mu: int, length: int) -> np.ndarray:
    """Product of ``length`` links in direction ``mu`` starting at each site."""
    U = cfg.links[mu]
    out = U.copy()
    for k in range(1, length):
        out = out @ shift(U, mu, k)
    return out


def wilson_loop_field(cfg: LatticeConfig, R: int, T: int, plane=(1, 0)) -> np.ndarray:
    """``Re tr`` of the R x T rectangle (R along ``plane[0]``, T along ``plane[1]``) / N per site."""
    a, b = plane
    n = cfg.group.matrix_dim
    side_a = _line(cfg, a, R)
    side_b = _line(cfg, b, T)
    loop = side_a @ shift(side_b, a, R) @ dagger(shift(side_a, b, T)) @ dagger(side_b)
    return trace(loop).real / n


def _at(a: np.ndarray, **offsets) -> np.ndarray:
    """Field at ``x + sum_k offsets[k] * k_hat`` (keys ``d0``, ``d1``, ...)."""
    for key, s in offsets.items():
        if s:
            a = shift(a, int(key[1:]), s)
    return a


def clover(cfg: LatticeConfig, mu: int, nu: int) -> np.ndarray:
    """Sum of the four same-orientation plaquette leaves in the (mu, nu) plane based at each site."""
    U = cfg.links
    m, n = f"d{mu}", f"d{nu}"
    Um, Un = U[mu], U[nu]
    q1 = Um @ _at(Un, **{m: 1}) @ dagger(_at(Um, **{n: 1})) @ dagger(Un)
    q2 = Un @ dagger(_at(Um, **{m: -1, n: 1})) @ dagger(_at(Un, **{m: -1})) @ _at(Um, **{m: -1})
    q3 = dagger(_at(Um, **{m: -1})) @ dagger(_at(Un, **{m: -1, n: -1})) @ _at(Um, **{m: -1, n: -1}) @ _at(Un, **{n: -1})
    q4 = dagger(_at(Un, **{n: -1})) @ _at(Um, **{n: -1}) @ _at(Un, **{m: 1, n: -1}) @ dagger(Um)
    return q1 + q2 + q3 + q4


def clover_F2(cfg: LatticeConfig) -> np.ndarray:
    """``sum_{mu != nu} tr(F_mn F_mn)`` with the clover field strength ``F = (Q - Q^dag)/(8i)``, traceless part."""
    n = cfg.group.matrix_dim
    d = cfg.lattice.ndim
    total = np.zeros(cfg.lattice.dims)
    for mu in range(d):
        for nu in range(mu + 1, d):
            Q = clover(cfg, mu, nu)
            F = (Q - dagger(Q)) / 8j
            if n > 1:
                F = F - (trace(F) / n)[..., None, None] * np.eye(n)
            total += 2 * trace(F @ F).real
    return total


def phi2_field(cfg: LatticeConfig) -> np.ndarray:
    if cfg.matter is None:
        raise ValueError("configuration carries no matter field")
    return np.abs(cfg.matter) ** 2


def hopping_field(cfg: LatticeConfig) -> np.ndarray:
    """Gauge-invariant link term ``sum_mu Re(phibar(x) U_mu(x) phi(x+mu))``."""
    phi = cfg.matter
    return sum((np.conj(phi) * cfg.links[mu][..., 0, 0] * shift(phi, mu)).real for mu in range(cfg.lattice.ndim))


_WL = re.compile(r"^W(\d+)x(\d+)$")

KINDS = ("plaq", "F2", "phi2", "hop", "W<R>x<T>")


def composite_field(cfg: LatticeConfig, kind: str) -> np.ndarray:
    if kind == "plaq":
        return plaquette_field(cfg)
    if kind == "F2":
        return clover_F2(cfg)
    if kind == "phi2":
        return phi2_field(cfg)
    if kind == "hop":
        return hopping_field(cfg)
    m = _WL.match(kind)
    if m:
        return wilson_loop_field(cfg, int(m.group(1)), int(m.group(2)))
    raise ValueError(f"unknown composite kind {kind!r}; valid: {KINDS}")


def all_observables(cfg: LatticeConfig) -> dict:
    """Every gauge-invariant observable the engine measures on this configuration."""
    d = cfg.lattice.ndim
    out = {"plaq": plaquette_field(cfg), "F2": clover_F2(cfg), "W1x1": wilson_loop_field(cfg, 1, 1),
           "W2x2": wilson_loop_field(cfg, 2, 2), "W1x2": wilson_loop_field(cfg, 1, 2)}
    for mu in range(d):
        for nu in range(mu + 1, d):
            out[f"plaq{mu}{nu}"] = plaquette_field(cfg, (mu, nu))
    if cfg.matter is not None:
        out["phi2"] = phi2_field(cfg)
        out["hop"] = hopping_field(cfg)
    return out


# --- link reflection ------------------------------------------------------------------


def reflect(cfg: LatticeConfig) -> LatticeConfig:
    """Reflection through the plane between time slices -1 and 0.

    Slice t maps to -1 - t; spatial links move with their slice, temporal
    links are reversed: ``U_0'(t) = U_0(-2 - t)^dag``.
    """
    T = cfg.lattice.dims[0]
    idx_s = (-1 - np.arange(T)) % T
    idx_t = (-2 - np.arange(T)) % T
    links = cfg.links.copy()
    links[0] = dagger(cfg.links[0][idx_t])
    for mu in range(1, cfg.lattice.ndim):
        links[mu] = cfg.links[mu][idx_s]
    phi = None if cfg.matter is None else cfg.matter[idx_s]
    return LatticeConfig(cfg.lattice, cfg.group, links, phi)
