"""Ensembles: generation with adaptive thermalization, jackknife statistics,
composite correlators, OS Gram matrices and the binary ensemble store."""
from __future__ import annotations

import hashlib
import json
import math
import os
import struct
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..algebra import GaugeGroup, GroupKind, Metric, SpinorIndexSet, group
from ..correlators import CorrelatorFamily, FieldIndex, Source
from ..gram import GramMatrix
from ..testfunctions import GridFunction
from .core import Action, Lattice, LatticeConfig
from .observables import composite_field, plaquette_field, reflect
from .updates import sweep

JACKKNIFE_BINS = 20
MAGIC = b"QGVENS1"
FORMAT_VERSION = 1
_GROUP_CODE = {GroupKind.U1: 1, GroupKind.SU2: 2, GroupKind.SU3: 3}


@dataclass
class Ensemble:
    lattice: Lattice
    group: GaugeGroup
    action: Action
    configs: list
    provenance: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.configs)

    def fields(self, kind: str) -> np.ndarray:
        """Composite field on every configuration, shape ``(n_configs, *dims)`` (cached)."""
        cache = self.__dict__.setdefault("_field_cache", {})
        if kind not in cache:
            cache[kind] = np.stack([composite_field(c, kind) for c in self.configs])
        return cache[kind]

    def content_hash(self) -> str:
        return hashlib.sha256(_body_bytes(self)).hexdigest()


# --- statistics ---------------------------------------------------------------------


def jackknife(samples: np.ndarray, fn: Callable = None, bins: int = JACKKNIFE_BINS):
    """Jackknife mean/error of ``fn(mean of samples)`` with ``bins`` contiguous blocks.

    ``samples`` has the configuration axis first.  Returns (estimate, error, replicas).
    """
    samples = np.asarray(samples)
    n = samples.shape[0]
    if n < bins:
        raise ValueError(f"{n} samples are fewer than {bins} jackknife bins")
    fn = (lambda x: x) if fn is None else fn
    usable = (n // bins) * bins
    blocks = samples[:usable].reshape((bins, usable // bins) + samples.shape[1:]).mean(axis=1)
    total = blocks.sum(axis=0)
    reps = np.stack([np.asarray(fn((total - blocks[b]) / (bins - 1))) for b in range(bins)])
    full = np.asarray(fn(samples[:usable].mean(axis=0)))
    err = np.sqrt((bins - 1) / bins * np.sum(np.abs(reps - reps.mean(axis=0)) ** 2, axis=0))
    return full, err, reps


def integrated_autocorrelation(series, c: float = 6.0) -> float:
    """Integrated autocorrelation time with automatic windowing (window W >= c tau)."""
    x = np.asarray(series, dtype=float)
    x = x - x.mean()
    n = len(x)
    if n < 4 or not np.any(x):
        return 0.5
    f = np.fft.rfft(x, 2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n]
    acf /= acf[0]
    tau = 0.5
    for w in range(1, n):
        tau += acf[w]
        if w >= c * tau:
            break
    return max(float(tau), 0.5)


# --- generation ---------------------------------------------------------------------


def generate_ensemble(lattice: Lattice, grp, action: Action, seed: int, n_configs: int,
                      sweeps_per_config: int = 1, therm_block: int = 50, max_therm: int = 100_000,
                      start: str = "hot", method: str | None = None, hits: int = 4,
                      step: float | None = None) -> Ensemble:
    """Generate an ensemble; thermalization runs until it covers 10 integrated autocorrelation times."""
    grp = grp if isinstance(grp, GaugeGroup) else group(grp)
    if n_configs < 1:
        raise ValueError("need at least one configuration")
    rng = np.random.default_rng(seed)
    matter = action.has_matter
    cfg = LatticeConfig.hot(lattice, grp, rng, matter) if start == "hot" else LatticeConfig.cold(lattice, grp, matter)
    kw = {"method": method, "hits": hits, "step": step}
    history = []
    n_therm, tau = 0, 0.5
    while True:
        for _ in range(therm_block):
            cfg = sweep(cfg, action, rng, **kw)
            history.append(float(plaquette_field(cfg).mean()))
        n_therm += therm_block
        tau = integrated_autocorrelation(history[len(history) // 2:])
        if n_therm >= 10 * tau or n_therm >= max_therm:
            break
    configs, acc, plaq = [], [], []
    for _ in range(n_configs):
        for _ in range(sweeps_per_config):
            cfg = sweep(cfg, action, rng, **kw)
        configs.append(cfg)
        acc.append(cfg.stats.get("acceptance", 1.0))
        plaq.append(float(plaquette_field(cfg).mean()))
    prov = {
        "seed": int(seed), "dims": list(lattice.dims), "spacing": lattice.spacing, "group": grp.kind.value,
        "action": action.params(), "n_configs": n_configs, "sweeps_per_config": sweeps_per_config,
        "therm_sweeps": n_therm, "therm_block": therm_block, "tau_int_therm": tau,
        "tau_int_measured": integrated_autocorrelation(plaq), "start": start,
        "method": configs[-1].stats.get("method"), "hits": hits, "step": step,
        "mean_acceptance": float(np.mean(acc)), "abelian_extension": grp.kind is GroupKind.U1,
    }
    return Ensemble(lattice, grp, action, configs, prov)


def regenerate(provenance: dict) -> Ensemble:
    """Rebuild an ensemble bit-identically from its provenance record."""
    a = provenance["action"]
    return generate_ensemble(Lattice(tuple(provenance["dims"]), provenance.get("spacing", 1.0)),
                             provenance["group"], Action(a["beta"], a["kappa"], a["lam"]), provenance["seed"],
                             provenance["n_configs"], provenance["sweeps_per_config"], provenance["therm_block"],
                             start=provenance["start"], method=provenance["method"], hits=provenance["hits"],
                             step=provenance["step"])


# --- measurements -------------------------------------------------------------------


def plaquette_average(ens: Ensemble, bins: int = JACKKNIFE_BINS) -> tuple[float, float]:
    if len(ens) == 0:
        raise ValueError("empty ensemble")
    per_cfg = ens.fields("plaq").reshape(len(ens), -1).mean(axis=1)
    mean, err, _ = jackknife(per_cfg, bins=bins)
    return float(mean), float(err)


def _check_separation(lattice: Lattice, sep) -> tuple:
    sep = tuple(int(s) for s in sep)
    if len(sep) != lattice.ndim:
        raise ValueError("separation has the wrong dimension")
    for s, L in zip(sep, lattice.dims):
        if abs(s) > L // 2:
            raise ValueError(f"separation {sep} exceeds half the lattice extent {lattice.dims}")
    return sep


def _translation_averaged_product(O: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Per-config ``mean_a prod_i O(pts_i + a)``; ``O`` has the config axis first."""
    prod = np.ones_like(O)
    for p in pts:
        prod = prod * np.roll(O, tuple(-int(v) for v in p), axis=tuple(range(1, O.ndim)))
    return prod.reshape(O.shape[0], -1).mean(axis=1)


def composite_correlator(ens: Ensemble, kind: str, separations, bins: int = JACKKNIFE_BINS) -> CorrelatorFamily:
    """Translation-averaged full and connected 2-point correlators of a composite field.

    The returned family smears any number of slots of the composite with grid
    functions; its ``meta['table']`` holds the requested separations.
    """
    if kind == "phi2" and not ens.action.has_matter:
        raise ValueError("phi2 correlators need a matter field")
    O = ens.fields(kind)
    n = len(ens)
    table = []
    for sep in separations:
        sep = _check_separation(ens.lattice, sep)
        c = _translation_averaged_product(O, np.array([np.zeros(len(sep), int), sep]))
        one = O.reshape(n, -1).mean(axis=1)
        full, ferr, _ = jackknife(c, bins=bins)
        conn, cerr, _ = jackknife(np.stack([c, one], axis=1), lambda m: m[0] - m[1] ** 2, bins=bins)
        table.append({"sep": list(sep), "full": float(full), "full_err": float(ferr),
                      "connected": float(conn), "connected_err": float(cerr)})

    def evaluator(idx, fs):
        _check_labels(idx, kind)
        per = np.ones(n)
        for f in fs:
            if not isinstance(f, GridFunction) or f.shape != ens.lattice.dims:
                raise ValueError("lattice families smear with grid functions on the ensemble lattice")
            per = per * np.tensordot(O, f.values, axes=ens.lattice.ndim)
        val, err, _ = jackknife(per, bins=bins)
        return complex(val), float(np.abs(err))

    def kernel(idx, pts):
        _check_labels(idx, kind)
        pts = np.rint(np.asarray(pts, dtype=float)).astype(int)
        val, err, _ = jackknife(_translation_averaged_product(O, pts), bins=bins)
        return complex(val), float(err)

    def int_sampler(rng, k=None):
        if k is None:
            return rng.integers(0, max(ens.lattice.dims), size=ens.lattice.ndim)
        return rng.integers(-2, 3, size=(k, ens.lattice.ndim))

    meta = {"kind": f"lattice_{kind}", "composite": kind, "table": table, "ensemble_hash": ens.content_hash(),
            "dims": list(ens.lattice.dims), "group": ens.group.kind.value, "action": ens.action.params(),
            "translation_sampler": lambda r: int_sampler(r), "diff_sampler": lambda r, k: int_sampler(r, k),
            "bins": bins, "n_configs": n}
    return CorrelatorFamily(f"lattice_{kind}", Metric.EUCLIDEAN, Source.LATTICE_ESTIMATE, evaluator,
                            catalog={kind: SpinorIndexSet(0, 0, kind)}, group=ens.group, kernel=kernel, meta=meta)


def _check_labels(idx: FieldIndex, kind: str) -> None:
    if idx.n or any(k != kind for k, _ in idx.matter):
        raise ValueError(f"family only carries the composite {kind!r}")


def plane_correlator(ens: Ensemble, kind: str, sep, t0: int, bins: int = JACKKNIFE_BINS) -> tuple[float, float]:
    """Correlator at ``sep`` averaged over spatial translations only, anchored at time slice ``t0``."""
    sep = _check_separation(ens.lattice, sep)
    O = ens.fields(kind)
    shifted = np.roll(O, tuple(-s for s in sep), axis=tuple(range(1, O.ndim)))
    per = (O[:, t0] * shifted[:, t0]).reshape(len(ens), -1).mean(axis=1)
    v, e, _ = jackknife(per, bins=bins)
    return float(v), float(e)


# --- OS Gram ------------------------------------------------------------------------


@dataclass(frozen=True)
class LatticeFunctional:
    """Gauge-invariant functional of a configuration with its time support."""

    name: str
    fn: Callable
    times: tuple


def plaquette_string(k: int) -> LatticeFunctional:
    """Spatial average of the product of ``k`` time-stacked (0, 1) plaquettes from t = 0."""
    def fn(cfg):
        P = plaquette_field(cfg, (0, 1))
        prod = np.prod(P[:k], axis=0)
        return complex(prod.mean())

    return LatticeFunctional(f"plaqstring{k}", fn, tuple(range(0, k + 1)))


def os_gram(ens: Ensemble, basis, bins: int = JACKKNIFE_BINS) -> GramMatrix:
    """``M_ij = < conj(F_i(theta U)) F_j(U) >`` with link reflection through the t = -1/2 plane."""
    T = ens.lattice.dims[0]
    for b in basis:
        if min(b.times) < 0 or max(b.times) > T // 2 - 1:
            raise ValueError(f"functional {b.name} touches the reflection plane or its image (times {b.times})")
    F = np.array([[b.fn(c) for b in basis] for c in ens.configs])
    G = np.array([[np.conj(b.fn(reflect(c))) for b in basis] for c in ens.configs])
    per = G[:, :, None] * F[:, None, :]
    M, err, reps = jackknife(per, bins=bins)
    herm = 0.5 * (reps + np.conj(np.swapaxes(reps, 1, 2)))
    eig_reps = np.linalg.eigvalsh(herm)
    nb = eig_reps.shape[0]
    eig_err = np.sqrt((nb - 1) / nb * np.sum((eig_reps - eig_reps.mean(axis=0)) ** 2, axis=0))
    return GramMatrix(M, [b.name for b in basis], eig_err)


# --- binary store -------------------------------------------------------------------

_HEADER = struct.Struct("<7sBB4HB3dBQI")


def _header_bytes(ens: Ensemble) -> bytes:
    dims = list(ens.lattice.dims) + [0] * (4 - ens.lattice.ndim)
    a = ens.action
    return _HEADER.pack(MAGIC, FORMAT_VERSION, ens.lattice.ndim, *dims, _GROUP_CODE[ens.group.kind], a.beta,
                        math.nan if a.kappa is None else a.kappa, math.nan if a.lam is None else a.lam,
                        int(a.has_matter), int(ens.provenance.get("seed", 0)), len(ens))


def _body_bytes(ens: Ensemble) -> bytes:
    parts = [_header_bytes(ens)]
    for c in ens.configs:
        parts.append(np.ascontiguousarray(c.links, dtype="<c16").tobytes())
        if c.matter is not None:
            parts.append(np.ascontiguousarray(c.matter, dtype="<c16").tobytes())
    return b"".join(parts)


def save_ensemble(ens: Ensemble, path) -> str:
    """Write ``path`` (binary, SHA-256 trailer) and ``path.json`` (provenance); return the hash."""
    body = _body_bytes(ens)
    digest = hashlib.sha256(body).digest()
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(digest)
    prov = dict(ens.provenance, content_hash=digest.hex(), format="QGVENS1 v1")
    with open(os.fspath(path) + ".json", "w") as fh:
        json.dump(prov, fh, indent=2, sort_keys=True)
    return digest.hex()


def load_ensemble(path) -> Ensemble:
    with open(path, "rb") as fh:
        data = fh.read()
    body, digest = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ValueError("ensemble content hash mismatch")
    head = _HEADER.unpack_from(body)
    magic, version, ndim = head[0], head[1], head[2]
    if magic != MAGIC or version != FORMAT_VERSION:
        raise ValueError("not a QGVENS1 ensemble file")
    dims = tuple(head[3:3 + ndim])
    code, beta, kappa, lam, has_matter, seed, ncfg = head[7:14]
    kind = {v: k for k, v in _GROUP_CODE.items()}[code]
    grp = group(kind)
    action = Action(beta, None if math.isnan(kappa) else kappa, None if math.isnan(lam) else lam)
    lattice = Lattice(dims)
    nmat = grp.matrix_dim
    link_count = ndim * int(np.prod(dims)) * nmat * nmat
    site_count = int(np.prod(dims))
    off = _HEADER.size
    configs = []
    for _ in range(ncfg):
        links = np.frombuffer(body, dtype="<c16", count=link_count, offset=off).reshape((ndim,) + dims + (nmat, nmat))
        off += link_count * 16
        phi = None
        if has_matter:
            phi = np.frombuffer(body, dtype="<c16", count=site_count, offset=off).reshape(dims).copy()
            off += site_count * 16
        configs.append(LatticeConfig(lattice, grp, links.copy(), phi))
    prov = {}
    side = os.fspath(path) + ".json"
    if os.path.exists(side):
        with open(side) as fh:
            prov = json.load(fh)
    prov.setdefault("seed", seed)
    return Ensemble(lattice, grp, action, configs, prov)

