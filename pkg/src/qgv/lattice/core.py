"""Lattices, actions, link configurations and gauge transformations.

Links are stored as one complex array of shape ``(D, *dims, N, N)``; axis 0
of the site dimensions is Euclidean time.  U(1) uses ``N = 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..algebra import GaugeGroup, GroupKind, group, haar_matrices


@dataclass(frozen=True)
class Lattice:
    dims: tuple
    spacing: float = 1.0

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if not 2 <= len(dims) <= 4:
            raise ValueError("lattice dimension must be 2, 3 or 4")
        for d in dims:
            if not 4 <= d <= 64:
                raise ValueError(f"extent {d} outside [4, 64]")
            if d % 2:
                raise ValueError(f"extent {d} is odd; checkerboard updates and link reflection need even extents")
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def volume(self) -> int:
        return int(np.prod(self.dims))

    def parity_mask(self, parity: int) -> np.ndarray:
        grids = np.indices(self.dims).sum(axis=0)
        return grids % 2 == parity


@dataclass(frozen=True)
class Action:
    """Wilson plaquette action plus optional scalar matter (U(1) only).

    S = beta sum_p (1 - Re tr U_p / N)
        + sum_x [ |phi|^2 + lam (|phi|^2 - 1)^2 - 2 kappa sum_mu Re(phibar(x) U_mu(x) phi(x + mu)) ]
    """

    beta: float
    kappa: float | None = None
    lam: float | None = None

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if (self.kappa is None) != (self.lam is None):
            raise ValueError("matter couplings kappa and lam come together")

    @property
    def has_matter(self) -> bool:
        return self.kappa is not None

    def params(self) -> dict:
        return {"beta": self.beta, "kappa": self.kappa, "lam": self.lam}


def shift(a: np.ndarray, mu: int, s: int = 1) -> np.ndarray:
    """Field value at ``x + s mu_hat`` (site axes first)."""
    return np.roll(a, -s, axis=mu)


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def trace(a: np.ndarray) -> np.ndarray:
    return np.trace(a, axis1=-2, axis2=-1)


@dataclass
class LatticeConfig:
    lattice: Lattice
    group: GaugeGroup
    links: np.ndarray
    matter: np.ndarray | None = None
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.group.matrix_dim
        expect = (self.lattice.ndim,) + self.lattice.dims + (n, n)
        if self.links.shape != expect:
            raise ValueError(f"links have shape {self.links.shape}, expected {expect}")
        if self.matter is not None:
            if self.group.kind is not GroupKind.U1:
                raise ValueError("scalar matter is implemented for U(1) only")
            if self.matter.shape != self.lattice.dims:
                raise ValueError("matter field shape does not match the lattice")

    @classmethod
    def cold(cls, lattice: Lattice, grp, matter: bool = False) -> LatticeConfig:
        grp = grp if isinstance(grp, GaugeGroup) else group(grp)
        n = grp.matrix_dim
        links = np.broadcast_to(np.eye(n, dtype=complex), (lattice.ndim,) + lattice.dims + (n, n)).copy()
        phi = np.ones(lattice.dims, dtype=complex) if matter else None
        return cls(lattice, grp, links, phi)

    @classmethod
    def hot(cls, lattice: Lattice, grp, rng: np.random.Generator, matter: bool = False) -> LatticeConfig:
        grp = grp if isinstance(grp, GaugeGroup) else group(grp)
        links = haar_matrices(grp, rng, (lattice.ndim,) + lattice.dims)
        phi = None
        if matter:
            phi = rng.normal(size=lattice.dims) + 1j * rng.normal(size=lattice.dims)
        return cls(lattice, grp, links, phi)

    def copy(self) -> LatticeConfig:
        return LatticeConfig(self.lattice, self.group, self.links.copy(),
                             None if self.matter is None else self.matter.copy())

    def unitarity_defect(self) -> float:
        n = self.group.matrix_dim
        d = dagger(self.links) @ self.links - np.eye(n)
        return float(np.abs(d).max())


def plaquette(cfg: LatticeConfig, mu: int, nu: int) -> np.ndarray:
    """``U_mu(x) U_nu(x+mu) U_mu(x+nu)^dag U_nu(x)^dag`` at every site."""
    U = cfg.links
    return U[mu] @ shift(U[nu], mu) @ dagger(shift(U[mu], nu)) @ dagger(U[nu])


def staple(cfg: LatticeConfig, mu: int) -> np.ndarray:
    """Sum of staples ``A`` with local action ``-(beta/N) Re tr(U_mu(x) A(x))``."""
    U = cfg.links
    out = np.zeros_like(U[mu])
    for nu in range(cfg.lattice.ndim):
        if nu == mu:
            continue
        out += shift(U[nu], mu) @ dagger(shift(U[mu], nu)) @ dagger(U[nu])
        back = shift(U[nu], nu, -1)  # U_nu(x - nu)
        out += dagger(shift(back, mu)) @ dagger(shift(U[mu], nu, -1)) @ back
    return out


def wilson_action(cfg: LatticeConfig, action: Action) -> float:
    n = cfg.group.matrix_dim
    s = 0.0
    for mu in range(cfg.lattice.ndim):
        for nu in range(mu + 1, cfg.lattice.ndim):
            s += action.beta * float(np.sum(1.0 - trace(plaquette(cfg, mu, nu)).real / n))
    if action.has_matter and cfg.matter is not None:
        phi = cfg.matter
        a2 = np.abs(phi) ** 2
        s += float(np.sum(a2 + action.lam * (a2 - 1.0) ** 2))
        for mu in range(cfg.lattice.ndim):
            s -= 2 * action.kappa * float(np.sum((np.conj(phi) * cfg.links[mu][..., 0, 0] * shift(phi, mu)).real))
    return s


def reunitarize(links: np.ndarray, grp: GaugeGroup) -> np.ndarray:
    """Nearest unitary (polar factor), then determinant fixed to 1 for SU(N)."""
    if grp.kind is GroupKind.U1:
        return links / np.abs(links)
    W, _, Vh = np.linalg.svd(links)
    u = W @ Vh
    det = np.linalg.det(u)
    n = grp.matrix_dim
    return u / (det ** (1.0 / n))[..., None, None]


def random_gauge_field(lattice: Lattice, grp: GaugeGroup, rng: np.random.Generator) -> np.ndarray:
    return haar_matrices(grp, rng, lattice.dims)


def gauge_transform(cfg: LatticeConfig, g: np.ndarray) -> LatticeConfig:
    """``U_mu(x) -> g(x) U_mu(x) g(x+mu)^dag``, ``phi(x) -> g(x) phi(x)``."""
    n = cfg.group.matrix_dim
    g = np.asarray(g, dtype=complex)
    if g.shape != cfg.lattice.dims + (n, n):
        raise ValueError("gauge field must be defined on every site")
    links = np.stack([g @ cfg.links[mu] @ dagger(shift(g, mu)) for mu in range(cfg.lattice.ndim)])
    phi = None if cfg.matter is None else g[..., 0, 0] * cfg.matter
    return LatticeConfig(cfg.lattice, cfg.group, links, phi)
