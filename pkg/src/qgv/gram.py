"""Hermitian Gram matrices of reflection or Borchers pairings."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class GramMatrix:
    entries: np.ndarray
    descriptors: list = field(default_factory=list)
    eig_errors: np.ndarray | None = None
    asymmetry: float = 0.0

    def __post_init__(self):
        M = np.asarray(self.entries, dtype=complex)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError("Gram matrix must be square")
        scale = max(float(np.abs(M).max()), 1e-300)
        self.asymmetry = max(self.asymmetry, float(np.abs(M - M.conj().T).max()) / scale)
        self.entries = 0.5 * (M + M.conj().T)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.entries, 2)) if self.entries.size else 0.0

    @property
    def min_eig(self) -> float:
        return float(self.eigenvalues[0]) if self.entries.size else 0.0

    @property
    def min_eig_error(self) -> float:
        return 0.0 if self.eig_errors is None else float(self.eig_errors[0])

    def to_json(self) -> dict:
        M = self.entries
        return {"re": M.real.tolist(), "im": M.imag.tolist(), "descriptors": self.descriptors,
                "eigenvalues": self.eigenvalues.tolist(),
                "eig_errors": None if self.eig_errors is None else np.asarray(self.eig_errors).tolist(),
                "asymmetry": self.asymmetry}
