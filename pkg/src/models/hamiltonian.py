"""Hamiltonian containers"""

import threading
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np
from scipy import sparse

from .layout import ModeLayout
from ..utils.errors import ConfigError
from ..utils.fermions import basis_indices, popcount


@dataclass(frozen=True)
class QuadraticHamiltonian:
    """H = sum_ij h_ij d_i^† d_j over a mode layout"""
    h: np.ndarray
    layout: ModeLayout

    def __post_init__(self):
        h = np.asarray(self.h, dtype=complex)
        if h.shape != (self.layout.N, self.layout.N):
            raise ConfigError(f"h has shape {h.shape}, layout has {self.layout.N} modes")
        scale = max(np.max(np.abs(h), initial=0.0), 1.0)
        if np.max(np.abs(h - h.conj().T), initial=0.0) > 1e-14 * scale:
            raise ConfigError("Single-particle Hamiltonian is not Hermitian")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)


@dataclass(frozen=True)
class InteractionTerms:
    """Density-density couplings U_ij n_i n_j and potentials eps_i n_i on system modes"""
    density_density: Tuple[Tuple[int, int, float], ...] = ()
    potentials: Tuple[Tuple[int, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "density_density",
                           tuple((int(i), int(j), float(u)) for i, j, u in self.density_density))
        object.__setattr__(self, "potentials",
                           tuple((int(i), float(e)) for i, e in self.potentials))

    @property
    def is_empty(self) -> bool:
        return not any(u != 0 for _, _, u in self.density_density) and \
            not any(e != 0 for _, e in self.potentials)

    def system_modes(self) -> List[int]:
        modes = [i for i, j, _ in self.density_density] + [j for _, j, _ in self.density_density]
        return sorted(set(modes + [i for i, _ in self.potentials]))

    def to_dict(self):
        """Convert to dictionary"""
        return {
            "density_density": [list(t) for t in self.density_density],
            "potentials": [list(t) for t in self.potentials],
        }


@dataclass(frozen=True)
class ManyBodyHamiltonian:
    """Number-conserving many-body Hamiltonian on 2^N configurations.

    Held as a sparse matrix; dense blocks per particle-number sector are
    diagonalized on first use and cached.
    """
    matrix: sparse.csr_matrix
    layout: ModeLayout
    _sectors: Dict[int, Tuple[np.ndarray, np.ndarray, np.ndarray]] = field(
        default_factory=dict, init=False, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def sector(self, particles: int):
        """(basis indices, eigenvalues, eigenvectors) of the fixed-number block.

        The diagonalization runs outside the lock; when two threads race on the same
        sector the first published result is kept.
        """
        with self._lock:
            cached = self._sectors.get(particles)
        if cached is not None:
            return cached
        idx = basis_indices(self.layout.N)
        idx = idx[popcount(idx, self.layout.N) == particles]
        block = self.matrix[idx][:, idx].toarray()
        evals, evecs = np.linalg.eigh(0.5 * (block + block.conj().T))
        with self._lock:
            return self._sectors.setdefault(particles, (idx, evals, evecs))
