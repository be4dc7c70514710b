"""State containers: correlation matrices, many-body vectors, density matrices"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .layout import ModeLayout, ModeRole
from ..utils.errors import ConfigError


@dataclass(frozen=True)
class CorrelationMatrix:
    """Single-particle two-point function C_ij = <d_j^† d_i> over an ordered mode list"""
    matrix: np.ndarray
    roles: Tuple[ModeRole, ...]
    tau: float = 0.0
    layout: Optional[ModeLayout] = None

    def __post_init__(self):
        C = np.asarray(self.matrix, dtype=complex)
        if C.ndim != 2 or C.shape[0] != C.shape[1] or C.shape[0] != len(self.roles):
            raise ConfigError(
                f"Correlation matrix shape {C.shape} does not match {len(self.roles)} modes"
            )
        object.__setattr__(self, "matrix", C)
        object.__setattr__(self, "roles", tuple(self.roles))

    @property
    def m(self) -> int:
        return len(self.roles)

    def occupations(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))

    def hermiticity_residual(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0))


@dataclass(frozen=True)
class ManyBodyState:
    """Pure state on 2^N Fock configurations of a layout"""
    amplitudes: np.ndarray
    layout: ModeLayout

    def __post_init__(self):
        psi = np.asarray(self.amplitudes, dtype=complex)
        if psi.shape != (1 << self.layout.N,):
            raise ConfigError(f"State of length {psi.size} does not fit {self.layout.N} modes")
        object.__setattr__(self, "amplitudes", psi)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True)
class DensityMatrix:
    """Dense density matrix over an ordered list of modes"""
    rho: np.ndarray
    basis: Tuple[ModeRole, ...]

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        dim = 1 << len(self.basis)
        if rho.shape != (dim, dim):
            raise ConfigError(f"Density matrix shape {rho.shape} does not fit {len(self.basis)} modes")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "basis", tuple(self.basis))

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    def trace(self) -> complex:
        return complex(np.trace(self.rho))

    def validity_residuals(self):
        """(hermiticity, |trace - 1|, most negative eigenvalue)"""
        herm = float(np.max(np.abs(self.rho - self.rho.conj().T)))
        evals = np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T))
        return herm, abs(self.trace() - 1.0), float(min(evals.min(), 0.0))

    def is_valid(self, tol: float = 1e-12, positivity_tol: float = 1e-10) -> bool:
        herm, trace_err, neg = self.validity_residuals()
        return herm <= tol and trace_err <= tol and neg >= -positivity_tol
