"""Superoperators and the analysis records built from them"""

from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from ..utils.errors import ConfigError

COLUMN_STACKING = "column-stacking"


class SuperoperatorKind(str, Enum):
    MAP = "map"
    GENERATOR = "generator"


@dataclass(frozen=True)
class Superoperator:
    """Dense d^2 x d^2 matrix acting on column-stacked density matrices"""
    matrix: np.ndarray
    tau: float = 0.0
    kind: SuperoperatorKind = SuperoperatorKind.MAP
    convention: str = COLUMN_STACKING
    condition: Optional[float] = None  # condition number of the map inverted to build a generator
    one_sided: bool = False  # generator from a one-sided difference

    def __post_init__(self):
        S = np.asarray(self.matrix, dtype=complex)
        n = S.shape[0] if S.ndim == 2 else 0
        d = int(round(np.sqrt(n)))
        if S.ndim != 2 or S.shape[1] != n or d * d != n or n == 0:
            raise ConfigError(f"Superoperator must be d^2 x d^2, got shape {S.shape}")
        if self.convention != COLUMN_STACKING:
            raise ConfigError(f"Unsupported vectorization convention '{self.convention}'")
        object.__setattr__(self, "matrix", S)
        object.__setattr__(self, "kind", SuperoperatorKind(self.kind))

    @property
    def d(self) -> int:
        return int(round(np.sqrt(self.matrix.shape[0])))

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho)
        return (self.matrix @ rho.reshape(-1, order="F")).reshape(self.d, self.d, order="F")


@dataclass
class SpectralDecomposition:
    """Eigenvalues with biorthonormal right (columns) and left (rows) eigenvectors"""
    eigenvalues: np.ndarray
    right: np.ndarray  # right[:, i] = g_i
    left: np.ndarray  # left[i, :] = conj(gbar_i), so left @ right = identity
    biorthogonality_residual: float
    eigenvector_condition: float
    defective: bool = False
    degenerate_pairs: List[Tuple[int, int]] = field(default_factory=list)


@dataclass
class FixedPointPair:
    map_fixed_point: np.ndarray
    map_residual: float
    generator_fixed_point: Optional[np.ndarray] = None
    generator_residual: Optional[float] = None


class NormKind(str, Enum):
    TRACE = "trace"
    HILBERT_SCHMIDT = "hilbert-schmidt"
    OPERATOR = "operator"


@dataclass
class MemoryTimes:
    """Relaxation and memory times; None when unresolved on the grid"""
    tau_re: Optional[float]
    tau_m_map: Optional[float]
    tau_m_generator: Optional[float]
    epsilon: float
    norm: NormKind = NormKind.TRACE

    @property
    def resolved(self) -> bool:
        return None not in (self.tau_re, self.tau_m_map, self.tau_m_generator)

    def is_ordered(self) -> bool:
        """tau_m_generator <= tau_m_map <= tau_re (vacuously true if unresolved)"""
        if not self.resolved:
            return True
        return self.tau_m_generator <= self.tau_m_map <= self.tau_re

    def to_dict(self):
        """Convert to dictionary"""
        data = asdict(self)
        data["norm"] = NormKind(self.norm).value
        return data


@dataclass
class CPTPReport:
    trace_residual: float
    choi_min_eigenvalue: float
    hermiticity_residual: float
    passed: bool

    def to_dict(self):
        """Convert to dictionary"""
        return asdict(self)
