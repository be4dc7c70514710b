"""Bath spectral density models"""

import math
from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import Callable, Optional, Tuple

import numpy as np

from ..utils.errors import ConfigError


class DensityKind(str, Enum):
    SEMI_ELLIPTICAL = "semi-elliptical"
    SMOOTHED_FLAT = "smoothed-flat"
    TABULATED = "tabulated"


@dataclass(frozen=True)
class SpectralDensity:
    """Coupling weight function J(w) on [-D, D]"""
    kind: DensityKind
    gamma: float  # total coupling strength, units of D
    D: float = 1.0  # half-bandwidth
    nu: Optional[float] = None  # edge-smoothing rate (1/energy), smoothed-flat only
    samples: Optional[Tuple[Tuple[float, float], ...]] = None  # (w, J(w)) pairs, tabulated only

    def __post_init__(self):
        object.__setattr__(self, "kind", DensityKind(self.kind))
        if self.D <= 0:
            raise ConfigError(f"Half-bandwidth must be positive, got D={self.D}")
        if self.kind is DensityKind.SMOOTHED_FLAT and self.nu is None:
            object.__setattr__(self, "nu", 100.0 / self.D)
        if self.kind is DensityKind.TABULATED:
            if not self.samples or len(self.samples) < 2:
                raise ConfigError("Tabulated spectral density needs at least two samples")
            grid = np.array(self.samples, dtype=float)
            if np.any(np.diff(grid[:, 0]) <= 0):
                raise ConfigError("Tabulated spectral density grid must be strictly increasing")
            if np.any(grid[:, 1] < 0):
                raise ConfigError("Tabulated spectral density must be nonnegative")
            object.__setattr__(self, "samples", tuple(map(tuple, grid.tolist())))
        elif self.gamma < 0:
            raise ConfigError(f"Coupling strength must be nonnegative, got {self.gamma}")

    @classmethod
    def tabulated(cls, omega, values, D: float = None) -> "SpectralDensity":
        omega = np.asarray(omega, dtype=float)
        values = np.asarray(values, dtype=float)
        D = D if D is not None else float(max(abs(omega[0]), abs(omega[-1])))
        # trapezoid integral of the linear interpolant is exact
        mass = float(np.sum(0.5 * (values[1:] + values[:-1]) * np.diff(omega)))
        return cls(
            kind=DensityKind.TABULATED,
            gamma=math.pi * mass / D,
            D=D,
            samples=tuple(zip(omega.tolist(), values.tolist())),
        )

    def to_dict(self):
        """Convert to dictionary"""
        data = asdict(self)
        data["kind"] = self.kind.value
        if self.samples is not None:
            data["samples"] = [list(p) for p in self.samples]
        return data


@dataclass(frozen=True)
class BathSpec:
    """Thermal Fermi bath attached to one system mode"""
    density: SpectralDensity
    beta: float  # inverse temperature (1/energy), math.inf for zero temperature
    mu: float = 0.0  # chemical potential
    coupled_system_mode: int = 0

    def __post_init__(self):
        if not self.beta >= 0:
            raise ConfigError(f"Inverse temperature must be >= 0, got beta={self.beta}")
        if abs(self.mu) > self.density.D:
            raise ConfigError(f"|mu|={abs(self.mu)} exceeds half-bandwidth D={self.density.D}")

    @property
    def zero_temperature(self) -> bool:
        return math.isinf(self.beta)

    def to_dict(self):
        """Convert to dictionary"""
        return {
            "density": self.density.to_dict(),
            "beta": "inf" if self.zero_temperature else self.beta,
            "mu": self.mu,
            "coupled_system_mode": self.coupled_system_mode,
        }


@dataclass(frozen=True)
class BranchWeight:
    """One thermofield branch: J_0 = (1 - f) J (empty) or J_1 = f J (filled)"""
    branch: int  # 0 empty, 1 filled
    support: Tuple[float, float]
    breakpoints: Tuple[float, ...]
    function: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)

    def __call__(self, omega):
        return self.function(omega)
