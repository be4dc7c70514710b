"""Observable and transport result models"""

from dataclasses import dataclass
from typing import List

import numpy as np


@dataclass(frozen=True)
class ObservableSet:
    """Densities N_i and bond currents J_i on the system Fock space"""
    densities: List[np.ndarray]
    currents: List[np.ndarray]  # currents[i] is the bond (i, i+1)

    @property
    def L(self) -> int:
        return len(self.densities)


@dataclass(frozen=True)
class LBResult:
    """Landauer–Büttiker steady state of a non-interacting chain"""
    particle_current: float
    energy_current: float
    omega: np.ndarray
    transmission: np.ndarray

    def rows(self):
        return [
            {"omega": float(w), "transmission": float(t)}
            for w, t in zip(self.omega, self.transmission)
        ]

    def to_dict(self):
        """Convert to dictionary"""
        return {
            "particle_current": self.particle_current,
            "energy_current": self.energy_current,
            "samples": int(self.omega.size),
            "max_transmission": float(np.max(self.transmission, initial=0.0)),
        }
