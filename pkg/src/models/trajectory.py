"""Time series of extracted maps and everything derived from them"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .superoperator import CPTPReport, FixedPointPair, MemoryTimes, Superoperator


@dataclass
class TrajectoryRecord:
    """Maps, generators, spectra, fixed points and checks on a uniform time grid.

    Per-point lists are aligned with `taus`; generators, generator spectra and
    fixed points hold None where they could not be formed.
    """
    taus: List[float]
    maps: List[Superoperator]
    generators: List[Optional[Superoperator]] = field(default_factory=list)
    map_eigenvalues: List[np.ndarray] = field(default_factory=list)
    generator_eigenvalues: List[Optional[np.ndarray]] = field(default_factory=list)
    fixed_points: List[Optional[FixedPointPair]] = field(default_factory=list)
    cptp: List[CPTPReport] = field(default_factory=list)
    singular_points: List[Tuple[float, float]] = field(default_factory=list)  # (tau, condition)
    degenerate_points: List[Tuple[float, str]] = field(default_factory=list)  # (tau, reason)
    memory: Optional[MemoryTimes] = None
    chain_lengths: Dict[str, int] = field(default_factory=dict)

    @property
    def delta(self) -> float:
        return float(self.taus[1] - self.taus[0]) if len(self.taus) > 1 else 0.0

    def index_of(self, tau: float) -> int:
        """Index of the grid point nearest to tau"""
        return int(np.argmin(np.abs(np.asarray(self.taus) - tau)))

    def on_grid(self, tau: float, tol: float = 1e-9) -> bool:
        return abs(self.taus[self.index_of(tau)] - tau) <= tol * max(1.0, abs(tau))

    def map_at(self, tau: float) -> Superoperator:
        return self.maps[self.index_of(tau)]

    def generator_at(self, tau: float) -> Optional[Superoperator]:
        return self.generators[self.index_of(tau)] if self.generators else None

    @property
    def all_cptp(self) -> bool:
        return all(r.passed for r in self.cptp)
