"""Thermofield chain coefficients"""

import math
from dataclasses import dataclass

import numpy as np

from ..utils.errors import ConfigError


@dataclass(frozen=True)
class ChainCoefficients:
    """Monic recurrence coefficients of one chain branch.

    beta[0] is the total mass of the branch weight (rho_0 = sqrt(beta[0]) couples the
    chain head to the system); sqrt(beta[n]) for n >= 1 is the hopping between
    sites n - 1 and n.
    """
    gamma: np.ndarray  # on-site energies
    beta: np.ndarray  # energy^2

    def __post_init__(self):
        gamma = np.asarray(self.gamma, dtype=float)
        beta = np.asarray(self.beta, dtype=float)
        if gamma.ndim != 1 or gamma.shape != beta.shape:
            raise ConfigError(
                f"gamma and beta must be 1-d of equal length, got {gamma.shape} and {beta.shape}"
            )
        if gamma.size == 0:
            raise ConfigError("Chain must have at least one site")
        if np.any(beta <= 0):
            raise ConfigError("Recurrence weights beta_n must be positive")
        gamma.setflags(write=False)
        beta.setflags(write=False)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "beta", beta)

    @property
    def M(self) -> int:
        return int(self.gamma.size)

    @property
    def rho0(self) -> float:
        return math.sqrt(self.beta[0])

    @property
    def hoppings(self) -> np.ndarray:
        """sqrt(beta_n) for n = 1 .. M-1"""
        return np.sqrt(self.beta[1:])

    def truncated(self, M: int) -> "ChainCoefficients":
        if not 1 <= M <= self.M:
            raise ConfigError(f"Cannot truncate a chain of {self.M} sites to {M}")
        return ChainCoefficients(self.gamma[:M], self.beta[:M])

    def rows(self):
        return [
            {"n": n, "gamma": float(g), "beta": float(b)}
            for n, (g, b) in enumerate(zip(self.gamma, self.beta))
        ]

    def to_dict(self):
        """Convert to dictionary"""
        return {"gamma": self.gamma.tolist(), "beta": self.beta.tolist()}
