"""Model Hamiltonians and initial system states"""

from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from .lattice import chain_system_matrix
from ..models.hamiltonian import InteractionTerms
from ..utils import fermions
from ..utils.errors import ConfigError


class ModelPreset(str, Enum):
    FERMI_CHAIN = "fermi-chain"
    SIAM = "siam"


class InitialState(str, Enum):
    TOTALLY_MIXED = "totally-mixed"
    SPIN_UP = "spin-up"
    VACUUM = "vacuum"


def fermi_chain(L: int, t_c: float, U: float = 0.0) -> Tuple[np.ndarray, InteractionTerms]:
    """Spinless chain with hopping t_c and nearest-neighbour repulsion U"""
    terms = InteractionTerms(density_density=tuple((i, i + 1, U) for i in range(L - 1)) if U else ())
    return chain_system_matrix(L, t_c), terms


def siam(U: float) -> Tuple[np.ndarray, InteractionTerms]:
    """Particle-hole symmetric Anderson impurity as two spinless modes (up = 0, down = 1)"""
    terms = InteractionTerms(
        density_density=((0, 1, U),),
        potentials=((0, -0.5 * U), (1, -0.5 * U)),
    )
    return np.zeros((2, 2), dtype=complex), terms


def initial_state(kind: InitialState, L: int) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """(density matrix, system correlation matrix) of a named initial state.

    All named states are Gaussian, so the correlation matrix is always returned.
    """
    kind = InitialState(kind)
    d = 1 << L
    if kind is InitialState.TOTALLY_MIXED:
        return np.eye(d, dtype=complex) / d, 0.5 * np.eye(L, dtype=complex)
    if kind is InitialState.VACUUM:
        rho = np.zeros((d, d), dtype=complex)
        rho[0, 0] = 1.0
        return rho, np.zeros((L, L), dtype=complex)
    if L != 2:
        raise ConfigError("The spin-up state is defined for the two-mode impurity (L=2)")
    rho = np.zeros((d, d), dtype=complex)
    rho[0b10, 0b10] = 1.0  # up occupied, down empty
    return rho, np.diag([1.0, 0.0]).astype(complex)


def random_hs_state(L: int, rng: np.random.Generator, number_superselected: bool = True) -> np.ndarray:
    """Random density matrix from the Hilbert–Schmidt ensemble.

    With number_superselected, coherences between different particle numbers are removed.
    """
    d = 1 << L
    G = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = G @ G.conj().T
    if number_superselected:
        counts = fermions.popcount(fermions.basis_indices(L), L)
        rho = np.where(counts[:, None] == counts[None, :], rho, 0.0)
    return rho / np.trace(rho)


def random_gaussian_correlation(L: int, rng: np.random.Generator) -> np.ndarray:
    """Random number-conserving Gaussian state: C = V diag(n) V^† with n uniform in [0, 1]"""
    Z = rng.normal(size=(L, L)) + 1j * rng.normal(size=(L, L))
    Q, R = np.linalg.qr(Z)
    Q = Q * (np.diag(R) / np.abs(np.diag(R)))
    n = rng.uniform(0.0, 1.0, size=L)
    return (Q * n) @ Q.conj().T


def pure_components(rho: np.ndarray, L: int) -> Optional[List[Tuple[float, np.ndarray]]]:
    """(weight, vector) per particle-number sector, or None if rho has coherences between sectors"""
    counts = fermions.popcount(fermions.basis_indices(L), L)
    if np.max(np.abs(rho[counts[:, None] != counts[None, :]]), initial=0.0) > 1e-12:
        return None
    components = []
    for particles in range(L + 1):
        idx = np.nonzero(counts == particles)[0]
        block = rho[np.ix_(idx, idx)]
        weights, vectors = np.linalg.eigh(0.5 * (block + block.conj().T))
        for w, v in zip(weights, vectors.T):
            if w > 1e-14:
                psi = np.zeros(1 << L, dtype=complex)
                psi[idx] = v
                components.append((float(w), psi))
    return components
