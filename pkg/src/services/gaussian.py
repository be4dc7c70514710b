"""
Non-interacting pipeline: correlation matrices of the anti-correlated Choi state,
exact unitary propagation, block reduction and Gaussian reduced density matrices.
"""

import logging
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import expm
from scipy import sparse

from .edcore import apply_p_correction
from .. import config
from ..models.hamiltonian import QuadraticHamiltonian
from ..models.layout import ModeLayout, ModeRole, Ordering
from ..models.states import CorrelationMatrix, DensityMatrix
from ..utils import fermions
from ..utils.errors import CapacityError, ConfigError, InvalidCorrelationError, OrderingError

logger = logging.getLogger(__name__)

OCCUPATION_TOL = 1e-8
SLATER_TOL = 1e-10


def initial_correlation(layout: ModeLayout) -> CorrelationMatrix:
    """C of the state prod_i (s_i^† + a_i^†)/sqrt(2) acting on the chain Fock state.

    Filled branches are occupied, empty branches vacant, and every (s_i, a_i) pair
    carries the block [[1/2, 1/2], [1/2, 1/2]].
    """
    C = np.zeros((layout.N, layout.N), dtype=complex)
    for k in layout.filled_indices():
        C[k, k] = 1.0
    for i in range(layout.L):
        s = layout.index(ModeRole.system(i))
        a = layout.index(ModeRole.replica(i))
        C[s, s] = C[a, a] = C[s, a] = C[a, s] = 0.5
    return CorrelationMatrix(C, layout.roles, 0.0, layout)


def product_correlation(layout: ModeLayout, system_correlation: np.ndarray) -> CorrelationMatrix:
    """System in a Gaussian state, replicas empty, chains in their thermofield Fock state"""
    Cs = np.asarray(system_correlation, dtype=complex)
    if Cs.shape != (layout.L, layout.L):
        raise ConfigError(f"System correlation has shape {Cs.shape}, expected ({layout.L}, {layout.L})")
    C = np.zeros((layout.N, layout.N), dtype=complex)
    for k in layout.filled_indices():
        C[k, k] = 1.0
    idx = layout.indices(layout.system_roles)
    C[np.ix_(idx, idx)] = Cs
    return CorrelationMatrix(C, layout.roles, 0.0, layout)


class GaussianPropagator:
    """Cached eigendecomposition of h; propagation at any time is two matrix products."""

    def __init__(self, hq: QuadraticHamiltonian):
        self.hq = hq
        self.energies, self.modes = np.linalg.eigh(np.asarray(hq.h))
        self.energies.setflags(write=False)
        self.modes.setflags(write=False)

    def unitary(self, tau: float) -> np.ndarray:
        """exp(-i h tau)"""
        return (self.modes * np.exp(-1j * self.energies * tau)) @ self.modes.conj().T

    def propagate(self, C0: CorrelationMatrix, tau: float) -> CorrelationMatrix:
        self._check(C0)
        U = self.unitary(tau)
        return CorrelationMatrix(U @ C0.matrix @ U.conj().T, C0.roles, C0.tau + tau, C0.layout)

    def propagate_block(self, C0: CorrelationMatrix, tau: float, roles: Sequence[ModeRole]) -> CorrelationMatrix:
        """Block of C(tau) on `roles` (in the given order) from the matching rows of U only"""
        self._check(C0)
        idx = [C0.layout.index(r) for r in roles]
        R = (self.modes[idx] * np.exp(-1j * self.energies * tau)) @ self.modes.conj().T
        return CorrelationMatrix(R @ C0.matrix @ R.conj().T, tuple(roles), C0.tau + tau, None)

    def _check(self, C0: CorrelationMatrix):
        if C0.matrix.shape != self.hq.h.shape:
            raise ConfigError(f"Correlation matrix {C0.matrix.shape} does not match h {self.hq.h.shape}")


def propagate(
    C0: CorrelationMatrix,
    hq: QuadraticHamiltonian,
    tau: float,
    propagator: Optional[GaussianPropagator] = None,
) -> CorrelationMatrix:
    """C(tau) = U C0 U^† with U = exp(-i h tau), the Heisenberg evolution of <d_j^† d_i>"""
    if propagator is None:
        propagator = GaussianPropagator(hq)
    return propagator.propagate(C0, tau)


def reduce_block(C: CorrelationMatrix, roles: Sequence[ModeRole]) -> CorrelationMatrix:
    """Principal submatrix on `roles`, ordered as in the separated ordering.

    Raises:
        OrderingError: the roles do not form a contiguous block of the separated ordering
    """
    roles = list(roles)
    position = {r: k for k, r in enumerate(C.roles)}
    missing = [str(r) for r in roles if r not in position]
    if missing:
        raise ConfigError(f"Modes {missing} are not part of the correlation matrix")

    if C.layout is not None:
        separated = C.layout.with_ordering(Ordering.SEPARATED)
        separated.contiguous_block(roles)
        roles = sorted(roles, key=separated.index)
    else:
        pos = sorted(position[r] for r in roles)
        if pos[-1] - pos[0] + 1 != len(pos):
            raise OrderingError("Requested modes are not contiguous; use a separated layout")
        roles = sorted(roles, key=position.get)

    idx = [position[r] for r in roles]
    return CorrelationMatrix(C.matrix[np.ix_(idx, idx)], tuple(roles), C.tau, None)


def _occupations(Csub: CorrelationMatrix):
    m = Csub.m
    if m > config.RDM_MAX_MODES:
        raise CapacityError(f"{m} modes exceed the reduced-density-matrix cap of {config.RDM_MAX_MODES}")
    C = Csub.matrix
    scale = max(1.0, float(np.max(np.abs(C), initial=0.0)))
    if np.max(np.abs(C - C.conj().T), initial=0.0) > 1e-10 * scale:
        raise InvalidCorrelationError("Correlation matrix is not Hermitian")
    n, V = np.linalg.eigh(0.5 * (C + C.conj().T))
    if n.size and (n.min() < -OCCUPATION_TOL or n.max() > 1.0 + OCCUPATION_TOL):
        raise InvalidCorrelationError(
            f"Occupations outside [0, 1]: min={n.min():.3e}, max={n.max():.3e}"
        )
    return np.clip(n, 0.0, 1.0), V


def gaussian_rdm(Csub: CorrelationMatrix) -> DensityMatrix:
    """Quasi-free state with two-point function Csub.

    rho = prod_k [(1 - n_k)(1 - N_k) + n_k N_k] where N_k is the number operator of
    the eigenmode f_k = sum_i conj(V_ik) d_i of Csub = V diag(n) V^†.
    """
    n, V = _occupations(Csub)
    m = Csub.m
    dim = 1 << m
    ops = [fermions.annihilation(m, i) for i in range(m)]
    rho = sparse.identity(dim, dtype=complex, format="csr")
    for k in range(m):
        f = sum(np.conj(V[i, k]) * ops[i] for i in range(m))
        Nk = (f.conj().T @ f).tocsr()
        rho = rho @ ((1.0 - n[k]) * sparse.identity(dim, dtype=complex, format="csr")
                     + (2.0 * n[k] - 1.0) * Nk)
    rho = rho.toarray()
    return DensityMatrix(0.5 * (rho + rho.conj().T), Csub.roles)


def exponential_rdm(Csub: CorrelationMatrix) -> DensityMatrix:
    """exp(sum_ij G_ij d_i^† d_j) / Z with G = log(C (1 - C)^-1); occupations must lie in (0, 1)"""
    n, V = _occupations(Csub)
    if np.any(n <= 1e-10) or np.any(n >= 1.0 - 1e-10):
        raise InvalidCorrelationError("Exponential form needs all occupations strictly inside (0, 1)")
    G = (V * np.log(n / (1.0 - n))) @ V.conj().T
    K = fermions.quadratic_form(Csub.m, G).toarray()
    rho = expm(K)
    return DensityMatrix(rho / np.trace(rho), Csub.roles)


def choi_state(propagator: GaussianPropagator, C0: CorrelationMatrix, tau: float) -> DensityMatrix:
    """rho_lambda(tau) from the system + replica block of the evolved anti-correlated state"""
    block = propagator.propagate_block(C0, tau, C0.layout.system_replica_roles)
    return apply_p_correction(gaussian_rdm(block))


def system_state(propagator: GaussianPropagator, C0: CorrelationMatrix, tau: float) -> DensityMatrix:
    """Reduced system state at tau of a product initial state"""
    return gaussian_rdm(propagator.propagate_block(C0, tau, C0.layout.system_roles))


def slater_correlation(psi: np.ndarray, roles: Sequence[ModeRole]) -> Optional[np.ndarray]:
    """C of a normalized pure state if it is a single Slater determinant, None otherwise"""
    projector = np.outer(psi, np.conj(psi))
    C = two_point_function(DensityMatrix(projector, roles))
    rebuilt = gaussian_rdm(CorrelationMatrix(C, tuple(roles))).rho
    if np.max(np.abs(rebuilt - projector)) > SLATER_TOL:
        return None
    return C


def two_point_function(rho: DensityMatrix) -> np.ndarray:
    """C_ij = Tr(rho d_j^† d_i) of a dense density matrix"""
    m = len(rho.basis)
    ops = [fermions.annihilation(m, i) for i in range(m)]
    C = np.empty((m, m), dtype=complex)
    for i in range(m):
        for j in range(m):
            C[i, j] = np.trace((ops[j].conj().T @ ops[i]) @ rho.rho)
    return C
