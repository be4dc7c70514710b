"""
Dense many-body oracle: the anti-correlated Choi state vector, exact evolution by
number-sector diagonalization, contiguous partial traces and the replica
corrections that turn the evolved state into the Choi state of the map.
"""

import logging
from functools import lru_cache
from typing import Sequence, Union

import numpy as np

from .. import config
from ..models.hamiltonian import ManyBodyHamiltonian
from ..models.layout import ModeLayout, ModeRole, Ordering, RoleKind, ordered_roles
from ..models.states import DensityMatrix, ManyBodyState
from ..utils import fermions
from ..utils.errors import CapacityError, ConfigError, OrderingError

logger = logging.getLogger(__name__)


def _check_capacity(n_modes: int):
    if n_modes > config.ED_MAX_MODES:
        raise CapacityError(f"{n_modes} modes exceed the dense many-body cap of {config.ED_MAX_MODES}")


def _fock_index(layout: ModeLayout, occupied: Sequence[int]) -> int:
    index = 0
    for k in occupied:
        index |= 1 << (layout.N - 1 - k)
    return index


def prepare_psi_ac(layout: ModeLayout) -> ManyBodyState:
    """prod_i (s_i^† + a_i^†)/sqrt(2) applied to the chain Fock state (filled branches occupied).

    The chain configuration is the ordered product of its creation operators, so
    the amplitudes all have modulus 2^(-L/2) and signs set by the mode ordering.
    """
    _check_capacity(layout.N)
    psi = np.zeros(1 << layout.N, dtype=complex)
    psi[_fock_index(layout, layout.filled_indices())] = 1.0
    for i in reversed(range(layout.L)):
        s = layout.index(ModeRole.system(i))
        a = layout.index(ModeRole.replica(i))
        psi = (fermions.creation(layout.N, s) @ psi + fermions.creation(layout.N, a) @ psi) / np.sqrt(2.0)
    return ManyBodyState(psi, layout)


def _system_embedding(layout: ModeLayout) -> np.ndarray:
    """Global basis index of each system configuration x with empty replicas and chain Fock state.

    The system bits of x are set alongside the filled chain bits; for
    number-superselected system states this agrees with any other ordering of
    the creation operators.
    """
    L = layout.L
    base = _fock_index(layout, layout.filled_indices())
    shifts = [layout.N - 1 - layout.index(ModeRole.system(i)) for i in range(L)]
    full = np.empty(1 << L, dtype=np.int64)
    for x in range(1 << L):
        index = base
        for i in range(L):
            if (x >> (L - 1 - i)) & 1:
                index |= 1 << shifts[i]
        full[x] = index
    return full


def embed_system_state(layout: ModeLayout, psi_system: np.ndarray) -> ManyBodyState:
    """Pure system state times empty replicas times the chain Fock state"""
    _check_capacity(layout.N)
    psi_system = np.asarray(psi_system, dtype=complex)
    if psi_system.shape != (1 << layout.L,):
        raise ConfigError(f"System state has length {psi_system.size}, expected {1 << layout.L}")
    psi = np.zeros(1 << layout.N, dtype=complex)
    psi[_system_embedding(layout)] = psi_system
    return ManyBodyState(psi, layout)


def product_density(layout: ModeLayout, rho_system: np.ndarray) -> np.ndarray:
    """Full density matrix: system state, empty replicas, chains in their Fock state"""
    _check_capacity(layout.N)
    L = layout.L
    rho_system = np.asarray(rho_system, dtype=complex)
    if rho_system.shape != (1 << L, 1 << L):
        raise ConfigError(f"System state has shape {rho_system.shape}, expected ({1 << L}, {1 << L})")
    full = _system_embedding(layout)
    rho = np.zeros((1 << layout.N, 1 << layout.N), dtype=complex)
    rho[np.ix_(full, full)] = rho_system
    return rho


def _hamiltonian_blocks(H: Union[ManyBodyHamiltonian, np.ndarray], n_modes: int):
    """Yield (indices, eigenvalues, eigenvectors) per particle-number sector"""
    if isinstance(H, ManyBodyHamiltonian):
        for particles in range(n_modes + 1):
            yield H.sector(particles)
        return
    H = np.asarray(H)
    counts = fermions.popcount(fermions.basis_indices(n_modes), n_modes)
    for particles in range(n_modes + 1):
        idx = np.nonzero(counts == particles)[0]
        block = H[np.ix_(idx, idx)]
        evals, evecs = np.linalg.eigh(0.5 * (block + block.conj().T))
        yield idx, evals, evecs


def evolve(psi: ManyBodyState, H: Union[ManyBodyHamiltonian, np.ndarray], tau: float) -> ManyBodyState:
    """exp(-i H tau) psi, sector by sector.

    H must conserve the total particle number; a ManyBodyHamiltonian caches its
    sector eigendecompositions, so a grid of times costs one diagonalization.
    """
    N = psi.layout.N
    _check_capacity(N)
    out = np.zeros_like(psi.amplitudes)
    for idx, evals, evecs in _hamiltonian_blocks(H, N):
        block = psi.amplitudes[idx]
        if not np.any(block):
            continue
        out[idx] = evecs @ (np.exp(-1j * evals * tau) * (evecs.conj().T @ block))
    return ManyBodyState(out, psi.layout)


def evolve_density(rho: np.ndarray, H: Union[ManyBodyHamiltonian, np.ndarray], tau: float, n_modes: int) -> np.ndarray:
    """exp(-i H tau) rho exp(i H tau) for a full many-body density matrix"""
    _check_capacity(n_modes)
    rho = np.asarray(rho, dtype=complex)
    sectors = [
        (idx, (evecs * np.exp(-1j * evals * tau)) @ evecs.conj().T)
        for idx, evals, evecs in _hamiltonian_blocks(H, n_modes)
    ]
    out = np.zeros_like(rho)
    for idx_p, U_p in sectors:
        for idx_q, U_q in sectors:
            block = rho[np.ix_(idx_p, idx_q)]
            if not np.any(block):
                continue
            out[np.ix_(idx_p, idx_q)] = U_p @ block @ U_q.conj().T
    return out


def partial_trace(
    state: Union[ManyBodyState, np.ndarray],
    keep: Sequence[ModeRole],
    layout: ModeLayout = None,
) -> DensityMatrix:
    """Reduced density matrix of a contiguous block of modes.

    `state` is a ManyBodyState or a full density matrix (then `layout` is required).
    The kept block must occupy consecutive positions of the layout; for
    parity-even states the ordinary partial trace is then the fermionic one.

    Raises:
        OrderingError: the block is not contiguous
    """
    if isinstance(state, ManyBodyState):
        layout = state.layout
    elif layout is None:
        raise ConfigError("A layout is required to reduce a density matrix")

    start, stop = layout.contiguous_block(keep)
    basis = layout.roles[start:stop]
    left, mid, right = 1 << start, 1 << (stop - start), 1 << (layout.N - stop)

    if isinstance(state, ManyBodyState):
        psi = state.amplitudes.reshape(left, mid, right)
        rho = np.einsum("lkr,lmr->km", psi, psi.conj())
    else:
        rho = np.asarray(state).reshape(left, mid, right, left, mid, right)
        rho = np.einsum("lkrlmr->km", rho)
    return DensityMatrix(rho, basis)


def _block_layout(L: int, ordering: Ordering) -> ModeLayout:
    return ModeLayout(L, (), ordering, tuple(ordered_roles(L, (), ordering)))


def _replica_phases(L: int) -> np.ndarray:
    """phi(m), m the replica configuration, such that D Q maps psi_AC onto sum_n |n, n>/sqrt(d)"""
    layout = _block_layout(L, Ordering.SEPARATED)
    psi = prepare_psi_ac(layout).amplitudes
    v = _replica_majorana_string(layout) @ psi
    d = 1 << L
    phases = np.empty(d, dtype=complex)
    for m in range(d):
        amplitude = v[(m << L) | m]
        if abs(amplitude) < 0.5 / np.sqrt(d):
            raise OrderingError(f"Replica string did not produce a correlated pair state (L={L})")
        phases[m] = np.conj(amplitude) / abs(amplitude)
    return phases


def _replica_majorana_string(layout: ModeLayout):
    """Q = prod_i (a_i + a_i^†) in the given layout (sparse)"""
    Q = None
    for i in range(layout.L):
        k = layout.index(ModeRole.replica(i))
        gamma = fermions.annihilation(layout.N, k) + fermions.creation(layout.N, k)
        Q = gamma if Q is None else Q @ gamma
    return Q.tocsr()


def _replica_configuration(layout: ModeLayout) -> np.ndarray:
    """Replica occupations of every basis state, packed with a_1 as the most significant bit"""
    idx = fermions.basis_indices(layout.N)
    m = np.zeros_like(idx)
    for i in range(layout.L):
        m = (m << 1) | fermions.occupation(idx, layout.index(ModeRole.replica(i)), layout.N)
    return m


@lru_cache(maxsize=8)
def p_correction_operator(L: int) -> np.ndarray:
    """P = D Q on the separated (s_1..s_L, a_1..a_L) block.

    Q = prod_i (a_i + a_i^†) flips every replica occupation; D is diagonal in the
    replica occupations and fixes the phases so that P maps the anti-correlated
    pair state onto the correlated one. P acts on replica modes only.
    """
    layout = _block_layout(L, Ordering.SEPARATED)
    phases = _replica_phases(L)
    D = phases[_replica_configuration(layout)]
    P = (D[:, None] * _replica_majorana_string(layout).toarray())
    P.setflags(write=False)
    return P


def _require_basis(rho: DensityMatrix, expected, what: str):
    if tuple(rho.basis) != tuple(expected):
        labels = ", ".join(str(r) for r in rho.basis)
        raise OrderingError(f"{what} needs the basis ({', '.join(str(r) for r in expected)}), got ({labels})")


def apply_p_correction(rho_ac: DensityMatrix) -> DensityMatrix:
    """rho_lambda = P rho_ac P^† over the separated system + replica block"""
    L = len(rho_ac.basis) // 2
    _require_basis(rho_ac, _block_layout(L, Ordering.SEPARATED).roles, "P correction")
    P = p_correction_operator(L)
    return DensityMatrix(P @ rho_ac.rho @ P.conj().T, rho_ac.basis)


@lru_cache(maxsize=8)
def p2_reordering_operator(L: int) -> np.ndarray:
    """Fermionic permutation (s_1, a_1, ..., s_L, a_L) -> (s_1..s_L, a_1..a_L) as adjacent swaps"""
    current = list(_block_layout(L, Ordering.INTERLEAVED).roles)
    target = {r: k for k, r in enumerate(_block_layout(L, Ordering.SEPARATED).roles)}
    n_modes = 2 * L
    U = np.eye(1 << n_modes, dtype=complex)
    changed = True
    while changed:
        changed = False
        for p in range(n_modes - 1):
            if target[current[p]] > target[current[p + 1]]:
                U = fermions.fermionic_swap(n_modes, p) @ U
                current[p], current[p + 1] = current[p + 1], current[p]
                changed = True
    U.setflags(write=False)
    return U


def apply_p2_reordering(rho: DensityMatrix) -> DensityMatrix:
    """Interleaved system + replica state re-expressed in the separated ordering"""
    L = len(rho.basis) // 2
    _require_basis(rho, _block_layout(L, Ordering.INTERLEAVED).roles, "P2 reordering")
    U = p2_reordering_operator(L)
    return DensityMatrix(U @ rho.rho @ U.conj().T, _block_layout(L, Ordering.SEPARATED).roles)


def replica_correction_operator(layout: ModeLayout) -> np.ndarray:
    """P on the full many-body space of a layout: same phases, global replica Majoranas"""
    _check_capacity(layout.N)
    phases = _replica_phases(layout.L)
    D = phases[_replica_configuration(layout)]
    return D[:, None] * _replica_majorana_string(layout).toarray()


def choi_state(layout: ModeLayout, H: Union[ManyBodyHamiltonian, np.ndarray], tau: float,
               psi_ac: ManyBodyState = None) -> DensityMatrix:
    """rho_lambda(tau): evolve psi_AC, keep system + replicas, reorder if interleaved, correct with P"""
    if psi_ac is None:
        psi_ac = prepare_psi_ac(layout)
    psi = evolve(psi_ac, H, tau)
    keep = [r for r in layout.roles if r.kind is not RoleKind.CHAIN]
    rho = partial_trace(psi, keep)
    if layout.ordering is Ordering.INTERLEAVED:
        rho = apply_p2_reordering(rho)
    return apply_p_correction(rho)


def system_density(state: Union[ManyBodyState, np.ndarray], layout: ModeLayout = None) -> DensityMatrix:
    """Reduced system state in either ordering.

    Interleaved layouts keep the system + replica block, reorder it with P2 and
    trace out the trailing replicas.
    """
    if isinstance(state, ManyBodyState):
        layout = state.layout
    elif layout is None:
        raise ConfigError("A layout is required to reduce a density matrix")
    if layout.ordering is Ordering.SEPARATED:
        return partial_trace(state, layout.system_roles, layout)
    keep = [r for r in layout.roles if r.kind is not RoleKind.CHAIN]
    block = apply_p2_reordering(partial_trace(state, keep, layout))
    d = 1 << layout.L
    rho = np.einsum("iaja->ij", block.rho.reshape(d, d, d, d))
    return DensityMatrix(rho, layout.system_roles)
