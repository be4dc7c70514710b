"""
Mode layouts, single-particle Hamiltonian assembly and dense many-body operators.
"""

import logging
from enum import Enum
from typing import Dict, Iterable, Sequence, Tuple

import numpy as np
from scipy import sparse

from .. import config
from ..models.chain import ChainCoefficients
from ..models.hamiltonian import InteractionTerms, ManyBodyHamiltonian, QuadraticHamiltonian
from ..models.layout import BathAttachment, ModeLayout, ModeRole, Ordering, ordered_roles
from ..utils import fermions
from ..utils.errors import CapacityError, ConfigError

logger = logging.getLogger(__name__)


class OperatorKind(str, Enum):
    CREATION = "creation"
    ANNIHILATION = "annihilation"
    NUMBER = "number"


def build_layout(
    L: int,
    baths: Iterable[BathAttachment] = (),
    ordering: Ordering = Ordering.SEPARATED,
) -> ModeLayout:
    """Build the role <-> index maps for a system of L modes, its replicas and bath chains.

    Raises:
        ConfigError: L < 1, more than one bath per side, duplicate bath ids, or a
            bath attached to a nonexistent system mode
    """
    baths = tuple(baths)
    if L < 1:
        raise ConfigError(f"System needs at least one mode, got L={L}")
    ids = [b.bath_id for b in baths]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"Duplicate bath ids: {ids}")
    sides = [b.side for b in baths]
    if len(set(sides)) != len(sides):
        raise ConfigError(f"Duplicate bath attachments on side(s): {[s.value for s in sides]}")
    for b in baths:
        if not 0 <= b.system_mode < L:
            raise ConfigError(f"Bath '{b.bath_id}' attached to system mode {b.system_mode}, L={L}")

    ordering = Ordering(ordering)
    layout = ModeLayout(L, baths, ordering, tuple(ordered_roles(L, baths, ordering)))
    logger.debug(f"Layout ({ordering.value}): N={layout.N}, roles={[r.label for r in layout.roles]}")
    return layout


def chain_system_matrix(L: int, t_c: float = 0.0, potentials: Sequence[float] = None) -> np.ndarray:
    """Tridiagonal system block: t_c between neighbours, optional on-site potentials"""
    h = np.zeros((L, L), dtype=complex)
    for i in range(L - 1):
        h[i, i + 1] = h[i + 1, i] = t_c
    if potentials is not None:
        h[np.diag_indices(L)] = np.asarray(potentials, dtype=float)
    return h


def assemble_quadratic(
    layout: ModeLayout,
    system_h: np.ndarray,
    chains: Dict[Tuple[str, int], ChainCoefficients],
) -> QuadraticHamiltonian:
    """Single-particle h of system + replicas + thermofield chains.

    Args:
        layout: Mode layout
        system_h: L x L system block
        chains: (bath_id, branch) -> coefficients for every chain in the layout

    Replica modes stay decoupled with zero energy.
    """
    system_h = np.asarray(system_h, dtype=complex)
    if system_h.shape != (layout.L, layout.L):
        raise ConfigError(f"System block has shape {system_h.shape}, expected ({layout.L}, {layout.L})")

    h = np.zeros((layout.N, layout.N), dtype=complex)
    sys_idx = layout.indices(layout.system_roles)
    h[np.ix_(sys_idx, sys_idx)] = system_h

    for bath in layout.baths:
        q = layout.index(ModeRole.system(bath.system_mode))
        for branch in (0, 1):
            coeffs = chains.get((bath.bath_id, branch))
            if coeffs is None:
                raise ConfigError(f"Missing chain coefficients for bath '{bath.bath_id}' branch {branch}")
            if coeffs.M < bath.M:
                raise ConfigError(
                    f"Chain ({bath.bath_id}, {branch}) has {coeffs.M} sites, layout needs {bath.M}"
                )
            sites = layout.indices(layout.chain_roles(bath.bath_id, branch))
            for n, k in enumerate(sites):
                h[k, k] = coeffs.gamma[n]
            for n in range(bath.M - 1):
                hop = np.sqrt(coeffs.beta[n + 1])
                h[sites[n], sites[n + 1]] = h[sites[n + 1], sites[n]] = hop
            h[q, sites[0]] = h[sites[0], q] = coeffs.rho0

    return QuadraticHamiltonian(h, layout)


def _check_capacity(n_modes: int, cap: int = None):
    cap = config.ED_MAX_MODES if cap is None else cap
    if n_modes > cap:
        raise CapacityError(f"{n_modes} modes exceed the dense many-body cap of {cap}")


def many_body_operator(layout, kind: OperatorKind, k: int, cap: int = None) -> np.ndarray:
    """Dense 2^N x 2^N creation, annihilation or number operator of mode k.

    `layout` is a ModeLayout or a plain mode count.
    """
    n_modes = layout if isinstance(layout, int) else layout.N
    _check_capacity(n_modes, cap)
    kind = OperatorKind(kind)
    if kind is OperatorKind.ANNIHILATION:
        op = fermions.annihilation(n_modes, k)
    elif kind is OperatorKind.CREATION:
        op = fermions.creation(n_modes, k)
    else:
        op = fermions.number(n_modes, k)
    return op.toarray()


def build_interacting_hamiltonian(
    hq: QuadraticHamiltonian,
    terms: InteractionTerms = None,
    cap: int = None,
) -> ManyBodyHamiltonian:
    """Many-body H = sum h_ij d_i^† d_j + sum U_ij n_i n_j + sum eps_i n_i (system modes)"""
    layout = hq.layout
    _check_capacity(layout.N, cap)
    terms = terms or InteractionTerms()
    for i in terms.system_modes():
        if not 0 <= i < layout.L:
            raise ConfigError(f"Interaction term refers to system mode {i}, L={layout.L}")

    H = fermions.quadratic_form(layout.N, np.asarray(hq.h))
    for i, j, U in terms.density_density:
        ni = fermions.number(layout.N, layout.index(ModeRole.system(i)))
        nj = fermions.number(layout.N, layout.index(ModeRole.system(j)))
        H = H + U * (ni @ nj)
    for i, eps in terms.potentials:
        H = H + eps * fermions.number(layout.N, layout.index(ModeRole.system(i)))

    H = sparse.csr_matrix(0.5 * (H + H.conj().T))
    logger.debug(f"Many-body Hamiltonian: dim={H.shape[0]}, nnz={H.nnz}")
    return ManyBodyHamiltonian(H, layout)


def total_number(n_modes: int) -> sparse.csr_matrix:
    idx = fermions.basis_indices(n_modes)
    return sparse.diags(fermions.popcount(idx, n_modes).astype(complex), format="csr")
