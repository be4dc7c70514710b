"""
Chain mapping: monic orthogonal-polynomial recurrence coefficients of the
thermofield branch weights, and the Lieb–Robinson chain-length estimate.
"""

import logging
import math
from typing import Callable, Iterable, Tuple

import numpy as np

from .spectral import thermofield_split
from .. import config
from ..models.chain import ChainCoefficients
from ..models.spectral import BathSpec, BranchWeight
from ..utils.errors import DegenerateMeasureError, DomainError, PrecisionError
from ..utils.quadrature import gauss_legendre_panels, jacobi_gauss_rule

logger = logging.getLogger(__name__)

# relative size below which a Lanczos residual counts as lost positivity
_BREAKDOWN = 1e-13
PROBE_SITES = 64


def recurrence_coefficients(
    weight: Callable[[np.ndarray], np.ndarray],
    support: Tuple[float, float],
    M: int,
    grid: int = None,
    breakpoints: Iterable[float] = (),
) -> ChainCoefficients:
    """First M recurrence coefficients of the monic orthogonal polynomials of `weight`.

    Stieltjes procedure on a discretized measure, written as Lanczos
    tridiagonalization of diag(nodes) started from sqrt(weights), with full
    reorthogonalization.

    Args:
        weight: Nonnegative weight function on the support
        support: Interval (a, b)
        M: Number of coefficients (chain sites)
        grid: Gauss–Legendre points per panel
        breakpoints: Panel splitting points inside the support

    Raises:
        DegenerateMeasureError: the weight has no mass on the support
        PrecisionError: the discretization cannot resolve M coefficients
    """
    if M < 1:
        raise DomainError(f"Need at least one coefficient, got M={M}")
    a, b = support
    nodes, qweights = gauss_legendre_panels(a, b, breakpoints, grid)
    w = np.asarray(weight(nodes), dtype=float) * qweights
    if np.any(w < -1e-300):
        raise DomainError("Weight function is negative on its support")
    w = np.clip(w, 0.0, None)

    mass = math.fsum(w)
    if not mass > 0.0 or not np.isfinite(mass):
        raise DegenerateMeasureError(f"Weight has vanishing total mass on [{a}, {b}]")
    if M > np.count_nonzero(w):
        raise PrecisionError(
            f"Discretized measure supports {np.count_nonzero(w)} coefficients, {M} requested; "
            f"refine the quadrature grid"
        )

    scale = max(abs(a), abs(b))
    gamma = np.empty(M)
    beta = np.empty(M)
    beta[0] = mass

    basis = np.empty((M, nodes.size))
    q = np.sqrt(w / mass)
    basis[0] = q
    q_prev = np.zeros_like(q)
    b_prev = 0.0
    for n in range(M):
        gamma[n] = np.dot(nodes * q, q)
        if n == M - 1:
            break
        u = (nodes - gamma[n]) * q - b_prev * q_prev
        # full reorthogonalization against the Krylov basis so far
        u -= basis[: n + 1].T @ (basis[: n + 1] @ u)
        b_next = np.linalg.norm(u)
        if not np.isfinite(b_next) or b_next <= _BREAKDOWN * scale:
            raise PrecisionError(
                f"Recurrence lost positivity at n={n + 1} (beta={b_next ** 2:.3e}); "
                f"refine the quadrature grid"
            )
        beta[n + 1] = b_next * b_next
        q_prev, q = q, u / b_next
        basis[n + 1] = q
        b_prev = b_next

    logger.debug(f"Recurrence on [{a:g}, {b:g}]: M={M}, mass={mass:.6e}, "
                 f"gamma_M={gamma[-1]:.6f}, beta_M={beta[-1]:.6f}")
    return ChainCoefficients(gamma, beta)


def branch_coefficients(branch: BranchWeight, M: int, grid: int = None) -> ChainCoefficients:
    return recurrence_coefficients(branch, branch.support, M, grid, branch.breakpoints)


def chains_for_bath(bath: BathSpec, M: int, grid: int = None) -> Tuple[ChainCoefficients, ChainCoefficients]:
    """(empty, filled) chain coefficients of a bath"""
    empty, filled = thermofield_split(bath)
    return branch_coefficients(empty, M, grid), branch_coefficients(filled, M, grid)


def truncation_length(coeffs: ChainCoefficients, tau_max: float, safety: float = None) -> int:
    """Chain sites needed so that no excitation reaches the chain end before tau_max.

    M_req = ceil(safety * tau_max * v) with group velocity v = 2 max_n sqrt(beta_n).
    """
    safety = config.LR_SAFETY if safety is None else safety
    if safety < 1:
        raise DomainError(f"Safety factor must be >= 1, got {safety}")
    if tau_max <= 0:
        return 0
    velocity = 2.0 * float(np.max(np.sqrt(coeffs.beta)))
    # tolerate round-off just above an integer
    return int(math.ceil(safety * tau_max * velocity - 1e-9))


def auto_chain_length(bath: BathSpec, tau_max: float, safety: float = None, grid: int = None) -> int:
    """truncation_length over both branches, from trial coefficients"""
    empty, filled = chains_for_bath(bath, PROBE_SITES, grid)
    M = max(truncation_length(empty, tau_max, safety), truncation_length(filled, tau_max, safety), 1)
    logger.info(f"Lieb–Robinson chain length for tau_max={tau_max:g}: M={M}")
    return M


def gauss_quadrature(coeffs: ChainCoefficients) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss nodes and weights of the Jacobi matrix of the coefficients"""
    return jacobi_gauss_rule(coeffs.gamma, coeffs.beta)
