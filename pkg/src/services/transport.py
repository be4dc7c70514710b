"""
System observables and the Landauer–Büttiker steady state of non-interacting chains.
"""

import logging
import math
from typing import List, Sequence

import numpy as np
from scipy import integrate

from .spectral import KINK_SCALES, density_breakpoints, evaluate_density, fermi_factor
from ..models.hamiltonian import InteractionTerms
from ..models.spectral import BathSpec, DensityKind, SpectralDensity
from ..models.transport import LBResult, ObservableSet
from ..utils import fermions
from ..utils.errors import ConfigError, DomainError, UnsupportedModelError
from ..utils.quadrature import gauss_legendre_panels

logger = logging.getLogger(__name__)

PV_POINTS = 2000  # Gauss–Legendre nodes per panel of the principal-value integral
LB_POINTS = 400  # nodes per panel of the current integrals


def observables(L: int) -> ObservableSet:
    """N_i = s_i^† s_i and J_i = i(s_i^† s_{i+1} - s_{i+1}^† s_i) on the 2^L system space"""
    if L < 1:
        raise ConfigError(f"System needs at least one mode, got L={L}")
    densities = [fermions.number(L, i).toarray() for i in range(L)]
    currents = []
    for i in range(L - 1):
        forward = fermions.hopping(L, i, i + 1).toarray()
        currents.append(1j * (forward - forward.conj().T))
    return ObservableSet(densities, currents)


def expectation(rho: np.ndarray, operator: np.ndarray) -> float:
    """Re Tr(O rho)"""
    return float(np.real(np.trace(np.asarray(operator) @ np.asarray(rho))))


def particle_current(rho: np.ndarray, t_c: float, bond: int, obs: ObservableSet = None) -> float:
    """Particle flow t_c <J_bond> from site `bond` to site `bond + 1`"""
    L = int(round(math.log2(np.asarray(rho).shape[0])))
    obs = obs or observables(L)
    if not 0 <= bond < len(obs.currents):
        raise ConfigError(f"Bond {bond} does not exist for L={L}")
    return t_c * expectation(rho, obs.currents[bond])


def _breakpoints(sd: SpectralDensity) -> List[float]:
    points = [0.0]
    if sd.kind is DensityKind.SMOOTHED_FLAT:
        points += [sd.D - k / sd.nu for k in KINK_SCALES] + [-sd.D + k / sd.nu for k in KINK_SCALES]
    return points


def self_energy(sd: SpectralDensity, omega: float, points_per_panel: int = PV_POINTS) -> complex:
    """Sigma(w) = P int J(x) / (w - x) dx - i pi J(w) for |w| < D.

    The principal value is taken by subtracting J(w): the remainder is regular and
    integrated on panels split at w, the subtracted part is J(w) ln((D + w)/(D - w)).
    """
    D = sd.D
    if not -D < omega < D:
        raise DomainError(f"Self-energy is evaluated inside the band, got w={omega}")
    j0 = evaluate_density(sd, omega)
    nodes, weights = gauss_legendre_panels(-D, D, _breakpoints(sd) + [omega], points_per_panel)
    regular = np.dot(weights, (evaluate_density(sd, nodes) - j0) / (omega - nodes))
    principal = regular + j0 * math.log((D + omega) / (D - omega))
    return complex(principal, -math.pi * j0)


def principal_value_reference(sd: SpectralDensity, omega: float) -> complex:
    """Same self-energy through QUADPACK's Cauchy-weight rule"""
    D = sd.D
    if not -D < omega < D:
        raise DomainError(f"Self-energy is evaluated inside the band, got w={omega}")
    value, _ = integrate.quad(lambda x: evaluate_density(sd, x), -D, D,
                              weight="cauchy", wvar=omega, limit=400, epsabs=1e-14, epsrel=1e-12)
    # quad returns P int J(x) / (x - w)
    return complex(-value, -math.pi * evaluate_density(sd, omega))


def _check_chain(h: np.ndarray, terms: InteractionTerms = None):
    if terms is not None and not terms.is_empty:
        raise UnsupportedModelError("Landauer–Büttiker transport needs a non-interacting system")
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ConfigError(f"System Hamiltonian must be square, got {h.shape}")
    off = np.abs(np.triu(h, 2)) + np.abs(np.tril(h, -2))
    if np.any(off > 0):
        raise UnsupportedModelError("Landauer–Büttiker transport needs a tridiagonal system Hamiltonian")


def transmission(
    h: np.ndarray,
    sd_left: SpectralDensity,
    sd_right: SpectralDensity,
    omega: Sequence[float],
    left_site: int = 0,
    right_site: int = None,
    points_per_panel: int = PV_POINTS,
) -> np.ndarray:
    """T(w) = 4 pi^2 J_L(w) J_R(w) |G_{left,right}(w)|^2 with G = (w - h - Sigma_L - Sigma_R)^-1"""
    h = np.asarray(h, dtype=complex)
    L = h.shape[0]
    right_site = L - 1 if right_site is None else right_site
    same = sd_left == sd_right
    out = np.empty(len(omega))
    for k, w in enumerate(omega):
        sigma_l = self_energy(sd_left, w, points_per_panel)
        sigma_r = sigma_l if same else self_energy(sd_right, w, points_per_panel)
        A = w * np.eye(L, dtype=complex) - h
        A[left_site, left_site] -= sigma_l
        A[right_site, right_site] -= sigma_r
        e = np.zeros(L, dtype=complex)
        e[right_site] = 1.0
        g = np.linalg.solve(A, e)[left_site]
        out[k] = 4.0 * math.pi ** 2 * evaluate_density(sd_left, w) * evaluate_density(sd_right, w) * abs(g) ** 2
    return out


def lb_currents(
    h: np.ndarray,
    bath_left: BathSpec,
    bath_right: BathSpec,
    terms: InteractionTerms = None,
    points_per_panel: int = LB_POINTS,
) -> LBResult:
    """Steady-state particle and energy currents from left to right lead.

    J_P = (1/2pi) int T (f_L - f_R) dw,  J_E = (1/2pi) int w T (f_L - f_R) dw.
    Leads attach to their baths' coupled system modes.

    Raises:
        UnsupportedModelError: interacting or non-tridiagonal system
    """
    _check_chain(h, terms)
    D = min(bath_left.density.D, bath_right.density.D)
    breakpoints = set(density_breakpoints(bath_left)) | set(density_breakpoints(bath_right))
    breakpoints |= set(_breakpoints(bath_left.density)) | set(_breakpoints(bath_right.density))
    nodes, weights = gauss_legendre_panels(-D, D, sorted(breakpoints), points_per_panel)

    T = transmission(h, bath_left.density, bath_right.density, nodes,
                     bath_left.coupled_system_mode, bath_right.coupled_system_mode)
    window = fermi_factor(bath_left.beta, bath_left.mu, nodes) - fermi_factor(bath_right.beta, bath_right.mu, nodes)
    particle = float(np.dot(weights, T * window) / (2.0 * math.pi))
    energy = float(np.dot(weights, nodes * T * window) / (2.0 * math.pi))
    logger.debug(f"Landauer–Büttiker: {nodes.size} nodes, J_P={particle:.10e}, J_E={energy:.10e}")
    return LBResult(particle, energy, nodes, T)
