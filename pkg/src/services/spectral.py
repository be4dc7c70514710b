"""
Bath spectral densities, Fermi factors and the thermofield split.
All functions are pure and accept scalars or numpy arrays.
"""

import logging
import math
from typing import Tuple

import numpy as np
from scipy.special import expit

from ..models.spectral import BathSpec, BranchWeight, DensityKind, SpectralDensity
from ..utils.errors import DomainError
from ..utils.quadrature import gauss_legendre_panels

logger = logging.getLogger(__name__)

# Fermi-function kink scales (in units of 1/beta) used as extra quadrature breakpoints
KINK_SCALES = (1.0, 4.0, 16.0, 64.0)


def evaluate_density(sd: SpectralDensity, omega):
    """J(w) for the density's closed form; tabulated densities interpolate linearly.

    Raises:
        DomainError: if any w lies outside [-D, D]
    """
    w = np.asarray(omega, dtype=float)
    tol = 1e-12 * sd.D
    if np.any(np.abs(w) > sd.D + tol):
        raise DomainError(f"Frequency outside the band [-{sd.D}, {sd.D}]")
    x = np.clip(w / sd.D, -1.0, 1.0)

    if sd.kind is DensityKind.SEMI_ELLIPTICAL:
        value = 2.0 * sd.gamma / math.pi ** 2 * np.sqrt(1.0 - x * x)
    elif sd.kind is DensityKind.SMOOTHED_FLAT:
        edges = expit(-sd.nu * (w - sd.D)) * expit(sd.nu * (w + sd.D))
        value = sd.gamma / (2.0 * math.pi) * smoothed_flat_norm(sd) * edges
    else:
        grid = np.array(sd.samples)
        value = np.interp(w, grid[:, 0], grid[:, 1], left=0.0, right=0.0)

    return float(value) if np.ndim(omega) == 0 else value


def smoothed_flat_norm(sd: SpectralDensity) -> float:
    """Factor c with (1/D) * integral over [-D, D] of c expit(-nu (w - D)) expit(nu (w + D)) = 2.

    With s = 2 nu D the logistic product integrates to
    2D (1 - (ln2 - log1p(e^-s)) / (nu D)) / (1 - e^-s).
    """
    s = 2.0 * sd.nu * sd.D
    lost = (math.log(2.0) - math.log1p(math.exp(-s))) / (sd.nu * sd.D)
    return -math.expm1(-s) / (1.0 - lost)


def fermi_factor(beta: float, mu: float, omega):
    """(1 + exp(beta (w - mu)))^-1, overflow-safe; beta = inf gives the step function.

    Defined for every real beta; negative temperatures are rejected by the run
    configuration, not here.
    """
    w = np.asarray(omega, dtype=float)
    if math.isinf(beta):
        value = np.where(w < mu, 1.0, np.where(w > mu, 0.0, 0.5))
        if beta < 0:
            value = 1.0 - value
    else:
        value = expit(-beta * (w - mu))
    return float(value) if np.ndim(omega) == 0 else value


def density_support(sd: SpectralDensity) -> Tuple[float, float]:
    """Interval outside which J vanishes: [-D, D], or the sampled range for tabulated densities"""
    if sd.kind is DensityKind.TABULATED:
        grid = np.array(sd.samples)
        return max(float(grid[0, 0]), -sd.D), min(float(grid[-1, 0]), sd.D)
    return -sd.D, sd.D


def density_breakpoints(bath: BathSpec) -> Tuple[float, ...]:
    """Quadrature breakpoints for a bath: mu, 0 and the Fermi kink scale around mu"""
    points = {0.0, float(bath.mu)}
    if bath.beta > 0 and not bath.zero_temperature:
        for k in KINK_SCALES:
            points.add(bath.mu + k / bath.beta)
            points.add(bath.mu - k / bath.beta)
    D = bath.density.D
    return tuple(sorted(p for p in points if -D < p < D))


def thermofield_split(bath: BathSpec) -> Tuple[BranchWeight, BranchWeight]:
    """Empty (1 - f) J and filled f J branch weights with their supports.

    At zero temperature the supports end exactly at mu.
    """
    sd = bath.density
    lo, hi = density_support(sd)
    breakpoints = density_breakpoints(bath)

    def empty(omega):
        return (1.0 - fermi_factor(bath.beta, bath.mu, omega)) * evaluate_density(sd, omega)

    def filled(omega):
        return fermi_factor(bath.beta, bath.mu, omega) * evaluate_density(sd, omega)

    if bath.zero_temperature:
        empty_support = (max(float(bath.mu), lo), hi)
        filled_support = (lo, min(float(bath.mu), hi))
    else:
        empty_support = filled_support = (lo, hi)

    logger.debug(f"Thermofield split: beta={bath.beta}, mu={bath.mu}, breakpoints={breakpoints}")
    return (
        BranchWeight(0, empty_support, breakpoints, empty),
        BranchWeight(1, filled_support, breakpoints, filled),
    )


def coupling_strength(sd: SpectralDensity, points_per_panel: int = 4000) -> float:
    """(1/2D) * integral of 2 pi J over [-D, D]"""
    if sd.kind is DensityKind.TABULATED:
        # trapezoid rule is exact for the linear interpolant
        grid = np.array(sd.samples)
        inside = (grid[:, 0] >= -sd.D) & (grid[:, 0] <= sd.D)
        w, j = grid[inside, 0], grid[inside, 1]
        return float(math.pi / sd.D * np.sum(0.5 * (j[1:] + j[:-1]) * np.diff(w)))

    breakpoints = [0.0]
    if sd.kind is DensityKind.SMOOTHED_FLAT:
        # resolve the smoothed edges
        breakpoints += [sd.D - k / sd.nu for k in KINK_SCALES] + [-sd.D + k / sd.nu for k in KINK_SCALES]
    nodes, weights = gauss_legendre_panels(-sd.D, sd.D, breakpoints, points_per_panel)
    return float(math.pi / sd.D * np.dot(weights, evaluate_density(sd, nodes)))


def kondo_temperature(U: float, j0: float) -> float:
    """T_K = sqrt(2 U j0) exp(-U / (8 j0))"""
    if U <= 0 or j0 <= 0:
        raise DomainError(f"Kondo temperature needs U > 0 and j0 > 0, got U={U}, j0={j0}")
    return math.sqrt(2.0 * U * j0) * math.exp(-U / (8.0 * j0))
