#!/usr/bin/env python3
"""
Tests for the chain mapping

Tests:
  1. Coefficients converge to the band centre and (b-a)^2/16 at beta = inf, 10, 1
  2. Zero-temperature branches are mirror images at mu = 0
  3. beta_0 is the branch mass
  4. Gauss rule of the coefficients reproduces the moments of the weight
  5. Lieb–Robinson truncation length
  6. Degenerate and invalid measures are rejected
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
PROJECT_ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

from src.models.chain import ChainCoefficients
from src.models.spectral import BathSpec, DensityKind, SpectralDensity
from src.services.chainmap import (
    auto_chain_length,
    branch_coefficients,
    chains_for_bath,
    gauss_quadrature,
    recurrence_coefficients,
    truncation_length,
)
from src.services.spectral import thermofield_split
from src.utils.errors import ConfigError, DegenerateMeasureError, DomainError
from src.utils.quadrature import gauss_legendre_panels


def semi_elliptical_bath(beta, mu=0.0, gamma=0.05):
    return BathSpec(SpectralDensity(DensityKind.SEMI_ELLIPTICAL, gamma, D=1.0), beta=beta, mu=mu)


@pytest.mark.parametrize("beta", [math.inf, 10.0, 1.0])
def test_coefficient_asymptotics(beta):
    """gamma_n -> (a + b)/2 and beta_n -> (b - a)^2/16 on each branch support by n = 50.

    Finite temperature: support [-1, 1], geometric convergence to 0 and 1/4.
    Zero temperature: supports [0, 1] and [-1, 0] cut at the Fermi edge, so the
    approach to +-1/2 and 1/16 is algebraic (~1/n^2) and 1e-3 is what n = 50 reaches.
    """
    empty, filled = chains_for_bath(semi_elliptical_bath(beta), 60)
    if math.isinf(beta):
        centres, limit, tol = (0.5, -0.5), 1.0 / 16.0, 1e-3
    else:
        centres, limit, tol = (0.0, 0.0), 0.25, 1e-6
    for branch, centre in zip((empty, filled), centres):
        assert abs(branch.gamma[50] - centre) < tol, f"gamma_50 = {branch.gamma[50]} (beta={beta})"
        assert abs(branch.beta[50] / limit - 1.0) < tol, f"beta_50 = {branch.beta[50]} (beta={beta})"

    if math.isinf(beta):
        for branch in (empty, filled):
            early = abs(branch.beta[25] / limit - 1.0)
            late = abs(branch.beta[50] / limit - 1.0)
            assert late < early / 2.5, f"Expected ~1/n^2 decay, got {early:.3e} -> {late:.3e}"


def test_zero_temperature_mirror():
    """Symmetric J at mu = 0: gamma_0n = -gamma_1n and equal beta"""
    empty, filled = chains_for_bath(semi_elliptical_bath(math.inf), 20, grid=4000)
    assert np.allclose(empty.gamma, -filled.gamma, atol=1e-10), "On-site energies must be mirrored"
    assert np.allclose(empty.beta, filled.beta, rtol=1e-9), "Hoppings must agree"


def test_mass_is_beta0():
    """Branch masses add up to the integral of J, Gamma D / pi"""
    empty, filled = chains_for_bath(semi_elliptical_bath(1.0, mu=0.2), 3, grid=4000)
    total = empty.beta[0] + filled.beta[0]
    assert abs(total - 0.05 / math.pi) < 1e-10, f"Total mass {total} != Gamma/pi"
    assert filled.beta[0] > empty.beta[0], "Positive mu fills more than half the band"
    assert empty.rho0 == pytest.approx(math.sqrt(empty.beta[0]))


def test_gauss_rule_reproduces_moments():
    """An M-point rule integrates x^k exactly for k < 2M"""
    bath = semi_elliptical_bath(2.0, mu=0.1)
    empty, _ = thermofield_split(bath)
    coeffs = branch_coefficients(empty, 12, grid=2000)
    nodes, weights = gauss_quadrature(coeffs)

    qnodes, qweights = gauss_legendre_panels(-1.0, 1.0, empty.breakpoints, 2000)
    density = empty(qnodes) * qweights
    for k in range(0, 20, 3):
        exact = float(np.dot(density, qnodes ** k))
        approx = float(np.dot(weights, nodes ** k))
        assert abs(approx - exact) < 1e-12 * max(1.0, abs(exact)) + 1e-15, \
            f"Moment {k}: {approx} != {exact}"


def test_single_site_chain():
    empty, filled = chains_for_bath(semi_elliptical_bath(1.0), 1, grid=1000)
    assert empty.M == 1 and filled.M == 1
    assert len(empty.rows()) == 1, "M=1 gives a single row"
    assert empty.hoppings.size == 0


def test_truncation_length():
    """v = 2 max sqrt(beta_n); M = ceil(safety tau_max v)"""
    coeffs = ChainCoefficients(np.zeros(3), np.array([0.01, 0.25, 0.25]))
    assert truncation_length(coeffs, 60.0, 1.5) == 90
    assert truncation_length(coeffs, 60.0, 1.0) == 60
    assert truncation_length(coeffs, 0.0, 1.5) == 0
    with pytest.raises(DomainError):
        truncation_length(coeffs, 60.0, 0.5)


def test_auto_chain_length_scales_with_time():
    bath = semi_elliptical_bath(1.0)
    short = auto_chain_length(bath, 10.0, 1.5, grid=2000)
    long = auto_chain_length(bath, 20.0, 1.5, grid=2000)
    assert 14 <= short <= 17, f"Chain length for tau_max=10: {short}"
    assert long >= 2 * short - 1, f"Chain length should grow linearly ({short} -> {long})"


def test_invalid_measures():
    with pytest.raises(DegenerateMeasureError):
        recurrence_coefficients(lambda w: np.zeros_like(w), (-1.0, 1.0), 4, grid=100)
    with pytest.raises(DomainError):
        recurrence_coefficients(lambda w: np.ones_like(w), (-1.0, 1.0), 0, grid=100)
    with pytest.raises(ConfigError):
        ChainCoefficients(np.zeros(2), np.array([1.0, 0.0]))
