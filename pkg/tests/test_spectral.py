#!/usr/bin/env python3
"""
Tests for bath spectral densities

Tests:
  1. Semi-elliptical density integrates to its coupling strength
  2. Smoothed-flat density is renormalized to its coupling strength
  3. Tabulated densities define their own coupling strength and support
  4. Frequencies outside the band are rejected
  5. Fermi factor at zero and very low temperature
  6. Thermofield branches add up to the density
  7. Zero-temperature supports end at the chemical potential
  8. Kondo temperature formula
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
PROJECT_ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

from src.models.spectral import BathSpec, DensityKind, SpectralDensity
from src.services.spectral import (
    coupling_strength,
    density_breakpoints,
    density_support,
    evaluate_density,
    fermi_factor,
    kondo_temperature,
    smoothed_flat_norm,
    thermofield_split,
)
from src.utils.errors import ConfigError, DomainError


def test_semi_elliptical_strength():
    """Semi-elliptical J integrates to Gamma"""
    sd = SpectralDensity(DensityKind.SEMI_ELLIPTICAL, 0.05, D=1.0)
    gamma = coupling_strength(sd)
    assert abs(gamma - 0.05) < 1e-9, f"Coupling strength {gamma} != 0.05"

    wide = SpectralDensity(DensityKind.SEMI_ELLIPTICAL, 0.3, D=2.5)
    assert abs(coupling_strength(wide) - 0.3) < 1e-9, "Coupling strength must not depend on D"


@pytest.mark.parametrize("nu,D", [(100.0, 1.0), (20.0, 1.0), (50.0, 2.0)])
def test_smoothed_flat_strength(nu, D):
    """The smoothed edges are renormalized so the band still integrates to Gamma"""
    sd = SpectralDensity(DensityKind.SMOOTHED_FLAT, 0.2, D=D, nu=nu)
    gamma = coupling_strength(sd)
    assert abs(gamma - 0.2) < 1e-8, f"Smoothed-flat strength {gamma} != 0.2 (nu={nu}, D={D})"
    assert smoothed_flat_norm(sd) > 1.0, "Smoothing removes weight that the factor restores"
    centre = evaluate_density(sd, 0.0)
    assert centre == pytest.approx(0.2 / (2.0 * math.pi) * smoothed_flat_norm(sd), rel=1e-12)


def test_smoothed_flat_default_nu():
    sd = SpectralDensity(DensityKind.SMOOTHED_FLAT, 0.2, D=2.0)
    assert sd.nu == pytest.approx(50.0), "Default edge rate is 100/D"


def test_tabulated_density():
    """Triangle with unit mass on [-1, 1] has Gamma = pi"""
    sd = SpectralDensity.tabulated([-1.0, 0.0, 1.0], [0.0, 1.0, 0.0])
    assert sd.gamma == pytest.approx(math.pi), f"Tabulated Gamma {sd.gamma} != pi"
    assert coupling_strength(sd) == pytest.approx(math.pi), "coupling_strength must agree with the table"
    assert evaluate_density(sd, 0.5) == pytest.approx(0.5), "Linear interpolation between samples"

    with pytest.raises(ConfigError):
        SpectralDensity.tabulated([0.0, -1.0], [1.0, 1.0])


def test_density_support():
    assert density_support(SpectralDensity(DensityKind.SEMI_ELLIPTICAL, 0.05, D=2.0)) == (-2.0, 2.0)
    narrow = SpectralDensity.tabulated([-0.5, 0.0, 0.5], [0.0, 1.0, 0.0], D=1.0)
    assert density_support(narrow) == (-0.5, 0.5), "Tabulated support is the sampled range"
    empty, filled = thermofield_split(BathSpec(narrow, beta=math.inf, mu=0.1))
    assert empty.support == (0.1, 0.5) and filled.support == (-0.5, 0.1)


def test_outside_band_raises():
    sd = SpectralDensity(DensityKind.SEMI_ELLIPTICAL, 0.05, D=1.0)
    with pytest.raises(DomainError):
        evaluate_density(sd, 1.5)
    with pytest.raises(DomainError):
        evaluate_density(sd, np.array([0.0, -1.01]))
    assert evaluate_density(sd, 1.0) == pytest.approx(0.0, abs=1e-12), "J vanishes at the band edge"


def test_fermi_factor():
    """Step function at beta=inf; no overflow at very large beta"""
    w = np.array([-0.5, 0.0, 0.5])
    assert np.allclose(fermi_factor(math.inf, 0.0, w), [1.0, 0.5, 0.0]), "Zero-temperature step"
    values = fermi_factor(1e8, 0.0, np.array([-1.0, 1.0]))
    assert np.allclose(values, [1.0, 0.0]), "Large-beta Fermi factor"
    assert fermi_factor(0.0, 0.3, 0.9) == pytest.approx(0.5), "Infinite temperature gives 1/2"
    assert fermi_factor(-2.0, 0.0, 0.5) == pytest.approx(1.0 - fermi_factor(2.0, 0.0, 0.5)), \
        "Negative beta inverts the occupation"
    assert np.allclose(fermi_factor(-math.inf, 0.0, w), [0.0, 0.5, 1.0])


def test_thermofield_branches_sum_to_density():
    sd = SpectralDensity(DensityKind.SEMI_ELLIPTICAL, 0.05, D=1.0)
    bath = BathSpec(sd, beta=2.0, mu=0.1)
    empty, filled = thermofield_split(bath)
    w = np.linspace(-0.99, 0.99, 41)
    total = empty(w) + filled(w)
    assert np.allclose(total, evaluate_density(sd, w), atol=1e-15), "Branches must add up to J"
    assert empty.branch == 0 and filled.branch == 1
    assert empty.support == (-1.0, 1.0), "Finite temperature keeps the full band"


def test_zero_temperature_supports():
    sd = SpectralDensity(DensityKind.SEMI_ELLIPTICAL, 0.05, D=1.0)
    bath = BathSpec(sd, beta=math.inf, mu=0.2)
    empty, filled = thermofield_split(bath)
    assert empty.support == (0.2, 1.0), f"Empty support {empty.support}"
    assert filled.support == (-1.0, 0.2), f"Filled support {filled.support}"
    assert filled(np.array([0.5]))[0] == 0.0, "Filled branch vanishes above mu"


def test_breakpoints_follow_temperature():
    sd = SpectralDensity(DensityKind.SEMI_ELLIPTICAL, 0.05, D=1.0)
    points = density_breakpoints(BathSpec(sd, beta=10.0, mu=0.0))
    assert 0.1 in points and -0.4 in points, f"Kink scales missing from {points}"
    assert all(-1.0 < p < 1.0 for p in points), "Breakpoints stay strictly inside the band"


def test_kondo_temperature():
    """U = 8 j0 puts the exponent at -1"""
    j0 = 0.2 / (2.0 * math.pi)
    assert kondo_temperature(8.0 * j0, j0) == pytest.approx(4.0 * j0 / math.e)
    with pytest.raises(DomainError):
        kondo_temperature(0.0, j0)
    with pytest.raises(DomainError):
        kondo_temperature(0.8, -1.0)
