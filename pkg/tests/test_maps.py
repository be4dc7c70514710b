#!/usr/bin/env python3
"""
Tests for maps, generators and their analysis

Uses the single-mode amplitude-damping semigroup, where every quantity is known
in closed form.

Tests:
  1. Choi state -> map convention
  2. Central-difference generator is second order in the step
  3. Ill-conditioned maps are reported, one-sided differences flagged
  4. Spectral ordering and degenerate pairs
  5. Fixed points and their multiplicity check
  6. Relaxation and memory times
  7. Slippage and repeated-map predictions
  8. CPTP validation
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.linalg import expm

# Add project root to path
PROJECT_ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

from src.models.superoperator import NormKind, Superoperator, SuperoperatorKind
from src.services import maps
from src.utils.errors import DomainError, MultiplicityError, SingularMapError


def damping_generator(g=1.0):
    """d rho_11/dt = -g rho_11, coherences decay at g/2 (column stacking)"""
    Lg = np.zeros((4, 4), dtype=complex)
    Lg[3, 3] = -g
    Lg[0, 3] = g
    Lg[1, 1] = Lg[2, 2] = -g / 2
    return Lg


def damping_map(t, g=1.0):
    return Superoperator(expm(t * damping_generator(g)), tau=t)


def damping_trajectory(t_max=10.0, dtau=0.1, g=1.0):
    taus = [round(k * dtau, 10) for k in range(int(round(t_max / dtau)) + 1)]
    return taus, [damping_map(t, g) for t in taus]


def test_identity_choi_state():
    d = 4
    phi = np.zeros(d * d, dtype=complex)
    for n in range(d):
        phi[n * d + n] = 1.0 / math.sqrt(d)
    S = maps.choi_to_map(np.outer(phi, phi.conj()))
    assert np.allclose(S.matrix, np.eye(d * d)), "Correlated pair state is the identity map"
    assert S.kind is SuperoperatorKind.MAP


def test_choi_state_convention():
    """(Lambda ⊗ 1) applied to the correlated pair state gives back Lambda"""
    S = damping_map(0.7)
    d = 2
    rho = np.zeros((d * d, d * d), dtype=complex)
    for c in range(d):
        for a in range(d):
            E = np.zeros((d, d))
            E[c, a] = 1.0
            rho += np.kron(S(E), E) / d
    recovered = maps.choi_to_map(rho)
    assert np.allclose(recovered.matrix, S.matrix, atol=1e-14), "Map must round through its Choi state"
    assert np.allclose(recovered(np.diag([0.0, 1.0])), S(np.diag([0.0, 1.0])))


def test_generator_second_order():
    """Halving the step divides the central-difference error by about four"""
    Lg = damping_generator()
    errors = []
    for delta in (0.1, 0.05):
        generator = maps.map_to_propagator(damping_map(1.0 - delta), damping_map(1.0),
                                           damping_map(1.0 + delta), delta)
        assert generator.kind is SuperoperatorKind.GENERATOR and not generator.one_sided
        errors.append(np.max(np.abs(generator.matrix - Lg)))
    ratio = errors[0] / errors[1]
    assert 3.5 < ratio < 4.5, f"Error ratio {ratio:.3f} is not second order"


def test_generator_edges_and_singular_maps():
    one_sided = maps.map_to_propagator(None, damping_map(0.0), damping_map(0.01), 0.01)
    assert one_sided.one_sided, "Forward difference must be flagged"
    assert np.allclose(one_sided.matrix, damping_generator(), atol=0.01)

    replacement = np.zeros((4, 4), dtype=complex)
    replacement[0, 0] = replacement[0, 3] = 1.0
    rank_one = Superoperator(replacement, tau=2.0)
    with pytest.raises(SingularMapError):
        maps.map_to_propagator(rank_one, rank_one, rank_one, 0.1)
    with pytest.raises(DomainError):
        maps.map_to_propagator(None, damping_map(0.0), damping_map(0.1), 0.0)

    taus, trajectory = damping_trajectory(t_max=0.3)
    generators, singular = maps.propagators_on_grid(trajectory + [rank_one], 0.1)
    assert generators[-1] is None and singular[0][0] == 2.0, "Singular points are skipped and listed"
    assert generators[0].one_sided and not generators[1].one_sided


def test_spectral_decomposition():
    decomposition = maps.spectral_decomposition(damping_map(1.0))
    expected = [1.0, math.exp(-0.5), math.exp(-0.5), math.exp(-1.0)]
    assert np.allclose(decomposition.eigenvalues, expected), "Maps sort by decreasing modulus"
    assert decomposition.degenerate_pairs == [(1, 2)], "Coherences decay at the same rate"
    assert decomposition.biorthogonality_residual < 1e-12

    generator = Superoperator(damping_generator(), kind=SuperoperatorKind.GENERATOR)
    decomposition = maps.spectral_decomposition(generator)
    assert np.allclose(decomposition.eigenvalues, [0.0, -0.5, -0.5, -1.0]), "Generators sort by real part"


def test_fixed_points():
    generator = Superoperator(damping_generator(), tau=2.0, kind=SuperoperatorKind.GENERATOR)
    pair = maps.fixed_points(damping_map(2.0), generator)
    vacuum = np.diag([1.0, 0.0])
    assert np.allclose(pair.map_fixed_point, vacuum, atol=1e-12), "Damping relaxes to the empty mode"
    assert np.allclose(pair.generator_fixed_point, vacuum, atol=1e-12)
    assert pair.map_residual < 1e-12 and pair.generator_residual < 1e-12

    with pytest.raises(MultiplicityError):
        maps.fixed_points(damping_map(0.0))


def test_memory_times():
    """2 e^-t < 1e-3 first holds on the 0.1 grid at t = 7.7"""
    taus, trajectory = damping_trajectory()
    generators = [Superoperator(damping_generator(), tau=t, kind=SuperoperatorKind.GENERATOR) for t in taus]
    vacuum = np.diag([1.0, 0.0])
    times = maps.memory_times(taus, trajectory, generators, vacuum, np.diag([0.0, 1.0]), epsilon=1e-3)
    assert times.tau_re == pytest.approx(7.7), f"Relaxation time {times.tau_re}"
    assert times.tau_m_map == 0.0 and times.tau_m_generator == 0.0, "Semigroup has no memory"
    assert times.resolved and times.is_ordered()

    hs = maps.memory_times(taus, trajectory, [None] * len(taus), vacuum, np.diag([0.0, 1.0]),
                           epsilon=1e-3, norm=NormKind.HILBERT_SCHMIDT)
    assert hs.tau_m_generator is None, "Without generators the memory time stays unresolved"
    assert hs.tau_re <= times.tau_re, "Hilbert-Schmidt distance is below the trace norm"


def test_slippage_matches_semigroup():
    generator = Superoperator(damping_generator(), tau=2.0, kind=SuperoperatorKind.GENERATOR)
    rho0 = np.array([[0.3, 0.2 - 0.1j], [0.2 + 0.1j, 0.7]])
    times = [2.0, 3.5, 6.0]
    states = maps.slippage_propagate(damping_map(2.0), generator, rho0, times)
    for t, rho in zip(times, states):
        assert np.allclose(rho, damping_map(t)(rho0), atol=1e-12), f"Slippage prediction off at t={t}"


def test_repeated_map_predictions():
    rho0 = np.diag([0.0, 1.0])
    states = maps.preb_compose(damping_map(0.5), rho0, 4)
    assert len(states) == 4
    assert np.allclose(states[-1], damping_map(2.0)(rho0)), "Markovian maps compose exactly"

    trajectory = maps.preb_trajectory(damping_map(0.5), damping_map(0.2), rho0, 2)
    assert np.allclose(trajectory[0], damping_map(0.2)(rho0))
    assert np.allclose(trajectory[2], damping_map(1.2)(rho0))
    assert len(maps.preb_trajectory(damping_map(0.5), damping_map(0.2), rho0, 0)) == 1

    with pytest.raises(DomainError):
        maps.preb_compose(damping_map(0.5), rho0, 0)


def test_cptp_validation():
    report = maps.validate_cptp(damping_map(1.0))
    assert report.passed, f"Amplitude damping is CPTP: {report.to_dict()}"

    transpose = np.eye(4)[[0, 2, 1, 3]]
    report = maps.validate_cptp(Superoperator(transpose))
    assert report.trace_residual < 1e-14, "Transposition preserves the trace"
    assert not report.passed and report.choi_min_eigenvalue == pytest.approx(-1.0), \
        "Transposition is not completely positive"


def test_vectorization():
    X = np.arange(4).reshape(2, 2)
    assert list(maps.vec(X)) == [0, 2, 1, 3], "Column stacking"
    assert np.array_equal(maps.unvec(maps.vec(X)), X)
    assert maps.trace_distance(np.diag([1.0, 0.0]), np.diag([0.0, 1.0])) == pytest.approx(1.0)
