"""
Dynamical maps from Choi states, time-local propagators, spectra, fixed points,
memory times and the slippage / repeated-map predictions built on them.

Superoperators use column stacking: vec(X)[i + d*j] = X[i, j].
"""

import logging
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from .. import config
from ..models.states import DensityMatrix
from ..models.superoperator import (
    CPTPReport,
    FixedPointPair,
    MemoryTimes,
    NormKind,
    SpectralDecomposition,
    Superoperator,
    SuperoperatorKind,
)
from ..utils.errors import ConfigError, DomainError, MultiplicityError, SingularMapError

logger = logging.getLogger(__name__)

DEFECTIVE_CONDITION = 1e12
DEGENERACY_TOL = 1e-8


def vec(X: np.ndarray) -> np.ndarray:
    return np.asarray(X).reshape(-1, order="F")


def unvec(v: np.ndarray, d: int = None) -> np.ndarray:
    v = np.asarray(v)
    d = d or int(round(np.sqrt(v.size)))
    return v.reshape(d, d, order="F")


def apply_superoperator(S: Superoperator, rho) -> np.ndarray:
    rho = rho.rho if isinstance(rho, DensityMatrix) else np.asarray(rho)
    return S(rho)


def trace_norm(X: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(X), "nuc"))


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    return 0.5 * trace_norm(np.asarray(a) - np.asarray(b))


def operator_norm(X: np.ndarray, kind: NormKind = NormKind.TRACE) -> float:
    kind = NormKind(kind)
    if kind is NormKind.TRACE:
        return trace_norm(X)
    if kind is NormKind.HILBERT_SCHMIDT:
        return float(np.linalg.norm(X, "fro"))
    return float(np.linalg.norm(X, 2))


def choi_to_map(rho_lambda: Union[DensityMatrix, np.ndarray], d: int = None, tau: float = 0.0) -> Superoperator:
    """Lambda[rho0] = d Tr_replica[(1 ⊗ rho0^T) rho_lambda] as a column-stacking matrix.

    rho_lambda is ordered system first, replicas second (s_1..s_L, a_1..a_L).
    """
    rho = rho_lambda.rho if isinstance(rho_lambda, DensityMatrix) else np.asarray(rho_lambda, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ConfigError(f"Choi state must be square, got shape {rho.shape}")
    d = d or int(round(np.sqrt(rho.shape[0])))
    if rho.shape != (d * d, d * d):
        raise ConfigError(f"Choi state of shape {rho.shape} does not fit system dimension d={d}")
    # R[i, c, j, a] = <i, c| rho |j, a>, S[(i, j), (c, a)] = d R[i, c, j, a]
    R = rho.reshape(d, d, d, d)
    S = d * R.transpose(2, 0, 3, 1).reshape(d * d, d * d)
    return Superoperator(S, tau=tau, kind=SuperoperatorKind.MAP)


def choi_matrix(S: Superoperator) -> np.ndarray:
    """J = sum_ab Lambda(|a><b|) ⊗ |a><b|; positive semidefinite iff the map is CP"""
    d = S.d
    J = S.matrix.reshape(d, d, d, d).transpose(1, 3, 0, 2)
    return J.reshape(d * d, d * d)


def map_to_propagator(
    before: Optional[Superoperator],
    current: Superoperator,
    after: Optional[Superoperator],
    delta: float,
    kappa_max: float = None,
) -> Superoperator:
    """L(tau) = dLambda/dtau Lambda(tau)^-1.

    Central difference when both neighbours are given, one-sided otherwise
    (flagged on the result).

    Raises:
        SingularMapError: cond(Lambda(tau)) above kappa_max
    """
    kappa_max = config.KAPPA_MAX if kappa_max is None else kappa_max
    if delta <= 0:
        raise DomainError(f"Derivative step must be positive, got {delta}")
    if before is not None and after is not None:
        derivative = (after.matrix - before.matrix) / (2.0 * delta)
        one_sided = False
    elif after is not None:
        derivative = (after.matrix - current.matrix) / delta
        one_sided = True
    elif before is not None:
        derivative = (current.matrix - before.matrix) / delta
        one_sided = True
    else:
        raise ConfigError("A derivative needs at least one neighbouring map")

    condition = float(np.linalg.cond(current.matrix))
    if not np.isfinite(condition) or condition > kappa_max:
        raise SingularMapError(condition, current.tau)

    # X Lambda = dLambda  <=>  Lambda^T X^T = dLambda^T
    generator = linalg.solve(current.matrix.T, derivative.T).T
    return Superoperator(generator, tau=current.tau, kind=SuperoperatorKind.GENERATOR,
                         condition=condition, one_sided=one_sided)


def propagators_on_grid(
    maps: Sequence[Superoperator],
    delta: float,
    kappa_max: float = None,
) -> Tuple[List[Optional[Superoperator]], List[Tuple[float, float]]]:
    """Generators at every grid point of a uniform trajectory.

    Returns (generators, singular) where generators[k] is None at the points listed
    in singular as (tau, condition number).
    """
    generators: List[Optional[Superoperator]] = []
    singular = []
    n = len(maps)
    for k, current in enumerate(maps):
        before = maps[k - 1] if k > 0 else None
        after = maps[k + 1] if k + 1 < n else None
        try:
            generators.append(map_to_propagator(before, current, after, delta, kappa_max))
        except SingularMapError as e:
            logger.debug(f"Skipping generator at tau={current.tau:g}: {e}")
            generators.append(None)
            singular.append((current.tau, e.condition))
    return generators, singular


def spectral_decomposition(S: Superoperator) -> SpectralDecomposition:
    """Eigenvalues with right eigenvectors (columns) and biorthonormal left eigenvectors (rows).

    Maps are sorted by decreasing modulus, generators by decreasing real part.
    Near-defective matrices and degenerate pairs are reported, not repaired.
    """
    evals, right = linalg.eig(S.matrix)
    if S.kind is SuperoperatorKind.MAP:
        order = np.lexsort((-evals.real, -np.abs(evals)))
    else:
        order = np.lexsort((-np.abs(evals.imag), -evals.real))
    evals = evals[order]
    right = right[:, order]

    condition = float(np.linalg.cond(right))
    defective = not np.isfinite(condition) or condition > DEFECTIVE_CONDITION
    if defective:
        left = np.linalg.pinv(right)
    else:
        left = np.linalg.inv(right)
    residual = float(np.max(np.abs(left @ right - np.eye(right.shape[0]))))

    degenerate = [
        (i, j)
        for i in range(evals.size)
        for j in range(i + 1, evals.size)
        if abs(evals[i] - evals[j]) < DEGENERACY_TOL
    ]
    if defective:
        logger.debug(f"Spectral decomposition at tau={S.tau:g} is near-defective (cond={condition:.3e})")
    return SpectralDecomposition(evals, right, left, residual, condition, defective, degenerate)


def _leading_state(S: Superoperator, target: complex, gap_tol: float) -> np.ndarray:
    evals, right = linalg.eig(S.matrix)
    distance = np.abs(evals - target)
    k = int(np.argmin(distance))
    others = np.delete(evals, k)
    gap = float(np.min(np.abs(others - evals[k]))) if others.size else np.inf
    if gap < gap_tol:
        raise MultiplicityError(
            f"Eigenvalue {evals[k]:.6g} of the {S.kind.value} at tau={S.tau:g} is degenerate (gap {gap:.3e})"
        )
    rho = unvec(right[:, k], S.d)
    trace = np.trace(rho)
    if abs(trace) < 1e-14:
        raise MultiplicityError(f"Leading eigenvector of the {S.kind.value} at tau={S.tau:g} is traceless")
    rho = rho / trace
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def fixed_points(Lam: Superoperator, generator: Superoperator = None, gap_tol: float = None) -> FixedPointPair:
    """Instantaneous fixed points: Lambda[rho] = rho and L[rho] = 0.

    Raises:
        MultiplicityError: the relevant eigenvalue is not separated by gap_tol
    """
    gap_tol = config.FIXED_POINT_GAP if gap_tol is None else gap_tol
    rho_map = _leading_state(Lam, 1.0, gap_tol)
    pair = FixedPointPair(rho_map, trace_norm(Lam(rho_map) - rho_map))
    if generator is not None:
        rho_gen = _leading_state(generator, 0.0, gap_tol)
        pair.generator_fixed_point = rho_gen
        pair.generator_residual = trace_norm(generator(rho_gen))
    return pair


def _settled_time(taus: Sequence[float], values: Sequence[Optional[float]], epsilon: float) -> Optional[float]:
    """Earliest grid time after which every evaluated value stays below epsilon"""
    settled = None
    for tau, value in zip(taus, values):
        if value is None:
            continue
        if value < epsilon:
            if settled is None:
                settled = tau
        else:
            settled = None
    return settled


def memory_times(
    taus: Sequence[float],
    maps: Sequence[Superoperator],
    generators: Sequence[Optional[Superoperator]],
    rho_inf: np.ndarray,
    rho0: np.ndarray,
    epsilon: float = None,
    norm: NormKind = NormKind.TRACE,
) -> MemoryTimes:
    """Relaxation time and the two memory times on a grid.

    tau_re:       ||Lambda(tau)[rho0] - rho_inf|| < epsilon
    tau_m_map:    ||Lambda(tau)[rho_inf] - rho_inf|| < epsilon
    tau_m_gen:    ||L(tau)[rho_inf]|| < epsilon
    each for all later grid points. Points without a generator are skipped.
    """
    epsilon = config.MEMORY_EPSILON if epsilon is None else epsilon
    norm = NormKind(norm)
    rho_inf = np.asarray(rho_inf)
    rho0 = np.asarray(rho0)

    relax = [operator_norm(Lam(rho0) - rho_inf, norm) for Lam in maps]
    invariance = [operator_norm(Lam(rho_inf) - rho_inf, norm) for Lam in maps]
    stationarity = [None if g is None else operator_norm(g(rho_inf), norm) for g in generators]

    times = MemoryTimes(
        tau_re=_settled_time(taus, relax, epsilon),
        tau_m_map=_settled_time(taus, invariance, epsilon),
        tau_m_generator=_settled_time(taus, stationarity, epsilon),
        epsilon=epsilon,
        norm=norm,
    )
    logger.debug(f"Memory times (eps={epsilon:g}, {norm.value}): {times.to_dict()}")
    return times


def semigroup(generator: Superoperator, t: float) -> np.ndarray:
    """exp(t L) through the eigendecomposition of L, expm if L is near-defective"""
    evals, V = linalg.eig(generator.matrix)
    if np.linalg.cond(V) > DEFECTIVE_CONDITION:
        return linalg.expm(t * generator.matrix)
    return (V * np.exp(evals * t)) @ np.linalg.inv(V)


def slippage_propagate(
    Lam_m: Superoperator,
    generator_m: Superoperator,
    rho0: np.ndarray,
    times: Sequence[float],
) -> List[np.ndarray]:
    """rho(tau) = exp((tau - tau_m) L_m) Lambda(tau_m)[rho0] for each tau in times"""
    rho0 = rho0.rho if isinstance(rho0, DensityMatrix) else np.asarray(rho0)
    start = vec(Lam_m(rho0))
    evals, V = linalg.eig(generator_m.matrix)
    defective = np.linalg.cond(V) > DEFECTIVE_CONDITION
    coeffs = None if defective else np.linalg.solve(V, start)

    states = []
    for tau in times:
        t = tau - Lam_m.tau
        if defective:
            v = linalg.expm(t * generator_m.matrix) @ start
        else:
            v = V @ (np.exp(evals * t) * coeffs)
        states.append(unvec(v, Lam_m.d))
    return states


def preb_compose(Lam_tau: Superoperator, rho0: np.ndarray, n: int) -> List[np.ndarray]:
    """rho_k = Lambda_tau^k [rho0] for k = 1..n"""
    if n < 1:
        raise DomainError(f"Need at least one repetition, got n={n}")
    rho = rho0.rho if isinstance(rho0, DensityMatrix) else np.asarray(rho0)
    states = []
    for _ in range(n):
        rho = Lam_tau(rho)
        states.append(rho)
    return states


def preb_trajectory(Lam_tau: Superoperator, Lam_offset: Superoperator, rho0: np.ndarray, n: int) -> List[np.ndarray]:
    """Stroboscopic states rho(k tau + t1) = Lambda_tau^k Lambda(t1)[rho0], k = 0..n"""
    if n < 0:
        raise DomainError(f"Repetitions must be >= 0, got n={n}")
    rho0 = rho0.rho if isinstance(rho0, DensityMatrix) else np.asarray(rho0)
    start = Lam_offset(rho0)
    if n == 0:
        return [start]
    return [start] + preb_compose(Lam_tau, start, n)


def validate_cptp(
    S: Superoperator,
    trace_tol: float = 1e-8,
    positivity_tol: float = 1e-8,
    hermiticity_tol: float = 1e-8,
) -> CPTPReport:
    """Trace-preservation residual, smallest Choi eigenvalue and Hermiticity-preservation residual"""
    d = S.d
    identity = vec(np.eye(d))
    trace_residual = float(np.max(np.abs(identity.conj() @ S.matrix - identity.conj())))
    J = choi_matrix(S)
    hermiticity = float(np.max(np.abs(J - J.conj().T)))
    min_eig = float(np.linalg.eigvalsh(0.5 * (J + J.conj().T)).min())
    passed = trace_residual < trace_tol and min_eig > -positivity_tol and hermiticity < hermiticity_tol
    return CPTPReport(trace_residual, min_eig, hermiticity, passed)
