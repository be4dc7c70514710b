"""Quadrature helpers: Gauss–Legendre panels and Jacobi-matrix Gauss rules"""

from functools import lru_cache
from typing import Iterable, Tuple

import numpy as np
from scipy.linalg import eig_banded
from scipy.special import roots_legendre

from .. import config


@lru_cache(maxsize=8)
def _legendre_rule(n: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = roots_legendre(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def panel_edges(a: float, b: float, breakpoints: Iterable[float] = ()) -> np.ndarray:
    """Sorted panel edges of [a, b] split at the breakpoints that fall strictly inside."""
    inner = {float(p) for p in breakpoints if a < p < b}
    return np.array(sorted({float(a), float(b)} | inner))


def gauss_legendre_panels(
    a: float,
    b: float,
    breakpoints: Iterable[float] = (),
    points_per_panel: int = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Composite Gauss–Legendre rule on [a, b].

    Args:
        a, b: Integration interval (a < b)
        breakpoints: Points where the integrand has kinks or steep features
        points_per_panel: Nodes per panel (defaults to config.QUADRATURE_POINTS)

    Returns:
        (nodes, weights), nodes ascending
    """
    n = points_per_panel or config.QUADRATURE_POINTS
    x, w = _legendre_rule(int(n))
    edges = panel_edges(a, b, breakpoints)

    nodes = []
    weights = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        nodes.append(half * x + mid)
        weights.append(half * w)
    return np.concatenate(nodes), np.concatenate(weights)


def jacobi_gauss_rule(gamma: np.ndarray, beta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss nodes and weights from monic recurrence coefficients.

    beta[0] is the total mass of the measure; beta[1:] are the squared
    off-diagonal elements of the Jacobi matrix.
    """
    gamma = np.asarray(gamma, dtype=float)
    beta = np.asarray(beta, dtype=float)
    # upper band storage: row 0 holds the superdiagonal (first entry unused)
    band = np.vstack((np.sqrt(np.concatenate(([0.0], beta[1:]))), gamma))
    nodes, vecs = eig_banded(band, lower=False)
    weights = beta[0] * vecs[0, :] ** 2
    return nodes, weights
