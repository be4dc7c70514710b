"""Ordered Jordan–Wigner fermion operators.

Basis convention: a Fock configuration (n_0, ..., n_{N-1}) is the basis vector with
index sum_k n_k 2^(N-1-k), i.e. mode 0 is the most significant bit. Creation
operators carry the sign string of the occupied lower-indexed modes, so the
configuration equals (d_0^†)^n_0 ... (d_{N-1}^†)^n_{N-1} |vac> with sign +1.
"""

from functools import lru_cache

import numpy as np
from scipy import sparse


def basis_indices(n_modes: int) -> np.ndarray:
    return np.arange(1 << n_modes, dtype=np.int64)


def occupation(indices: np.ndarray, mode: int, n_modes: int) -> np.ndarray:
    """Occupation (0/1) of `mode` in each basis configuration."""
    return (indices >> (n_modes - 1 - mode)) & 1


def popcount(indices: np.ndarray, n_modes: int) -> np.ndarray:
    counts = np.zeros_like(indices)
    for bit in range(n_modes):
        counts += (indices >> bit) & 1
    return counts


@lru_cache(maxsize=256)
def annihilation(n_modes: int, mode: int) -> sparse.csr_matrix:
    """Sparse annihilation operator d_mode on n_modes fermionic modes."""
    if not 0 <= mode < n_modes:
        raise IndexError(f"mode {mode} outside 0..{n_modes - 1}")
    idx = basis_indices(n_modes)
    bit = n_modes - 1 - mode
    occupied = idx[((idx >> bit) & 1) == 1]
    # modes j < mode are the higher bits
    string = popcount(occupied >> (bit + 1), n_modes)
    data = np.where(string % 2 == 0, 1.0, -1.0)
    rows = occupied ^ (1 << bit)
    dim = 1 << n_modes
    op = sparse.csr_matrix((data, (rows, occupied)), shape=(dim, dim), dtype=complex)
    op.sort_indices()
    return op


def creation(n_modes: int, mode: int) -> sparse.csr_matrix:
    return annihilation(n_modes, mode).conj().T.tocsr()


def number(n_modes: int, mode: int) -> sparse.csr_matrix:
    idx = basis_indices(n_modes)
    return sparse.diags(occupation(idx, mode, n_modes).astype(complex), format="csr")


def hopping(n_modes: int, i: int, j: int) -> sparse.csr_matrix:
    """d_i^† d_j"""
    return (creation(n_modes, i) @ annihilation(n_modes, j)).tocsr()


def quadratic_form(n_modes: int, h: np.ndarray, modes=None) -> sparse.csr_matrix:
    """Many-body matrix of sum_ij h_ij d_i^† d_j.

    `modes` maps row/column k of h onto a global mode index (defaults to k).
    """
    modes = list(range(h.shape[0])) if modes is None else list(modes)
    dim = 1 << n_modes
    out = sparse.csr_matrix((dim, dim), dtype=complex)
    rows, cols = np.nonzero(np.abs(h) > 0)
    for r, c in zip(rows, cols):
        out = out + h[r, c] * hopping(n_modes, modes[r], modes[c])
    return out.tocsr()


def fermionic_swap(n_modes: int, position: int) -> np.ndarray:
    """Dense unitary relabelling adjacent modes (position, position + 1).

    Swaps the two occupation bits and applies the exchange sign (-1)^(n_p n_{p+1}).
    """
    idx = basis_indices(n_modes)
    hi = n_modes - 1 - position
    lo = hi - 1
    a = (idx >> hi) & 1
    b = (idx >> lo) & 1
    swapped = idx & ~((1 << hi) | (1 << lo)) | (b << hi) | (a << lo)
    phase = np.where(a & b, -1.0, 1.0)
    dim = 1 << n_modes
    out = np.zeros((dim, dim), dtype=complex)
    out[swapped, idx] = phase
    return out
