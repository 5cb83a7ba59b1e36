"""vec / Kronecker / commutation-matrix algebra.

Matrices are plain 2-D float64 numpy arrays. ``vec`` stacks columns, so it is
``M.reshape(-1, order="F")`` regardless of how the array is laid out in memory.
Column vectors are returned with shape ``(k, 1)``.
"""

import numpy as np

from .errors import DimensionError


def as_matrix(M, name="matrix"):
    """Coerce ``M`` to a finite 2-D float64 array (copy-free when possible)."""
    A = np.asarray(M, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    elif A.ndim == 1:
        A = A.reshape(-1, 1)
    elif A.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {A.shape}")
    if A.size == 0:
        raise DimensionError(f"{name} is empty")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def vec(M):
    """Stack the columns of ``M`` into a column vector."""
    A = as_matrix(M)
    return A.reshape(-1, 1, order="F").copy()


def unvec(v, rows, cols):
    """Inverse of :func:`vec`: fill a ``rows x cols`` matrix column by column."""
    flat = np.asarray(v, dtype=float).ravel()
    if rows < 1 or cols < 1 or flat.size != rows * cols:
        raise DimensionError(
            f"cannot unvec {flat.size} entries into a {rows}x{cols} matrix"
        )
    return flat.reshape(rows, cols, order="F").copy()


def kron(A, B):
    """Kronecker product; block (i, j) of the result is ``A[i, j] * B``."""
    return np.kron(as_matrix(A, "A"), as_matrix(B, "B"))


def commutation_matrix(n):
    """The n^2 x n^2 permutation T with ``T @ vec(A) == vec(A.T)``.

    T is symmetric and involutive. Entries are exactly 0.0 or 1.0.
    """
    if int(n) != n or n < 1:
        raise DimensionError(f"n must be a positive integer, got {n}")
    n = int(n)
    T = np.zeros((n * n, n * n))
    for i in range(n):
        for j in range(n):
            # A[i, j] sits at vec index j*n + i; A.T[j, i] = A[i, j] sits at i*n + j.
            T[i * n + j, j * n + i] = 1.0
    return T
