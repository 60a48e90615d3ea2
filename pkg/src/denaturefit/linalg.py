"""Dense Cholesky factorization for small symmetric matrices."""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "NotPositiveDefinite",
    "cholesky_decompose",
    "cholesky_solve",
    "cholesky_inverse",
    "check_symmetric",
]


class NotPositiveDefinite(np.linalg.LinAlgError):
    """A pivot was <= 0 during factorization."""


def check_symmetric(a, rtol=1e-12):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = max(float(np.max(np.abs(a))), np.finfo(float).tiny)
    if np.max(np.abs(a - a.T)) > rtol * scale:
        raise ValueError("matrix is not symmetric")
    return a


def cholesky_decompose(a) -> np.ndarray:
    """Lower-triangular L with L @ L.T == a.

    Raises NotPositiveDefinite as soon as a pivot is not strictly positive,
    which is how the fitter detects an unusable damped normal matrix.
    """
    a = check_symmetric(a)
    k = a.shape[0]
    rows = a.tolist()
    low = [[0.0] * k for _ in range(k)]
    for j in range(k):
        lj = low[j]
        s = rows[j][j]
        for p in range(j):
            s -= lj[p] * lj[p]
        if not s > 0.0:
            raise NotPositiveDefinite(f"non-positive pivot {s!r} at column {j}")
        djj = math.sqrt(s)
        lj[j] = djj
        for i in range(j + 1, k):
            li = low[i]
            t = rows[i][j]
            for p in range(j):
                t -= li[p] * lj[p]
            li[j] = t / djj
    return np.array(low)


def cholesky_solve(low, rhs) -> np.ndarray:
    """Solve (L L^T) x = rhs by forward then back substitution."""
    low = np.asarray(low, dtype=float)
    b = np.asarray(rhs, dtype=float)
    k = low.shape[0]
    if b.shape[0] != k:
        raise ValueError(f"dimension mismatch: L is {k}x{k}, rhs has {b.shape[0]} rows")
    if b.ndim == 2:
        return np.column_stack([cholesky_solve(low, b[:, j]) for j in range(b.shape[1])])
    rows = low.tolist()
    y = b.tolist()
    for i in range(k):
        ri = rows[i]
        t = y[i]
        for p in range(i):
            t -= ri[p] * y[p]
        y[i] = t / ri[i]
    x = y
    for i in range(k - 1, -1, -1):
        t = x[i]
        for p in range(i + 1, k):
            t -= rows[p][i] * x[p]
        x[i] = t / rows[i][i]
    return np.array(x)


def cholesky_inverse(a) -> np.ndarray:
    """Inverse of a symmetric positive definite matrix."""
    low = cholesky_decompose(a)
    inv = cholesky_solve(low, np.eye(low.shape[0]))
    return 0.5 * (inv + inv.T)
