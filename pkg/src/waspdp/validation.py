"""Input validation helpers for matrices, vectors, and factorizations.

Centralizes the numerical tolerances used by the QP and DP layers so every
caller applies the same positive-definiteness and rank criteria.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .exceptions import DimensionMismatch, NotPositiveDefinite, RankDeficientConstraints

SYMMETRY_TOL = 1e-12
PD_PIVOT_TOL = 1e-12
RANK_TOL = 1e-10


def as_vector(x, length=None, name="vector"):
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1:
        raise DimensionMismatch(f"{name} must be one-dimensional, got shape {v.shape}")
    if length is not None and v.shape[0] != length:
        raise DimensionMismatch(f"{name} must have length {length}, got {v.shape[0]}")
    return v


def as_matrix(x, shape=None, name="matrix"):
    m = np.atleast_2d(np.asarray(x, dtype=float))
    if m.ndim != 2:
        raise DimensionMismatch(f"{name} must be two-dimensional, got shape {m.shape}")
    if shape is not None and m.shape != tuple(shape):
        raise DimensionMismatch(f"{name} must have shape {tuple(shape)}, got {m.shape}")
    return m


def symmetrized(H, tol=SYMMETRY_TOL, name="H"):
    """Return the symmetric part of ``H`` after checking the asymmetry is noise."""
    H = as_matrix(H, name=name)
    if H.shape[0] != H.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got {H.shape}")
    scale = max(1.0, float(np.abs(H).max(initial=0.0)))
    asym = float(np.abs(H - H.T).max(initial=0.0))
    if asym > tol * scale:
        raise DimensionMismatch(
            f"{name} is not symmetric: max |H - H^T| = {asym:.3e} exceeds {tol:.0e} * {scale:.3e}"
        )
    return 0.5 * (H + H.T)


def cholesky_pd(H, name="H"):
    """Cholesky factor of a positive definite matrix.

    Raises NotPositiveDefinite on factorization failure or when a pivot falls
    below PD_PIVOT_TOL * trace(H) / p.
    """
    H = np.asarray(H, dtype=float)
    p = H.shape[0]
    if p == 0:
        return np.zeros((0, 0))
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"{name} is not positive definite: {exc}") from exc
    pivot_floor = PD_PIVOT_TOL * max(np.trace(H), 0.0) / p
    if np.any(np.diag(L) ** 2 < pivot_floor):
        raise NotPositiveDefinite(
            f"{name} has a Cholesky pivot below {pivot_floor:.3e}; treated as not positive definite"
        )
    return L


def cho_solve(L, b):
    """Solve H x = b given the lower Cholesky factor L of H."""
    b = np.asarray(b, dtype=float)
    if L.shape[0] == 0:
        return np.zeros_like(b)
    y = scipy.linalg.solve_triangular(L, b, lower=True)
    return scipy.linalg.solve_triangular(L.T, y, lower=False)


def check_full_row_rank(A, tol=RANK_TOL, name="A"):
    """Verify A (s x p) has rank s using a pivoted QR of A^T."""
    A = as_matrix(A, name=name)
    s = A.shape[0]
    if s == 0:
        return A
    _, R, _ = scipy.linalg.qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size < s or diag.min() <= tol * max(diag.max(), 1.0) or diag.min() == 0.0:
        raise RankDeficientConstraints(
            f"{name} ({s} rows) is row-rank deficient at tolerance {tol:.0e}"
        )
    return A
