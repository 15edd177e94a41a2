"""Finite-difference derivatives of tabulated functions and chain-rule
composites of a value function with the stage dynamics.

Node derivatives use three-point stencils (central in the interior,
one-sided second order at the boundaries), which are exact for polynomials
of degree <= 2 on arbitrary node spacing. Off-node derivative queries
interpolate the derivative tables multilinearly instead of differentiating
the value interpolant, whose second derivative would be piecewise constant
zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatch, TooFewNodes
from .grid import StateGrid


@dataclass
class GridDerivatives:
    """Gradient (N, n) and symmetric Hessian (N, n, n) tables for a node table."""

    grid: StateGrid
    gradient: np.ndarray
    hessian: np.ndarray

    def gradient_at(self, X):
        return self.grid.interpolate(self.gradient, X)

    def hessian_at(self, X):
        n = self.grid.ndim
        flat = self.grid.interpolate(self.hessian.reshape(-1, n * n), X)
        return flat.reshape(-1, n, n)


def grid_gradient_hessian(values, grid: StateGrid) -> GridDerivatives:
    """Gradient and Hessian tables of a flat node table."""
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.num_nodes,):
        raise DimensionMismatch(
            f"table must be flat with {grid.num_nodes} entries, got {values.shape}"
        )
    for k, ax in enumerate(grid.axes):
        if ax.size < 3:
            raise TooFewNodes(f"axis {k} needs >= 3 nodes for derivative stencils")
    V = values.reshape(grid.shape)
    n = grid.ndim
    grads = [np.gradient(V, grid.axes[k], axis=k, edge_order=2) for k in range(n)]
    gradient = np.stack([g.ravel() for g in grads], axis=-1)
    hessian = np.empty((grid.num_nodes, n, n))
    for i in range(n):
        for j in range(n):
            hessian[:, i, j] = np.gradient(grads[i], grid.axes[j], axis=j, edge_order=2).ravel()
    hessian = 0.5 * (hessian + np.swapaxes(hessian, 1, 2))
    return GridDerivatives(grid, gradient, hessian)


def composite_gradient(dudf, grad_v):
    """Chain-rule gradient of u -> V(f(x, u)): (grad_u f) @ (grad_y V).

    dudf has gradient columns per dynamics coordinate: shape (m, n) or
    batched (k, m, n); grad_v is (n,) or (k, n).
    """
    dudf = np.asarray(dudf, dtype=float)
    grad_v = np.asarray(grad_v, dtype=float)
    if dudf.ndim == 2 and grad_v.ndim == 1:
        if dudf.shape[1] != grad_v.shape[0]:
            raise DimensionMismatch(
                f"grad_u f has {dudf.shape[1]} columns but grad V has length {grad_v.shape[0]}"
            )
        return dudf @ grad_v
    if dudf.ndim == 3 and grad_v.ndim == 2:
        if dudf.shape[2] != grad_v.shape[1] or dudf.shape[0] != grad_v.shape[0]:
            raise DimensionMismatch("batched shapes disagree")
        return np.einsum("kmn,kn->km", dudf, grad_v)
    raise DimensionMismatch(f"unsupported shapes {dudf.shape}, {grad_v.shape}")


def composite_hessian(dudf, hess_v, grad_v, d2udf):
    """Chain-rule Hessian of u -> V(f(x, u)).

    (grad_u f) (hess_yy V) (grad_u f)^T  +  sum_i (grad_y V)_i (hess_uu f_i),
    with d2udf the per-coordinate action Hessians, shape (n, m, m) or
    batched (k, n, m, m). The result is symmetrized.
    """
    dudf = np.asarray(dudf, dtype=float)
    hess_v = np.asarray(hess_v, dtype=float)
    grad_v = np.asarray(grad_v, dtype=float)
    d2udf = np.asarray(d2udf, dtype=float)
    if dudf.ndim == 2:
        m, n = dudf.shape
        if hess_v.shape != (n, n) or grad_v.shape != (n,) or d2udf.shape != (n, m, m):
            raise DimensionMismatch("single-sample shapes disagree")
        out = dudf @ hess_v @ dudf.T + np.einsum("i,imp->mp", grad_v, d2udf)
        return 0.5 * (out + out.T)
    if dudf.ndim == 3:
        k, m, n = dudf.shape
        if hess_v.shape != (k, n, n) or grad_v.shape != (k, n) or d2udf.shape != (k, n, m, m):
            raise DimensionMismatch("batched shapes disagree")
        out = np.einsum("kmn,knq,kpq->kmp", dudf, hess_v, dudf)
        out = out + np.einsum("ki,kimp->kmp", grad_v, d2udf)
        return 0.5 * (out + np.swapaxes(out, 1, 2))
    raise DimensionMismatch(f"unsupported dudf shape {dudf.shape}")
