"""Rectilinear state grids with multilinear interpolation.

Tables are stored flat in row-major node order; ``nodes()`` enumerates the
coordinates in the same order. Interpolation never extrapolates: queries
outside the hull raise OutOfGrid.
"""

from __future__ import annotations

import itertools

import numpy as np

from .exceptions import DimensionMismatch, OutOfGrid


class StateGrid:
    """Tensor-product grid defined by one strictly increasing axis per state dimension."""

    def __init__(self, axes):
        axes = tuple(np.asarray(ax, dtype=float).ravel() for ax in axes)
        if not axes:
            raise DimensionMismatch("grid needs at least one axis")
        for k, ax in enumerate(axes):
            if ax.size < 2:
                raise DimensionMismatch(f"axis {k} needs at least 2 nodes, got {ax.size}")
            if np.any(np.diff(ax) <= 0):
                raise DimensionMismatch(f"axis {k} must be strictly increasing")
        self.axes = axes
        self.shape = tuple(ax.size for ax in axes)
        self.ndim = len(axes)
        self.num_nodes = int(np.prod(self.shape))
        self.lower = np.array([ax[0] for ax in axes])
        self.upper = np.array([ax[-1] for ax in axes])
        self._nodes = None
        # absolute slack for hull membership of floating-point queries
        self._edge_tol = 1e-10 * np.maximum(1.0, self.upper - self.lower)

    @classmethod
    def uniform(cls, lower, upper, count):
        """1-d grid with equally spaced nodes."""
        return cls([np.linspace(lower, upper, count)])

    @classmethod
    def log_spaced(cls, lower, upper, count):
        """1-d grid with geometrically spaced nodes (lower > 0)."""
        if lower <= 0:
            raise DimensionMismatch("log-spaced grid needs lower > 0")
        return cls([np.geomspace(lower, upper, count)])

    def nodes(self):
        """(num_nodes, ndim) coordinates in row-major order."""
        if self._nodes is None:
            mesh = np.meshgrid(*self.axes, indexing="ij")
            self._nodes = np.stack([m.ravel() for m in mesh], axis=-1)
            self._nodes.setflags(write=False)
        return self._nodes

    def _as_points(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1 and self.ndim == 1:
            X = X[:, None]
        elif X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.ndim:
            raise DimensionMismatch(f"query points must be (k, {self.ndim}), got {X.shape}")
        return X

    def contains(self, X):
        X = self._as_points(X)
        ok = np.ones(X.shape[0], dtype=bool)
        for k in range(self.ndim):
            ok &= (X[:, k] >= self.lower[k] - self._edge_tol[k]) & (
                X[:, k] <= self.upper[k] + self._edge_tol[k]
            )
        return ok

    def locate(self, X):
        """Cell indices and fractional offsets of query points.

        Returns (idx, frac) with idx[k, dim] the lower-corner node index and
        frac in [0, 1] within the cell. Raises OutOfGrid for points beyond
        the hull.
        """
        X = self._as_points(X)
        inside = self.contains(X)
        if not np.all(inside):
            j = int(np.argmin(inside))
            raise OutOfGrid(
                f"query point {X[j]} lies outside the grid hull "
                f"[{self.lower}, {self.upper}]"
            )
        idx = np.empty(X.shape, dtype=np.intp)
        frac = np.empty(X.shape)
        for k, ax in enumerate(self.axes):
            x = np.clip(X[:, k], ax[0], ax[-1])
            i = np.clip(np.searchsorted(ax, x, side="right") - 1, 0, ax.size - 2)
            idx[:, k] = i
            frac[:, k] = (x - ax[i]) / (ax[i + 1] - ax[i])
        return idx, frac

    def interpolate(self, values, X):
        """Multilinear interpolation of a flat node table at query points.

        ``values`` is (num_nodes,) or (num_nodes, q); the result matches with
        the leading axis replaced by the number of query points. Exact at
        nodes.
        """
        values = np.asarray(values, dtype=float)
        if values.shape[0] != self.num_nodes:
            raise DimensionMismatch(
                f"table has leading size {values.shape[0]}, expected {self.num_nodes}"
            )
        idx, frac = self.locate(X)
        out = np.zeros((idx.shape[0],) + values.shape[1:])
        strides = np.array([int(np.prod(self.shape[k + 1 :])) for k in range(self.ndim)])
        base = idx @ strides
        for corner in itertools.product((0, 1), repeat=self.ndim):
            w = np.ones(idx.shape[0])
            offset = 0
            for k, c in enumerate(corner):
                w = w * (frac[:, k] if c else 1.0 - frac[:, k])
                offset += c * strides[k]
            out += w.reshape((-1,) + (1,) * (values.ndim - 1)) * values[base + offset]
        return out

    def cell_corner_flat_indices(self, idx):
        """Flat node indices of every corner of the cells in ``idx`` (k, 2^ndim)."""
        strides = np.array([int(np.prod(self.shape[k + 1 :])) for k in range(self.ndim)])
        base = idx @ strides
        corners = []
        for corner in itertools.product((0, 1), repeat=self.ndim):
            offset = sum(c * strides[k] for k, c in enumerate(corner))
            corners.append(base + offset)
        return np.stack(corners, axis=-1)
