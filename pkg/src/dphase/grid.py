"""Tensor-product box grids, quadrature and discrete gradients.

A grid is a vertex lattice on ``[a_1, b_1] x ... x [a_N, b_N]`` whose extreme
nodes sit on the boundary and carry the Dirichlet mask.  When the origin lies
inside the box and the plain vertex lattice would put a node on it, the
interior nodes of that axis are shifted by half a spacing so the singular
weights ``|x|^{-a}`` are never sampled at ``x = 0``.

Two gradient operators live here:

* :func:`discrete_gradient` -- one vector per node, central differences in the
  interior and second-order one-sided differences at the extreme nodes.  Used
  for inspection and export.
* :class:`CornerGradient` -- the gradient seen by every cell from each of its
  ``2^N`` corners (one-sided differences along the cell edges).  Energies and
  Sobolev-type norms are built on it because, unlike central differences, its
  kernel on masked functions is trivial.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

__all__ = [
    "Grid",
    "GridFunction",
    "CornerGradient",
    "build_grid",
    "integrate",
    "discrete_gradient",
    "write_csv",
]


def _fsum(values: np.ndarray) -> float:
    # Exactly rounded, order independent: results do not depend on threads.
    return math.fsum(np.ravel(values).tolist())


def _axis_nodes(a: float, b: float, n: int) -> tuple[np.ndarray, bool]:
    h = (b - a) / (n - 1)
    nodes = a + h * np.arange(n)
    nodes[-1] = b
    shifted = False
    if a < 0.0 < b:
        k = -a / h
        if abs(k - round(k)) < 1e-9 and 0 < round(k) < n - 1:
            nodes[1:-1] = a + h * (np.arange(1, n - 1) + 0.5)
            shifted = True
    return nodes, shifted


def _trapezoid_weights(nodes: np.ndarray) -> np.ndarray:
    gaps = np.diff(nodes)
    w = np.zeros_like(nodes)
    w[:-1] += 0.5 * gaps
    w[1:] += 0.5 * gaps
    return w


@dataclass(frozen=True, eq=False)
class Grid:
    """Box grid with Dirichlet mask and tensor trapezoid weights."""

    dim: int
    extents: tuple[tuple[float, float], ...]
    nodes_per_axis: int
    axes: tuple[np.ndarray, ...] = field(repr=False)
    shifted: tuple[bool, ...] = field(repr=False)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.nodes_per_axis,) * self.dim

    @property
    def size(self) -> int:
        return self.nodes_per_axis**self.dim

    @property
    def spacing(self) -> tuple[float, ...]:
        """Nominal per-axis spacing ``(b - a) / (n - 1)``."""
        return tuple((b - a) / (self.nodes_per_axis - 1) for a, b in self.extents)

    @property
    def measure(self) -> float:
        return math.prod(b - a for a, b in self.extents)

    @cached_property
    def coords(self) -> np.ndarray:
        """Node coordinates, shape ``(dim, *shape)``."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh)

    @cached_property
    def radius(self) -> np.ndarray:
        """Euclidean norm ``|x|`` at every node."""
        return np.sqrt(np.sum(self.coords**2, axis=0))

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        n = self.nodes_per_axis
        mask = np.zeros(self.shape, dtype=bool)
        for d in range(self.dim):
            idx = [slice(None)] * self.dim
            idx[d] = 0
            mask[tuple(idx)] = True
            idx[d] = n - 1
            mask[tuple(idx)] = True
        mask.setflags(write=False)
        return mask

    @cached_property
    def interior(self) -> np.ndarray:
        inner = ~self.boundary_mask
        inner.setflags(write=False)
        return inner

    @cached_property
    def quad_weights(self) -> np.ndarray:
        w = np.ones(self.shape)
        for d, nodes in enumerate(self.axes):
            shape = [1] * self.dim
            shape[d] = -1
            w = w * _trapezoid_weights(nodes).reshape(shape)
        w.setflags(write=False)
        return w

    @cached_property
    def corner(self) -> "CornerGradient":
        return CornerGradient(self)

    def mask(self, values: np.ndarray) -> np.ndarray:
        """Copy of ``values`` with the Dirichlet nodes set to zero."""
        out = np.array(values, dtype=float, copy=True).reshape(self.shape)
        out[self.boundary_mask] = 0.0
        return out

    def function(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self, self.mask(values))

    def evaluate(self, func) -> np.ndarray:
        """Sample ``func(*coords)`` at the nodes."""
        return np.broadcast_to(np.asarray(func(*self.coords), dtype=float), self.shape).copy()

    def nearest_node(self, point: Sequence[float]) -> tuple[int, ...]:
        return tuple(int(np.argmin(np.abs(ax - c))) for ax, c in zip(self.axes, point))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Nodal values on a grid, zero on the Dirichlet nodes."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).reshape(self.grid.shape)
        if np.any(vals[self.grid.boundary_mask] != 0.0):
            raise ValueError("GridFunction must vanish on boundary nodes; use Grid.function()")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        return GridFunction(self.grid, self.values - other.values)

    def __mul__(self, c: float) -> "GridFunction":
        return GridFunction(self.grid, c * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction":
        return GridFunction(self.grid, -self.values)

    @property
    def positive_part(self) -> "GridFunction":
        return GridFunction(self.grid, np.maximum(self.values, 0.0))

    @property
    def negative_part(self) -> "GridFunction":
        """``u^- = max(-u, 0)``."""
        return GridFunction(self.grid, np.maximum(-self.values, 0.0))

    def to_csv(self, path) -> None:
        write_csv(path, self.grid, self.values)


def build_grid(dim: int, extents: Sequence[Sequence[float]], nodes_per_axis: int) -> Grid:
    """Build a box grid.

    Parameters
    ----------
    dim : int
        Space dimension, at least 2.
    extents : sequence of (a, b)
        One interval per axis, or a single interval reused for all axes.
    nodes_per_axis : int
        Nodes per axis including the two boundary nodes, at least 3.
    """
    if int(dim) != dim or dim < 2:
        raise ValueError(f"dim must be an integer >= 2, got {dim!r}")
    if int(nodes_per_axis) != nodes_per_axis or nodes_per_axis < 3:
        raise ValueError(f"nodes_per_axis must be an integer >= 3, got {nodes_per_axis!r}")
    ext = [tuple(float(v) for v in iv) for iv in extents]
    if len(ext) == 1:
        ext = ext * dim
    if len(ext) != dim or any(len(iv) != 2 for iv in ext):
        raise ValueError(f"expected {dim} intervals (a, b), got {extents!r}")
    for a, b in ext:
        if not (math.isfinite(a) and math.isfinite(b)) or a >= b:
            raise ValueError(f"degenerate extent [{a}, {b}]")
    axes, shifted = zip(*(_axis_nodes(a, b, int(nodes_per_axis)) for a, b in ext))
    for ax in axes:
        ax.setflags(write=False)
    return Grid(int(dim), tuple(ext), int(nodes_per_axis), tuple(axes), tuple(shifted))


def integrate(g: Grid, f) -> float:
    """Quadrature ``sum(w * f)`` with exactly rounded summation."""
    f = np.broadcast_to(np.asarray(f, dtype=float), g.shape)
    return _fsum(g.quad_weights * f)


def discrete_gradient(u) -> np.ndarray:
    """Nodal gradient, shape ``(dim, *shape)``.

    Central differences at interior nodes (second order on the shifted,
    non-uniform axes as well), second-order one-sided at the extreme nodes.
    """
    if isinstance(u, GridFunction):
        grid, vals = u.grid, u.values
    else:
        grid, vals = u
    parts = np.gradient(np.asarray(vals, dtype=float), *grid.axes, edge_order=2)
    if grid.dim == 1:  # pragma: no cover - build_grid forbids dim 1
        parts = [parts]
    return np.stack(parts)


class CornerGradient:
    """Per-cell, per-corner one-sided gradients and their adjoint.

    For orientation ``s`` in ``{0, 1}^N`` the corner ``j + s`` of cell ``j``
    sees the gradient whose ``d``-th component is the difference quotient along
    the cell edge through that corner in direction ``d``.  Each corner sample
    carries weight ``|cell| / 2^N``, so summing the weights of the samples
    attached to a node gives its trapezoid weight.
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        n, dim = grid.nodes_per_axis, grid.dim
        self.orientations = list(itertools.product((0, 1), repeat=dim))
        gaps = [np.diff(ax) for ax in grid.axes]
        self._gaps = []
        for d in range(dim):
            shape = [1] * dim
            shape[d] = n - 1
            self._gaps.append(gaps[d].reshape(shape))
        vol = np.ones((n - 1,) * dim)
        for g in self._gaps:
            vol = vol * g
        self.cell_volume = vol
        ncorner = len(self.orientations)
        self.weights = np.broadcast_to(vol / ncorner, (ncorner,) + vol.shape).copy()
        self.weights.setflags(write=False)

    def _corner_slice(self, s) -> tuple[slice, ...]:
        n = self.grid.nodes_per_axis
        return tuple(slice(si, si + n - 1) for si in s)

    def _edge_slices(self, s, d):
        n = self.grid.nodes_per_axis
        hi = [slice(si, si + n - 1) for si in s]
        lo = list(hi)
        hi[d] = slice(1, n)
        lo[d] = slice(0, n - 1)
        return tuple(hi), tuple(lo)

    def at_corners(self, field: np.ndarray) -> np.ndarray:
        """Gather a nodal field to corner samples, shape ``(2^N, *cells)``."""
        field = np.asarray(field, dtype=float)
        return np.stack([field[self._corner_slice(s)] for s in self.orientations])

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Corner gradients, shape ``(2^N, dim, *cells)``."""
        u = np.asarray(values, dtype=float).reshape(self.grid.shape)
        out = []
        for s in self.orientations:
            comps = []
            for d in range(self.grid.dim):
                hi, lo = self._edge_slices(s, d)
                comps.append((u[hi] - u[lo]) / self._gaps[d])
            out.append(np.stack(comps))
        return np.stack(out)

    def adjoint(self, flux: np.ndarray) -> np.ndarray:
        """Transpose of :meth:`apply` acting on ``(2^N, dim, *cells)`` arrays."""
        r = np.zeros(self.grid.shape)
        for i, s in enumerate(self.orientations):
            for d in range(self.grid.dim):
                hi, lo = self._edge_slices(s, d)
                a = flux[i, d] / self._gaps[d]
                r[hi] += a
                r[lo] -= a
        return r

    def stiffness(self, coefficient: np.ndarray | None = None):
        """Sparse matrix of ``u -> adjoint(weights * coefficient * apply(u))``.

        ``coefficient`` has the corner-sample shape ``(2^N, *cells)``; ``None``
        means 1 (the discrete Dirichlet Laplacian).
        """
        import scipy.sparse as sp

        n, dim = self.grid.nodes_per_axis, self.grid.dim
        idx = np.arange(self.grid.size).reshape(self.grid.shape)
        coef = self.weights if coefficient is None else self.weights * coefficient
        rows, cols, vals = [], [], []
        for i, s in enumerate(self.orientations):
            for d in range(dim):
                hi, lo = self._edge_slices(s, d)
                c = (coef[i] / self._gaps[d] ** 2).ravel()
                a, b = idx[hi].ravel(), idx[lo].ravel()
                rows += [a, a, b, b]
                cols += [a, b, a, b]
                vals += [c, -c, -c, c]
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.grid.size, self.grid.size),
        )


def write_csv(path, grid: Grid, values: np.ndarray, name: str = "value") -> None:
    """One row per node in lexicographic index order: index, x1..xN, value."""
    vals = np.asarray(values, dtype=float).reshape(grid.shape).ravel()
    coords = grid.coords.reshape(grid.dim, -1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index"] + [f"x{d + 1}" for d in range(grid.dim)] + [name])
        for k in range(vals.size):
            w.writerow([k] + [repr(float(c)) for c in coords[:, k]] + [repr(float(vals[k]))])
