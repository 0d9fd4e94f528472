"""Cartesian Q2 grids, node numbering and boundary classification."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np


class ConfigurationError(ValueError):
    pass


class BoundaryTag(enum.IntEnum):
    INTERIOR = 0
    DIRICHLET = 1  # b.n == 0
    INFLOW = 2     # b.n < 0
    OUTFLOW = 3    # b.n > 0


@dataclass(frozen=True)
class GridSpec:
    """Tensor grid on an axis-aligned box.

    ``n`` holds the number of intervals per axis. A scalar is broadcast
    to every axis. Each Q2 element covers two intervals per axis.
    """

    dim: int = 2
    n: int | Sequence[int] = 4
    extent: Sequence[float] | None = None

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ConfigurationError(f"dim must be 2 or 3, got {self.dim}")
        n = self.n
        n = (int(n),) * self.dim if np.isscalar(n) else tuple(int(v) for v in n)
        if len(n) != self.dim:
            raise ConfigurationError(f"expected {self.dim} interval counts, got {n}")
        for v in n:
            if v < 2 or v % 2:
                raise ConfigurationError(f"interval counts must be even and >= 2, got {n}")
        ext = (1.0,) * self.dim if self.extent is None else tuple(float(e) for e in self.extent)
        if len(ext) != self.dim or min(ext) <= 0:
            raise ConfigurationError(f"bad extent {ext}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "extent", ext)

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(e / n for e, n in zip(self.extent, self.n))

    @property
    def nodes_per_axis(self) -> tuple[int, ...]:
        return tuple(n + 1 for n in self.n)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.nodes_per_axis))

    @property
    def elements_per_axis(self) -> tuple[int, ...]:
        return tuple(n // 2 for n in self.n)

    @property
    def n_elements(self) -> int:
        return int(np.prod(self.elements_per_axis))


@dataclass(frozen=True, eq=False)
class Grid:
    """Node coordinates and Q2 connectivity for a :class:`GridSpec`.

    Node ``(i, j[, k])`` has index ``i + j*(Nx+1) [+ k*(Nx+1)*(Ny+1)]``.
    ``elements[e]`` lists the 3**dim node indices of element ``e`` with the
    local x index running fastest.
    """

    spec: GridSpec
    axes: tuple[np.ndarray, ...] = field(init=False)
    elements: np.ndarray = field(init=False)

    def __post_init__(self):
        spec = self.spec
        axes = tuple(np.arange(n + 1) * h for n, h in zip(spec.n, spec.h))
        for ax, e in zip(axes, spec.extent):
            ax[-1] = e
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "elements", self._connectivity())

    @property
    def dim(self) -> int:
        return self.spec.dim

    @property
    def n_nodes(self) -> int:
        return self.spec.n_nodes

    @property
    def n_elements(self) -> int:
        return self.spec.n_elements

    @property
    def h(self) -> tuple[float, ...]:
        return self.spec.h

    def node_index(self, *ijk) -> np.ndarray:
        strides = self._strides()
        return sum(np.asarray(v) * s for v, s in zip(ijk, strides))

    def _strides(self) -> tuple[int, ...]:
        npa = self.spec.nodes_per_axis
        return tuple(int(np.prod(npa[:a])) for a in range(self.dim))

    def node_multi_index(self) -> np.ndarray:
        """Integer (i, j[, k]) of every node, shape (n_nodes, dim)."""
        npa = self.spec.nodes_per_axis
        grids = np.meshgrid(*[np.arange(n) for n in npa], indexing="ij")
        return np.stack([g.ravel(order="F") for g in grids], axis=-1)

    @cached_property
    def coords(self) -> np.ndarray:
        idx = self.node_multi_index()
        return np.stack([self.axes[a][idx[:, a]] for a in range(self.dim)], axis=-1)

    def element_origins(self) -> np.ndarray:
        """Lower-left (lower-front) corner of each element, shape (n_el, dim)."""
        epa = self.spec.elements_per_axis
        grids = np.meshgrid(*[np.arange(n) for n in epa], indexing="ij")
        eidx = np.stack([g.ravel(order="F") for g in grids], axis=-1)
        return np.stack([self.axes[a][2 * eidx[:, a]] for a in range(self.dim)], axis=-1)

    def _connectivity(self) -> np.ndarray:
        dim = self.dim
        epa = self.spec.elements_per_axis
        strides = self._strides()
        grids = np.meshgrid(*[np.arange(n) for n in epa], indexing="ij")
        eidx = np.stack([g.ravel(order="F") for g in grids], axis=-1)
        base = (2 * eidx) @ np.array(strides)
        local = np.meshgrid(*[np.arange(3)] * dim, indexing="ij")
        loc = np.stack([g.ravel(order="F") for g in local], axis=-1) @ np.array(strides)
        return base[:, None] + loc[None, :]

    def boundary_faces(self):
        """Yield ``(axis, side, outward_normal, node_indices)`` per face."""
        idx = self.node_multi_index()
        for a in range(self.dim):
            for side, val in ((0, 0), (1, self.spec.n[a])):
                n = np.zeros(self.dim)
                n[a] = -1.0 if side == 0 else 1.0
                yield a, side, n, np.flatnonzero(idx[:, a] == val)


def build_grid(spec: GridSpec) -> Grid:
    return Grid(spec)


@dataclass(frozen=True, eq=False)
class DofMap:
    """Grid plus per-node boundary tags and the free-DOF masks of both spaces.

    ``v_free`` selects nodes not on the tangential boundary (primal space);
    ``l_free`` additionally excludes inflow nodes (multiplier space).
    """

    grid: Grid
    tags: np.ndarray
    v_free: np.ndarray
    l_free: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.grid.n_nodes

    def count(self, tag: BoundaryTag) -> int:
        return int(np.count_nonzero(self.tags == tag))


def classify_boundary(grid: Grid, field, tol: float = 1e-12,
                      multiplier_constraints: str = "in+dirichlet") -> DofMap:
    """Tag boundary nodes by the sign of ``b.n`` on each face.

    A node on several faces is tagged DIRICHLET if any of its faces is
    tangential; otherwise the first non-tangential face decides, and faces
    that disagree raise.

    ``multiplier_constraints`` selects which nodes the multiplier space
    vanishes on: ``"in+dirichlet"`` (the well-posed choice) or ``"in"``
    (inflow only, which yields a singular saddle-point system).
    """
    tags = np.full(grid.n_nodes, BoundaryTag.INTERIOR, dtype=np.int8)
    is_dir = np.zeros(grid.n_nodes, bool)
    on_inflow = np.zeros(grid.n_nodes, bool)
    flow = np.zeros(grid.n_nodes, np.int8)  # 0 unset, else tag value
    coords = grid.coords
    for _, _, normal, nodes in grid.boundary_faces():
        b = field.b(coords[nodes])
        bn = b @ normal
        dmask = np.abs(bn) <= tol
        is_dir[nodes[dmask]] = True
        rest = nodes[~dmask]
        on_inflow[rest[bn[~dmask] < 0]] = True
        new = np.where(bn[~dmask] < 0, BoundaryTag.INFLOW, BoundaryTag.OUTFLOW).astype(np.int8)
        prev = flow[rest]
        clash = (prev != 0) & (prev != new) & ~is_dir[rest]
        flow[rest] = np.where(prev == 0, new, prev)
        if np.any(clash):
            # may still be resolved by a tangential face visited later
            flow[rest[clash]] = -1
    tags[flow > 0] = flow[flow > 0]
    tags[is_dir] = BoundaryTag.DIRICHLET
    bad = (flow == -1) & ~is_dir
    if np.any(bad):
        raise RuntimeError(f"inconsistent boundary tags at nodes {np.flatnonzero(bad)[:10]}")

    v_free = tags != BoundaryTag.DIRICHLET
    if multiplier_constraints == "in+dirichlet":
        l_free = v_free & (tags != BoundaryTag.INFLOW)
    elif multiplier_constraints == "in":
        # whole closed inflow face, corners included
        l_free = ~on_inflow
    else:
        raise ConfigurationError(f"unknown multiplier constraint set {multiplier_constraints!r}")
    return DofMap(grid, tags, v_free, l_free)


def nested_dissection(grid: Grid, leaf: int = 6) -> np.ndarray:
    """Fill-reducing node order by recursive bisection of the index box.

    Q2 elements span two intervals, so a single node plane at an even index
    decouples the two halves; separators are numbered after both halves.
    The result is deterministic.
    """
    shape = grid.spec.nodes_per_axis
    dim = len(shape)
    strides = np.array(grid._strides())
    out: list[np.ndarray] = []

    def box(lo, hi):
        g = np.meshgrid(*[np.arange(lo[d], hi[d]) for d in range(dim)], indexing="ij")
        return sum(gg.ravel(order="F") * strides[d] for d, gg in enumerate(g))

    def rec(lo, hi):
        ext = [hi[a] - lo[a] for a in range(dim)]
        a = int(np.argmax(ext))
        mid = (lo[a] + hi[a]) // 2
        mid += mid % 2
        if mid >= hi[a] - 1:
            mid -= 2
        if max(ext) <= leaf or mid <= lo[a]:
            out.append(box(lo, hi))
            return
        rec(lo, hi[:a] + [mid] + hi[a + 1:])
        rec(lo[:a] + [mid + 1] + lo[a + 1:], hi)
        out.append(box(lo[:a] + [mid] + lo[a + 1:], hi[:a] + [mid + 1] + hi[a + 1:]))

    rec([0] * dim, list(shape))
    return np.concatenate(out)
