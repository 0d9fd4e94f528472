"""Q2 reference element, Gauss quadrature and global assembly.

Everything is vectorized over elements: element data carry a leading axis
of length ``n_elements`` and quadrature points are tensorized with the x
index running fastest, like the local node numbering.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .field import DiffusionSpec, FieldCase
from .grid import Grid


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor 3-point Gauss-Legendre rule on [-1, 1]^dim."""

    points: np.ndarray   # (nq, dim)
    weights: np.ndarray  # (nq,)

    @classmethod
    def gauss3(cls, dim: int) -> "QuadratureRule":
        r = np.sqrt(3.0 / 5.0)
        p1 = np.array([-r, 0.0, r])
        w1 = np.array([5.0, 8.0, 5.0]) / 9.0
        pts, wts = [], []
        for idx in itertools.product(range(3), repeat=dim):
            idx = idx[::-1]  # x fastest
            pts.append([p1[i] for i in idx])
            wts.append(np.prod([w1[i] for i in idx]))
        return cls(np.array(pts), np.array(wts))

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.sum(self.weights * f(self.points)))


def q2_shape_1d(xi):
    """Values and derivatives of the three 1D Q2 functions at ``xi``.

    Node order is (-1, 0, 1); returns two arrays of shape ``xi.shape + (3,)``.
    """
    xi = np.asarray(xi, float)
    val = np.stack([0.5 * xi * (xi - 1.0), 1.0 - xi * xi, 0.5 * xi * (xi + 1.0)], axis=-1)
    der = np.stack([xi - 0.5, -2.0 * xi, xi + 0.5], axis=-1)
    return val, der


class ReferenceElement:
    """Tensor-product Q2 element on [-1, 1]^dim with 3**dim nodes."""

    def __init__(self, dim: int):
        self.dim = dim
        self.n_local = 3 ** dim
        # local node l <-> (a, b[, c]) with a fastest
        self.local_index = np.array(
            [idx[::-1] for idx in itertools.product(range(3), repeat=dim)])

    def shape(self, xi):
        """Shape values ``(..., nloc)`` and reference gradients ``(..., nloc, dim)``."""
        xi = np.asarray(xi, float)
        v1, d1 = zip(*(q2_shape_1d(xi[..., a]) for a in range(self.dim)))
        li = self.local_index
        vals = np.ones(xi.shape[:-1] + (self.n_local,))
        for a in range(self.dim):
            vals = vals * v1[a][..., li[:, a]]
        grads = np.empty(xi.shape[:-1] + (self.n_local, self.dim))
        for g in range(self.dim):
            t = np.ones_like(vals)
            for a in range(self.dim):
                t = t * (d1[a] if a == g else v1[a])[..., li[:, a]]
            grads[..., g] = t
        return vals, grads


@dataclass(frozen=True, eq=False)
class ElementData:
    """Quadrature-point data shared by all assembly routines of one grid."""

    grid: Grid
    quad: QuadratureRule
    ref: ReferenceElement
    x: np.ndarray       # (n_el, nq, dim) physical quadrature points
    phi: np.ndarray     # (nq, nloc)
    dphi: np.ndarray    # (nq, nloc, dim) physical gradients
    wdet: np.ndarray    # (nq,) weight times |J|


_ELEMENT_CACHE: dict[int, ElementData] = {}


def element_data(grid: Grid) -> ElementData:
    key = id(grid)
    cached = _ELEMENT_CACHE.get(key)
    if cached is not None and cached.grid is grid:
        return cached
    dim = grid.dim
    quad = QuadratureRule.gauss3(dim)
    ref = ReferenceElement(dim)
    h = np.array(grid.h)
    phi, dref = ref.shape(quad.points)
    dphi = dref / h  # element spans 2h, so dx/dxi = h
    x = grid.element_origins()[:, None, :] + h * (quad.points[None, :, :] + 1.0)
    data = ElementData(grid, quad, ref, x, phi, dphi, quad.weights * np.prod(h))
    if len(_ELEMENT_CACHE) > 8:
        _ELEMENT_CACHE.clear()
    _ELEMENT_CACHE[key] = data
    return data


def _scatter(grid: Grid, ke: np.ndarray) -> sp.csr_matrix:
    el = grid.elements
    nloc = el.shape[1]
    rows = np.repeat(el, nloc, axis=1).ravel()
    cols = np.tile(el, (1, nloc)).ravel()
    mat = sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(grid.n_nodes,) * 2).tocsr()
    mat.sum_duplicates()
    mat.eliminate_zeros()
    return mat


def assemble_bilinear(kind: str, grid: Grid, field: FieldCase | None = None,
                      diffusion: DiffusionSpec | None = None) -> sp.csr_matrix:
    """Assemble ``parallel``, ``perp`` or ``mass`` over all grid nodes.

    parallel: int A_par (b.grad u)(b.grad v)
    perp:     int (A_perp grad_perp u) . grad_perp v
    mass:     int u v
    """
    ed = element_data(grid)
    diffusion = diffusion or DiffusionSpec()
    if kind == "mass":
        ke = np.einsum("q,qa,qb->ab", ed.wdet, ed.phi, ed.phi)
        ke = np.broadcast_to(ke, (grid.n_elements,) + ke.shape)
        return _scatter(grid, ke)
    if field is None:
        raise ValueError(f"{kind} form needs a field")
    if field.dim != grid.dim:
        raise ValueError(f"field dimension {field.dim} does not match grid dimension {grid.dim}")
    b = field.b(ed.x)  # (ne, nq, d)
    bg = np.einsum("eqd,qad->eqa", b, ed.dphi)
    if kind == "parallel":
        w = ed.wdet * diffusion.parallel(ed.x)
        ke = np.einsum("eq,eqa,eqb->eab", w, bg, bg)
    elif kind == "perp":
        gperp = ed.dphi[None] - bg[..., None] * b[:, :, None, :]  # (ne, nq, nloc, d)
        aperp = diffusion.perpendicular(ed.x)
        if aperp is None:
            ke = np.einsum("q,eqad,eqbd->eab", ed.wdet, gperp, gperp)
        else:
            ke = np.einsum("q,eqij,eqaj,eqbi->eab", ed.wdet, aperp, gperp, gperp)
    else:
        raise ValueError(f"unknown bilinear form {kind!r}")
    return _scatter(grid, ke)


def assemble_load(grid: Grid, f: Callable[[np.ndarray], np.ndarray], scale: float = 1.0) -> np.ndarray:
    """Load vector ``scale * (f, theta_r)`` for every node ``r``."""
    ed = element_data(grid)
    fq = np.asarray(f(ed.x), float)
    bad = ~np.isfinite(fq)
    if np.any(bad):
        e, q = np.argwhere(bad)[0]
        raise FloatingPointError(f"non-finite source value at x={ed.x[e, q]}")
    fe = np.einsum("q,eq,qa->ea", ed.wdet, fq, ed.phi)
    out = np.zeros(grid.n_nodes)
    np.add.at(out, grid.elements.ravel(), fe.ravel())
    return scale * out


def mass_matrix_1d(n: int, length: float = 1.0) -> np.ndarray:
    """Dense 1D Q2 mass matrix on ``n`` intervals (n even)."""
    h = length / n
    r = np.sqrt(3.0 / 5.0)
    xi = np.array([-r, 0.0, r])
    w = np.array([5.0, 8.0, 5.0]) / 9.0
    v, _ = q2_shape_1d(xi)
    me = h * np.einsum("q,qa,qb->ab", w, v, v)
    m = np.zeros((n + 1, n + 1))
    for e in range(n // 2):
        s = slice(2 * e, 2 * e + 3)
        m[s, s] += me
    return m


def evaluate_at_quadrature(grid: Grid, coeffs: np.ndarray):
    """Values ``(n_el, nq)`` and gradients ``(n_el, nq, dim)`` of a nodal field."""
    ed = element_data(grid)
    ce = np.asarray(coeffs)[grid.elements]
    return ce @ ed.phi.T, np.einsum("ea,qad->eqd", ce, ed.dphi)


def evaluate(grid: Grid, coeffs: np.ndarray, points) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate a nodal Q2 field and its gradient at arbitrary points."""
    pts = np.atleast_2d(np.asarray(points, float))
    h = np.array(grid.h)
    ne = np.array(grid.spec.elements_per_axis)
    eidx = np.clip(np.floor(pts / (2 * h)).astype(int), 0, ne - 1)
    xi = pts / h - 2 * eidx - 1.0
    strides = np.concatenate([[1], np.cumprod(ne)[:-1]])
    el = eidx @ strides
    ref = ReferenceElement(grid.dim)
    vals, dref = ref.shape(xi)
    ce = np.asarray(coeffs)[grid.elements[el]]
    return np.sum(ce * vals, axis=-1), np.einsum("pa,pad->pd", ce, dref / h)


@dataclass(frozen=True)
class ErrorNorms:
    l2_abs: float
    h1_abs: float
    l2_rel: float
    h1_rel: float
    degenerate: bool = False  # zero computed-solution norm; relative values are nan


def error_norms(grid: Grid, coeffs: np.ndarray, exact) -> ErrorNorms:
    """L2 and full H1 errors of ``coeffs`` against ``exact(x) -> (u, grad u)``.

    Relative errors divide by the norm of the computed field.
    """
    ed = element_data(grid)
    uh, guh = evaluate_at_quadrature(grid, coeffs)
    u, gu = exact(ed.x)
    w = ed.wdet
    e0 = float(np.einsum("q,eq->", w, (uh - u) ** 2))
    e1 = float(np.einsum("q,eqd->", w, (guh - gu) ** 2))
    n0 = float(np.einsum("q,eq->", w, uh ** 2))
    n1 = float(np.einsum("q,eqd->", w, guh ** 2))
    l2, h1 = np.sqrt(e0), np.sqrt(e0 + e1)
    if n0 == 0.0:
        return ErrorNorms(l2, h1, np.nan, np.nan, True)
    return ErrorNorms(l2, h1, l2 / np.sqrt(n0), h1 / np.sqrt(n0 + n1))


def l2_norm(grid: Grid, coeffs: np.ndarray) -> float:
    uh, _ = evaluate_at_quadrature(grid, coeffs)
    return float(np.sqrt(np.einsum("q,eq->", element_data(grid).wdet, uh ** 2)))


def h1_norm(grid: Grid, coeffs: np.ndarray) -> float:
    uh, guh = evaluate_at_quadrature(grid, coeffs)
    w = element_data(grid).wdet
    return float(np.sqrt(np.einsum("q,eq->", w, uh ** 2) + np.einsum("q,eqd->", w, guh ** 2)))
