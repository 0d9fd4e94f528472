"""Linear systems for the P, L and AP models.

Unknowns are stacked block by block; every block is a nodal vector over the
full grid. Constrained nodes are removed by zeroing their block row and
block column and writing a unit diagonal, which keeps the block layout
square and makes constrained coefficients exactly zero in the solution.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import fem
from .field import DiffusionSpec, FieldCase
from .grid import ConfigurationError, DofMap, Grid, classify_boundary, nested_dissection

MODELS = ("P", "L", "AP", "AP_illposed")

LAYOUTS = {
    "P": ("phi",),
    "L": ("phi", "lam"),
    "AP": ("p", "lam", "q", "l", "mu"),
    "AP_illposed": ("p", "lam", "q", "l", "mu"),
}
# which boundary mask constrains each unknown
_SPACE = {"phi": "V", "p": "V", "q": "V", "l": "V", "lam": "L", "mu": "L"}


@dataclass(frozen=True, eq=False)
class Operators:
    """Unconstrained parallel (A0), perpendicular (A1) and mass (C) matrices."""

    A0: sp.csr_matrix
    A1: sp.csr_matrix
    C: sp.csr_matrix


def assemble_operators(grid: Grid, field: FieldCase, diffusion: DiffusionSpec | None = None) -> Operators:
    return Operators(
        fem.assemble_bilinear("parallel", grid, field, diffusion),
        fem.assemble_bilinear("perp", grid, field, diffusion),
        fem.assemble_bilinear("mass", grid),
    )


@dataclass(eq=False)
class BlockSystem:
    kind: str
    matrix: sp.csr_matrix
    rhs: np.ndarray
    layout: tuple[str, ...]
    n_block: int
    eps: float | None
    dofmap: DofMap
    free: np.ndarray  # global mask of unconstrained rows
    ops: Operators = dc_field(repr=False)

    @property
    def offsets(self) -> dict[str, int]:
        return {name: k * self.n_block for k, name in enumerate(self.layout)}

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def nnz(self) -> int:
        return int(self.matrix.nnz)

    def block(self, vec: np.ndarray, name: str) -> np.ndarray:
        o = self.offsets[name]
        return vec[o:o + self.n_block]

    def ordering(self) -> np.ndarray:
        """Nested-dissection node order with the unknowns of a node kept adjacent."""
        nodes = nested_dissection(self.dofmap.grid)
        nb = len(self.layout)
        return (np.arange(nb)[None, :] * self.n_block + nodes[:, None]).ravel()


def _block_matrix(kind: str, ops: Operators, eps: float):
    A0, A1, C = ops.A0, ops.A1, ops.C
    if kind == "P":
        return [[A0 + eps * A1]]
    if kind == "L":
        return [[A1, A0], [A0, None]]
    return [
        [A1, A0, A1, None, None],
        [A0, None, None, None, None],
        [eps * A1, None, A0 + eps * A1, C, None],
        [None, None, C, None, A0],
        [None, None, None, A0, None],
    ]


def _block_rhs(kind: str, F: np.ndarray, eps: float) -> list[np.ndarray]:
    z = np.zeros_like(F)
    if kind == "P":
        return [eps * F]
    if kind == "L":
        return [F, z]
    return [F, z, eps * F, z, z]


def apply_constraints(matrix, rhs, free: np.ndarray):
    """Zero rows and columns of constrained DOFs, put 1 on their diagonal, zero their RHS."""
    free = np.asarray(free, bool)
    D = sp.diags(free.astype(float))
    out = (D @ sp.csr_matrix(matrix) @ D + sp.diags((~free).astype(float))).tocsr()
    out.eliminate_zeros()
    out.sort_indices()
    return out, np.where(free, rhs, 0.0)


def build_system(kind: str, grid: Grid, field: FieldCase, eps: float | None,
                 f: Callable[[np.ndarray], np.ndarray],
                 diffusion: DiffusionSpec | None = None,
                 dofmap: DofMap | None = None,
                 ops: Operators | None = None) -> BlockSystem:
    """Assemble and constrain the linear system of one model.

    ``eps`` must be positive for P and AP and is ignored for L.
    """
    if kind not in MODELS:
        raise ConfigurationError(f"unknown model {kind!r}; expected one of {MODELS}")
    if kind == "L":
        eps = None
    elif eps is None or not eps > 0:
        raise ConfigurationError(f"model {kind} requires eps > 0, got {eps}")
    if dofmap is None:
        mc = "in" if kind == "AP_illposed" else "in+dirichlet"
        dofmap = classify_boundary(grid, field, multiplier_constraints=mc)
    ops = ops or assemble_operators(grid, field, diffusion)
    e = 0.0 if eps is None else eps
    layout = LAYOUTS[kind]
    A = sp.bmat(_block_matrix(kind, ops, e), format="csr")
    F = fem.assemble_load(grid, f)
    rhs = np.concatenate(_block_rhs(kind, F, e))
    masks = {"V": dofmap.v_free, "L": dofmap.l_free}
    free = np.concatenate([masks[_SPACE[name]] for name in layout])
    A, rhs = apply_constraints(A, rhs, free)
    return BlockSystem(kind, A, rhs, layout, grid.n_nodes, eps, dofmap, free, ops)


def build_illposed_variant(grid: Grid, field: FieldCase, eps: float, f,
                           diffusion: DiffusionSpec | None = None,
                           ops: Operators | None = None) -> BlockSystem:
    """AP system whose multiplier space only vanishes on the inflow boundary."""
    dm = classify_boundary(grid, field, multiplier_constraints="in")
    return build_system("AP_illposed", grid, field, eps, f, diffusion, dofmap=dm, ops=ops)


@dataclass(eq=False)
class ApSolution:
    kind: str
    parts: dict[str, np.ndarray]
    l_norm: float = np.nan
    lambda_par_norm: float = np.nan

    @property
    def phi(self) -> np.ndarray:
        if "phi" in self.parts:
            return self.parts["phi"]
        return self.parts["p"] + self.parts["q"]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.parts[name]


def extract_solution(system: BlockSystem, raw: np.ndarray) -> ApSolution:
    raw = np.asarray(raw)
    if raw.shape[0] != system.rows:
        raise ValueError(f"solution length {raw.shape[0]} != system size {system.rows}")
    parts = {name: system.block(raw, name).copy() for name in system.layout}
    sol = ApSolution(system.kind, parts)
    if "l" in parts:
        l = parts["l"]
        sol.l_norm = float(np.sqrt(max(l @ (system.ops.C @ l), 0.0)))
    if "lam" in parts:
        lam = parts["lam"]
        # A0 carries A_par; equals |grad_par lam| for A_par = 1
        sol.lambda_par_norm = float(np.sqrt(max(lam @ (system.ops.A0 @ lam), 0.0)))
    return sol


def construct_kernel(grid: Grid, k: int, side: str = "low", along: int = 0) -> np.ndarray:
    """Multiplier in the null space of the parallel form against the primal space.

    For ``b`` along axis ``along`` (2D), returns ``sum_j a_j theta_k(x) theta_j(y)``
    where ``M a = e`` with ``M`` the 1D cross-field mass matrix and ``e`` the
    unit vector of the ``side`` boundary node. ``k`` runs over 1..N along
    the field so the result vanishes on the inflow face.
    """
    if grid.dim != 2:
        raise ValueError("kernel construction is implemented for 2D grids")
    cross = 1 - along
    n_along, n_cross = grid.spec.n[along], grid.spec.n[cross]
    if not 1 <= k <= n_along:
        raise ValueError(f"k must lie in 1..{n_along}, got {k}")
    M = fem.mass_matrix_1d(n_cross, grid.spec.extent[cross])
    e = np.zeros(n_cross + 1)
    e[0 if side == "low" else n_cross] = 1.0
    try:
        a = np.linalg.solve(M, e)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("1D mass matrix is singular") from exc
    lam = np.zeros(grid.n_nodes)
    idx = [None, None]
    idx[along] = np.full(n_cross + 1, k)
    idx[cross] = np.arange(n_cross + 1)
    lam[grid.node_index(*idx)] = a
    return lam


def kernel_residual(A0, v_free: np.ndarray, lam: np.ndarray) -> float:
    """``|A0[V rows] lam|_inf / (|lam|_inf |A0|_inf)``."""
    r = (A0 @ lam)[v_free]
    a = abs(A0).sum(axis=1).max()
    return float(np.max(np.abs(r)) / (np.max(np.abs(lam)) * a))
