"""Direct sparse LU factorization with pivot diagnostics.

Backed by SuperLU (``scipy.sparse.linalg.splu``). Without a caller-supplied
ordering the columns are ordered by COLAMD and rows chosen by partial
pivoting. With an ordering (a symmetric permutation, e.g. nested
dissection of the grid) the permuted matrix is factored in symmetric mode
with threshold pivoting that prefers the diagonal. Both paths are
deterministic.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

SINGULAR_PIVOT_RATIO = 1e-13


@dataclass(frozen=True)
class SingularityReport:
    pivot_index: int
    pivot_ratio: float
    message: str = ""


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised on a (near-)singular pivot.

    ``factorization`` holds the computed factors when SuperLU completed, so
    callers may still solve and inspect the (unreliable) result.
    """

    def __init__(self, report: SingularityReport, factorization=None):
        super().__init__(report.message or f"near-singular pivot at {report.pivot_index} "
                                            f"(ratio {report.pivot_ratio:.3e})")
        self.report = report
        self.factorization = factorization


@dataclass(eq=False)
class Factorization:
    lu: spla.SuperLU
    matrix: sp.csr_matrix
    perm: np.ndarray | None
    min_pivot: float
    max_pivot: float
    seconds: float

    @property
    def pivot_ratio(self) -> float:
        return self.min_pivot / self.max_pivot if self.max_pivot > 0 else 0.0

    @property
    def shape(self):
        return self.matrix.shape


def factorize(matrix, perm=None, threshold: float = SINGULAR_PIVOT_RATIO,
              raise_on_singular: bool = True, diag_pivot_thresh: float = 0.01):
    """LU-factorize a square sparse matrix.

    On a pivot smaller than ``threshold`` times the largest one, raises
    :class:`SingularMatrixError` (or returns the report when
    ``raise_on_singular`` is false).
    """
    Ar = sp.csr_matrix(matrix)
    if Ar.shape[0] != Ar.shape[1]:
        raise ValueError(f"matrix must be square, got {Ar.shape}")
    rownnz = np.diff(Ar.indptr)
    empty = np.flatnonzero(rownnz == 0)
    if empty.size:
        report = SingularityReport(int(empty[0]), 0.0, f"structurally zero row {empty[0]}")
        if raise_on_singular:
            raise SingularMatrixError(report)
        return report
    t0 = time.perf_counter()
    try:
        if perm is None:
            lu = spla.splu(Ar.tocsc(), permc_spec="COLAMD")
        else:
            perm = np.asarray(perm)
            lu = spla.splu(Ar[perm][:, perm].tocsc(), permc_spec="NATURAL",
                           diag_pivot_thresh=diag_pivot_thresh,
                           options=dict(SymmetricMode=True))
    except RuntimeError as exc:  # SuperLU: "Factor is exactly singular"
        report = SingularityReport(-1, 0.0, str(exc))
        if raise_on_singular:
            raise SingularMatrixError(report) from exc
        return report
    secs = time.perf_counter() - t0
    piv = np.abs(lu.U.diagonal())
    imin = int(np.argmin(piv))
    fac = Factorization(lu, Ar, perm, float(piv[imin]), float(piv.max()), secs)
    if fac.pivot_ratio <= threshold:
        col = int(perm[imin]) if perm is not None else int(np.argsort(lu.perm_c)[imin])
        report = SingularityReport(col, fac.pivot_ratio)
        if raise_on_singular:
            raise SingularMatrixError(report, fac)
        return report
    return fac


def matvec_residual(matrix, x, b) -> float:
    """Scaled residual ``|Ax - b|_inf / (|A|_inf |x|_inf + |b|_inf)``."""
    x = np.asarray(x, float)
    b = np.asarray(b, float)
    if matrix.shape[1] != x.shape[0] or matrix.shape[0] != b.shape[0]:
        raise ValueError(f"dimension mismatch: A{matrix.shape}, x{x.shape}, b{b.shape}")
    r = matrix @ x - b
    anorm = spla.norm(matrix, np.inf) if sp.issparse(matrix) else np.linalg.norm(matrix, np.inf)
    den = anorm * np.max(np.abs(x), initial=0.0) + np.max(np.abs(b), initial=0.0)
    if den == 0.0:
        return 0.0
    return float(np.max(np.abs(r), initial=0.0) / den)


@dataclass(frozen=True)
class SolveResult:
    x: np.ndarray
    residual: float
    seconds: float


def solve(fac: Factorization, rhs) -> SolveResult:
    rhs = np.asarray(rhs, float)
    if rhs.shape[0] != fac.shape[0]:
        raise ValueError(f"rhs length {rhs.shape[0]} does not match matrix size {fac.shape[0]}")
    t0 = time.perf_counter()
    if fac.perm is None:
        x = fac.lu.solve(rhs)
    else:
        x = np.empty_like(rhs)
        x[fac.perm] = fac.lu.solve(rhs[fac.perm])
    secs = time.perf_counter() - t0
    return SolveResult(x, matvec_residual(fac.matrix, x, rhs), secs)
