"""Experiment runner: solve sweeps, error records, rates and report files."""
from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fem, linalg
from .cases import CaseDef, get_case
from .field import CASE_IDS
from .formulations import (ApSolution, BlockSystem, assemble_operators, build_illposed_variant,
                           build_system, construct_kernel, extract_solution)
from .grid import ConfigurationError, Grid, GridSpec, build_grid

SOLVABLE_MODELS = ("P", "L", "AP")

CSV_FIELDS = ("case", "model", "dim", "N", "eps", "m", "l2_abs", "h1_abs", "l2_rel", "h1_rel",
              "rows", "nnz", "factor_s", "solve_s", "pivot_ratio", "l_norm", "lambda_par_norm")
_INT_FIELDS = {"dim", "N", "m", "rows", "nnz"}
_STR_FIELDS = {"case", "model"}


@dataclass(frozen=True)
class ExperimentConfig:
    case: str = "uniform2d"
    models: tuple[str, ...] = ("AP",)
    ns: tuple[int, ...] = (100,)
    eps: tuple[float, ...] = (1e-6,)
    ms: tuple[int, ...] = (1,)
    alpha: float = 2.0
    repeats: int = 1

    def __post_init__(self):
        if self.case not in CASE_IDS:
            raise ConfigurationError(f"unknown case {self.case!r}; expected one of {CASE_IDS}")
        for name in ("models", "ns", "eps", "ms"):
            if len(getattr(self, name)) == 0:
                raise ConfigurationError(f"{name} must not be empty")
        bad = [m for m in self.models if m not in SOLVABLE_MODELS]
        if bad:
            raise ConfigurationError(f"unknown model(s) {bad}; expected a subset of {SOLVABLE_MODELS}")
        if self.repeats < 1:
            raise ConfigurationError("repeats must be >= 1")


@dataclass(frozen=True)
class ErrorRecord:
    case: str
    model: str
    dim: int
    N: int
    eps: float
    m: int
    l2_abs: float
    h1_abs: float
    l2_rel: float
    h1_rel: float
    rows: int
    nnz: int
    factor_s: float
    solve_s: float
    pivot_ratio: float
    l_norm: float = math.nan
    lambda_par_norm: float = math.nan

    @property
    def flagged(self) -> bool:
        """Near-singular factorization or non-finite errors."""
        return (not self.pivot_ratio > linalg.SINGULAR_PIVOT_RATIO
                or not (math.isfinite(self.l2_abs) and math.isfinite(self.h1_abs)))

    def key(self):
        return (self.case, self.model, self.dim, self.N, self.eps, self.m)


@dataclass(eq=False)
class RunResult:
    record: ErrorRecord
    grid: Grid
    case: CaseDef
    system: BlockSystem
    solution: ApSolution | None
    residual: float = math.nan
    singular: bool = False


def factor_and_solve(system: BlockSystem, repeats: int = 1):
    """Factorize with a nested-dissection ordering and solve.

    Returns ``(raw, factor_s, solve_s, pivot_ratio, residual, singular)``.
    ``raw`` is None when no factors could be computed. Near-singular
    factors are still used for the solve so the degraded answer can be
    measured.
    """
    perm = system.ordering()
    t_fac, t_sol = [], []
    raw, ratio, residual, singular = None, 0.0, math.nan, False
    for _ in range(repeats):
        try:
            fac = linalg.factorize(system.matrix, perm=perm)
        except linalg.SingularMatrixError as exc:
            singular = True
            fac = exc.factorization
            ratio = exc.report.pivot_ratio
            if fac is None:
                return None, math.nan, math.nan, ratio, math.nan, True
        else:
            ratio = fac.pivot_ratio
        t_fac.append(fac.seconds)
        res = linalg.solve(fac, system.rhs)
        del fac
        t_sol.append(res.seconds)
        raw, residual = res.x, res.residual
    return raw, float(np.mean(t_fac)), float(np.mean(t_sol)), ratio, residual, singular


def run_single(case: str, model: str, n: int, eps: float, m: int = 1, alpha: float = 2.0,
               repeats: int = 1) -> RunResult:
    """Build, solve and measure one (case, model, N, eps, m) configuration."""
    cd = get_case(case, eps, alpha, m)
    grid = build_grid(GridSpec(cd.dim, n))
    system = build_system(model, grid, cd.field, None if model == "L" else eps, cd.forcing)
    raw, fs, ss, ratio, resid, singular = factor_and_solve(system, repeats)
    nan = math.nan
    if raw is None or not np.all(np.isfinite(raw)):
        rec = ErrorRecord(case, model, cd.dim, n, float(eps), m, nan, nan, nan, nan,
                          system.rows, system.nnz, fs, ss, ratio)
        return RunResult(rec, grid, cd, system, None, resid, True)
    sol = extract_solution(system, raw)
    err = fem.error_norms(grid, sol.phi, cd.exact)
    rec = ErrorRecord(case, model, cd.dim, n, float(eps), m, err.l2_abs, err.h1_abs, err.l2_rel,
                      err.h1_rel, system.rows, system.nnz, fs, ss, ratio, sol.l_norm,
                      sol.lambda_par_norm)
    return RunResult(rec, grid, cd, system, sol, resid, singular)


def run_experiment(config: ExperimentConfig) -> list[ErrorRecord]:
    """Run every (model, N, eps, m) tuple of ``config``; singular runs are flagged, not fatal."""
    records = []
    for m in config.ms:
        for n in config.ns:
            for eps in config.eps:
                for model in config.models:
                    r = run_single(config.case, model, n, eps, m, config.alpha, config.repeats)
                    records.append(r.record)
    return sorted(records, key=ErrorRecord.key)


@dataclass(frozen=True)
class RateRecord:
    case: str
    model: str
    eps: float
    m: int
    n_coarse: int
    n_fine: int
    l2_rate: float
    h1_rate: float
    l2_rel_rate: float
    h1_rel_rate: float
    degenerate: bool = False


def _rate(e_coarse: float, e_fine: float, ratio: float) -> float:
    if not (e_coarse > 0 and e_fine > 0 and math.isfinite(e_coarse) and math.isfinite(e_fine)):
        return math.nan
    return math.log(e_coarse / e_fine) / math.log(ratio)


def convergence_rates(records) -> list[RateRecord]:
    """Observed orders between consecutive grids of each (case, model, eps, m) group.

    The finer grid must refine the coarser one (N_fine a multiple of
    N_coarse); a zero or non-finite error gives a nan rate and sets
    ``degenerate``.
    """
    groups: dict[tuple, list[ErrorRecord]] = {}
    for r in records:
        groups.setdefault((r.case, r.model, r.eps, r.m, r.dim), []).append(r)
    out = []
    for (case, model, eps, m, _), recs in sorted(groups.items()):
        recs = sorted(recs, key=lambda r: r.N)
        for a, b in zip(recs, recs[1:]):
            if b.N == a.N or b.N % a.N:
                raise ConfigurationError(f"grids N={a.N} and N={b.N} are not nested")
            q = b.N / a.N
            rates = [_rate(getattr(a, f), getattr(b, f), q)
                     for f in ("l2_abs", "h1_abs", "l2_rel", "h1_rel")]
            out.append(RateRecord(case, model, eps, m, a.N, b.N, *rates,
                                  degenerate=any(math.isnan(x) for x in rates)))
    return out


@dataclass(frozen=True)
class KernelDemoReport:
    n: int
    n_kernel: int
    rank: int
    illposed_residuals: np.ndarray
    corrected_residuals: np.ndarray
    illposed_pivot_ratio: float
    illposed_singular: bool
    corrected_pivot_ratio: float


def _scaled_residual(A, v) -> float:
    anorm = abs(A).sum(axis=1).max()
    return float(np.max(np.abs(A @ v)) / (np.max(np.abs(v)) * anorm))


def appendix_b_demo(n: int = 8, eps: float = 1e-6) -> KernelDemoReport:
    """Compare the two multiplier spaces on the aligned-field unit square."""
    cd = get_case("uniform2d", eps)
    grid = build_grid(GridSpec(2, n))
    ops = assemble_operators(grid, cd.field)
    bad = build_illposed_variant(grid, cd.field, eps, cd.forcing, ops=ops)
    good = build_system("AP", grid, cd.field, eps, cd.forcing, ops=ops)
    ny = grid.spec.n[1]
    kernels = [construct_kernel(grid, k, side) for side in ("low", "high")
               for k in range(1, grid.spec.n[0] + 1)]
    rank = int(np.linalg.matrix_rank(np.array(kernels)))
    res_bad, res_good = [], []
    nb = grid.n_nodes
    for lam in kernels:
        v = np.zeros(5 * nb)
        v[nb:2 * nb] = lam
        res_bad.append(_scaled_residual(bad.matrix, v))
        res_good.append(_scaled_residual(good.matrix, v))
    rb = linalg.factorize(bad.matrix, perm=bad.ordering(), raise_on_singular=False)
    rg = linalg.factorize(good.matrix, perm=good.ordering(), raise_on_singular=False)
    bad_ratio = rb.pivot_ratio
    bad_singular = isinstance(rb, linalg.SingularityReport)
    good_ratio = rg.pivot_ratio
    assert len(kernels) == 2 * ny
    return KernelDemoReport(n, len(kernels), rank, np.array(res_bad), np.array(res_good),
                           bad_ratio, bad_singular, good_ratio)


def _fmt(name: str, value) -> str:
    if name in _STR_FIELDS:
        return str(value)
    if name in _INT_FIELDS:
        return str(int(value))
    return f"{float(value):.17e}"


def _parse(name: str, text: str):
    if name in _STR_FIELDS:
        return text
    if name in _INT_FIELDS:
        return int(text)
    return float(text)


def emit_report(records, fmt: str, path) -> Path:
    """Write records (sorted by key) as CSV or JSON."""
    records = sorted(records, key=ErrorRecord.key)
    if not records:
        raise ValueError("no records to emit")
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    path = Path(path)
    if fmt == "csv":
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_FIELDS)
            for r in records:
                w.writerow([_fmt(f, getattr(r, f)) for f in CSV_FIELDS])
    else:
        rows = []
        for r in records:
            d = {f: _fmt(f, getattr(r, f)) if f not in _STR_FIELDS | _INT_FIELDS else getattr(r, f)
                 for f in CSV_FIELDS}
            d["flagged"] = r.flagged
            rows.append(d)
        path.write_text(json.dumps(rows, indent=1) + "\n")
    return path


def read_report(path) -> list[ErrorRecord]:
    """Parse a file written by :func:`emit_report`."""
    path = Path(path)
    text = path.read_text()
    if text.lstrip().startswith("["):
        rows = json.loads(text)
    else:
        rows = list(csv.DictReader(text.splitlines()))
    return [ErrorRecord(**{f: _parse(f, str(row[f])) for f in CSV_FIELDS}) for row in rows]


def record_dict(record: ErrorRecord) -> dict:
    return dataclasses.asdict(record)
