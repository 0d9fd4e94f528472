"""Command-line entry point."""
from __future__ import annotations

import argparse
import math
import sys

from . import experiments as ex
from .field import CASE_IDS
from .fieldlines import audit_solution
from .grid import ConfigurationError


def _case(args) -> str:
    case = args.case
    if args.dim is not None:
        if args.dim == 3 and case == "uniform2d":
            case = "uniform3d"
        want = 3 if case == "uniform3d" else 2
        if args.dim != want:
            raise ConfigurationError(f"case {case} is {want}D but --dim {args.dim} was given")
    return case


def _common(p: argparse.ArgumentParser, n_default, eps_default, many: bool):
    nargs = "+" if many else None
    p.add_argument("--case", choices=CASE_IDS, default="uniform2d")
    p.add_argument("--dim", type=int, choices=(2, 3), default=None)
    p.add_argument("--model", nargs="+", default=["AP"], choices=ex.SOLVABLE_MODELS)
    p.add_argument("--n", type=int, nargs=nargs, default=n_default)
    p.add_argument("--eps", type=float, nargs=nargs, default=eps_default)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--m", type=int, nargs="+", default=[1])
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--out", default=None, help="write records to this file")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="anisoap",
                                 description="P, L and AP solvers for anisotropic elliptic problems")
    sub = ap.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("solve", help="one solve per model"), 100, 1e-6, many=False)
    _common(sub.add_parser("sweep-eps", help="error versus eps"), 100,
            [10, 1, 1e-1, 1e-4, 1e-6, 1e-10, 1e-15], many=True)
    _common(sub.add_parser("convergence", help="mesh refinement study"), [50, 100, 200], [1e-4],
            many=True)
    p = sub.add_parser("sweep-m", help="oscillation frequency sweep of the variable field")
    _common(p, [40, 80, 160, 320], [1e-10], many=True)
    p.set_defaults(case="variable2d", m=[10])
    p = sub.add_parser("appendix-b", help="ill-posed multiplier space demonstration")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--eps", type=float, default=1e-6)
    p = sub.add_parser("audit", help="field-line audit of an AP solution")
    p.add_argument("--case", choices=("uniform2d", "variable2d"), default="uniform2d")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--lines", type=int, default=20)
    return ap


def _print_records(records):
    print(f"{'case':>10} {'model':>5} {'N':>5} {'eps':>9} {'L2_abs':>10} {'H1_abs':>10} "
          f"{'L2_rel':>10} {'rows':>8} {'nnz':>9} {'pivot':>9}")
    for r in records:
        mark = "  (flagged)" if r.flagged else ""
        print(f"{r.case:>10} {r.model:>5} {r.N:>5} {r.eps:9.1e} {r.l2_abs:10.3e} {r.h1_abs:10.3e} "
              f"{r.l2_rel:10.3e} {r.rows:8d} {r.nnz:9d} {r.pivot_ratio:9.2e}{mark}")


def _run(args) -> int:
    case = _case(args)
    ns = args.n if isinstance(args.n, list) else [args.n]
    eps = args.eps if isinstance(args.eps, list) else [args.eps]
    cfg = ex.ExperimentConfig(case, tuple(args.model), tuple(ns), tuple(eps), tuple(args.m),
                              args.alpha, args.repeats)
    records = ex.run_experiment(cfg)
    _print_records(records)
    if args.command in ("convergence", "sweep-m") and len(ns) > 1:
        print("\nrates (L2, H1, relative L2, relative H1):")
        for r in ex.convergence_rates(records):
            print(f"  {r.model:>3} m={r.m} eps={r.eps:.1e} N {r.n_coarse}->{r.n_fine}: "
                  f"{r.l2_rate:.2f} {r.h1_rate:.2f} {r.l2_rel_rate:.2f} {r.h1_rel_rate:.2f}")
    if args.out:
        ex.emit_report(records, args.format, args.out)
    failed = [r for r in records if not math.isfinite(r.l2_abs)]
    for r in records:
        if r.flagged:
            print(f"warning: near-singular factorization for {r.model} N={r.N} eps={r.eps:g}",
                  file=sys.stderr)
    return 1 if failed else 0


def _appendix_b(args) -> int:
    rep = ex.appendix_b_demo(args.n, args.eps)
    print(f"kernel candidates: {rep.n_kernel} (rank {rep.rank})")
    print(f"max scaled residual, ill-posed system: {rep.illposed_residuals.max():.3e}")
    print(f"min scaled residual, corrected system: {rep.corrected_residuals.min():.3e}")
    state = "singular" if rep.illposed_singular else f"{rep.illposed_pivot_ratio:.3e}"
    print(f"pivot ratio ill-posed: {state}; corrected: {rep.corrected_pivot_ratio:.3e}")
    ok = (rep.rank == rep.n_kernel == 2 * args.n and rep.illposed_residuals.max() <= 1e-10
          and rep.corrected_pivot_ratio > 1e-8)
    return 0 if ok else 1


def _audit(args) -> int:
    res = ex.run_single(args.case, "AP", args.n, args.eps, args.m, args.alpha)
    if res.solution is None:
        print("solve failed", file=sys.stderr)
        return 1
    rep = audit_solution(res.grid, res.solution, res.case.field, args.lines)
    print(f"lines: {rep.n_lines}")
    print(f"max p_h oscillation along lines: {rep.p_oscillation:.3e}")
    print(f"max |line average of q_h|: {rep.q_line_average:.3e} (|q_h| = {rep.q_l2:.3e})")
    print(f"Poincare-Wirtinger constant estimate: {rep.pw_constant:.4f}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "appendix-b":
            return _appendix_b(args)
        if args.command == "audit":
            return _audit(args)
        return _run(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
