"""Field-line coordinates used as an independent check of discrete solutions.

Lines start on the inflow face x = 0, parametrized by the remaining
coordinate(s), and are integrated with classical RK4 in arc length together
with the sensitivity ``V = dX/dseed`` (``V' = (grad b) V``). The weight of the
line-average projector is ``J = |det[V | b]|``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import simpson

from . import fem
from .field import FieldCase
from .grid import Grid


class TracingError(RuntimeError):
    pass


@dataclass(frozen=True)
class FieldLine:
    seed: np.ndarray   # inflow coordinates (dim - 1,)
    s: np.ndarray      # arc parameter (ns,)
    X: np.ndarray      # positions (ns, dim)
    V: np.ndarray      # sensitivities (ns, dim, dim - 1)
    J: np.ndarray      # Jacobian (ns,)

    @property
    def exit_point(self) -> np.ndarray:
        return self.X[-1]

    @property
    def length(self) -> float:
        return float(self.s[-1])


def _rhs(field: FieldCase, X, V):
    b, gb, _ = field.frame(X)
    return b, gb @ V


def _rk4(field, X, V, h):
    k1x, k1v = _rhs(field, X, V)
    k2x, k2v = _rhs(field, X + 0.5 * h * k1x, V + 0.5 * h * k1v)
    k3x, k3v = _rhs(field, X + 0.5 * h * k2x, V + 0.5 * h * k2v)
    k4x, k4v = _rhs(field, X + h * k3x, V + h * k3v)
    return (X + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x),
            V + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v))


def _inside(X, lo, hi):
    """Signed distance to the box boundary (positive inside)."""
    return float(min(np.min(X - lo), np.min(hi - X)))


def _jacobian(field, X, V):
    b = field.b(X)
    return abs(np.linalg.det(np.column_stack([V, b])))


def trace_line(field: FieldCase, seed, h_ode: float = 0.0025, tol: float = 1e-10,
               extent=None, budget: float = 100.0) -> FieldLine:
    """Trace the line through inflow point ``(0, *seed)`` until it leaves the box.

    The last step is shortened by bisection so the exit point sits on the
    boundary to within ``tol``. Raises :class:`TracingError` when the line
    has not left after ``budget * diam`` arc length.
    """
    d = field.dim
    seed = np.atleast_1d(np.asarray(seed, float))
    if seed.shape != (d - 1,):
        raise ValueError(f"seed must have {d - 1} coordinates")
    hi = np.ones(d) if extent is None else np.asarray(extent, float)
    lo = np.zeros(d)
    X = np.concatenate([[0.0], seed])
    if field.b(X)[0] <= 0:
        raise TracingError(f"seed {X} is not on the inflow boundary")
    V = np.vstack([np.zeros(d - 1), np.eye(d - 1)])
    max_len = budget * float(np.linalg.norm(hi - lo))
    ss, Xs, Vs = [0.0], [X], [V]
    s = 0.0
    while True:
        Xn, Vn = _rk4(field, X, V, h_ode)
        if _inside(Xn, lo, hi) >= 0.0:
            X, V, s = Xn, Vn, s + h_ode
            ss.append(s), Xs.append(X), Vs.append(V)
            if _inside(X, lo, hi) <= tol and s > 0:
                break
            if s > max_len:
                raise TracingError(f"line from seed {seed} did not exit within length {max_len}")
            continue
        a, b = 0.0, h_ode
        for _ in range(200):
            t = 0.5 * (a + b)
            Xt, Vt = _rk4(field, X, V, t)
            g = _inside(Xt, lo, hi)
            if 0.0 <= g <= tol:
                break
            if g > 0:
                a = t
            else:
                b = t
        else:
            raise TracingError("bisection onto the outflow boundary did not converge")
        ss.append(s + t), Xs.append(Xt), Vs.append(Vt)
        break
    Xa, Va = np.array(Xs), np.array(Vs)
    J = np.array([_jacobian(field, x, v) for x, v in zip(Xa, Va)])
    return FieldLine(seed, np.array(ss), Xa, Va, J)


def line_average(line: FieldLine, g: Callable[[np.ndarray], np.ndarray]) -> float:
    """``int g J ds / int J ds`` over the stored samples."""
    if line.s.size < 2:
        raise ValueError("field line has fewer than two samples")
    gv = np.asarray(g(line.X), float)
    return float(simpson(gv * line.J, x=line.s) / simpson(line.J, x=line.s))


def seeds(n_lines: int, dim: int = 2) -> np.ndarray:
    """Equispaced interior inflow coordinates (cell midpoints of [0, 1]^(dim-1))."""
    t = (np.arange(n_lines) + 0.5) / n_lines
    if dim == 2:
        return t[:, None]
    g = np.stack(np.meshgrid(t, t, indexing="ij"), axis=-1)
    return g.reshape(-1, 2)


@dataclass(frozen=True)
class AuditReport:
    n_lines: int
    p_oscillation: float        # max over lines of (max p_h - min p_h)
    q_line_average: float       # max over lines of |weighted average of q_h|
    q_l2: float
    pw_constant: float          # |q - Pq| / |grad_par q| along the lines
    lines: tuple[FieldLine, ...] = ()


def audit_solution(grid: Grid, solution, field: FieldCase, n_lines: int = 20,
                   h_ode: float | None = None, tol: float = 1e-10) -> AuditReport:
    """Check that p_h is constant along lines and q_h has zero line averages."""
    if h_ode is None:
        h_ode = min(grid.h) / 4
    p, q = solution["p"], solution["q"]
    lines = tuple(trace_line(field, sd, h_ode, tol, extent=grid.spec.extent)
                  for sd in seeds(n_lines, grid.dim))
    osc, qavg, num, den = 0.0, 0.0, 0.0, 0.0
    for ln in lines:
        pv, _ = fem.evaluate(grid, p, ln.X)
        qv, gq = fem.evaluate(grid, q, ln.X)
        osc = max(osc, float(pv.max() - pv.min()))
        wsum = simpson(ln.J, x=ln.s)
        avg = simpson(qv * ln.J, x=ln.s) / wsum
        qavg = max(qavg, abs(float(avg)))
        dpar = np.sum(field.b(ln.X) * gq, axis=-1)
        num += simpson((qv - avg) ** 2 * ln.J, x=ln.s)
        den += simpson(dpar ** 2 * ln.J, x=ln.s)
    pw = float(np.sqrt(num / den)) if den > 0 else float("nan")
    return AuditReport(n_lines, osc, qavg, fem.l2_norm(grid, q), pw, lines)


def refinement_slope(coarse: float, fine: float, ratio: float = 2.0) -> float:
    """Observed order ``log(coarse / fine) / log(ratio)``."""
    return float(np.log(coarse / fine) / np.log(ratio))
