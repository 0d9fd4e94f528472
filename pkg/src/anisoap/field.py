"""Anisotropy direction fields and diffusion coefficients.

All evaluators are vectorized: points have shape ``(..., dim)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

CASE_IDS = ("uniform2d", "variable2d", "uniform3d")


class DegenerateFieldError(ValueError):
    pass


@dataclass(frozen=True)
class FieldCase:
    """Built-in field ``b = B/|B|``.

    ``uniform2d``  B = (1, 0)
    ``variable2d`` B = (alpha (2y-1) cos(m pi x) + pi, m pi alpha (y^2-y) sin(m pi x))
    ``uniform3d``  B = (1, 0, 0)
    """

    kind: str = "uniform2d"
    alpha: float = 2.0
    m: int = 1

    def __post_init__(self):
        if self.kind not in CASE_IDS:
            raise ValueError(f"unknown field case {self.kind!r}; expected one of {CASE_IDS}")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m}")

    @property
    def dim(self) -> int:
        return 3 if self.kind == "uniform3d" else 2

    def B(self, x) -> np.ndarray:
        return self._B_and_grad(np.asarray(x, float))[0]

    def _B_and_grad(self, x):
        shape = x.shape[:-1]
        d = self.dim
        if self.kind != "variable2d":
            B = np.zeros(shape + (d,))
            B[..., 0] = 1.0
            return B, np.zeros(shape + (d, d))
        a, m, pi = self.alpha, self.m, np.pi
        X, Y = x[..., 0], x[..., 1]
        c, s = np.cos(m * pi * X), np.sin(m * pi * X)
        B = np.stack([a * (2 * Y - 1) * c + pi, m * pi * a * (Y * Y - Y) * s], axis=-1)
        dB = np.empty(shape + (2, 2))
        dB[..., 0, 0] = -a * (2 * Y - 1) * m * pi * s
        dB[..., 0, 1] = 2 * a * c
        dB[..., 1, 0] = (m * pi) ** 2 * a * (Y * Y - Y) * c
        dB[..., 1, 1] = m * pi * a * (2 * Y - 1) * s
        return B, dB

    def b(self, x) -> np.ndarray:
        B, _ = self._B_and_grad(np.asarray(x, float))
        nrm = np.linalg.norm(B, axis=-1, keepdims=True)
        if np.any(nrm < 1e-14):
            raise DegenerateFieldError("|B| vanishes at an evaluation point")
        return B / nrm

    def frame(self, x):
        """Return ``(b, grad_b, div_b)`` with ``grad_b[..., i, j] = d b_i / d x_j``."""
        B, dB = self._B_and_grad(np.asarray(x, float))
        nrm = np.linalg.norm(B, axis=-1)
        if np.any(nrm < 1e-14):
            raise DegenerateFieldError("|B| vanishes at an evaluation point")
        b = B / nrm[..., None]
        # d(B/|B|) = (I - b b^T) dB / |B|
        proj = np.eye(self.dim) - b[..., :, None] * b[..., None, :]
        grad_b = np.einsum("...ik,...kj->...ij", proj, dB) / nrm[..., None, None]
        return b, grad_b, np.trace(grad_b, axis1=-2, axis2=-1)


def eval_field_frame(case: FieldCase, x):
    return case.frame(x)


def split_parallel_perp(b, v):
    """Split ``v`` into ``((v.b) b, v - (v.b) b)``."""
    b = np.asarray(b, float)
    v = np.asarray(v, float)
    vpar = np.sum(v * b, axis=-1, keepdims=True) * b
    return vpar, v - vpar


@dataclass(frozen=True)
class DiffusionSpec:
    """Parallel scalar and perpendicular matrix diffusion coefficients.

    ``None`` means the identity (A_par = 1, A_perp = Id), which every
    built-in experiment uses.
    """

    a_par: Callable[[np.ndarray], np.ndarray] | None = None
    a_perp: Callable[[np.ndarray], np.ndarray] | None = None

    @property
    def is_identity(self) -> bool:
        return self.a_par is None and self.a_perp is None

    def parallel(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        if self.a_par is None:
            return np.ones(x.shape[:-1])
        return np.broadcast_to(np.asarray(self.a_par(x), float), x.shape[:-1])

    def perpendicular(self, x) -> np.ndarray | None:
        x = np.asarray(x, float)
        if self.a_perp is None:
            return None
        d = x.shape[-1]
        return np.broadcast_to(np.asarray(self.a_perp(x), float), x.shape[:-1] + (d, d))

    def spectral_bounds(self, x) -> tuple[float, float]:
        """Smallest and largest of A_par and eig(A_perp) over the points ``x``."""
        ap = self.parallel(x)
        lo, hi = float(ap.min()), float(ap.max())
        aperp = self.perpendicular(x)
        if aperp is None:
            return min(lo, 1.0), max(hi, 1.0)
        ev = np.linalg.eigvalsh(0.5 * (aperp + np.swapaxes(aperp, -1, -2)))
        return min(lo, float(ev.min())), max(hi, float(ev.max()))
