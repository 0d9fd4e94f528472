"""Manufactured solutions ``phi = phi0 + eps * w`` with ``b . grad phi0 = 0``.

The source term is evaluated in the form

    f = -lap(phi) + (eps - 1) * G,   G = b.grad(b.grad w) + (b.grad w) div b

which is the anisotropic operator with A_par = 1, A_perp = Id after using
``grad_par . grad_par phi = eps * G``. No quantity that cancels numerically
is ever divided by eps, so f stays accurate down to eps = 1e-20 and below.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import CASE_IDS, FieldCase

PI = np.pi


def _w(x):
    """Fluctuation cos(2 pi x) sin(pi y) [sin(pi z)]: value, gradient, Hessian."""
    X, Y = x[..., 0], x[..., 1]
    cx, sx = np.cos(2 * PI * X), np.sin(2 * PI * X)
    cy, sy = np.cos(PI * Y), np.sin(PI * Y)
    d = x.shape[-1]
    if d == 3:
        cz, sz = np.cos(PI * x[..., 2]), np.sin(PI * x[..., 2])
    else:
        cz, sz = np.zeros_like(X), np.ones_like(X)
    val = cx * sy * sz
    g = np.empty(x.shape)
    g[..., 0] = -2 * PI * sx * sy * sz
    g[..., 1] = PI * cx * cy * sz
    H = np.empty(x.shape + (d,))
    H[..., 0, 0] = -4 * PI ** 2 * val
    H[..., 1, 1] = -PI ** 2 * val
    H[..., 0, 1] = H[..., 1, 0] = -2 * PI ** 2 * sx * cy * sz
    if d == 3:
        g[..., 2] = PI * cx * sy * cz
        H[..., 2, 2] = -PI ** 2 * val
        H[..., 0, 2] = H[..., 2, 0] = -2 * PI ** 2 * sx * sy * cz
        H[..., 1, 2] = H[..., 2, 1] = PI ** 2 * cx * cy * cz
    return val, g, H


def _phi0(x, kind, alpha, m):
    X, Y = x[..., 0], x[..., 1]
    d = x.shape[-1]
    g = np.zeros(x.shape)
    H = np.zeros(x.shape + (d,))
    if kind == "uniform2d":
        val = np.sin(PI * Y)
        g[..., 1] = PI * np.cos(PI * Y)
        H[..., 1, 1] = -PI ** 2 * val
    elif kind == "uniform3d":
        Z = x[..., 2]
        sy, cy, sz, cz = np.sin(PI * Y), np.cos(PI * Y), np.sin(PI * Z), np.cos(PI * Z)
        val = sy * sz
        g[..., 1] = PI * cy * sz
        g[..., 2] = PI * sy * cz
        H[..., 1, 1] = H[..., 2, 2] = -PI ** 2 * val
        H[..., 1, 2] = H[..., 2, 1] = PI ** 2 * cy * cz
    else:
        # sin(s), s = pi y + alpha (y^2 - y) cos(m pi x)
        k = m * PI
        c, sn = np.cos(k * X), np.sin(k * X)
        q = Y * Y - Y
        s = PI * Y + alpha * q * c
        sx = -alpha * q * k * sn
        sy = PI + alpha * (2 * Y - 1) * c
        sxx = -alpha * q * k * k * c
        sxy = -alpha * (2 * Y - 1) * k * sn
        syy = 2 * alpha * c
        S, C = np.sin(s), np.cos(s)
        val = S
        g[..., 0] = C * sx
        g[..., 1] = C * sy
        H[..., 0, 0] = C * sxx - S * sx * sx
        H[..., 1, 1] = C * syy - S * sy * sy
        H[..., 0, 1] = H[..., 1, 0] = C * sxy - S * sx * sy
    return val, g, H


@dataclass(frozen=True)
class CaseDef:
    """Closed-form test case for a given eps.

    ``p``/``q`` (the field-line mean and fluctuation) are closed form only
    for the uniform cases, where they are ``phi0`` and ``eps * w``.
    """

    kind: str
    eps: float
    alpha: float = 2.0
    m: int = 1

    def __post_init__(self):
        if self.kind not in CASE_IDS:
            raise ValueError(f"unknown case {self.kind!r}; expected one of {CASE_IDS}")

    @property
    def field(self) -> FieldCase:
        return FieldCase(self.kind, self.alpha, self.m)

    @property
    def dim(self) -> int:
        return self.field.dim

    def phi0(self, x) -> np.ndarray:
        return _phi0(np.asarray(x, float), self.kind, self.alpha, self.m)[0]

    def grad_phi0(self, x) -> np.ndarray:
        return _phi0(np.asarray(x, float), self.kind, self.alpha, self.m)[1]

    def w(self, x) -> np.ndarray:
        return _w(np.asarray(x, float))[0]

    def phi(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        return self.phi0(x) + self.eps * self.w(x)

    def grad_phi(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        return self.grad_phi0(x) + self.eps * _w(x)[1]

    def exact(self, x):
        """``(phi, grad phi)`` for error norms."""
        x = np.asarray(x, float)
        p0, g0, _ = _phi0(x, self.kind, self.alpha, self.m)
        w, gw, _ = _w(x)
        return p0 + self.eps * w, g0 + self.eps * gw

    def p(self, x):
        if self.kind == "variable2d":
            return None
        return self.phi0(x)

    def q(self, x):
        if self.kind == "variable2d":
            return None
        return self.eps * self.w(x)

    def parallel_second(self, x) -> np.ndarray:
        """G = b.grad(b.grad w) + (b.grad w) div b."""
        x = np.asarray(x, float)
        b, gb, divb = self.field.frame(x)
        _, gw, Hw = _w(x)
        bgw = np.sum(b * gw, axis=-1)
        bHb = np.einsum("...i,...ij,...j->...", b, Hw, b)
        # b_j d_j(b_i) d_i w
        conv = np.einsum("...ij,...j,...i->...", gb, b, gw)
        return bHb + conv + bgw * divb

    def forcing(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        _, _, H0 = _phi0(x, self.kind, self.alpha, self.m)
        _, _, Hw = _w(x)
        lap = np.trace(H0, axis1=-2, axis2=-1) + self.eps * np.trace(Hw, axis1=-2, axis2=-1)
        return -lap + (self.eps - 1.0) * self.parallel_second(x)

    def normal_flux(self, x, n) -> np.ndarray:
        """``n . A grad phi`` with the 1/eps parallel part evaluated from w only."""
        x = np.asarray(x, float)
        b = self.field.b(x)
        _, gw, _ = _w(x)
        gphi = self.grad_phi(x)
        bn = np.sum(b * n, axis=-1)
        par = bn * np.sum(b * gw, axis=-1)  # (1/eps) (b.n)(b.grad phi)
        perp = np.sum(n * gphi, axis=-1) - bn * np.sum(b * gphi, axis=-1)
        return par + perp


def get_case(kind: str, eps: float, alpha: float = 2.0, m: int = 1) -> CaseDef:
    return CaseDef(kind, float(eps), float(alpha), int(m))


def eval_forcing(case: CaseDef, x) -> np.ndarray:
    return case.forcing(x)


def exact_gradient(case: CaseDef, x) -> np.ndarray:
    return case.grad_phi(x)
