import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from anisoap import fem
from anisoap.field import DiffusionSpec, FieldCase
from anisoap.grid import GridSpec, build_grid


def _lagrange_1d(n, length, kind, npts=8):
    """1D Q2 mass or stiffness assembled with a high-order Gauss rule."""
    xg, wg = np.polynomial.legendre.leggauss(npts)
    h = length / n
    nodes = np.array([-1.0, 0.0, 1.0])
    out = np.zeros((n + 1, n + 1))
    for e in range(n // 2):
        loc = np.zeros((3, 3))
        for a in range(3):
            pa = np.polynomial.Polynomial.fromroots(np.delete(nodes, a))
            pa = pa / pa(nodes[a])
            for b in range(3):
                pb = np.polynomial.Polynomial.fromroots(np.delete(nodes, b))
                pb = pb / pb(nodes[b])
                if kind == "mass":
                    loc[a, b] = h * np.sum(wg * pa(xg) * pb(xg))
                else:
                    loc[a, b] = np.sum(wg * pa.deriv()(xg) * pb.deriv()(xg)) / h
        out[2 * e:2 * e + 3, 2 * e:2 * e + 3] += loc
    return out


def test_shape_functions_interpolate():
    ref = fem.ReferenceElement(2)
    pts = np.array([[a, b] for b in (-1, 0, 1) for a in (-1, 0, 1)], float)
    vals, _ = ref.shape(pts)
    assert np.allclose(vals, np.eye(9))


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_partition_of_unity(a, b, c):
    vals, grads = fem.ReferenceElement(3).shape(np.array([a, b, c]))
    assert np.isclose(vals.sum(), 1.0)
    assert np.allclose(grads.sum(axis=0), 0.0, atol=1e-12)


@given(st.integers(0, 5), st.integers(0, 5))
def test_gauss3_exact_to_degree_five(p, q):
    rule = fem.QuadratureRule.gauss3(2)
    exact = np.prod([(1 - (-1) ** (k + 1)) / (k + 1) for k in (p, q)])
    assert np.isclose(rule.integrate(lambda x: x[:, 0] ** p * x[:, 1] ** q), exact, atol=1e-14)


def test_gauss3_not_exact_for_degree_six():
    rule = fem.QuadratureRule.gauss3(1)
    assert abs(rule.integrate(lambda x: x[:, 0] ** 6) - 2 / 7) > 1e-3


def test_mass_1d_matches_oracle():
    assert np.allclose(fem.mass_matrix_1d(6, 1.5), _lagrange_1d(6, 1.5, "mass"), atol=1e-15)


@pytest.mark.parametrize("nx,ny", [(4, 4), (6, 2), (8, 10)])
def test_uniform_field_operators_are_tensor_products(nx, ny):
    g = build_grid(GridSpec(2, (nx, ny)))
    f = FieldCase("uniform2d")
    Kx, Mx = _lagrange_1d(nx, 1.0, "stiff"), _lagrange_1d(nx, 1.0, "mass")
    Ky, My = _lagrange_1d(ny, 1.0, "stiff"), _lagrange_1d(ny, 1.0, "mass")
    A0 = fem.assemble_bilinear("parallel", g, f).toarray()
    A1 = fem.assemble_bilinear("perp", g, f).toarray()
    C = fem.assemble_bilinear("mass", g).toarray()
    assert np.allclose(A0, np.kron(My, Kx), atol=1e-12)
    assert np.allclose(A1, np.kron(Ky, Mx), atol=1e-12)
    assert np.allclose(C, np.kron(My, Mx), atol=1e-15)


def test_mass_total_is_volume():
    g = build_grid(GridSpec(3, (2, 4, 2), extent=(1.0, 2.0, 0.5)))
    assert np.isclose(fem.assemble_bilinear("mass", g).sum(), 1.0)


def test_parallel_plus_perp_is_laplacian():
    g = build_grid(GridSpec(2, 6))
    f = FieldCase("variable2d", m=2)
    A0 = fem.assemble_bilinear("parallel", g, f)
    A1 = fem.assemble_bilinear("perp", g, f)
    K = np.kron(_lagrange_1d(6, 1.0, "mass"), _lagrange_1d(6, 1.0, "stiff")) + \
        np.kron(_lagrange_1d(6, 1.0, "stiff"), _lagrange_1d(6, 1.0, "mass"))
    assert np.allclose((A0 + A1).toarray(), K, atol=1e-12)


def test_parallel_form_variable_field_against_dense_quadrature():
    g = build_grid(GridSpec(2, 16))
    f = FieldCase("variable2d")
    A0 = fem.assemble_bilinear("parallel", g, f)
    x, y = g.coords.T
    u = x ** 2 + x * y - y ** 2  # exactly representable
    xg, wg = np.polynomial.legendre.leggauss(400)
    X, Y = np.meshgrid(0.5 * (xg + 1), 0.5 * (xg + 1), indexing="ij")
    W = 0.25 * np.outer(wg, wg)
    b = f.b(np.stack([X, Y], -1))
    du = b[..., 0] * (2 * X + Y) + b[..., 1] * (X - 2 * Y)
    assert np.isclose(u @ A0 @ u, np.sum(W * du ** 2), rtol=1e-5)


def test_operators_symmetric_and_kill_constants():
    g = build_grid(GridSpec(2, 8))
    f = FieldCase("variable2d", m=3)
    for kind in ("parallel", "perp"):
        A = fem.assemble_bilinear(kind, g, f)
        assert abs(A - A.T).max() < 1e-13
        assert np.abs(A @ np.ones(g.n_nodes)).max() < 1e-12
        assert isinstance(A, sp.csr_matrix)


def test_anisotropic_perp_coefficient_scales():
    g = build_grid(GridSpec(2, 4))
    f = FieldCase("uniform2d")
    d = DiffusionSpec(a_perp=lambda p: np.broadcast_to(3.0 * np.eye(2), p.shape[:-1] + (2, 2)),
                      a_par=lambda p: 2.0 + 0 * p[..., 0])
    assert np.allclose(fem.assemble_bilinear("perp", g, f, d).toarray(),
                       3 * fem.assemble_bilinear("perp", g, f).toarray())
    assert np.allclose(fem.assemble_bilinear("parallel", g, f, d).toarray(),
                       2 * fem.assemble_bilinear("parallel", g, f).toarray())


def test_dimension_mismatch():
    g = build_grid(GridSpec(2, 4))
    with pytest.raises(ValueError):
        fem.assemble_bilinear("parallel", g, FieldCase("uniform3d"))
    with pytest.raises(ValueError):
        fem.assemble_bilinear("weird", g, FieldCase("uniform2d"))


def test_load_vector_against_exact_integrals():
    g = build_grid(GridSpec(2, 6))
    F = fem.assemble_load(g, lambda x: x[..., 0] * x[..., 1] ** 2)
    x, y = g.coords.T
    assert np.isclose(F.sum(), 1 / 6)
    assert np.isclose(F @ x, 1 / 9)  # int x^2 y^2


def test_load_rejects_non_finite():
    g = build_grid(GridSpec(2, 4))
    with pytest.raises(FloatingPointError), np.errstate(divide="ignore"):
        fem.assemble_load(g, lambda x: 1.0 / (x[..., 0] - x[..., 0]))


@settings(max_examples=30)
@given(st.lists(st.floats(-2, 2), min_size=6, max_size=6),
       st.lists(st.floats(0, 1), min_size=2, max_size=2))
def test_evaluate_reproduces_quadratics(c, pt):
    g = build_grid(GridSpec(2, (4, 6)))

    def u(p):
        x, y = p[..., 0], p[..., 1]
        return c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y

    vals, grads = fem.evaluate(g, u(g.coords), np.array([pt]))
    x, y = pt
    assert np.isclose(vals[0], u(np.array(pt)), atol=1e-12)
    assert np.allclose(grads[0], [c[1] + 2 * c[3] * x + c[4] * y, c[2] + c[4] * x + 2 * c[5] * y],
                       atol=1e-11)


def test_error_norms():
    g = build_grid(GridSpec(2, 4))
    x, y = g.coords.T

    def exact(p):
        X, Y = p[..., 0], p[..., 1]
        return X * Y, np.stack([Y, X], -1)

    e = fem.error_norms(g, x * y, exact)
    assert e.l2_abs < 1e-14 and e.h1_abs < 1e-14 and not e.degenerate
    e = fem.error_norms(g, np.zeros(g.n_nodes), exact)
    assert e.degenerate and np.isnan(e.l2_rel)
    assert np.isclose(e.l2_abs, 1 / 3)
    assert np.isclose(e.h1_abs, np.sqrt(1 / 9 + 2 / 3))
    assert np.isclose(fem.l2_norm(g, x * y), 1 / 3)
    assert np.isclose(fem.h1_norm(g, x * y), np.sqrt(1 / 9 + 2 / 3))
