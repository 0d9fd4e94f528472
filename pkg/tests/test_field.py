import numpy as np
import pytest
from hypothesis import given, strategies as st

from anisoap.field import DegenerateFieldError, DiffusionSpec, FieldCase, split_parallel_perp

unit = st.floats(0.01, 0.99)


def test_uniform_fields():
    assert np.allclose(FieldCase("uniform2d").b([0.3, 0.7]), [1, 0])
    assert np.allclose(FieldCase("uniform3d").b([0.3, 0.7, 0.1]), [1, 0, 0])
    b, gb, divb = FieldCase("uniform3d").frame(np.random.default_rng(0).random((5, 3)))
    assert np.all(gb == 0) and np.all(divb == 0)


def test_variable_field_at_center():
    # B(0.5, 0.5) = (pi, -pi/2)
    f = FieldCase("variable2d")
    assert np.allclose(f.B([0.5, 0.5]), [np.pi, -np.pi / 2])
    assert np.allclose(f.b([0.5, 0.5]), np.array([2.0, -1.0]) / np.sqrt(5))


def test_variable_field_tangential_on_sides():
    f = FieldCase("variable2d", m=3)
    x = np.linspace(0, 1, 11)
    for y in (0.0, 1.0):
        pts = np.stack([x, np.full_like(x, y)], axis=-1)
        assert np.allclose(f.b(pts)[:, 1], 0.0, atol=1e-15)
        assert np.all(f.b(pts)[:, 0] > 0)


@given(x=unit, y=unit, m=st.integers(1, 12), alpha=st.floats(0.0, 3.0))
def test_grad_b_matches_finite_differences(x, y, m, alpha):
    f = FieldCase("variable2d", alpha, m)
    p = np.array([x, y])
    _, gb, divb = f.frame(p)
    d = 1e-5
    fd = np.empty((2, 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = d
        fd[:, j] = (f.b(p + e) - f.b(p - e)) / (2 * d)
    scale = 1 + np.abs(fd).max()
    assert np.allclose(gb, fd, atol=1e-6 * scale * m ** 2)
    assert np.isclose(divb, np.trace(fd), atol=1e-6 * scale * m ** 2)


@given(x=unit, y=unit)
def test_unit_length(x, y):
    assert np.isclose(np.linalg.norm(FieldCase("variable2d").b([x, y])), 1.0)


def test_degenerate_field_raises():
    # alpha = pi makes B vanish at the origin
    f = FieldCase("variable2d", alpha=np.pi)
    with pytest.raises(DegenerateFieldError):
        f.b([0.0, 0.0])
    with pytest.raises(DegenerateFieldError):
        f.frame(np.array([[0.0, 0.0]]))


def test_invalid_case_and_m():
    with pytest.raises(ValueError):
        FieldCase("spiral")
    with pytest.raises(ValueError):
        FieldCase("variable2d", m=0)


@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4))
def test_split_parallel_perp(vals):
    v = np.array(vals[:2])
    th = vals[2]
    b = np.array([np.cos(th), np.sin(th)])
    vpar, vperp = split_parallel_perp(b, v)
    assert np.allclose(vpar + vperp, v)
    assert abs(vperp @ b) < 1e-12 * (1 + np.abs(v).max())


def test_diffusion_defaults_and_bounds():
    x = np.random.default_rng(1).random((7, 2))
    d = DiffusionSpec()
    assert d.is_identity
    assert np.all(d.parallel(x) == 1) and d.perpendicular(x) is None
    assert d.spectral_bounds(x) == (1.0, 1.0)
    d = DiffusionSpec(a_par=lambda p: 2 + p[..., 0],
                      a_perp=lambda p: np.broadcast_to(np.diag([0.5, 3.0]), p.shape[:-1] + (2, 2)))
    lo, hi = d.spectral_bounds(x)
    assert lo == pytest.approx(0.5)
    assert hi == pytest.approx(3.0)
