import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anisoap.field import FieldCase
from anisoap.grid import (BoundaryTag, ConfigurationError, GridSpec, build_grid, classify_boundary,
                          nested_dissection)


def test_node_counts():
    assert GridSpec(2, 100).n_nodes == 10201
    assert GridSpec(3, 20).n_nodes == 21 ** 3
    g = build_grid(GridSpec(2, (4, 6)))
    assert g.n_nodes == 5 * 7
    assert g.n_elements == 2 * 3


@pytest.mark.parametrize("n", [3, 0, (4, 5)])
def test_odd_or_tiny_counts_rejected(n):
    with pytest.raises(ConfigurationError):
        GridSpec(2, n)


def test_bad_dim_and_extent():
    with pytest.raises(ConfigurationError):
        GridSpec(4, 2)
    with pytest.raises(ConfigurationError):
        GridSpec(2, 2, extent=(1.0, -1.0))


@given(nx=st.integers(1, 5), ny=st.integers(1, 5))
def test_elements_are_3x3_patches(nx, ny):
    g = build_grid(GridSpec(2, (2 * nx, 2 * ny)))
    h = np.array(g.h)
    xy = g.coords[g.elements]  # (ne, 9, 2)
    span = xy.max(axis=1) - xy.min(axis=1)
    assert np.allclose(span, 2 * h)
    # local x runs fastest
    assert np.allclose(xy[:, 1, 0] - xy[:, 0, 0], h[0])
    assert np.allclose(xy[:, 3, 1] - xy[:, 0, 1], h[1])
    assert np.array_equal(np.unique(g.elements), np.arange(g.n_nodes))


def test_node_index_matches_coords():
    g = build_grid(GridSpec(3, (2, 4, 6), extent=(1.0, 2.0, 3.0)))
    idx = g.node_index(1, 3, 5)
    assert np.allclose(g.coords[idx], [0.5, 1.5, 2.5])


def test_uniform_field_tags():
    g = build_grid(GridSpec(2, 4))
    dm = classify_boundary(g, FieldCase("uniform2d"))
    x, y = g.coords.T
    side = (y == 0) | (y == 1)
    assert np.all(dm.tags[side] == BoundaryTag.DIRICHLET)
    assert np.all(dm.tags[(x == 0) & ~side] == BoundaryTag.INFLOW)
    assert np.all(dm.tags[(x == 1) & ~side] == BoundaryTag.OUTFLOW)
    assert dm.count(BoundaryTag.DIRICHLET) == 10
    assert dm.count(BoundaryTag.INFLOW) == dm.count(BoundaryTag.OUTFLOW) == 3
    assert dm.count(BoundaryTag.INTERIOR) == 9
    assert np.array_equal(dm.v_free, ~side)
    assert np.array_equal(dm.l_free, ~side & (x > 0))


def test_variable_field_tags_match_uniform():
    g = build_grid(GridSpec(2, 8))
    a = classify_boundary(g, FieldCase("uniform2d"))
    b = classify_boundary(g, FieldCase("variable2d"))
    assert np.array_equal(a.tags, b.tags)


def test_inflow_only_multiplier_mask_includes_corners():
    g = build_grid(GridSpec(2, 4))
    dm = classify_boundary(g, FieldCase("uniform2d"), multiplier_constraints="in")
    x = g.coords[:, 0]
    assert np.array_equal(dm.l_free, x > 0)
    with pytest.raises(ConfigurationError):
        classify_boundary(g, FieldCase("uniform2d"), multiplier_constraints="none")


def test_3d_tags():
    g = build_grid(GridSpec(3, 4))
    dm = classify_boundary(g, FieldCase("uniform3d"))
    x, y, z = g.coords.T
    side = (y == 0) | (y == 1) | (z == 0) | (z == 1)
    assert np.array_equal(dm.v_free, ~side)
    assert dm.count(BoundaryTag.INFLOW) == 9


@settings(max_examples=25)
@given(nx=st.integers(1, 12), ny=st.integers(1, 12), leaf=st.integers(3, 8))
def test_nested_dissection_is_permutation(nx, ny, leaf):
    g = build_grid(GridSpec(2, (2 * nx, 2 * ny)))
    p = nested_dissection(g, leaf)
    assert np.array_equal(np.sort(p), np.arange(g.n_nodes))
    assert np.array_equal(p, nested_dissection(g, leaf))


def test_nested_dissection_top_separator_decouples():
    g = build_grid(GridSpec(2, 16))
    p = nested_dissection(g, leaf=4)
    ij = g.node_multi_index()
    col = ij[p[-17:], 0]
    assert len(np.unique(col)) == 1 and col[0] % 2 == 0
    s = col[0]
    # no element couples nodes on both sides of the separator
    ex = ij[g.elements][:, :, 0]
    assert not np.any((ex.min(axis=1) < s) & (ex.max(axis=1) > s))
