import numpy as np
import pytest
from hypothesis import given, strategies as st

from ksblowup.grid import ConfigError, Grid, build_grid, grading_map


@pytest.mark.parametrize("c", [1.0, 2.0, 3.0])
def test_grid_shape_and_symmetry(c):
    g = build_grid(64, c)
    assert g.nodes[0] == 0.0 and g.nodes[-1] == 1.0
    np.testing.assert_allclose(g.nodes + g.nodes[::-1], 1.0, atol=1e-15)
    assert np.all(g.h > 0)


def test_clustering_concentrates_at_ends():
    g = build_grid(128, 3.0)
    assert g.h[0] < g.h[64] / 100


@given(st.integers(16, 300), st.floats(1.0, 4.0))
def test_weights_exact_on_quadratics(n, c):
    g = build_grid(n, c)
    x = g.nodes
    U = 3 * x**2 - 2 * x + 0.5
    roundoff = 20 * np.finfo(float).eps / g.h_min**2
    np.testing.assert_allclose(g.d2_interior(U), 6.0, rtol=1e-9, atol=roundoff)
    np.testing.assert_allclose(g.d1(U), 6 * x - 2, atol=1e-9 + 20 * np.finfo(float).eps / g.h_min)


def test_d1_second_order():
    errs = []
    for n in (64, 128, 256):
        g = build_grid(n, 2.0)
        errs.append(np.max(np.abs(g.d1(np.sin(3 * g.nodes)) - 3 * np.cos(3 * g.nodes))))
    assert 3.5 < errs[0] / errs[1] < 4.5 and 3.5 < errs[1] / errs[2] < 4.5


def test_coarsen_indices_nested():
    f, c = build_grid(256), build_grid(128)
    np.testing.assert_allclose(f.nodes[f.coarsen(2)], c.nodes, atol=1e-15)
    with pytest.raises(ConfigError):
        build_grid(100).coarsen(3)


@pytest.mark.parametrize("bad", [
    dict(n=8), dict(n=64, clustering_exponent=0.5), dict(n=20.5),
])
def test_build_grid_rejects(bad):
    with pytest.raises(ConfigError):
        build_grid(**bad)


def test_grid_rejects_bad_nodes():
    with pytest.raises(ConfigError):
        Grid(3, np.array([0.0, 0.5, 0.4, 1.0]))
    with pytest.raises(ConfigError):
        Grid(2, np.array([0.1, 0.5, 1.0]))


def test_grading_map_identity():
    xi = np.linspace(0, 1, 11)
    np.testing.assert_array_equal(grading_map(xi, 1.0), xi)
