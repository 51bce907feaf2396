import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adapted_theta.grid_interp import GridFunction, interpolate, interpolate_many, make_grid, stencil_start


def sample(grid, fn):
    return GridFunction(grid, fn(grid.nodes))


def test_make_grid_examples():
    g = make_grid(1.0, 0.5)
    assert g.nodes.tolist() == [-1.0, -0.5, 0.0, 0.5, 1.0]
    g = make_grid(1.0, 0.4)
    assert g.size == 7
    assert g.lo == pytest.approx(-1.2) and g.hi == pytest.approx(1.2)
    assert g.nodes[g.center] == 0.0
    np.testing.assert_array_equal(g.nodes, -g.nodes[::-1])


@pytest.mark.parametrize("hw, dx", [(1.0, 0.0), (0.0, 0.1), (1.0, -0.1), (1.0, np.inf)])
def test_make_grid_rejects_degenerate(hw, dx):
    with pytest.raises(ValueError):
        make_grid(hw, dx)


def test_make_grid_order_requirement():
    with pytest.raises(ValueError):
        make_grid(1.0, 0.5, order=5)
    assert make_grid(1.5, 0.5, order=5).size == 7


def test_gridfunction_validation():
    g = make_grid(1.0, 0.5)
    with pytest.raises(ValueError):
        GridFunction(g, np.zeros(4))
    with pytest.raises(ValueError):
        GridFunction(g, np.array([0, 1, np.nan, 0, 0.0]))


def test_node_values_exact():
    g = make_grid(2.0, 0.1)
    rng = np.random.default_rng(0)
    fn = GridFunction(g, rng.normal(size=g.size))
    for r in (1, 2, 5):
        out = interpolate(fn, g.nodes, r)
        np.testing.assert_array_equal(out, fn.values)


def test_cubic_reproduction():
    g = make_grid(2.0, 0.13)
    p = lambda x: x**3 - 2 * x + 1  # noqa: E731
    fn = sample(g, p)
    x = np.linspace(g.lo, g.hi, 301)
    for r in (3, 4, 5, 7):
        np.testing.assert_allclose(interpolate(fn, x, r), p(x), atol=1e-11)


def test_sine_accuracy():
    g = make_grid(3.0, 0.01)
    fn = sample(g, np.sin)
    assert abs(interpolate(fn, 0.005, 5) - np.sin(0.005)) < 1e-12


def test_scalar_in_scalar_out():
    g = make_grid(1.0, 0.1)
    assert isinstance(interpolate(sample(g, np.cos), 0.33), float)


def test_stencil_nearest_nodes_ties_left():
    g = make_grid(5.0, 1.0)
    # node index of x = 0 is 5; six nearest with a tie go left
    assert stencil_start(g, np.array(0.0), 5) == 2
    assert stencil_start(g, np.array(0.2), 5) == 3
    assert stencil_start(g, np.array(0.5), 4) == 3
    assert stencil_start(g, np.array(0.6), 4) == 4
    # boundary shift keeps all nodes in range
    assert stencil_start(g, np.array(-5.0), 5) == 0
    assert stencil_start(g, np.array(5.0), 5) == g.size - 6


def test_clamping():
    g = make_grid(1.0, 0.1)
    fn = sample(g, np.exp)
    assert interpolate(fn, 7.0) == interpolate(fn, g.hi)
    assert interpolate(fn, -3.0) == interpolate(fn, g.lo)


def test_locality():
    g = make_grid(2.0, 0.1)
    rng = np.random.default_rng(3)
    v = rng.normal(size=g.size)
    x = 0.234
    r = 5
    s = int(stencil_start(g, np.array(x), r))
    w = v.copy()
    outside = np.ones(g.size, bool)
    outside[s : s + r + 1] = False
    w[outside] += rng.normal(size=outside.sum())
    assert interpolate(GridFunction(g, v), x, r) == interpolate(GridFunction(g, w), x, r)


def test_interpolate_many_stacks():
    g = make_grid(1.0, 0.05)
    vals = np.stack([np.sin(g.nodes), np.cos(g.nodes)])
    x = np.array([[0.01, 0.2], [0.3, -0.77]])
    out = interpolate_many(g, vals, x, 5)
    assert out.shape == (2, 2, 2)
    np.testing.assert_array_equal(out[0], interpolate(GridFunction(g, vals[0]), x, 5))


def test_bad_order():
    g = make_grid(1.0, 0.5)
    with pytest.raises(ValueError):
        interpolate(sample(g, np.sin), 0.1, 0)
    with pytest.raises(ValueError):
        interpolate(sample(g, np.sin), 0.1, 5)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 7), st.integers(0, 10_000), st.floats(0.02, 0.3))
def test_polynomial_reproduction(r, seed, dx):
    rng = np.random.default_rng(seed)
    coeffs = rng.normal(size=r + 1)
    g = make_grid(1.5, dx, r)
    fn = sample(g, lambda x: np.polyval(coeffs, x))
    x = rng.uniform(g.lo, g.hi, 100)
    want = np.polyval(coeffs, x)
    scale = np.max(np.abs(fn.values)) + 1.0
    np.testing.assert_allclose(interpolate(fn, x, r), want, rtol=1e-10, atol=1e-10 * scale)
