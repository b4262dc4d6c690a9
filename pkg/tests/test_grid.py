"""Grid geometry and ghost fills."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mhdct.grid import INFLOW, OUTFLOW, PERIODIC, FaceBC, Grid, pad_all, pad_axis, strip

PER = (FaceBC(PERIODIC), FaceBC(PERIODIC))
OUT = (FaceBC(OUTFLOW), FaceBC(OUTFLOW))


def test_node_conventions():
    g = Grid.uniform((0.0, -1.0), (1.0, 1.0), (10, 8), [PERIODIC, OUTFLOW])
    assert g.shape == (10, 9)
    assert g.spacing == (0.1, 0.25)
    np.testing.assert_allclose(g.coords(1), np.linspace(-1, 1, 9))
    assert g.coords(0)[-1] == pytest.approx(0.9)
    assert g.size == 90 and g.ndim == 2
    x, y = g.mesh()
    assert x.shape == g.shape and np.all(x[:, 0] == g.coords(0))


def test_grid_errors():
    with pytest.raises(ValueError):
        Grid((0.0,), (1.0, 1.0), (8, 8))
    with pytest.raises(ValueError):
        Grid((0.0,), (1.0,), (5,))
    with pytest.raises(ValueError):
        Grid((0.0,), (1.0,), (8,), ((FaceBC(PERIODIC), FaceBC(OUTFLOW)),))
    with pytest.raises(ValueError):
        FaceBC("reflecting")
    with pytest.raises(ValueError):
        FaceBC(INFLOW)


def test_periodic_wrap():
    a = np.arange(8.0)
    np.testing.assert_array_equal(pad_axis(a, 0, 3, PER, component_axis=False),
                                  [5, 6, 7, 0, 1, 2, 3, 4, 5, 6, 7, 0, 1, 2])
    with pytest.raises(ValueError):
        pad_axis(a, 0, 9, PER, component_axis=False)


@given(st.integers(0, 3), st.integers(1, 4), st.integers(0, 2 ** 31 - 1))
@settings(max_examples=40, deadline=None)
def test_extrapolation_exact_for_polynomials(degree, width, seed):
    c = np.random.default_rng(seed).normal(size=degree + 1)
    x = np.arange(-width, 10 + width, dtype=float)
    f = np.polyval(c, x)
    out = pad_axis(f[width:-width], 0, width, OUT, degree, component_axis=False)
    np.testing.assert_allclose(out, f, rtol=1e-9, atol=1e-9)


def test_inflow_face_holds_state():
    state = (1.0, 2.0, 3.0)
    bc = (FaceBC(INFLOW, state), FaceBC(OUTFLOW))
    a = np.random.default_rng(0).normal(size=(3, 6, 4))
    out = pad_axis(a, 1, 2, bc, component_axis=True)
    for c in range(3):
        assert np.all(out[c, :2] == state[c])
    np.testing.assert_array_equal(out[:, -1], a[:, -1])
    plain = pad_axis(a, 1, 2, bc, component_axis=True, inflow=False)
    np.testing.assert_array_equal(plain[:, 0], a[:, 0])


def test_pad_all_and_strip_round_trip():
    g = Grid.uniform((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), (6, 7, 8), [PERIODIC, OUTFLOW, PERIODIC])
    a = np.random.default_rng(1).normal(size=(2,) + g.shape)
    p = pad_all(a, g, 3)
    assert p.shape == (2, 12, 14, 14)
    np.testing.assert_array_equal(strip(p, 3, 3), a)


def test_not_enough_nodes_for_extrapolation():
    with pytest.raises(ValueError):
        pad_axis(np.ones(3), 0, 2, OUT, degree=3, component_axis=False)
