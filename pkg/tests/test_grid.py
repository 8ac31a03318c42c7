import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spatialregret.errors import BadRange, FrequencyNotOnGrid, GridMismatch
from spatialregret.grid import FrequencyGrid, make_linear_grid, make_log_grid


def test_log_grid_examples():
    g = make_log_grid(1, 100, 3, 0.001)
    np.testing.assert_allclose(g.omegas, [1, 10, 100])
    assert len(make_log_grid(2.0, 5.0, 1, 0.02)) == 1
    assert make_log_grid(2.0, 5.0, 1, 0.02).omegas[0] == 2.0


def test_full_band_grid_stays_below_nyquist():
    g = make_log_grid(1e-2, np.pi / 0.02, 600, 0.02)
    assert len(g) == 600
    assert g.omegas[-1] < 157.07963267948966
    assert g.omegas[-1] == pytest.approx(np.pi / 0.02, rel=1e-8)


@pytest.mark.parametrize("args", [(0, 10, 5, 0.02), (10, 1, 5, 0.02), (1, 200, 5, 0.02), (1, 10, 0, 0.02)])
def test_log_grid_bad_range(args):
    with pytest.raises(BadRange):
        make_log_grid(*args)


def test_grid_validation():
    with pytest.raises(BadRange):
        FrequencyGrid(0.02, [1.0, 1.0])
    with pytest.raises(BadRange):
        FrequencyGrid(0.02, [1.0, np.pi / 0.02])
    with pytest.raises(BadRange):
        FrequencyGrid(-1.0, [1.0])


def test_index_and_mismatch():
    g = make_log_grid(1, 100, 3, 0.001)
    assert g.index_of(10.0) == 1
    with pytest.raises(FrequencyNotOnGrid):
        g.index_of(11.0)
    with pytest.raises(GridMismatch):
        g.require_same(make_log_grid(1, 100, 4, 0.001))


def test_quadrature_of_constant_is_one():
    # (Ts/pi) * int_0^{pi/Ts} 1 domega = 1 on any grid
    for g in (make_log_grid(1e-2, 150, 37, 0.02), make_linear_grid(0, 150, 11, 0.02)):
        assert g.quadrature_weights().sum() == pytest.approx(1.0, rel=1e-12)


@given(st.integers(2, 300), st.floats(1e-3, 1.0), st.floats(1e-3, 0.5))
def test_log_grid_properties(n, w_min, Ts):
    g = make_log_grid(w_min, np.pi / Ts, n, Ts)
    assert len(g) == n
    assert np.all(np.diff(g.omegas) > 0)
    assert g.omegas[-1] < np.pi / Ts
    assert np.all(g.quadrature_weights() > 0)
