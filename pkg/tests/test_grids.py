import numpy as np
import pytest

from dislocation_core.grids import Grid1D, Grid2D


def test_grid1d_is_symmetric_with_zero_at_center():
    grid = Grid1D(L=8.0, n=64)
    assert grid.h == pytest.approx(0.25)
    assert grid.x[grid.center_index] == 0.0
    assert grid.x[0] == -8.0


@pytest.mark.parametrize("L, n", [(0.0, 64), (1.0, 7), (1.0, 33)])
def test_grid1d_rejects_bad_sizes(L, n):
    with pytest.raises(ValueError):
        Grid1D(L=L, n=n)


def test_half_laplacian_is_abs_k_multiplier():
    grid = Grid1D(L=np.pi, n=64)
    values = np.cos(3.0 * grid.x)
    assert np.allclose(grid.half_laplacian(values), 3.0 * values, atol=1e-12)


def test_spectral_derivative():
    grid = Grid1D(L=np.pi, n=64)
    assert np.allclose(grid.derivative(np.sin(2.0 * grid.x)), 2.0 * np.cos(2.0 * grid.x), atol=1e-12)


def test_grid2d_spacing_and_resolution():
    grid = Grid2D(2.0, 1.0, 161, 41)
    assert grid.hx == pytest.approx(0.025)
    assert grid.hy == pytest.approx(0.025)
    assert grid.shape == (161, 41)
    assert grid.resolves(0.2)
    assert not grid.resolves(0.1)
    X, Y = grid.mesh()
    assert X.shape == grid.shape and Y[0, 0] == 0.0


def test_trapezoid_weights_integrate_constants():
    grid = Grid2D(2.0, 1.0, 41, 11)
    wx, wy = grid.trapezoid_weights()
    assert wx.sum() == pytest.approx(4.0)
    assert wy.sum() == pytest.approx(1.0)


def test_refined_halves_spacing():
    grid = Grid2D(2.0, 1.0, 41, 11)
    fine = grid.refined()
    assert fine.hx == pytest.approx(grid.hx / 2)
    assert fine.hy == pytest.approx(grid.hy / 2)
