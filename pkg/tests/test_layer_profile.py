import numpy as np
import pytest

from dislocation_core.grids import Grid1D
from dislocation_core.layer_profile import (
    EXPLICIT_LAYER,
    LayerDomainError,
    LayerKind,
    LayerProfile,
    compute_constants,
    phi_explicit,
    phi_gradient,
    scaled_layer_bound_check,
    solve_layer_general,
)
from dislocation_core.potential import SINUSOIDAL, tabulated_potential


def test_explicit_layer_normalization_and_limits():
    assert phi_explicit(0.0, 0.0) == 0.5
    assert phi_explicit(-1e9) == pytest.approx(0.0, abs=1e-9)
    assert phi_explicit(1e9) == pytest.approx(1.0, abs=1e-9)
    x = np.linspace(-10.0, 10.0, 201)
    assert np.all(np.diff(phi_explicit(x, 0.0)) > 0)


def test_explicit_layer_boundary_condition():
    x = np.linspace(-30.0, 30.0, 301)
    _, dphi_dy = phi_gradient(x, 0.0)
    assert np.allclose(dphi_dy, SINUSOIDAL.w_prime(phi_explicit(x, 0.0)), atol=1e-12)


def test_explicit_layer_is_harmonic():
    x, y, h = 0.7, 1.3, 1e-3
    lap = (
        phi_explicit(x + h, y) + phi_explicit(x - h, y) + phi_explicit(x, y + h) + phi_explicit(x, y - h)
        - 4.0 * phi_explicit(x, y)
    ) / h ** 2
    assert lap == pytest.approx(0.0, abs=1e-5)


def test_gradient_matches_differences():
    x, y, h = -0.4, 0.6, 1e-6
    gx, gy = EXPLICIT_LAYER.gradient(x, y)
    assert gx == pytest.approx((phi_explicit(x + h, y) - phi_explicit(x - h, y)) / (2 * h), rel=1e-6)
    assert gy == pytest.approx((phi_explicit(x, y + h) - phi_explicit(x, y - h)) / (2 * h), rel=1e-6)


def test_conjugate_satisfies_cauchy_riemann():
    x, y, h = 0.9, 0.4, 1e-6
    dchi_dy = (EXPLICIT_LAYER.conjugate(x, y + h) - EXPLICIT_LAYER.conjugate(x, y - h)) / (2 * h)
    dchi_dx = (EXPLICIT_LAYER.conjugate(x + h, y) - EXPLICIT_LAYER.conjugate(x - h, y)) / (2 * h)
    gx, gy = EXPLICIT_LAYER.gradient(x, y)
    assert dchi_dy == pytest.approx(gx, rel=1e-6)
    assert dchi_dx == pytest.approx(-gy, rel=1e-6)


def test_layer_below_interface_rejected():
    with pytest.raises(LayerDomainError):
        EXPLICIT_LAYER.value(0.0, -0.5)


def test_constants_of_explicit_layer():
    c0, alpha = compute_constants(EXPLICIT_LAYER, SINUSOIDAL)
    assert c0 == pytest.approx(2.0 * np.pi, rel=1e-8)
    assert alpha == pytest.approx(1.0)


def test_layer_constants_must_be_positive():
    with pytest.raises(ValueError):
        LayerProfile(LayerKind.EXPLICIT_ARCTAN, c0=-1.0, alpha=1.0)
    with pytest.raises(ValueError):
        LayerProfile(LayerKind.TABULATED, c0=1.0, alpha=1.0)


def test_scaled_layer_bound():
    points = [(x, y) for x in (-1.0, -0.2, 0.0, 0.3, 1.0) for y in (0.05, 0.5, 2.0)]
    report = scaled_layer_bound_check(0.01, points)
    assert report.passed
    assert report.constants["fitted_C"] <= 5.0


def test_scaled_layer_bound_rejects_interface_points():
    with pytest.raises(LayerDomainError):
        scaled_layer_bound_check(0.01, [(0.0, 0.0)])


def test_general_solver_recovers_explicit_layer():
    grid = Grid1D(L=64.0, n=1024)
    layer = solve_layer_general(SINUSOIDAL, grid1d=grid)
    x, phi0 = layer.table()
    assert np.allclose(phi0, phi_explicit(x, 0.0), atol=1e-8)
    assert layer.c0 == pytest.approx(2.0 * np.pi, rel=1e-5)
    assert layer.trace(0.0) == pytest.approx(0.5, abs=1e-8)


def test_general_solver_on_tabulated_sine():
    u = np.linspace(0.0, 1.0, 64, endpoint=False)
    potential = tabulated_potential(u, SINUSOIDAL.w(u))
    layer = solve_layer_general(potential, grid1d=Grid1D(L=64.0, n=1024), tol=1e-6)
    assert layer.kind is LayerKind.TABULATED
    assert layer.c0 == pytest.approx(2.0 * np.pi, rel=1e-2)
    x = np.array([-5.0, -1.0, 1.0, 5.0])
    assert np.allclose(layer.trace(x), phi_explicit(x, 0.0), atol=1e-2)


def test_from_table_round_trip_of_trace():
    grid = Grid1D(L=64.0, n=1024)
    layer = solve_layer_general(SINUSOIDAL, grid1d=grid)
    x, phi0 = layer.table()
    rebuilt = LayerProfile.from_table(grid, phi0, layer.c0, layer.alpha)
    assert np.allclose(rebuilt.table()[1], phi0, atol=1e-14)
    assert rebuilt.to_dict()["grid"] == {"L": 64.0, "n": 1024}
