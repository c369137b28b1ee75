import numpy as np
import pytest

from dislocation_core.grids import Grid1D
from dislocation_core.harmonic import (
    SpectralExtension,
    TraceDomainError,
    conjugate_poisson_extend,
    half_laplacian,
    poisson_extend,
)


def lorentzian(s):
    return 1.0 / (1.0 + s ** 2)


def gaussian(s):
    return np.exp(-s ** 2)


def dipole(s):
    # odd, so the periodic images of the sampled trace cancel to leading order
    return s * np.exp(-s ** 2)


@pytest.mark.parametrize("x, y", [(0.0, 0.5), (0.5, 1.0), (-3.0, 2.0)])
def test_poisson_extension_of_lorentzian(x, y):
    expected = (1.0 + y) / (x ** 2 + (1.0 + y) ** 2)
    assert poisson_extend(lorentzian, x, y) == pytest.approx(expected, abs=1e-9)


def test_poisson_extension_of_step():
    step = lambda s: 1.0 if s > 0 else 0.0
    x, y = 0.3, 0.7
    expected = 0.5 + np.arctan(x / y) / np.pi
    assert poisson_extend(step, x, y, breakpoints=(0.0,)) == pytest.approx(expected, abs=1e-9)


def test_poisson_extension_on_interface_returns_trace():
    assert poisson_extend(lorentzian, 1.0, 0.0) == pytest.approx(0.5)


def test_poisson_extension_domain_errors():
    with pytest.raises(TraceDomainError):
        poisson_extend(lorentzian, 0.0, -0.1)
    with pytest.raises(TraceDomainError):
        poisson_extend(lambda s: s, 0.0, 1.0)


def test_conjugate_of_lorentzian():
    x, y = 0.8, 0.5
    expected = x / (x ** 2 + (1.0 + y) ** 2)
    assert conjugate_poisson_extend(lorentzian, x, y) == pytest.approx(expected, abs=1e-7)


def test_spectral_extension_matches_quadrature():
    grid = Grid1D(L=16.0, n=512)
    ext = SpectralExtension(grid, dipole(grid.x), far_field=dipole)
    for x, y in [(0.3, 0.5), (-1.1, 1.5)]:
        assert ext.evaluate(x, y) == pytest.approx(poisson_extend(dipole, x, y), abs=1e-5)


def test_spectral_extension_far_points_use_quadrature():
    grid = Grid1D(L=16.0, n=512)
    ext = SpectralExtension(grid, gaussian(grid.x), far_field=gaussian)
    value = ext.evaluate(14.0, 1.0)
    assert value == pytest.approx(poisson_extend(gaussian, 14.0, 1.0, check_bounded=False), abs=1e-7)


def test_spectral_derivatives_are_cauchy_riemann_consistent():
    grid = Grid1D(L=16.0, n=512)
    ext = SpectralExtension(grid, gaussian(grid.x))
    x = np.linspace(-2.0, 2.0, 9)
    y = 0.75
    # d_y chi = d_x u for the harmonic conjugate
    h = 1e-4
    dchi_dy = (ext.evaluate(x, y + h, "conjugate") - ext.evaluate(x, y - h, "conjugate")) / (2 * h)
    assert np.allclose(dchi_dy, ext.evaluate(x, y, "dx"), atol=1e-5)
    du_dy = (ext.evaluate(x, y + h) - ext.evaluate(x, y - h)) / (2 * h)
    assert np.allclose(du_dy, ext.evaluate(x, y, "dy"), atol=1e-5)


def test_spectral_extension_rejects_bad_input():
    grid = Grid1D(L=16.0, n=512)
    with pytest.raises(ValueError):
        SpectralExtension(grid, np.zeros(10))
    ext = SpectralExtension(grid, gaussian(grid.x))
    with pytest.raises(ValueError):
        ext.evaluate(0.0, 1.0, kind="curl")
    with pytest.raises(TraceDomainError):
        ext.evaluate(0.0, -1.0)


def test_half_laplacian_is_minus_normal_derivative():
    grid = Grid1D(L=16.0, n=512)
    values = gaussian(grid.x)
    ext = SpectralExtension(grid, values)
    inner = np.abs(grid.x) <= 4.0
    assert np.allclose(half_laplacian(grid, values)[inner], -ext.evaluate(grid.x[inner], 0.0, "dy"), atol=1e-6)
