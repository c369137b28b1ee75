import numpy as np
import pytest

from dislocation_core.correctors import (
    GreenSingularityError,
    PsiSolverError,
    QField,
    build_q,
    cutoff_g,
    green_half_plane,
    green_identity_check,
    psi_at,
    q_poisson_check,
    solve_psi,
    verify_corrector_bounds,
)
from dislocation_core.grids import Grid1D
from dislocation_core.layer_profile import EXPLICIT_LAYER
from dislocation_core.potential import SINUSOIDAL


def test_green_function_is_symmetric_and_vanishes_on_interface():
    a, b = (0.3, 1.2), (-0.5, 0.4)
    assert green_half_plane(a, b) == pytest.approx(green_half_plane(b, a))
    assert green_half_plane(a, (2.0, 0.0)) == pytest.approx(0.0, abs=1e-15)
    assert green_half_plane(a, b) > 0


def test_green_function_domain():
    with pytest.raises(ValueError):
        green_half_plane((0.0, 0.0), (1.0, 1.0))
    with pytest.raises(GreenSingularityError):
        green_half_plane((0.0, 1.0), (0.0, 1.0))


def test_green_identity():
    assert green_identity_check().passed


def test_cutoff_shape():
    R = 8.0
    y = np.linspace(0.0, 10.0, 101)
    g = cutoff_g(y, R)
    assert np.all(g[y <= R / 2] == 1.0)
    assert np.all(g[y >= R] == 0.0)
    assert np.all(np.diff(g) <= 0)
    assert cutoff_g(0.75 * R, R) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        cutoff_g(1.0, 2.0)


def test_psi_vanishes_for_sinusoidal_potential(sine_psi):
    assert np.max(np.abs(sine_psi.trace)) <= 1e-12
    assert sine_psi.residual <= 1e-6
    assert psi_at(sine_psi, 0.5, 1.0) == pytest.approx(0.0, abs=1e-12)
    header, rows = sine_psi.to_table()
    assert header == ["x", "psi0"] and rows.shape == (1024, 2)


def test_psi_source_must_be_orthogonal_to_translation_mode():
    with pytest.raises(PsiSolverError):
        solve_psi(EXPLICIT_LAYER, SINUSOIDAL, np.pi, 1.0, grid1d=Grid1D(L=64.0, n=1024))


@pytest.fixture(scope="module")
def q_field():
    return QField(EXPLICIT_LAYER, eps=0.1, b=0.5)


def test_q_radius(q_field):
    assert q_field.R == pytest.approx(2.0 * 0.1 ** -0.5)


def test_q_vanishes_on_interface_and_is_positive_inside(q_field):
    x = np.linspace(-5.0, 5.0, 11)
    q0, _, _ = q_field.evaluate(x, 0.0)
    assert np.allclose(q0, 0.0, atol=1e-14)
    q1, _, _ = q_field.evaluate(x, 1.5)
    assert np.all(q1 > 0)


def test_q_gradient_matches_differences(q_field):
    x, y, h = 0.3, 1.5, 1e-4
    _, qx, qy = q_field.evaluate(np.array([x]), np.array([y]))
    fd_x = (q_field.value(x + h, y) - q_field.value(x - h, y)) / (2 * h)
    fd_y = (q_field.value(x, y + h) - q_field.value(x, y - h)) / (2 * h)
    assert qx[0] == pytest.approx(fd_x, abs=1e-6)
    assert qy[0] == pytest.approx(fd_y, abs=1e-6)


def test_q_solves_poisson_problem(q_field):
    report = q_poisson_check(q_field)
    assert report.passed
    with pytest.raises(ValueError):
        q_poisson_check(q_field, points=[(0.0, 0.2)])


def test_q_argument_checks():
    with pytest.raises(ValueError):
        QField(EXPLICIT_LAYER, eps=1.5, b=0.5)
    with pytest.raises(ValueError):
        QField(EXPLICIT_LAYER, eps=0.1, b=1.0)


def test_build_q_samples_targets():
    q = build_q(EXPLICIT_LAYER, 0.1, 0.5, targets=[(0.0, 1.0), (1.0, 2.0), (-2.0, 0.0)])
    header, rows = q.to_table()
    assert header == ["x", "y", "q", "qx", "qy"]
    assert rows.shape == (3, 5)
    assert rows[2, 2] == pytest.approx(0.0, abs=1e-14)
    assert q.value(0.0, 1.0) == rows[0, 2]


def test_corrector_bounds(q_field, sine_psi):
    report = verify_corrector_bounds(q_field, sine_psi)
    assert report.check("q_nonnegative").passed
    assert report.check("q_le_C_R_lnR").passed
    assert report.check("psi_le_C_over_y").measured == pytest.approx(0.0, abs=1e-10)
    assert report.constants["R"] == pytest.approx(q_field.R)
