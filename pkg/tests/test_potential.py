import numpy as np
import pytest

from dislocation_core.potential import (
    SINUSOIDAL,
    PotentialDomainError,
    PotentialFormatError,
    PotentialKind,
    load_potential,
    tabulated_potential,
    validate_potential,
    w_double_prime,
    w_prime,
    w_value,
)


def test_sine_values():
    assert w_value(0.0) == pytest.approx(0.0, abs=1e-15)
    assert w_value(0.5) == pytest.approx(1.0 / (2.0 * np.pi ** 2))
    assert w_prime(0.0) == pytest.approx(0.0, abs=1e-15)
    assert w_double_prime(0.0) == pytest.approx(1.0)
    assert SINUSOIDAL.alpha == pytest.approx(1.0)


def test_sine_is_periodic():
    u = np.linspace(-3.0, 3.0, 101)
    assert np.allclose(w_value(u + 1.0), w_value(u), atol=1e-14)


def test_non_finite_argument_rejected():
    with pytest.raises(PotentialDomainError):
        w_value(np.nan)
    with pytest.raises(PotentialDomainError):
        w_prime(np.array([0.0, np.inf]))


def test_sine_validates():
    report = validate_potential(SINUSOIDAL)
    assert report.passed
    assert report.check("convex_at_zero").measured == pytest.approx(1.0)


def test_validate_needs_enough_samples():
    with pytest.raises(ValueError):
        validate_potential(SINUSOIDAL, samples=10)


def _sine_table(n=64):
    u = np.linspace(0.0, 1.0, n, endpoint=False)
    return u, SINUSOIDAL.w(u)


def test_tabulated_potential_tracks_sine():
    spec = tabulated_potential(*_sine_table())
    assert spec.kind is PotentialKind.USER_TABULATED
    u = np.linspace(-1.3, 2.7, 57)
    assert np.allclose(spec.w(u), SINUSOIDAL.w(u), atol=1e-6)
    assert np.allclose(spec.w_prime(u), SINUSOIDAL.w_prime(u), atol=1e-4)
    assert spec.alpha == pytest.approx(1.0, rel=1e-2)


def test_tabulated_potential_structural_checks():
    report = validate_potential(tabulated_potential(*_sine_table()))
    for name in ("periodicity", "zero_on_integers", "positive_off_integers", "convex_at_zero"):
        assert report.check(name).passed


def test_tabulated_potential_with_interior_zero_fails_positivity():
    u, w = _sine_table()
    w[32] = 0.0
    report = validate_potential(tabulated_potential(u, w))
    assert not report.check("positive_off_integers").passed


def test_closed_table_accepted():
    u = np.linspace(0.0, 1.0, 65)
    spec = tabulated_potential(u, SINUSOIDAL.w(u))
    assert spec.w(np.array(0.25)) == pytest.approx(SINUSOIDAL.w(np.array(0.25)), abs=1e-6)


@pytest.mark.parametrize(
    "u, w",
    [
        (np.linspace(0.0, 2.0, 64, endpoint=False), np.zeros(64)),
        (np.array([0.0, 0.1, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]), np.zeros(9)),
        (np.linspace(0.0, 1.0, 4, endpoint=False), np.zeros(4)),
    ],
)
def test_malformed_tables_rejected(u, w):
    with pytest.raises(PotentialFormatError):
        tabulated_potential(u, w)


def test_load_potential(tmp_path):
    assert load_potential("sine") is SINUSOIDAL
    u, w = _sine_table()
    path = tmp_path / "w.csv"
    np.savetxt(path, np.column_stack([u, w]), delimiter=",", header="u,W", comments="")
    spec = load_potential(str(path))
    assert spec.source == str(path)
    with pytest.raises(PotentialFormatError):
        load_potential(str(tmp_path / "absent.csv"))
