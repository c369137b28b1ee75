import numpy as np
import pytest

from dislocation_core.config import ConfigurationError, SimulationConfig, SolverConfig
from dislocation_core.coupled_solver import (
    Field,
    SchemeOperator,
    TrackingError,
    dissipation,
    energy,
    init_superposition,
    run,
    solve_reduced_fractional,
    step,
    track_crossings,
)
from dislocation_core.grids import Grid2D
from dislocation_core.harness import compare_ode_pde
from dislocation_core.layer_profile import EXPLICIT_LAYER
from dislocation_core.particle_ode import ParticleState, integrate
from dislocation_core.potential import SINUSOIDAL
from tests.conftest import simulation_dict

EPS = 0.2
DT = 0.01
GRID = Grid2D(2.0, 1.0, 161, 41)


def test_initial_superposition_counts_layers():
    field_ = init_superposition((-0.3, 0.3), EPS, EXPLICIT_LAYER, GRID)
    assert field_.values.shape == GRID.shape
    assert field_.trace[0] == pytest.approx(0.0, abs=0.1)
    assert field_.trace[-1] == pytest.approx(2.0, abs=0.1)
    assert np.all(np.diff(field_.trace) > 0)


def test_initial_superposition_rejects_unresolved_grid():
    with pytest.raises(ConfigurationError, match="unresolved"):
        init_superposition((0.0,), 0.1, EXPLICIT_LAYER, GRID)
    with pytest.raises(ConfigurationError):
        init_superposition((1.5,), EPS, EXPLICIT_LAYER, GRID)


def test_field_shape_checked():
    with pytest.raises(ValueError):
        Field(np.zeros((3, 3)), GRID, EPS, 1.0)


def test_track_crossings_of_single_layer():
    field_ = init_superposition((0.1,), EPS, EXPLICIT_LAYER, GRID)
    crossings = track_crossings(field_.trace, 1, GRID.hx, -GRID.Lx)
    assert crossings[0] == pytest.approx(0.1, abs=1e-4)


def test_track_crossings_of_pair():
    field_ = init_superposition((-0.5, 0.5), EPS, EXPLICIT_LAYER, GRID)
    crossings = track_crossings(field_.trace, 2, GRID.hx)
    # the neighbour's tail moves each crossing outwards by eps * (sqrt(29) - 5) / 2
    shift = EPS * (np.sqrt(29.0) - 5.0) / 2.0
    assert crossings == pytest.approx([-0.5 - shift, 0.5 + shift], abs=1e-3)


def test_track_crossings_missing_level():
    with pytest.raises(TrackingError):
        track_crossings(np.zeros(50), 1, 0.1)


def test_step_bound_enforced():
    field_ = init_superposition((0.0,), EPS, EXPLICIT_LAYER, GRID)
    with pytest.raises(ConfigurationError):
        step(field_, 0.25 * EPS ** 2 * 1.5)


def test_energy_decreases_and_dissipation_is_nonnegative():
    current = init_superposition((-0.3, 0.3), EPS, EXPLICIT_LAYER, GRID)
    for _ in range(10):
        nxt = step(current, DT)
        assert energy(nxt) <= energy(current) + 1e-12
        assert dissipation(current, nxt, DT) >= 0.0
        current = nxt
    assert current.time == pytest.approx(10 * DT)


def test_scheme_preserves_ordering():
    lower = init_superposition((-0.3, 0.3), EPS, EXPLICIT_LAYER, GRID)
    upper = init_superposition((-0.35, 0.25), EPS, EXPLICIT_LAYER, GRID)
    assert np.all(upper.values >= lower.values)
    for _ in range(10):
        lower, upper = step(lower, DT), step(upper, DT)
    assert float(np.min(upper.values - lower.values)) >= -1e-12


def test_integer_shift_commutes_with_step():
    base = init_superposition((-0.3, 0.3), EPS, EXPLICIT_LAYER, GRID)
    lifted = base.evolved(base.values + 1.0, 0.0)
    for _ in range(5):
        base, lifted = step(base, DT), step(lifted, DT)
    assert np.allclose(lifted.values, base.values + 1.0, atol=1e-9)


def test_newton_linearization_step():
    field_ = init_superposition((-0.3, 0.3), EPS, EXPLICIT_LAYER, GRID)
    nxt = step(field_, DT, solver=SolverConfig(linearization="newton"))
    assert nxt.time == pytest.approx(DT)
    assert np.all(np.isfinite(nxt.values))
    assert np.array_equal(nxt.values[0, :], field_.values[0, :])


def test_scheme_operator_solves_to_tolerance():
    scheme = SchemeOperator(GRID, EPS, 1.0, DT, 1.0)
    rhs = np.random.default_rng(0).standard_normal((GRID.nx - 2) * GRID.ny)
    x = scheme.solve(rhs, 1e-10)
    assert np.max(np.abs(scheme.matrix @ x - rhs)) <= 1e-10 * max(1.0, np.max(np.abs(rhs)))


def test_energy_of_constant_integer_state_is_zero():
    field_ = Field(np.full(GRID.shape, 2.0), GRID, EPS, 1.0)
    assert energy(field_, SINUSOIDAL) == pytest.approx(0.0, abs=1e-14)


def test_run_records_samples(simulation):
    record = run(simulation)
    assert record.times == pytest.approx([0.0, 0.01, 0.02])
    header, rows = record.crossing_table()
    assert header == ["t", "x_1", "x_2"]
    assert rows.shape == (3, 3)
    header, rows = record.energy_table()
    assert header == ["t", "E", "D"]
    assert np.all(np.diff(rows[:, 1]) <= 1e-12)
    assert len(record.snapshots) == 3
    assert record.snapshot_at(0.011).shape == GRID.shape
    assert record.config_hash == simulation.config_hash


def test_run_with_constant_lateral_values():
    simulation = SimulationConfig.from_dict(simulation_dict(solver={"lateral": "constant"}))
    record = run(simulation)
    final = record.snapshots[-1][1]
    assert np.all(final[0, :] == 0.0)
    assert np.all(final[-1, :] == 2.0)


def test_reduced_solver_needs_wide_domain():
    simulation = SimulationConfig.from_dict(simulation_dict(centers=[-0.9, 0.9]))
    with pytest.raises(ConfigurationError):
        solve_reduced_fractional(simulation)


@pytest.mark.parametrize("linearization", ["stabilized", "newton"])
@pytest.mark.parametrize("lateral", ["initial", "constant"])
def test_solver_modes_meet_the_same_checks(linearization, lateral):
    simulation = SimulationConfig.from_dict(simulation_dict(
        time={"T": 0.1, "dt": DT, "snapshot_every": 2},
        solver={"linearization": linearization, "lateral": lateral},
    ))
    record = run(simulation)
    energies = np.asarray(record.energy)
    assert np.all(np.diff(energies) <= 1e-10 * max(1.0, abs(energies[0])))
    assert record.band_violation == 0.0
    gaps = [float(np.diff(c)[0]) for c in record.crossings]
    assert gaps[-1] > gaps[0]

    trajectory = integrate(ParticleState(simulation.centers), EXPLICIT_LAYER.c0, T=simulation.time.T)
    table = compare_ode_pde(record, trajectory)
    assert not any(row.flagged for row in table.rows)


def test_energy_of_a_linear_field_is_exact():
    X, Y = GRID.mesh()
    field_ = Field(X + 2.0 * Y, GRID, EPS, 1.0)
    wx, _ = GRID.trapezoid_weights()
    area = 2.0 * GRID.Lx * GRID.Ly
    expected = 0.5 * EPS * 5.0 * area + np.sum(wx * SINUSOIDAL.w(GRID.x))
    assert energy(field_) == pytest.approx(expected, rel=1e-12)


def test_energy_gradient_lives_on_edge_midpoints():
    X, _ = GRID.mesh()
    field_ = Field(X ** 2, GRID, EPS, 1.0)
    wx, _ = GRID.trapezoid_weights()
    midpoints = 0.5 * (GRID.x[1:] + GRID.x[:-1])
    gradient = GRID.Ly * GRID.hx * np.sum((2.0 * midpoints) ** 2)
    expected = 0.5 * EPS * gradient + np.sum(wx * SINUSOIDAL.w(GRID.x ** 2))
    assert energy(field_) == pytest.approx(expected, rel=1e-12)
