import math

import numpy as np
import pytest

from dislocation_core.config import ExperimentConfig, SimulationConfig
from dislocation_core.coupled_solver import run
from dislocation_core.harness import (
    ComparisonError,
    ConvergenceTable,
    arctan_superposition,
    bulk_limit_check,
    compare_ode_pde,
    envelope_check,
    limit_profile,
    lower_envelope,
    monotone_trend,
    reduction_check,
    reduction_simulation,
    run_sweep,
    threshold_scan,
    upper_envelope,
)
from dislocation_core.layer_profile import EXPLICIT_LAYER
from dislocation_core.particle_ode import ParticleState, integrate
from tests.conftest import simulation_dict

C0 = 2.0 * np.pi


def test_limit_profiles_at_a_jump():
    z = [0.0, 1.0]
    x = np.array([-1.0, 0.0, 0.5, 1.0, 2.0])
    assert limit_profile(x, z).tolist() == [0.0, 0.5, 1.0, 1.5, 2.0]
    assert upper_envelope(x, z).tolist() == [0.0, 1.0, 1.0, 2.0, 2.0]
    assert lower_envelope(x, z).tolist() == [0.0, 0.0, 1.0, 1.0, 2.0]


def test_arctan_superposition_reduces_to_step_on_interface():
    x = np.array([-1.0, 0.5, 2.0])
    assert np.allclose(arctan_superposition(x, 0.0, [0.0, 1.0]), limit_profile(x, [0.0, 1.0]))
    assert arctan_superposition(0.0, 1.0, [0.0]) == pytest.approx(0.5)


@pytest.mark.parametrize(
    "values, expected",
    [
        ([4.0, 2.0, 1.0], (True, 0)),
        ([4.0, 2.0, 2.2, 1.0], (True, 1)),
        ([4.0, 2.0, 3.0, 1.0], (False, 1)),
        ([4.0, 5.0, 2.0, 3.0], (False, 2)),
    ],
)
def test_monotone_trend(values, expected):
    assert monotone_trend(values, allowance=0.2) == expected


def test_convergence_table_merges_rows():
    table = ConvergenceTable()
    table.row(0.2, 0.0).crossing_errors = (0.01, 0.02)
    table.row(0.1, 0.0).crossing_errors = (0.005,)
    other = ConvergenceTable()
    other.row(0.2, 0.0).bulk_error = 0.3
    table.extend(other)
    assert table.eps_values == [0.2, 0.1]
    assert table.nearest(0.2, 0.01).bulk_error == 0.3
    header, rows = table.to_table()
    assert header == ["eps", "t", "err_1", "err_2", "bulk_error"]
    assert rows.shape == (2, 5)
    assert math.isnan(rows[1, 3])
    with pytest.raises(KeyError):
        table.nearest(0.05, 0.0)


def test_threshold_scan():
    outcomes = {
        (0.2, 0.1): False, (0.1, 0.1): True, (0.05, 0.1): True,
        (0.2, 0.05): False, (0.1, 0.05): False, (0.05, 0.05): True,
    }
    report = threshold_scan(outcomes)
    assert report.constants["delta0"] == 0.1
    assert report.constants["eps0"] == 0.1
    assert report.constants["eps0 delta=0.05"] == 0.05
    assert report.passed


def test_threshold_scan_without_success():
    report = threshold_scan({(0.2, 0.1): True, (0.05, 0.1): False})
    assert math.isnan(report.constants["eps0"])
    assert not report.passed


@pytest.fixture(scope="module")
def pair_run():
    simulation = SimulationConfig.from_dict(simulation_dict(time={"T": 0.04, "dt": 0.01, "snapshot_every": 2}))
    record = run(simulation)
    trajectory = integrate(ParticleState(simulation.centers), C0, T=simulation.time.T)
    return record, trajectory


def test_compare_ode_pde_fills_table(pair_run):
    record, trajectory = pair_run
    table = compare_ode_pde(record, trajectory)
    rows = table.for_eps(record.eps)
    assert [r.time for r in rows] == pytest.approx(record.times)
    assert all(len(r.crossing_errors) == 2 for r in rows)
    # initial crossings sit on the grid-resolved superposition, within a few cells of the centers
    assert rows[0].max_crossing_error < 0.1


def test_compare_needs_unperturbed_matching_trajectory(pair_run):
    record, _ = pair_run
    perturbed = integrate(ParticleState((-0.3, 0.3)), C0, delta=0.1, orientation="super", T=0.04)
    with pytest.raises(ComparisonError):
        compare_ode_pde(record, perturbed)
    triple = integrate(ParticleState((-0.5, 0.0, 0.5)), C0, T=0.04)
    with pytest.raises(ComparisonError):
        compare_ode_pde(record, triple)
    short = integrate(ParticleState((-0.3, 0.3)), C0, T=0.01)
    with pytest.raises(ComparisonError):
        compare_ode_pde(record, short)


def test_bulk_limit_check(pair_run):
    record, trajectory = pair_run
    table = bulk_limit_check(record, trajectory, band_y0=0.5)
    errors = [r.bulk_error for r in table.for_eps(record.eps)]
    assert len(errors) == len(record.snapshots)
    assert all(np.isfinite(e) and e >= 0.0 for e in errors)
    with pytest.raises(ComparisonError):
        bulk_limit_check(record, trajectory, band_y0=0.05)


def test_envelope_check_structure(pair_run):
    record, trajectory = pair_run
    t = record.times[-1]
    traces = {record.eps: (record.x, record.snapshot_at(t)[:, 0])}
    report = envelope_check(traces, trajectory, t)
    assert report.check(f"far_field eps={record.eps}").threshold == pytest.approx(2 * 0.2 / (np.pi * 0.25))
    assert report.check(f"center_band eps={record.eps}").passed
    assert f"midpoint_deviation eps={record.eps}" in report.constants
    with pytest.raises(ValueError):
        envelope_check(traces, trajectory, t, margin=0.0)


def test_sweep_writes_artifacts(tmp_path):
    data = {
        "scenario": "pair",
        "simulation": simulation_dict(time={"T": 0.02, "dt": 0.01, "snapshot_every": 1}),
        "eps_list": [0.2],
        "tolerances": {"bulk_band_y0": 0.5},
    }
    data["simulation"].pop("grid")
    data["simulation"]["time"] = {"T": 0.02, "snapshot_every": 1}
    experiment = ExperimentConfig.from_dict(data)
    result = run_sweep(experiment, out_dir=tmp_path, layer=EXPLICIT_LAYER, barriers=False)
    root = tmp_path / "pair"
    assert result.output_dir == root
    for name in ("trajectory.csv", "convergence.csv", "summary.json", "run_metadata.json"):
        assert (root / name).exists()
    for name in ("crossings.csv", "energy.csv", "final_field.bin", "final_field.json"):
        assert (root / "eps_0.2" / name).exists()
    names = {c.name for c in result.summary.checks}
    assert {"energy_monotone eps=0.2", "initial_crossing", "slow_motion", "bulk_limit"} <= names


def test_reduction_simulation_is_quasi_static_on_a_tall_strip():
    simulation = reduction_simulation()
    assert simulation.a == 4.0
    assert simulation.epsilon == 0.1
    assert simulation.time.T == 0.25
    assert simulation.domain.Ly >= 40.0 * simulation.epsilon


def test_reduction_check_passes():
    # eps = 0.2 keeps the grid small; the strip and the horizon are the verify ones
    simulation = reduction_simulation(eps=0.2)
    report = reduction_check(simulation)
    check = report.check("reduction_consistency")
    assert check.passed, check
    assert check.threshold == pytest.approx(3.0 * 2.0 * simulation.domain.Lx / (simulation.nx - 1))
    assert check.detail["T"] == pytest.approx(0.25)
