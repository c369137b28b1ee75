import json

import pytest

from dislocation_core.config import (
    ConfigurationError,
    ExperimentConfig,
    SimulationConfig,
    load_json_config,
)
from dislocation_core.grids import Grid2D
from tests.conftest import simulation_dict


def test_from_dict_reads_every_section():
    cfg = SimulationConfig.from_dict(simulation_dict())
    assert cfg.epsilon == 0.2
    assert cfg.centers == (-0.3, 0.3)
    assert cfg.n_layers == 2
    assert cfg.nx == 161 and cfg.ny == 41
    assert cfg.dt == 0.01
    assert cfg.solver.linearization == "stabilized"


def test_default_grid_resolves_core():
    data = simulation_dict()
    del data["grid"]
    cfg = SimulationConfig.from_dict(data)
    grid = Grid2D(cfg.domain.Lx, cfg.domain.Ly, cfg.nx, cfg.ny)
    assert grid.resolves(cfg.epsilon)


def test_default_dt_is_step_bound():
    data = simulation_dict()
    data["time"] = {"T": 0.1}
    cfg = SimulationConfig.from_dict(data)
    assert cfg.dt == pytest.approx(0.25 * 0.2 ** 2)


@pytest.mark.parametrize(
    "overrides",
    [
        {"centers": [0.3, -0.3]},
        {"centers": [-1.5, 0.3]},
        {"epsilon": 1.5},
        {"a": 0.0},
        {"grid": {"nx": 21, "ny": 41}},
        {"time": {"T": 0.02, "dt": 0.05}},
        {"layer": "spline"},
    ],
)
def test_invalid_configuration_rejected(overrides):
    with pytest.raises(ConfigurationError):
        SimulationConfig.from_dict(simulation_dict(**overrides))


def test_missing_key_is_configuration_error():
    data = simulation_dict()
    del data["domain"]
    with pytest.raises(ConfigurationError, match="missing"):
        SimulationConfig.from_dict(data)


def test_unknown_solver_option_rejected():
    with pytest.raises(ConfigurationError):
        SimulationConfig.from_dict(simulation_dict(solver={"lateral": "periodic"}))


def test_config_hash_tracks_content():
    first = SimulationConfig.from_dict(simulation_dict())
    again = SimulationConfig.from_dict(simulation_dict())
    other = SimulationConfig.from_dict(simulation_dict(a=2.0))
    assert first.config_hash == again.config_hash
    assert first.config_hash != other.config_hash


def test_with_epsilon_rederives_grid():
    cfg = SimulationConfig.from_dict(simulation_dict())
    finer = cfg.with_epsilon(0.1)
    assert finer.epsilon == 0.1
    assert finer.nx > cfg.nx
    assert finer.dt == pytest.approx(0.25 * 0.01)


def test_experiment_from_dict():
    experiment = ExperimentConfig.from_dict(
        {"scenario": "pair", "simulation": simulation_dict(), "eps_list": [0.2, 0.1], "delta_list": [0.1, 0.05]}
    )
    assert experiment.eps_list == (0.2, 0.1)
    assert experiment.simulation_for(0.1).epsilon == 0.1
    assert experiment.tolerances.crossing_multiple == 5.0


@pytest.mark.parametrize("eps_list", [[0.1, 0.2], [], [0.2, -0.1]])
def test_experiment_eps_list_must_decrease(eps_list):
    with pytest.raises((ConfigurationError, IndexError)):
        ExperimentConfig.from_dict({"scenario": "pair", "simulation": simulation_dict(), "eps_list": eps_list})


def test_load_json_config(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(simulation_dict()))
    assert load_json_config(path)["epsilon"] == 0.2


def test_load_json_config_errors(tmp_path):
    with pytest.raises(ConfigurationError, match="not found"):
        load_json_config(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{epsilon: ")
    with pytest.raises(ConfigurationError, match="invalid JSON"):
        load_json_config(broken)
