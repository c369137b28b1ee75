# tests/conftest.py
import numpy as np
import pytest

from dislocation_core.config import SimulationConfig
from dislocation_core.correctors import solve_psi
from dislocation_core.grids import Grid1D
from dislocation_core.layer_profile import EXPLICIT_LAYER
from dislocation_core.potential import SINUSOIDAL


def simulation_dict(**overrides):
    """A small resolved run: eps = 0.2 on [-2, 2] x [0, 1], two steps of dt = 0.01."""
    data = {
        "potential": "sine",
        "epsilon": 0.2,
        "a": 1.0,
        "centers": [-0.3, 0.3],
        "domain": {"Lx": 2.0, "Ly": 1.0},
        "grid": {"nx": 161, "ny": 41},
        "time": {"T": 0.02, "dt": 0.01, "snapshot_every": 1},
    }
    data.update(overrides)
    return data


@pytest.fixture
def simulation():
    return SimulationConfig.from_dict(simulation_dict())


@pytest.fixture(scope="session")
def sine_psi():
    # psi vanishes for the sinusoidal potential, a short grid is enough
    return solve_psi(EXPLICIT_LAYER, SINUSOIDAL, 2.0 * np.pi, 1.0, grid1d=Grid1D(L=64.0, n=1024))
