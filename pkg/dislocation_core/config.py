# dislocation_core/config.py
import hashlib
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional

from dotenv import load_dotenv

logger = logging.getLogger(__name__)

# Load .env.local first (development), then .env (defaults)
# .env.local takes precedence if it exists
if os.path.exists(".env.local"):
    load_dotenv(".env.local")
load_dotenv()


class ConfigurationError(ValueError):
    """Raised when a run or experiment configuration is invalid."""


def _normalize_layer_mode(raw_value: str) -> str:
    """Normalize and validate the layer mode value."""
    normalized = raw_value.strip().lower()
    if normalized in ("explicit", "arctan"):
        return "explicit"
    elif normalized in ("general", "tabulated"):
        return "general"
    else:
        logger.error(
            f"Invalid DISLOCATION_LAYER value: '{raw_value}'. "
            "Must be 'explicit' or 'general'. Defaulting to 'explicit'."
        )
        return "explicit"


def _int_from_env(name: str, default: int) -> int:
    raw = os.getenv(name, str(default))
    try:
        value = int(raw)
    except ValueError:
        logger.error(f"Invalid {name} value: '{raw}'. Defaulting to {default}.")
        return default
    if value < 1:
        logger.error(f"{name} must be >= 1, got {value}. Defaulting to {default}.")
        return default
    return value


# Worker count for sweeps and independent quadratures; 1 keeps runs bit-reproducible
THREADS = _int_from_env("DISLOCATION_THREADS", 1)
LOG_LEVEL = os.getenv("DISLOCATION_LOG_LEVEL", "INFO").upper()
OUTPUT_DIR = os.getenv("DISLOCATION_OUTPUT_DIR", "runs")
LAYER_MODE = _normalize_layer_mode(os.getenv("DISLOCATION_LAYER", "explicit"))

logger.debug(f"Threads: {THREADS}, layer mode: {LAYER_MODE}, output dir: {OUTPUT_DIR}")


@dataclass(frozen=True)
class DomainConfig:
    """Truncated half-plane [-Lx, Lx] x [0, Ly]."""
    Lx: float
    Ly: float

    def __post_init__(self):
        if not (self.Lx > 0 and self.Ly > 0):
            raise ConfigurationError(f"domain sizes must be positive, got Lx={self.Lx}, Ly={self.Ly}")


@dataclass(frozen=True)
class GridConfig:
    nx: Optional[int] = None
    ny: Optional[int] = None

    def __post_init__(self):
        for name in ("nx", "ny"):
            value = getattr(self, name)
            if value is not None and value < 5:
                raise ConfigurationError(f"grid.{name} must be >= 5, got {value}")


@dataclass(frozen=True)
class TimeConfig:
    T: float
    dt: Optional[float] = None
    snapshot_every: int = 10
    cfl_safety: float = 0.25

    def __post_init__(self):
        if self.T <= 0:
            raise ConfigurationError(f"time.T must be positive, got {self.T}")
        if self.dt is not None and self.dt <= 0:
            raise ConfigurationError(f"time.dt must be positive, got {self.dt}")
        if self.snapshot_every < 1:
            raise ConfigurationError("time.snapshot_every must be >= 1")
        if not 0 < self.cfl_safety <= 1:
            raise ConfigurationError(f"time.cfl_safety must lie in (0, 1], got {self.cfl_safety}")


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    max_iter: int = 2
    linearization: str = "stabilized"
    lateral: str = "initial"

    def __post_init__(self):
        if self.linearization not in ("stabilized", "newton"):
            raise ConfigurationError(
                f"solver.linearization must be 'stabilized' or 'newton', got '{self.linearization}'"
            )
        if self.lateral not in ("initial", "constant"):
            raise ConfigurationError(f"solver.lateral must be 'initial' or 'constant', got '{self.lateral}'")
        if self.tol <= 0:
            raise ConfigurationError("solver.tol must be positive")


@dataclass(frozen=True)
class SimulationConfig:
    """One run of the coupled bulk/interface system (the `simulate` JSON)."""
    epsilon: float
    a: float
    centers: tuple[float, ...]
    domain: DomainConfig
    time: TimeConfig
    grid: GridConfig = field(default_factory=GridConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    potential: str = "sine"
    layer: str = LAYER_MODE

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ConfigurationError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.a <= 0:
            raise ConfigurationError(f"a must be positive, got {self.a}")
        if len(self.centers) < 1:
            raise ConfigurationError("at least one center is required")
        if any(z2 <= z1 for z1, z2 in zip(self.centers, self.centers[1:])):
            raise ConfigurationError(f"centers must be strictly increasing, got {list(self.centers)}")
        if self.centers[0] <= -self.domain.Lx + 1 or self.centers[-1] >= self.domain.Lx - 1:
            raise ConfigurationError(
                f"centers must lie in (-Lx+1, Lx-1) = ({-self.domain.Lx + 1}, {self.domain.Lx - 1})"
            )
        if self.layer not in ("explicit", "general"):
            raise ConfigurationError(f"layer must be 'explicit' or 'general', got '{self.layer}'")
        hx = 2 * self.domain.Lx / (self.nx - 1)
        hy = self.domain.Ly / (self.ny - 1)
        if hx > self.epsilon / 8 * (1 + 1e-12) or hy > self.epsilon / 8 * (1 + 1e-12):
            raise ConfigurationError(
                f"unresolved core: hx={hx:.4g}, hy={hy:.4g} must not exceed eps/8={self.epsilon / 8:.4g}"
            )
        if self.time.dt is not None and self.time.dt > self.max_dt * (1 + 1e-12):
            raise ConfigurationError(
                f"time.dt={self.time.dt} violates dt <= {self.time.cfl_safety} * eps^2 = {self.max_dt}"
            )

    @property
    def nx(self) -> int:
        if self.grid.nx is not None:
            return self.grid.nx
        return int(math.ceil(2 * self.domain.Lx / (self.epsilon / 8))) + 1

    @property
    def ny(self) -> int:
        if self.grid.ny is not None:
            return self.grid.ny
        return int(math.ceil(self.domain.Ly / (self.epsilon / 8))) + 1

    @property
    def max_dt(self) -> float:
        return self.time.cfl_safety * self.epsilon ** 2

    @property
    def dt(self) -> float:
        return self.time.dt if self.time.dt is not None else self.max_dt

    @property
    def n_layers(self) -> int:
        return len(self.centers)

    def with_epsilon(self, epsilon: float) -> "SimulationConfig":
        """Copy of this config at another epsilon; grid and dt re-derived from the resolution rule."""
        return SimulationConfig(
            epsilon=epsilon,
            a=self.a,
            centers=self.centers,
            domain=self.domain,
            time=TimeConfig(
                T=self.time.T,
                dt=None,
                snapshot_every=self.time.snapshot_every,
                cfl_safety=self.time.cfl_safety,
            ),
            grid=GridConfig(),
            solver=self.solver,
            potential=self.potential,
            layer=self.layer,
        )

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["centers"] = list(self.centers)
        return data

    @property
    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SimulationConfig":
        try:
            return cls(
                epsilon=float(data["epsilon"]),
                a=float(data["a"]),
                centers=tuple(float(z) for z in data["centers"]),
                domain=DomainConfig(**data["domain"]),
                time=TimeConfig(**data["time"]),
                grid=GridConfig(**data.get("grid", {})),
                solver=SolverConfig(**data.get("solver", {})),
                potential=str(data.get("potential", "sine")),
                layer=str(data.get("layer", LAYER_MODE)),
            )
        except KeyError as e:
            raise ConfigurationError(f"missing configuration key: {e}") from e
        except TypeError as e:
            raise ConfigurationError(f"malformed configuration: {e}") from e


@dataclass(frozen=True)
class Tolerances:
    """Acceptance thresholds used by the sweep; all are artifact policy, not analytic constants."""
    crossing_multiple: float = 5.0
    bulk_band_y0: float = 0.5
    bulk_max_error: float = 0.1
    reduction_multiple: float = 3.0
    inversion_allowance: float = 0.2

    def __post_init__(self):
        if self.crossing_multiple <= 0 or self.bulk_band_y0 <= 0 or self.bulk_max_error <= 0:
            raise ConfigurationError("tolerances must be positive")


@dataclass(frozen=True)
class ExperimentConfig:
    """An epsilon/delta sweep around one base simulation."""
    scenario: str
    simulation: SimulationConfig
    eps_list: tuple[float, ...]
    delta_list: tuple[float, ...] = (0.05,)
    tolerances: Tolerances = field(default_factory=Tolerances)
    output_dir: str = OUTPUT_DIR

    def __post_init__(self):
        if not self.scenario:
            raise ConfigurationError("scenario name must be non-empty")
        for name in ("eps_list", "delta_list"):
            values = getattr(self, name)
            if len(values) < 1:
                raise ConfigurationError(f"{name} must be non-empty")
            if any(v <= 0 for v in values):
                raise ConfigurationError(f"{name} must hold positive values, got {list(values)}")
            if any(v2 >= v1 for v1, v2 in zip(values, values[1:])):
                raise ConfigurationError(f"{name} must be strictly decreasing, got {list(values)}")
        # every epsilon must be resolvable by the hx = eps/8 rule
        for eps in self.eps_list:
            self.simulation.with_epsilon(eps)

    def simulation_for(self, epsilon: float) -> SimulationConfig:
        return self.simulation.with_epsilon(epsilon)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        try:
            base = dict(data["simulation"])
            eps_list = tuple(float(e) for e in data["eps_list"])
            base.setdefault("epsilon", eps_list[0])
            simulation = SimulationConfig.from_dict(base)
            return cls(
                scenario=str(data["scenario"]),
                simulation=simulation,
                eps_list=eps_list,
                delta_list=tuple(float(d) for d in data.get("delta_list", (0.05,))),
                tolerances=Tolerances(**data.get("tolerances", {})),
                output_dir=str(data.get("output_dir", OUTPUT_DIR)),
            )
        except KeyError as e:
            raise ConfigurationError(f"missing configuration key: {e}") from e
        except TypeError as e:
            raise ConfigurationError(f"malformed configuration: {e}") from e


def load_json_config(path: str | Path) -> dict[str, Any]:
    """
    Read a JSON configuration file.

    Args:
        path: Path to the JSON file

    Returns:
        Parsed dictionary

    Raises:
        ConfigurationError: If the file is missing or not valid JSON
    """
    config_path = Path(path)
    if not config_path.exists():
        raise ConfigurationError(f"configuration file not found: {config_path}")
    try:
        with open(config_path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"invalid JSON in {config_path}: {e}") from e
