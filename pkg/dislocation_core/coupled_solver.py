# dislocation_core/coupled_solver.py
"""
Coupled bulk / interface evolution on the truncated half-plane
[-Lx, Lx] x [0, Ly]:

    eps^a d_t u = Delta u                          for y > 0
    eps d_t u - d_y u + (1/eps) W'(u) = 0          on y = 0

with the lateral columns held fixed and homogeneous Neumann at y = Ly.

Discretization: 5-point Laplacian, backward Euler in the bulk, and a
ghost node below y = 0 eliminated with the interface equation. The
interface nonlinearity is linearized about the previous step with a frozen
slope S = sup|W''|, so the matrix is constant over a run and is factorized
once. The resulting scheme is the exact gradient flow of the edge-based
discrete energy (trapezoid weights in y) with a diagonal metric, so the
discrete energy decreases; the matrix is an M-matrix and the right-hand side
is monotone in the previous state, so the scheme preserves ordering.

Also here: the reduced 1-D fractional Allen-Cahn equation
    eps d_t u + (-Delta)^{1/2} u + (1/eps) W'(u) = 0
solved by an IMEX Fourier scheme, used as the a -> infinity cross-check.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from dislocation_core.config import ConfigurationError, SimulationConfig, SolverConfig
from dislocation_core.grids import Grid1D, Grid2D
from dislocation_core.layer_profile import EXPLICIT_LAYER, LayerProfile
from dislocation_core.potential import SINUSOIDAL, PotentialSpec

logger = logging.getLogger(__name__)


class LinearSolveError(RuntimeError):
    """Raised when the step system is not solved to tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class TrackingError(RuntimeError):
    """Raised when a transition level is not crossed by the trace."""
    pass


class ResolutionError(RuntimeError):
    """Raised when the reduced spectral solution is under-resolved."""

    def __init__(self, message: str, tail_fraction: float):
        super().__init__(message)
        self.tail_fraction = tail_fraction


@dataclass
class Field:
    """u_eps sampled on a Grid2D; values[:, 0] is the interface trace."""
    values: np.ndarray
    grid: Grid2D
    eps: float
    a_exponent: float
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"field values have shape {self.values.shape}, grid is {self.grid.shape}")

    @property
    def trace(self) -> np.ndarray:
        return self.values[:, 0]

    def evolved(self, values: np.ndarray, time: float) -> "Field":
        return Field(values, self.grid, self.eps, self.a_exponent, time)

    def metadata(self) -> dict:
        return {
            "shape": list(self.values.shape),
            "grid": self.grid.to_dict(),
            "eps": self.eps,
            "a": self.a_exponent,
            "time": self.time,
        }


@dataclass
class SolutionRecord:
    """Sampled history of one run."""
    times: list[float] = field(default_factory=list)
    crossings: list[np.ndarray] = field(default_factory=list)
    energy: list[float] = field(default_factory=list)
    dissipation: list[float] = field(default_factory=list)
    snapshots: list[tuple[float, np.ndarray]] = field(default_factory=list)
    config_hash: str = ""
    x: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None
    eps: float = 0.0
    hx: float = 0.0
    band_violation: float = 0.0

    def add(self, time: float, crossings: np.ndarray, energy: float, dissipation: float = 0.0) -> None:
        self.times.append(float(time))
        self.crossings.append(np.asarray(crossings, dtype=float))
        self.energy.append(float(energy))
        self.dissipation.append(float(dissipation))

    @property
    def n_layers(self) -> int:
        return len(self.crossings[0]) if self.crossings else 0

    def crossing_table(self) -> tuple[list[str], np.ndarray]:
        header = ["t"] + [f"x_{i + 1}" for i in range(self.n_layers)]
        return header, np.column_stack([np.array(self.times), np.array(self.crossings)])

    def energy_table(self) -> tuple[list[str], np.ndarray]:
        return ["t", "E", "D"], np.column_stack([self.times, self.energy, self.dissipation])

    def snapshot_at(self, time: float) -> np.ndarray:
        """Stored snapshot closest to the requested time."""
        if not self.snapshots:
            raise ValueError("record holds no snapshots")
        idx = int(np.argmin([abs(t - time) for t, _ in self.snapshots]))
        return self.snapshots[idx][1]


def init_superposition(
    centers,
    eps: float,
    layer: LayerProfile = EXPLICIT_LAYER,
    grid: Optional[Grid2D] = None,
    a: float = 1.0,
) -> Field:
    """
    u0(x, y) = sum_i phi((x - z_i)/eps, y/eps) on the grid.

    Raises:
        ConfigurationError: If the grid does not resolve eps (h > eps/8) or a
            center lies outside (-Lx+1, Lx-1)
    """
    if grid is None:
        raise ConfigurationError("init_superposition needs a grid")
    if not grid.resolves(eps):
        raise ConfigurationError(
            f"unresolved core: hx={grid.hx:.4g}, hy={grid.hy:.4g} exceed eps/8={eps / 8:.4g}"
        )
    z = np.asarray(centers, dtype=float)
    if np.any(z <= -grid.Lx + 1) or np.any(z >= grid.Lx - 1):
        raise ConfigurationError(f"centers {z.tolist()} must lie in (-Lx+1, Lx-1)")
    X, Y = grid.mesh()
    values = np.zeros(grid.shape)
    for zi in z:
        values += np.asarray(layer.value((X - zi) / eps, Y / eps))
    return Field(values, grid, eps, a, 0.0)


def _x_second_difference(n: int, h: float) -> sp.csr_matrix:
    # -d_xx on interior columns, Dirichlet neighbors moved to the right-hand side
    return sp.diags([-np.ones(n - 1), 2.0 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]) / h ** 2


def _y_operator(n: int, h: float) -> sp.csr_matrix:
    main = np.full(n, 2.0 / h ** 2)
    lower = np.full(n - 1, -1.0 / h ** 2)
    upper = np.full(n - 1, -1.0 / h ** 2)
    # interface row: -(u_1 - u_0)/h
    main[0] = 1.0 / h
    upper[0] = -1.0 / h
    # top row: ghost u_n = u_{n-2}
    lower[-1] = -2.0 / h ** 2
    return sp.diags([lower, main, upper], [-1, 0, 1])


class SchemeOperator:
    """The factorized step matrix for one (grid, eps, a, dt, slope) combination."""

    def __init__(self, grid: Grid2D, eps: float, a: float, dt: float, slope: np.ndarray | float):
        self.grid = grid
        self.eps = eps
        self.a = a
        self.dt = dt
        m, ny = grid.nx - 2, grid.ny
        hx, hy = grid.hx, grid.hy

        self.x_weight = np.ones(ny)
        self.x_weight[0] = hy / 2
        self.mass = np.full(ny, eps ** a / dt)
        self.mass[0] = (eps + 0.5 * hy * eps ** a) / dt

        slope_arr = np.broadcast_to(np.asarray(slope, dtype=float), (m,)).copy()
        reaction = np.zeros((m, ny))
        reaction[:, 0] = slope_arr / eps
        self.slope = slope_arr

        stiffness = sp.kron(_x_second_difference(m, hx), sp.diags(self.x_weight)) + sp.kron(
            sp.identity(m), _y_operator(ny, hy)
        )
        diagonal = sp.diags((np.tile(self.mass, m) + reaction.ravel()))
        self.matrix = (stiffness + diagonal).tocsc()
        self._lu = splu(self.matrix)

    def rhs(self, values: np.ndarray, potential: PotentialSpec) -> np.ndarray:
        hx = self.grid.hx
        inner = values[1:-1, :]
        b = inner * self.mass[None, :]
        trace = inner[:, 0]
        b[:, 0] -= (potential.w_prime(trace) - self.slope * trace) / self.eps
        b[0, :] += self.x_weight * values[0, :] / hx ** 2
        b[-1, :] += self.x_weight * values[-1, :] / hx ** 2
        return b.ravel()

    def solve(self, b: np.ndarray, tol: float) -> np.ndarray:
        x = self._lu.solve(b)
        scale = max(1.0, float(np.max(np.abs(b))))
        residual = float(np.max(np.abs(b - self.matrix @ x)))
        if residual > tol * scale:
            x = x + self._lu.solve(b - self.matrix @ x)
            residual = float(np.max(np.abs(b - self.matrix @ x)))
            if residual > tol * scale:
                raise LinearSolveError(
                    f"step residual {residual:.3e} exceeds {tol:.1e} after refinement", residual=residual
                )
        return x

    def advance(self, values: np.ndarray, potential: PotentialSpec, tol: float = 1e-10) -> np.ndarray:
        new = values.copy()
        new[1:-1, :] = self.solve(self.rhs(values, potential), tol).reshape(self.grid.nx - 2, self.grid.ny)
        return new

    def metric(self) -> np.ndarray:
        return _metric(self.grid, self.eps, self.a)


def _metric(grid: Grid2D, eps: float, a: float) -> np.ndarray:
    """Diagonal dissipation metric of the gradient-flow form, per row y_j of an interior column."""
    wy = np.full(grid.ny, grid.hy)
    wy[[0, -1]] *= 0.5
    weights = eps ** (a + 1) * grid.hx * wy
    weights[0] += eps ** 2 * grid.hx
    return weights


@lru_cache(maxsize=16)
def _cached_scheme(grid: Grid2D, eps: float, a: float, dt: float, slope: float) -> SchemeOperator:
    logger.debug(f"Factorizing step matrix for {grid.nx}x{grid.ny}, eps={eps}, a={a}, dt={dt:.3e}")
    return SchemeOperator(grid, eps, a, dt, slope)


def step(
    field_: Field,
    dt: float,
    potential: PotentialSpec = SINUSOIDAL,
    solver: SolverConfig = SolverConfig(),
    cfl_safety: float = 0.25,
) -> Field:
    """
    Advance the field by one time step.

    Args:
        field_: Current field (lateral columns are kept as they are)
        dt: Time step, at most cfl_safety * eps^2
        potential: Potential W
        solver: Linear solve tolerance and linearization mode
        cfl_safety: Time-step safety factor

    Returns:
        New Field at time + dt

    Raises:
        ConfigurationError: If dt violates the step bound
        LinearSolveError: If the linear system is not solved to tolerance
    """
    eps = field_.eps
    if dt <= 0 or dt > cfl_safety * eps ** 2 * (1 + 1e-12):
        raise ConfigurationError(f"dt={dt} violates 0 < dt <= {cfl_safety} * eps^2 = {cfl_safety * eps ** 2}")
    if solver.linearization == "newton":
        slope = potential.w_double_prime(field_.values[1:-1, 0])
        scheme = SchemeOperator(field_.grid, eps, field_.a_exponent, dt, slope)
    else:
        scheme = _cached_scheme(field_.grid, eps, field_.a_exponent, dt, potential.stabilization)
    return field_.evolved(scheme.advance(field_.values, potential, solver.tol), field_.time + dt)


def energy(field_: Field, potential: PotentialSpec = SINUSOIDAL) -> float:
    """
    (eps/2) int int |grad u|^2 + int W(u(x, 0)) dx with trapezoid weights;
    gradients are forward differences, i.e. exact for u linear along an edge
    and second-order accurate at the edge midpoints.
    """
    g = field_.grid
    u = field_.values
    wx, wy = g.trapezoid_weights()
    dx = np.diff(u, axis=0) / g.hx
    dy = np.diff(u, axis=1) / g.hy
    gradient_part = np.sum(wy[None, :] * g.hx * dx ** 2) + np.sum(wx[:, None] * g.hy * dy ** 2)
    interface_part = np.sum(wx * potential.w(u[:, 0]))
    return float(0.5 * field_.eps * gradient_part + interface_part)


def dissipation(old: Field, new: Field, dt: float) -> float:
    """Discrete Rayleigh dissipation of one step: sum of metric * (u_new - u_old)^2 / dt."""
    weights = _metric(old.grid, old.eps, old.a_exponent)
    du = new.values[1:-1, :] - old.values[1:-1, :]
    return float(np.sum(weights[None, :] * du ** 2) / dt)


def track_crossings(boundary_trace, n_layers: int, hx: float, x_start: Optional[float] = None) -> np.ndarray:
    """
    Positions where the trace crosses the levels i - 1/2, i = 1..N.

    Args:
        boundary_trace: Trace samples on a uniform grid
        n_layers: Number of transitions N
        hx: Grid spacing
        x_start: Abscissa of the first sample (default: grid symmetric about 0)

    Returns:
        Strictly increasing crossing positions, linearly interpolated

    Raises:
        TrackingError: If a level is never crossed or crossings are not ordered
    """
    u = np.asarray(boundary_trace, dtype=float)
    if x_start is None:
        x_start = -0.5 * (u.size - 1) * hx
    crossings = np.empty(n_layers)
    for i in range(1, n_layers + 1):
        level = i - 0.5
        below = u[:-1] - level
        above = u[1:] - level
        idx = np.nonzero((below <= 0) & (above > 0))[0]
        if idx.size == 0:
            raise TrackingError(
                f"trace never crosses level {level} (range [{u.min():.4f}, {u.max():.4f}])"
            )
        k = int(idx[0])
        frac = (level - u[k]) / (u[k + 1] - u[k])
        crossings[i - 1] = x_start + (k + frac) * hx
    if np.any(np.diff(crossings) <= 0):
        raise TrackingError(f"crossings are not strictly increasing: {crossings.tolist()}")
    return crossings


def _grid_for(config: SimulationConfig) -> Grid2D:
    return Grid2D(config.domain.Lx, config.domain.Ly, config.nx, config.ny)


def run(
    config: SimulationConfig,
    potential: PotentialSpec = SINUSOIDAL,
    layer: LayerProfile = EXPLICIT_LAYER,
    keep_snapshots: bool = True,
) -> SolutionRecord:
    """
    Integrate the coupled system to T, sampling crossings, energy and
    dissipation every `snapshot_every` steps and at T.

    Args:
        config: Validated simulation configuration (an ExperimentConfig's
            `simulation` works as well)
        potential: Potential W
        layer: Layer used for the initial superposition
        keep_snapshots: Store full fields at every sample time

    Returns:
        SolutionRecord
    """
    config = getattr(config, "simulation", config)
    grid = _grid_for(config)
    n_layers = config.n_layers
    current = init_superposition(config.centers, config.epsilon, layer, grid, config.a)
    if config.solver.lateral == "constant":
        current.values[0, :] = 0.0
        current.values[-1, :] = float(n_layers)

    n_steps = max(1, math.ceil(config.time.T / config.dt - 1e-12))
    dt = config.time.T / n_steps
    record = SolutionRecord(
        config_hash=config.config_hash, x=grid.x, y=grid.y, eps=config.epsilon, hx=grid.hx
    )
    logger.info(
        f"Running coupled solver: eps={config.epsilon}, a={config.a}, N={n_layers}, "
        f"grid {grid.nx}x{grid.ny}, {n_steps} steps of dt={dt:.3e}"
    )

    def sample(f: Field, diss: float) -> None:
        record.add(f.time, track_crossings(f.trace, n_layers, grid.hx, -grid.Lx), energy(f, potential), diss)
        if keep_snapshots:
            record.snapshots.append((f.time, f.values.copy()))
        violation = max(float(-f.values.min()) - 0.1, float(f.values.max()) - n_layers - 0.1, 0.0)
        if violation > 0:
            record.band_violation = max(record.band_violation, violation)
            logger.warning(f"Field left the band [-0.1, N+0.1] by {violation:.3e} at t={f.time:.4g}")

    sample(current, 0.0)
    accumulated = 0.0
    for k in range(1, n_steps + 1):
        nxt = step(current, dt, potential, config.solver, config.time.cfl_safety)
        accumulated += dissipation(current, nxt, dt) * dt
        current = nxt
        if k % config.time.snapshot_every == 0 or k == n_steps:
            sample(current, accumulated)
            accumulated = 0.0
            logger.debug(f"t={current.time:.4g}: crossings {record.crossings[-1].tolist()}, E={record.energy[-1]:.8g}")
    logger.info(f"Run finished at T={current.time:.4g}: crossings {record.crossings[-1].tolist()}")
    return record


def _reference_profile(x: np.ndarray, centers: np.ndarray, eps: float, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Sum of r_alpha((x - z_i)/eps) and its exact half-Laplacian."""
    u = np.zeros_like(x)
    half_lap = np.zeros_like(x)
    for z in centers:
        s = (x - z) / eps
        u += 0.5 + np.arctan(alpha * s) / np.pi
        half_lap += s / (np.pi * eps * (s ** 2 + 1.0 / alpha ** 2))
    return u, half_lap


def solve_reduced_fractional(
    config: SimulationConfig,
    potential: PotentialSpec = SINUSOIDAL,
    tail_tolerance: float = 1e-6,
) -> SolutionRecord:
    """
    IMEX Fourier scheme for eps d_t u + (-Delta)^{1/2} u + (1/eps) W'(u) = 0.

    u = U_ref + v with U_ref the superposition of reference kinks at the
    initial centers; the half-Laplacian of U_ref is exact, v is periodic on
    [-Lx, Lx) with the same spacing as the 2-D grid. The half-Laplacian acts
    implicitly, W' explicitly with the stabilizing slope S.

    Raises:
        ConfigurationError: If the periodic domain is narrower than 4 x span of centers
        ResolutionError: If the top eighth of the spectrum holds more than
            tail_tolerance of the norm of v
    """
    config = getattr(config, "simulation", config)
    eps = config.epsilon
    centers = np.asarray(config.centers, dtype=float)
    span = float(centers[-1] - centers[0]) if centers.size > 1 else 0.0
    width = 2.0 * config.domain.Lx
    if width < 4.0 * span:
        raise ConfigurationError(f"periodic width {width} must be at least 4 x span of centers ({4 * span})")
    hx = 2.0 * config.domain.Lx / (config.nx - 1)
    n = 2 * math.ceil(config.domain.Lx / hx)
    grid = Grid1D(config.domain.Lx, n)
    x = grid.x
    alpha = potential.alpha
    S = potential.stabilization
    absk = np.abs(grid.k)
    top = absk >= (7.0 / 8.0) * np.max(absk)

    reference, reference_half_lap = _reference_profile(x, centers, eps, alpha)
    v_hat = np.zeros(n, dtype=complex)
    n_steps = max(1, math.ceil(config.time.T / config.dt - 1e-12))
    dt = config.time.T / n_steps
    denominator = eps / dt + S / eps + absk

    record = SolutionRecord(config_hash=config.config_hash, x=x, eps=eps, hx=grid.h)
    logger.info(f"Running reduced fractional solver: eps={eps}, n={n}, {n_steps} steps of dt={dt:.3e}")

    def reduced_energy(v: np.ndarray, u: np.ndarray) -> float:
        # renormalized: the infinite self-energy of U_ref is dropped
        dv = np.real(np.fft.ifft(absk * np.fft.fft(v)))
        return float(grid.h * np.sum(0.5 * eps * v * dv + eps * v * reference_half_lap + potential.w(u)))

    def sample(t: float, v: np.ndarray) -> None:
        u = reference + v
        record.add(t, track_crossings(u, centers.size, grid.h, x[0]), reduced_energy(v, u))
        record.snapshots.append((t, u.copy()))

    v = np.zeros(n)
    sample(0.0, v)
    for k in range(1, n_steps + 1):
        u = reference + v
        forcing = -(reference_half_lap + potential.w_prime(u) / eps)
        v_hat = (eps * v_hat / dt + (S / eps) * v_hat + np.fft.fft(forcing)) / denominator
        v = np.real(np.fft.ifft(v_hat))
        if k % config.time.snapshot_every == 0 or k == n_steps:
            total = float(np.sum(np.abs(v_hat) ** 2))
            if total > 1e-28:
                fraction = math.sqrt(float(np.sum(np.abs(v_hat[top]) ** 2)) / total)
                if fraction > tail_tolerance:
                    raise ResolutionError(
                        f"spectral tail fraction {fraction:.2e} exceeds {tail_tolerance:.0e}; refine the grid",
                        tail_fraction=fraction,
                    )
            sample(k * dt, v)
    return record
