# dislocation_core/particle_ode.py
"""
Repulsive particle system for the dislocation centers,
    dz_i/dt = (c0/pi) * (sum_{j != i} 1/(z_i - z_j) + s),
with s = -delta (super orientation), 0, or +delta (sub orientation).
Perturbed runs also shift the initial data by -delta / +delta.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from dislocation_core.reports import Report

logger = logging.getLogger(__name__)

COLLISION_GAP = 1e-8


class ParticleSingularityError(ValueError):
    """Raised when two positions coincide or the ordering is broken."""
    pass


class ParticleCollisionError(RuntimeError):
    """Raised when the integrator stalls because two particles nearly collide."""

    def __init__(self, message: str, blow_up_time: float):
        super().__init__(message)
        self.blow_up_time = blow_up_time


class NotApplicableError(ValueError):
    """Raised when a check is requested for a trajectory it does not apply to."""
    pass


class Orientation(Enum):
    """Sign of the constant drift added to every particle."""
    SUPER = -1
    NONE = 0
    SUB = 1

    @classmethod
    def parse(cls, value: "str | Orientation") -> "Orientation":
        if isinstance(value, Orientation):
            return value
        normalized = value.strip().lower()
        for member in cls:
            if member.name.lower() == normalized:
                return member
        raise ValueError(f"orientation must be one of super, none, sub; got '{value}'")


@dataclass(frozen=True)
class ParticleState:
    positions: tuple[float, ...]
    time: float = 0.0

    def __post_init__(self):
        if len(self.positions) < 1:
            raise ValueError("a particle state needs at least one position")
        if self.time < 0:
            raise ValueError(f"time must be nonnegative, got {self.time}")
        _check_ordered(np.asarray(self.positions, dtype=float))

    @property
    def n(self) -> int:
        return len(self.positions)


def _check_ordered(z: np.ndarray) -> None:
    gaps = np.diff(z)
    if np.any(gaps == 0):
        raise ParticleSingularityError(f"coincident positions: {z.tolist()}")
    if np.any(gaps < 0):
        raise ParticleSingularityError(f"positions must be strictly increasing: {z.tolist()}")


def _pair_sum(z: np.ndarray) -> np.ndarray:
    diff = z[:, None] - z[None, :]
    np.fill_diagonal(diff, np.inf)
    return np.sum(1.0 / diff, axis=1)


def force(
    positions,
    c0: float,
    delta: float = 0.0,
    orientation: "Orientation | str" = Orientation.NONE,
) -> np.ndarray:
    """
    Velocities of the particle system.

    Args:
        positions: Strictly increasing positions z_1 < ... < z_N
        c0: Mobility constant
        delta: Size of the constant drift
        orientation: SUPER (-delta), NONE (0) or SUB (+delta)

    Returns:
        Array of velocities v_i

    Raises:
        ParticleSingularityError: If positions coincide or are unordered
    """
    z = np.asarray(positions, dtype=float)
    _check_ordered(z)
    s = Orientation.parse(orientation).value * delta
    return (c0 / np.pi) * (_pair_sum(z) + s)


def acceleration(positions, velocities, c0: float) -> np.ndarray:
    """Time derivative of the velocities along a trajectory: -(c0/pi) sum_j (v_i - v_j)/(z_i - z_j)^2."""
    z = np.asarray(positions, dtype=float)
    v = np.asarray(velocities, dtype=float)
    dz = z[:, None] - z[None, :]
    np.fill_diagonal(dz, np.inf)
    dv = v[:, None] - v[None, :]
    return -(c0 / np.pi) * np.sum(dv / dz ** 2, axis=1)


class ParticleTrajectory:
    """
    Accepted integrator steps plus a cubic Hermite dense output.

    Velocities at arbitrary times are re-evaluated from the governing
    right-hand side, and accelerations from its analytic derivative.
    """

    def __init__(
        self,
        times: np.ndarray,
        positions: np.ndarray,
        c0: float,
        delta: float = 0.0,
        orientation: Orientation = Orientation.NONE,
    ):
        self.times = np.asarray(times, dtype=float)
        self.positions = np.asarray(positions, dtype=float).reshape(len(self.times), -1)
        self.c0 = float(c0)
        self.delta = float(delta)
        self.orientation = orientation
        self.velocities = np.array([self._rhs(z) for z in self.positions])
        if len(self.times) > 1:
            self._dense: Optional[CubicHermiteSpline] = CubicHermiteSpline(
                self.times, self.positions, self.velocities, axis=0
            )
        else:
            self._dense = None

    def _rhs(self, z: np.ndarray) -> np.ndarray:
        return force(z, self.c0, self.delta, self.orientation)

    @property
    def n(self) -> int:
        return self.positions.shape[1]

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def samples(self) -> list[tuple[float, ParticleState]]:
        return [(float(t), ParticleState(tuple(z), float(t))) for t, z in zip(self.times, self.positions)]

    def _check_time(self, t) -> None:
        t = np.asarray(t, dtype=float)
        slack = 1e-12 * max(1.0, self.T)
        if np.any(t < -slack) or np.any(t > self.T + slack):
            raise ValueError(f"time outside trajectory span [0, {self.T}]: {t}")

    def position_at(self, t: float) -> np.ndarray:
        self._check_time(t)
        if self._dense is None:
            return self.positions[0].copy()
        return self._dense(np.clip(t, 0.0, self.T))

    def velocity_at(self, t: float) -> np.ndarray:
        return self._rhs(self.position_at(t))

    def acceleration_at(self, t: float) -> np.ndarray:
        z = self.position_at(t)
        return acceleration(z, self._rhs(z), self.c0)

    def min_distance(self) -> np.ndarray:
        if self.n < 2:
            return np.full(len(self.times), np.inf)
        return np.min(np.diff(self.positions, axis=1), axis=1)

    def to_table(self) -> tuple[list[str], np.ndarray]:
        """Rows (t, z_1..z_N, v_1..v_N) for CSV export."""
        header = ["t"] + [f"z_{i + 1}" for i in range(self.n)] + [f"v_{i + 1}" for i in range(self.n)]
        return header, np.column_stack([self.times, self.positions, self.velocities])


def integrate(
    initial: ParticleState,
    c0: float,
    delta: float = 0.0,
    orientation: "Orientation | str" = Orientation.NONE,
    T: float = 1.0,
    tol: float = 1e-9,
) -> ParticleTrajectory:
    """
    Integrate the particle system on [0, T] with an embedded RK 4(5) pair.

    Perturbed orientations start from z_i^0 - delta (SUPER) or z_i^0 + delta (SUB).
    The system is integrated in the frame moving with the center of mass, which
    makes translated initial data produce exactly translated trajectories.

    Args:
        initial: Ordered initial positions
        c0: Mobility constant
        delta: Perturbation size (>= 0)
        orientation: SUPER, NONE or SUB
        T: Final time (> 0)
        tol: Relative tolerance in [1e-12, 1e-6]

    Returns:
        ParticleTrajectory over the accepted steps

    Raises:
        ParticleCollisionError: If a gap falls below 1e-8 or the step size underflows
    """
    orientation = Orientation.parse(orientation)
    if not 1e-12 <= tol <= 1e-6:
        raise ValueError(f"tol must lie in [1e-12, 1e-6], got {tol}")
    if T <= 0:
        raise ValueError(f"T must be positive, got {T}")
    if delta < 0:
        raise ValueError(f"delta must be nonnegative, got {delta}")

    s = orientation.value * delta
    z0 = np.asarray(initial.positions, dtype=float) + s
    center = float(np.mean(z0))
    drift = (c0 / np.pi) * s
    zeta0 = z0 - center

    def rhs(t, zeta):
        return (c0 / np.pi) * _pair_sum(zeta)

    def collision(t, zeta):
        if zeta.size < 2:
            return 1.0
        return float(np.min(np.diff(zeta))) - COLLISION_GAP

    collision.terminal = True
    collision.direction = -1

    logger.debug(f"Integrating N={len(z0)} particles to T={T} (orientation={orientation.name}, delta={delta})")
    solution = solve_ivp(rhs, (0.0, T), zeta0, method="RK45", rtol=tol, atol=tol * 1e-3, events=collision)
    if solution.status != 0:
        blow_up = float(solution.t[-1])
        raise ParticleCollisionError(
            f"particle integration stopped at t={blow_up:.6g}: {solution.message}", blow_up_time=blow_up
        )

    times = solution.t
    positions = solution.y.T + center + drift * times[:, None]
    positions[0] = z0
    return ParticleTrajectory(times, positions, c0, delta, orientation)


def two_body_oracle(d0: float, c0: float, t: float) -> float:
    """Separation of two particles: sqrt(d0^2 + (4 c0 / pi) t)."""
    if d0 <= 0:
        raise ValueError(f"d0 must be positive, got {d0}")
    return float(np.sqrt(d0 ** 2 + 4.0 * c0 * t / np.pi))


def check_distance_bound(traj: ParticleTrajectory, tol: float = 1e-9) -> Report:
    """
    Minimal-distance bound d(t)^2 >= 8 kappa t / (N^2 - 1) + d(0)^2 with kappa = min(1, c0/pi).

    Raises:
        NotApplicableError: For perturbed trajectories or N < 2
    """
    if traj.delta != 0.0 or traj.orientation is not Orientation.NONE:
        raise NotApplicableError("distance bound applies to unperturbed trajectories only")
    if traj.n < 2:
        raise NotApplicableError("distance bound needs at least two particles")
    kappa = min(1.0, traj.c0 / np.pi)
    d = traj.min_distance()
    bound_sq = 8.0 * kappa * traj.times / (traj.n ** 2 - 1) + d[0] ** 2
    slack = d ** 2 - bound_sq
    worst = float(np.min(slack))

    report = Report(title=f"distance_bound N={traj.n}")
    report.add("distance_bound", worst >= -tol, worst, -tol, worst_time=float(traj.times[int(np.argmin(slack))]))
    report.constants["min_slack"] = worst
    report.constants["kappa"] = kappa
    if not report.passed:
        logger.warning(f"Distance bound violated: minimal slack {worst:.3e}")
    return report
