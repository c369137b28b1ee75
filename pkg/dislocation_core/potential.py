# dislocation_core/potential.py
"""
The 1-periodic multi-well misfit potential W and its derivatives.

The default is the sinusoidal potential
    W(u) = (1/4pi^2)(1 + cos(2pi(u - 1/2))),
normalized so that W(0) = 0. User potentials are read from a CSV table
(u, W) sampled uniformly over one period and interpolated by a periodic
cubic spline, which gives the C^2 evaluation W'' needs.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from dislocation_core.reports import ValidationReport

logger = logging.getLogger(__name__)

ArrayLike = float | np.ndarray


class PotentialDomainError(ValueError):
    """Raised when a potential is evaluated at a non-finite argument."""
    pass


class PotentialFormatError(ValueError):
    """Raised when a tabulated potential is malformed."""
    pass


class PotentialKind(Enum):
    SINUSOIDAL = "sine"
    USER_TABULATED = "tabulated"


@dataclass(frozen=True)
class PotentialSpec:
    """A 1-periodic potential with its first and second derivatives."""
    kind: PotentialKind
    w: Callable[[np.ndarray], np.ndarray]
    w_prime: Callable[[np.ndarray], np.ndarray]
    w_double_prime: Callable[[np.ndarray], np.ndarray]
    period: float = 1.0
    source: str = "sine"

    @property
    def alpha(self) -> float:
        """W''(0), the curvature of the wells."""
        return float(self.w_double_prime(np.array(0.0)))

    @property
    def stabilization(self) -> float:
        """sup |W''| over one period, the frozen slope used by the implicit boundary solve."""
        if self.kind is PotentialKind.SINUSOIDAL:
            return 1.0
        u = np.linspace(0.0, self.period, 4001)
        return float(np.max(np.abs(self.w_double_prime(u))))

    @property
    def periodicity_tolerance(self) -> float:
        return 1e-12 if self.kind is PotentialKind.SINUSOIDAL else 1e-8


def _sine_w(u: np.ndarray) -> np.ndarray:
    return (1.0 + np.cos(2.0 * np.pi * (u - 0.5))) / (4.0 * np.pi ** 2)


def _sine_w_prime(u: np.ndarray) -> np.ndarray:
    return -np.sin(2.0 * np.pi * (u - 0.5)) / (2.0 * np.pi)


def _sine_w_double_prime(u: np.ndarray) -> np.ndarray:
    return -np.cos(2.0 * np.pi * (u - 0.5))


SINUSOIDAL = PotentialSpec(
    kind=PotentialKind.SINUSOIDAL,
    w=_sine_w,
    w_prime=_sine_w_prime,
    w_double_prime=_sine_w_double_prime,
)


def tabulated_potential(u: np.ndarray, w: np.ndarray, source: str = "table") -> PotentialSpec:
    """
    Build a periodic potential from samples over one period.

    Args:
        u: Uniformly spaced sample points covering one period, either [u0, u0+1)
           or closed [u0, u0+1]
        w: Potential values at u
        source: Label recorded in reports and metadata

    Returns:
        PotentialSpec backed by a periodic cubic spline

    Raises:
        PotentialFormatError: If sampling is non-uniform or does not span one period
    """
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    if u.ndim != 1 or u.shape != w.shape or u.size < 8:
        raise PotentialFormatError(f"table needs matching 1-D columns with at least 8 rows, got {u.shape}, {w.shape}")
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(w))):
        raise PotentialFormatError("table contains non-finite values")
    steps = np.diff(u)
    h = steps[0]
    if h <= 0 or not np.allclose(steps, h, rtol=1e-9, atol=0.0):
        raise PotentialFormatError("tabulated potential must be sampled on a uniform increasing grid")

    span = u[-1] - u[0]
    if abs(span - 1.0) <= 1e-9:
        if abs(w[-1] - w[0]) > 1e-8:
            raise PotentialFormatError(
                f"closed table must repeat its first value at the end: W({u[0]})={w[0]}, W({u[-1]})={w[-1]}"
            )
        u_closed, w_closed = u, w.copy()
        w_closed[-1] = w_closed[0]
    elif abs(span + h - 1.0) <= 1e-9:
        u_closed = np.append(u, u[0] + 1.0)
        w_closed = np.append(w, w[0])
    else:
        raise PotentialFormatError(f"table spans {span} but must cover exactly one period")

    spline = CubicSpline(u_closed, w_closed, bc_type="periodic")
    d1 = spline.derivative(1)
    d2 = spline.derivative(2)
    u0 = u_closed[0]

    def wrap(x: np.ndarray) -> np.ndarray:
        return u0 + np.mod(np.asarray(x, dtype=float) - u0, 1.0)

    logger.debug(f"Tabulated potential from {source}: {u.size} samples, h={h:.4g}")
    return PotentialSpec(
        kind=PotentialKind.USER_TABULATED,
        w=lambda x: spline(wrap(x)),
        w_prime=lambda x: d1(wrap(x)),
        w_double_prime=lambda x: d2(wrap(x)),
        source=source,
    )


def load_potential(value: str) -> PotentialSpec:
    """
    Resolve the "potential" configuration key.

    Args:
        value: Either "sine" or a path to a CSV with header row and columns (u, W)

    Returns:
        PotentialSpec

    Raises:
        PotentialFormatError: If the file is missing or malformed
    """
    if value.strip().lower() in ("sine", "sinusoidal"):
        return SINUSOIDAL
    path = Path(value)
    if not path.exists():
        raise PotentialFormatError(f"potential table not found: {path}")
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as e:
        raise PotentialFormatError(f"could not parse potential table {path}: {e}") from e
    if data.shape[1] != 2:
        raise PotentialFormatError(f"potential table must have exactly 2 columns (u, W), got {data.shape[1]}")
    return tabulated_potential(data[:, 0], data[:, 1], source=str(path))


def _checked(u: ArrayLike) -> np.ndarray:
    arr = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise PotentialDomainError(f"potential evaluated at non-finite argument: {u}")
    return arr


def _out(arr: np.ndarray, original: ArrayLike) -> ArrayLike:
    return float(arr) if np.ndim(original) == 0 else arr


def w_value(u: ArrayLike, spec: PotentialSpec = SINUSOIDAL) -> ArrayLike:
    """W(u); nonnegative, zero on the integers."""
    return _out(spec.w(_checked(u)), u)


def w_prime(u: ArrayLike, spec: PotentialSpec = SINUSOIDAL) -> ArrayLike:
    return _out(spec.w_prime(_checked(u)), u)


def w_double_prime(u: ArrayLike, spec: PotentialSpec = SINUSOIDAL) -> ArrayLike:
    return _out(spec.w_double_prime(_checked(u)), u)


def validate_potential(spec: PotentialSpec, samples: int = 1000) -> ValidationReport:
    """
    Check the structural conditions on W: periodicity, zeros at the integers,
    positivity off the integers, W''(0) > 0 and derivative consistency.

    Args:
        spec: Potential to validate
        samples: Number of sample points on [-2, 2] (>= 100)

    Returns:
        ValidationReport with one check per condition and the fitted
        finite-difference constant
    """
    if samples < 100:
        raise ValueError(f"samples must be >= 100, got {samples}")

    report = ValidationReport(title=f"potential:{spec.source}")
    u = np.linspace(-2.0, 2.0, samples)

    period_err = float(np.max(np.abs(spec.w(u + spec.period) - spec.w(u))))
    report.add("periodicity", period_err <= spec.periodicity_tolerance, period_err, spec.periodicity_tolerance)

    integers = np.arange(-2.0, 3.0)
    zero_err = float(np.max(np.abs(spec.w(integers))))
    report.add("zero_on_integers", zero_err <= spec.periodicity_tolerance, zero_err, spec.periodicity_tolerance)

    # include the table nodes so an injected zero is never skipped over
    interior = np.linspace(0.05, 0.95, samples)
    if spec.kind is PotentialKind.USER_TABULATED:
        nodes = np.linspace(0.0, 1.0, samples + 1)
        interior = np.union1d(interior, nodes[(nodes >= 0.05) & (nodes <= 0.95)])
    min_w = float(np.min(spec.w(interior)))
    report.add("positive_off_integers", min_w > 0.0, min_w, 0.0)

    alpha = spec.alpha
    report.add("convex_at_zero", alpha > 0.0, alpha, 0.0)

    # centered difference error should shrink ~4x on halving h, or sit at roundoff
    h = 1e-3
    err_h = float(np.max(np.abs(spec.w_prime(u) - (spec.w(u + h) - spec.w(u - h)) / (2 * h))))
    err_h2 = float(np.max(np.abs(spec.w_prime(u) - (spec.w(u + h / 2) - spec.w(u - h / 2)) / h)))
    fitted_c = err_h / h ** 2
    second_order = err_h <= 1e-10 or err_h2 <= err_h / 3.0
    report.add("derivative_consistency", second_order, err_h, fitted_c * h ** 2, ratio=err_h / max(err_h2, 1e-300))
    report.constants["fd_constant"] = fitted_c

    if not report.passed:
        for check in report.failed():
            logger.warning(f"Potential {spec.source}: check '{check.name}' failed (measured {check.measured:.3e})")
    return report
