# dislocation_core/harmonic.py
"""
Bounded harmonic extensions into the upper half-plane.

Two evaluators:
- poisson_extend: adaptive quadrature of the Poisson integral for any
  bounded trace, after the substitution zeta = x + y*tan(theta) which maps
  the real line to (-pi/2, pi/2) and makes the kernel uniform.
- SpectralExtension: for traces sampled on a periodic Grid1D that decay
  at infinity; each Fourier mode is damped by exp(-|k| y). Supports the
  value, both partial derivatives and the harmonic conjugate.
"""

import logging
from typing import Callable, Iterable, Optional

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from dislocation_core.grids import Grid1D

logger = logging.getLogger(__name__)

Trace = Callable[[float], float]

_KINDS = ("value", "dx", "dy", "conjugate")


class TraceDomainError(ValueError):
    """Raised when a trace cannot be extended (unbounded, or y < 0)."""
    pass


def _check_bounded(trace: Trace) -> None:
    near = [trace(s) for s in (-1e6, 1e6)]
    far = [trace(s) for s in (-1e12, 1e12)]
    values = np.array(near + far, dtype=float)
    if not np.all(np.isfinite(values)):
        raise TraceDomainError("trace is not finite at large |x|")
    if np.max(np.abs(far)) > 10.0 * max(1.0, float(np.max(np.abs(near)))):
        raise TraceDomainError("trace appears unbounded; the Poisson extension does not exist")


def poisson_extend(
    trace: Trace,
    x: float,
    y: float,
    breakpoints: Iterable[float] = (),
    check_bounded: bool = True,
) -> float:
    """
    Harmonic extension (1/pi) * int trace(zeta) y / ((x-zeta)^2 + y^2) dzeta.

    Args:
        trace: Bounded function on the real line
        x: Target abscissa
        y: Target height (y = 0 returns the trace itself)
        breakpoints: Points where the trace is not smooth (jumps, kinks)
        check_bounded: Sample the trace at |zeta| = 1e6, 1e12 first

    Returns:
        Extension value at (x, y)

    Raises:
        TraceDomainError: If y < 0 or the trace is unbounded
    """
    if y < 0:
        raise TraceDomainError(f"extension requested below the interface, y={y}")
    if check_bounded:
        _check_bounded(trace)
    if y == 0:
        return float(trace(x))

    points = sorted(float(np.arctan((b - x) / y)) for b in breakpoints)
    value, _ = integrate.quad(
        lambda theta: trace(x + y * np.tan(theta)),
        -np.pi / 2,
        np.pi / 2,
        points=points or None,
        epsabs=1e-12,
        epsrel=1e-12,
        limit=400,
    )
    return value / np.pi


def conjugate_poisson_extend(trace: Trace, x: float, y: float) -> float:
    """Harmonic conjugate (1/pi) * int trace(zeta) (x-zeta) / ((x-zeta)^2 + y^2) dzeta of a decaying trace."""
    if y <= 0:
        raise TraceDomainError(f"conjugate extension needs y > 0, got {y}")
    value, _ = integrate.quad(
        lambda theta: -trace(x + y * np.tan(theta)) * np.tan(theta),
        -np.pi / 2,
        np.pi / 2,
        epsabs=1e-12,
        epsrel=1e-10,
        limit=400,
    )
    return value / np.pi


class SpectralExtension:
    """
    Harmonic extension of a decaying trace sampled on a periodic grid.

    Inside |x| <= 3L/4, y <= L/4 the extension is evaluated mode by mode and
    interpolated in x by a periodic cubic spline per distinct height; outside
    that window it falls back to quadrature of the trace (grid spline inside,
    `far_field` beyond the grid).
    """

    def __init__(self, grid: Grid1D, values: np.ndarray, far_field: Optional[Trace] = None):
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.n,):
            raise ValueError(f"trace has shape {values.shape}, grid expects ({grid.n},)")
        self.grid = grid
        self._hat = np.fft.fft(values)
        self._far = far_field if far_field is not None else (lambda s: 0.0)
        self._rows: dict[tuple[float, str], CubicSpline] = {}
        self._trace_spline = self._periodic_spline(values)

    def _periodic_spline(self, row: np.ndarray) -> CubicSpline:
        x = np.append(self.grid.x, self.grid.L)
        return CubicSpline(x, np.append(row, row[0]), bc_type="periodic")

    def trace(self, s: float) -> float:
        if abs(s) < self.grid.L:
            return float(self._trace_spline(s))
        return float(self._far(s))

    def _row(self, y: float, kind: str) -> CubicSpline:
        key = (y, kind)
        spline = self._rows.get(key)
        if spline is None:
            k = self.grid.k
            damp = np.exp(-np.abs(k) * y)
            if kind == "value":
                mult = damp
            elif kind == "dx":
                mult = 1j * k * damp
            elif kind == "dy":
                mult = -np.abs(k) * damp
            else:
                mult = -1j * np.sign(k) * damp
            spline = self._periodic_spline(np.real(np.fft.ifft(self._hat * mult)))
            # bounded cache; heights repeat heavily within one check
            if len(self._rows) > 4096:
                self._rows.clear()
            self._rows[key] = spline
        return spline

    def _far_value(self, x: float, y: float, kind: str) -> float:
        if kind == "value":
            return poisson_extend(self.trace, x, y, check_bounded=False)
        if kind == "conjugate":
            return conjugate_poisson_extend(self.trace, x, y)
        step = 1e-4 * max(1.0, y)
        if kind == "dx":
            return (
                poisson_extend(self.trace, x + step, y, check_bounded=False)
                - poisson_extend(self.trace, x - step, y, check_bounded=False)
            ) / (2 * step)
        lower = max(y - step, 0.0)
        return (
            poisson_extend(self.trace, x, y + step, check_bounded=False)
            - poisson_extend(self.trace, x, lower, check_bounded=False)
        ) / (y + step - lower)

    def evaluate(self, x, y, kind: str = "value"):
        """
        Evaluate the extension (or a derivative / the conjugate) at points.

        Args:
            x: Abscissae (scalar or array)
            y: Heights, broadcast against x; must be >= 0
            kind: One of "value", "dx", "dy", "conjugate"

        Returns:
            Array (or float for scalar input) of values
        """
        if kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}, got '{kind}'")
        scalar = np.ndim(x) == 0 and np.ndim(y) == 0
        xs, ys = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        if np.any(ys < 0):
            raise TraceDomainError("extension requested below the interface")
        out = np.empty(xs.shape, dtype=float)
        near = (np.abs(xs) <= 0.75 * self.grid.L) & (ys <= 0.25 * self.grid.L)
        for height in np.unique(ys[near]):
            mask = near & (ys == height)
            out[mask] = self._row(float(height), kind)(xs[mask])
        far_idx = np.argwhere(~near)
        if far_idx.size:
            logger.debug(f"Quadrature fallback for {far_idx.shape[0]} far-field points")
        for idx in far_idx:
            idx = tuple(idx)
            out[idx] = self._far_value(float(xs[idx]), float(ys[idx]), kind)
        return float(out) if scalar else out


def half_laplacian(grid: Grid1D, values: np.ndarray) -> np.ndarray:
    """(-Delta)^{1/2} on the periodic grid, equal to -d/dy of the extension at y=0."""
    return grid.half_laplacian(values)
