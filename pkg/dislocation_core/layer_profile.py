# dislocation_core/layer_profile.py
"""
Stationary transition layer phi: harmonic in the upper half-plane, with the
nonlinear boundary condition d_y phi = W'(phi) on y = 0, connecting 0 at
x = -inf to 1 at x = +inf, and normalized by phi(0, 0) = 1/2.

For the sinusoidal potential the layer is explicit,
    phi(x, y) = 1/2 + (1/pi) arctan(x / (y + 1)).
For a general potential only the trace is unknown (the bulk is harmonic),
so the layer is computed from the 1-D nonlocal equation
    (-Delta)^{1/2} phi0 + W'(phi0) = 0
on a periodic grid. The trace is written phi0 = r_alpha + v with the
reference kink r_alpha(x) = 1/2 + (1/pi) arctan(alpha x), whose extension and
half-Laplacian are known in closed form, so v decays like 1/x^2 and the
periodic spectral half-Laplacian applies to it without wrap-around error.
"""

import logging
from enum import Enum
from typing import Iterable, Optional

import numpy as np
from scipy import integrate
from scipy.sparse.linalg import LinearOperator, gmres

from dislocation_core.grids import Grid1D
from dislocation_core.harmonic import SpectralExtension, poisson_extend
from dislocation_core.potential import SINUSOIDAL, PotentialSpec
from dislocation_core.reports import Report

logger = logging.getLogger(__name__)

__all__ = [
    "LayerDomainError",
    "LayerConvergenceError",
    "LayerNumericalError",
    "LayerKind",
    "LayerProfile",
    "EXPLICIT_LAYER",
    "phi_explicit",
    "phi_gradient",
    "compute_constants",
    "poisson_extend",
    "scaled_layer_bound_check",
    "solve_layer_general",
    "arctan_limit",
]


class LayerDomainError(ValueError):
    """Raised when the layer is evaluated below the interface."""
    pass


class LayerConvergenceError(RuntimeError):
    """Raised when the general layer iteration does not converge."""

    def __init__(self, message: str, residual_history: list[float]):
        super().__init__(message)
        self.residual_history = residual_history


class LayerNumericalError(RuntimeError):
    """Raised when a layer computation produces non-finite or non-monotone output."""
    pass


class LayerKind(Enum):
    EXPLICIT_ARCTAN = "explicit"
    TABULATED = "general"


def _check_y(y) -> None:
    if np.any(np.asarray(y) < 0):
        raise LayerDomainError(f"layer evaluated at y < 0: {y}")


def _out(arr, *inputs):
    return float(arr) if all(np.ndim(v) == 0 for v in inputs) else arr


def phi_explicit(x, y=0.0):
    """Explicit sinusoidal layer 1/2 + (1/pi) arctan(x / (y+1))."""
    _check_y(y)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return _out(0.5 + np.arctan2(x, y + 1.0) / np.pi, x, y)


def _reference_gradient(x, y, scale):
    # gradient of 1/2 + (1/pi) arctan(x / (y + scale))
    ys = y + scale
    denom = np.pi * (ys ** 2 + x ** 2)
    return ys / denom, -x / denom


def arctan_limit(x, y):
    """Bulk limit profile of one layer: (1/pi)(pi/2 + arctan(x / y)), y > 0."""
    return 0.5 + np.arctan2(x, y) / np.pi


class LayerProfile:
    """
    A transition layer with its harmonic extension.

    Attributes:
        kind: ExplicitArctan or Tabulated
        c0: Mobility constant, 1 / int (d_x phi(x, 0))^2 dx
        alpha: W''(0)
        tail_constant: Coefficient of the 1/(alpha pi x) tail, i.e. 1/(alpha pi)
        grid: Solve grid (tabulated layers only)
    """

    def __init__(
        self,
        kind: LayerKind,
        c0: float,
        alpha: float,
        grid: Optional[Grid1D] = None,
        correction: Optional[np.ndarray] = None,
        residual_history: Optional[list[float]] = None,
    ):
        if c0 <= 0 or alpha <= 0:
            raise ValueError(f"layer constants must be positive, got c0={c0}, alpha={alpha}")
        self.kind = kind
        self.c0 = float(c0)
        self.alpha = float(alpha)
        self.tail_constant = 1.0 / (self.alpha * np.pi)
        self.grid = grid
        self.residual_history = list(residual_history or [])
        self._extension: Optional[SpectralExtension] = None
        if kind is LayerKind.TABULATED:
            if grid is None or correction is None:
                raise ValueError("tabulated layer needs a grid and a correction trace")
            self._correction = np.asarray(correction, dtype=float)
            self._extension = SpectralExtension(grid, self._correction)
        else:
            self._correction = None

    @property
    def reference_scale(self) -> float:
        """Offset s of the reference kink 1/2 + (1/pi) arctan(x / (y + s)); s = 1/alpha."""
        return 1.0 if self.kind is LayerKind.EXPLICIT_ARCTAN else 1.0 / self.alpha

    def value(self, x, y=0.0):
        """phi(x, y)."""
        _check_y(y)
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        base = 0.5 + np.arctan2(x, y + self.reference_scale) / np.pi
        if self._extension is not None:
            base = base + self._extension.evaluate(x, y, "value")
        return _out(base, x, y)

    def trace(self, x):
        return self.value(x, 0.0)

    def trace_derivative(self, x):
        """d_x phi(x, 0) without evaluating d_y."""
        x = np.asarray(x, dtype=float)
        gx = _reference_gradient(x, 0.0, self.reference_scale)[0]
        if self._extension is not None:
            gx = gx + self._extension.evaluate(x, 0.0, "dx")
        return _out(gx, x)

    @property
    def correction_extension(self) -> Optional[SpectralExtension]:
        """Extension of phi0 - r_alpha for tabulated layers, None for the explicit layer."""
        return self._extension

    def gradient(self, x, y=0.0):
        """(d_x phi, d_y phi) at (x, y)."""
        _check_y(y)
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        gx, gy = _reference_gradient(x, y, self.reference_scale)
        if self._extension is not None:
            gx = gx + self._extension.evaluate(x, y, "dx")
            gy = gy + self._extension.evaluate(x, y, "dy")
        return _out(gx, x, y), _out(gy, x, y)

    def conjugate(self, x, y=0.0):
        """Harmonic conjugate chi with d_y chi = d_x phi and d_x chi = -d_y phi (defined up to a constant)."""
        _check_y(y)
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        chi = np.log(x ** 2 + (y + self.reference_scale) ** 2) / (2.0 * np.pi)
        if self._extension is not None:
            chi = chi + self._extension.evaluate(x, y, "conjugate")
        return _out(chi, x, y)

    def table(self) -> tuple[np.ndarray, np.ndarray]:
        """Trace samples (x, phi0) on the solve grid."""
        grid = self.grid if self.grid is not None else Grid1D(L=512.0, n=8192)
        phi0 = 0.5 + np.arctan(grid.x / self.reference_scale) / np.pi
        if self._correction is not None:
            phi0 = phi0 + self._correction
        return grid.x, phi0

    def grid_derivative(self) -> np.ndarray:
        """d_x phi(x, 0) on the solve grid, spectrally differentiated."""
        grid = self.grid if self.grid is not None else Grid1D(L=512.0, n=8192)
        dphi = _reference_gradient(grid.x, 0.0, self.reference_scale)[0]
        if self._correction is not None:
            dphi = dphi + grid.derivative(self._correction)
        return dphi

    @classmethod
    def from_table(cls, grid: Grid1D, phi0: np.ndarray, c0: float, alpha: float) -> "LayerProfile":
        """Rebuild a tabulated layer from its trace samples."""
        phi0 = np.asarray(phi0, dtype=float)
        reference = 0.5 + np.arctan(alpha * grid.x) / np.pi
        return cls(LayerKind.TABULATED, c0, alpha, grid=grid, correction=phi0 - reference)

    def to_dict(self) -> dict:
        data = {"kind": self.kind.value, "c0": self.c0, "alpha": self.alpha, "tail_constant": self.tail_constant}
        if self.grid is not None:
            data["grid"] = {"L": self.grid.L, "n": self.grid.n}
        return data


EXPLICIT_LAYER = LayerProfile(LayerKind.EXPLICIT_ARCTAN, c0=2.0 * np.pi, alpha=1.0)


def phi_gradient(x, y=0.0, layer: LayerProfile = EXPLICIT_LAYER):
    """
    Gradient of the layer.

    For the explicit layer d_x phi = (1/pi)(y+1)/((y+1)^2 + x^2).
    """
    return layer.gradient(x, y)


def compute_constants(layer: LayerProfile, potential: PotentialSpec = SINUSOIDAL) -> tuple[float, float]:
    """
    Recompute (c0, alpha) from the layer trace and the potential.

    c0 = 1 / int (d_x phi(x, 0))^2 dx; beyond the solve grid the derivative is
    replaced by the tail 1/(alpha pi x^2), which contributes 2/(3 alpha^2 pi^2 X^3).

    Raises:
        LayerNumericalError: If the integral is not finite and positive
    """
    alpha = float(potential.w_double_prime(np.array(0.0)))
    if layer.kind is LayerKind.EXPLICIT_ARCTAN or layer.grid is None:
        integral, _ = integrate.quad(
            lambda s: layer.gradient(s, 0.0)[0] ** 2, -np.inf, np.inf, epsabs=1e-14, epsrel=1e-12, limit=400
        )
    else:
        grid = layer.grid
        dphi = layer.grid_derivative()
        inner = grid.h * np.sum(dphi ** 2)
        edge = grid.L
        integral = inner + 2.0 / (3.0 * alpha ** 2 * np.pi ** 2 * edge ** 3)
    if not np.isfinite(integral) or integral <= 0:
        raise LayerNumericalError(f"trace derivative is not square integrable (integral={integral})")
    return 1.0 / integral, alpha


def scaled_layer_bound_check(
    eps: float,
    points: Iterable[tuple[float, float]],
    layer: LayerProfile = EXPLICIT_LAYER,
    C: float = 5.0,
) -> Report:
    """
    Bracket the rescaled layer phi(x/eps, y/eps) by arctan profiles shifted by sqrt(eps).

    Verifies
        (1/pi)(pi/2 + arctan((x - sqrt(eps))/y)) - C sqrt(eps)
            <= phi(x/eps, y/eps) <=
        (1/pi)(pi/2 + arctan((x + sqrt(eps))/y)) + C sqrt(eps)
    and reports the smallest C that works and the sup gap to the eps -> 0 limit.
    """
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    pts = np.asarray(list(points), dtype=float).reshape(-1, 2)
    x, y = pts[:, 0], pts[:, 1]
    if np.any(y <= 0):
        raise LayerDomainError("bound check needs y > 0")
    root = np.sqrt(eps)
    value = np.asarray(layer.value(x / eps, y / eps))
    lower = arctan_limit(x - root, y)
    upper = arctan_limit(x + root, y)
    violation = np.maximum(lower - value, value - upper)
    fitted = max(0.0, float(np.max(violation))) / root
    gap = float(np.max(np.abs(value - arctan_limit(x, y))))

    report = Report(title=f"scaled_layer_bound eps={eps}")
    report.add("lower_bracket", bool(np.all(value >= lower - C * root)), float(np.max(lower - value)), C * root)
    report.add("upper_bracket", bool(np.all(value <= upper + C * root)), float(np.max(value - upper)), C * root)
    report.constants["fitted_C"] = fitted
    report.constants["sup_gap_to_limit"] = gap
    report.constants["lower_at_points_min"] = float(np.min(lower))
    report.constants["upper_at_points_max"] = float(np.max(upper))
    return report


def _fourier_eval(grid: Grid1D, hat: np.ndarray, s: float, derivative: bool = False) -> float:
    # trigonometric interpolant of a periodic sample vector at one point
    phase = np.exp(1j * grid.k * (s - grid.x[0]))
    if derivative:
        phase = phase * 1j * grid.k
    return float(np.real(np.sum(hat * phase)) / grid.n)


def _recenter(grid: Grid1D, v: np.ndarray, alpha: float) -> np.ndarray:
    """Translate phi = r_alpha + v so that phi(0) = 1/2."""
    hat = np.fft.fft(v)
    shift = 0.0
    for _ in range(20):
        phi = 0.5 + np.arctan(alpha * shift) / np.pi + _fourier_eval(grid, hat, shift)
        dphi = alpha / (np.pi * (1 + (alpha * shift) ** 2)) + _fourier_eval(grid, hat, shift, derivative=True)
        if dphi <= 0:
            raise LayerNumericalError("layer lost monotonicity at its center during recentering")
        correction = (phi - 0.5) / dphi
        shift -= correction
        if abs(correction) < 1e-15:
            break
    if shift == 0.0:
        return v
    x = grid.x
    shifted_v = np.real(np.fft.ifft(hat * np.exp(1j * grid.k * shift)))
    shifted_ref = np.arctan(alpha * (x + shift)) / np.pi - np.arctan(alpha * x) / np.pi
    return shifted_v + shifted_ref


def solve_layer_general(
    potential: PotentialSpec,
    grid1d: Grid1D = Grid1D(L=512.0, n=8192),
    tol: float = 1e-8,
    max_iter: int = 60,
) -> LayerProfile:
    """
    Solve (-Delta)^{1/2} phi0 + W'(phi0) = 0 with phi0(0) = 1/2 on a periodic grid.

    Damped Newton iteration on the correction v = phi0 - r_alpha; each Newton
    system is solved matrix-free by GMRES preconditioned with 1/(|k| + alpha),
    and the iterate is recentered after every update.

    Args:
        potential: A valid potential (W''(0) > 0)
        grid1d: Symmetric periodic grid
        tol: Sup-norm tolerance on the residual
        max_iter: Newton iteration cap

    Returns:
        Tabulated LayerProfile with c0, alpha computed from the trace

    Raises:
        LayerConvergenceError: If the residual does not reach tol
        LayerNumericalError: If the iterate becomes non-finite or non-monotone
    """
    alpha = potential.alpha
    if alpha <= 0:
        raise LayerNumericalError(f"W''(0) must be positive for a layer to exist, got {alpha}")
    x = grid1d.x
    absk = np.abs(grid1d.k)
    reference = 0.5 + np.arctan(alpha * x) / np.pi
    reference_half_lap = x / (np.pi * (x ** 2 + 1.0 / alpha ** 2))

    def residual(v: np.ndarray) -> np.ndarray:
        return reference_half_lap + grid1d.half_laplacian(v) + potential.w_prime(reference + v)

    preconditioner = LinearOperator(
        (grid1d.n, grid1d.n),
        matvec=lambda r: np.real(np.fft.ifft(np.fft.fft(r) / (absk + alpha))),
        dtype=float,
    )

    v = np.zeros(grid1d.n)
    history: list[float] = []
    logger.info(f"Solving general layer on n={grid1d.n}, L={grid1d.L} (alpha={alpha:.6g})")
    for iteration in range(max_iter):
        F = residual(v)
        res = float(np.max(np.abs(F)))
        history.append(res)
        logger.debug(f"Layer iteration {iteration}: residual {res:.3e}")
        if not np.isfinite(res):
            raise LayerNumericalError(f"layer residual became non-finite at iteration {iteration}")
        if res <= tol:
            break
        slope = potential.w_double_prime(reference + v)
        jacobian = LinearOperator(
            (grid1d.n, grid1d.n),
            matvec=lambda d, s=slope: grid1d.half_laplacian(d) + s * d,
            dtype=float,
        )
        delta, info = gmres(jacobian, -F, M=preconditioner, rtol=1e-10, atol=0.0, restart=200, maxiter=20)
        if info < 0:
            raise LayerNumericalError(f"GMRES breakdown in layer Newton step (info={info})")
        step = 1.0
        while True:
            trial = _recenter(grid1d, v + step * delta, alpha)
            trial_res = float(np.max(np.abs(residual(trial))))
            if trial_res < res or step < 1.0 / 64:
                break
            step *= 0.5
        v = trial
    else:
        raise LayerConvergenceError(
            f"general layer did not reach residual {tol:.1e} in {max_iter} iterations "
            f"(last {history[-1]:.3e})",
            history,
        )

    phi0 = reference + v
    if np.any(np.diff(phi0) <= 0):
        raise LayerNumericalError("computed layer trace is not strictly increasing")
    provisional = LayerProfile(LayerKind.TABULATED, 1.0, alpha, grid=grid1d, correction=v)
    c0, _ = compute_constants(provisional, potential)
    logger.info(f"General layer converged in {len(history)} iterations: c0={c0:.10g}, residual={history[-1]:.2e}")
    return LayerProfile(LayerKind.TABULATED, c0, alpha, grid=grid1d, correction=v, residual_history=history)
