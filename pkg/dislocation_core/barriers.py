# dislocation_core/barriers.py
"""
Super- and subsolutions of the coupled problem built from the moving layer
superposition, and the numerical checks of their defining inequalities.

With X_i = (x - z_i(t)) / eps, Y = y / eps and c_i = dz_i/dt taken from the
perturbed particle trajectory,

    w = sum_i [phi(X_i, Y) - eps c_i psi(X_i, Y)] + eps*delta_tilde
        + eps^(a+1) sum_i c_i q(X_i, Y) + eps^theta (y + eps)^gamma + eps^(1+tau) t

is the supersolution (trajectory drifting with -delta). The subsolution uses
the +delta trajectory and flips the signs of the last three gap terms and of
eps*delta_tilde; the psi and q terms keep their form, their sign is carried
by the trajectory velocities.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from dislocation_core import config
from dislocation_core.correctors import PsiProfile, QField, psi_at
from dislocation_core.coupled_solver import Field, SolutionRecord
from dislocation_core.layer_profile import LayerProfile
from dislocation_core.particle_ode import Orientation, ParticleState, ParticleTrajectory, integrate
from dislocation_core.potential import SINUSOIDAL, PotentialSpec
from dislocation_core.reports import Report

logger = logging.getLogger(__name__)

MAX_SEARCH = 60
CASE_NAMES = {0: "boundary", 1: "case1", 2: "case2", 3: "case3", 4: "case4"}
X_OFFSETS = (-3.0, -1.0, 0.0, 1.0, 3.0)
# relative roundoff floor added to every residual tolerance
ROUNDOFF = 1e3 * np.finfo(float).eps


class InfeasibleExponentsError(RuntimeError):
    """Raised when the exponent search finds no feasible point."""
    pass


class BarrierDomainError(ValueError):
    """Raised for samples outside the half-plane or the time span, or for mismatched barrier inputs."""
    pass


# ---------------------------------------------------------------------------
# Exponents
# ---------------------------------------------------------------------------

def _least_k0(b: float) -> int:
    k = 1
    while 1.0 - (k + 1) * b > 0:
        k += 1
    return k


def _least_k1(a: float) -> int:
    k = 0
    while not (k + 1) * a / 2.0 > 1.0:
        k += 1
    return k


@dataclass(frozen=True)
class BarrierExponents:
    a: float
    b: float
    theta: float
    gamma: float
    tau: float
    r: float
    k0: int
    k1: int
    delta: float
    delta_tilde: float

    def conditions(self) -> list[tuple[str, float, bool]]:
        """(name, slack, strict) for every inequality; strict ones need slack > 0, the others slack >= 0."""
        a, b, theta, gamma = self.a, self.b, self.theta, self.gamma
        out = [
            ("b_positive", b, True),
            ("b_below_min_1_a", min(1.0, a) - b, True),
            ("gamma_in_unit_interval", min(gamma, 1.0 - gamma), True),
            ("theta_plus_gamma_above_1", theta + gamma - 1.0, True),
            ("theta_in_0_a", min(theta, a - theta), True),
        ]
        for k in range(1, self.k0 + 1):
            rhs = theta - (2.0 - gamma) * (1.0 - (k + 1) * b)
            out.append((f"case2_k{k}", a + k * b - 1.0 - rhs, True))
        for k in range(0, self.k1 + 1):
            rhs = theta + (2.0 - gamma) * (k + 1) * a / 2.0
            out.append((f"case3_k{k}", (1.0 + k / 2.0) * a - rhs, True))
        out.append(("k1_exceeds_one_plus_r", (self.k1 + 1) * a / 2.0 - 1.0 - self.r, True))
        out.append(("tau_in_0_r", min(self.tau, self.r - self.tau), True))
        out.append(("k0_covers", (self.k0 + 1) * b - 1.0, False))
        out.append(("delta_positive", self.delta, True))
        return out

    def to_dict(self) -> dict:
        return asdict(self)


def check_exponents(exponents: BarrierExponents) -> Report:
    """Evaluate every exponent inequality and the minimality of k0 and k1."""
    report = Report(title=f"exponents a={exponents.a}")
    for name, slack, strict in exponents.conditions():
        passed = slack > 0 if strict else slack >= 0
        report.add(name, passed, slack, 0.0, strict=strict)
    k0 = _least_k0(exponents.b)
    k1 = _least_k1(exponents.a)
    report.add("k0_least", exponents.k0 == k0, exponents.k0, k0)
    report.add("k1_least", exponents.k1 == k1, exponents.k1, k1)
    return report


def select_exponents(a: float, delta: float, alpha: float = 1.0) -> BarrierExponents:
    """
    Deterministic feasible exponents for the barrier construction.

    b = min(1, a)/2 first, then k0 and k1 from their defining inequalities,
    then theta = 2^-m, gamma = 1 - theta/2 for the least m <= 60 satisfying
    all the bulk and boundary inequalities; r = ((k1+1)a/2 - 1)/2, tau = r/2.

    The shift delta_tilde = delta / (pi alpha) is the drift (c0/pi) delta of
    the perturbed trajectories divided by alpha c0. With it the psi corrector
    removes the W''(phi) dependence of the interface residual of the ansatz,
    which is then alpha delta_tilde = delta / pi to leading order.

    Args:
        a: Bulk time-scale exponent (> 0)
        delta: Trajectory perturbation (> 0)
        alpha: W''(0)

    Returns:
        BarrierExponents that pass check_exponents

    Raises:
        BarrierDomainError: If a, delta or alpha is not positive
        InfeasibleExponentsError: If no m <= 60 is feasible
    """
    if not (math.isfinite(a) and a > 0):
        raise BarrierDomainError(f"a must be positive, got {a}")
    if not (math.isfinite(delta) and delta > 0):
        raise BarrierDomainError(f"delta must be positive, got {delta}")
    if alpha <= 0:
        raise BarrierDomainError(f"alpha must be positive, got {alpha}")

    b = min(1.0, a) / 2.0
    k0 = _least_k0(b)
    k1 = _least_k1(a)
    r = ((k1 + 1) * a / 2.0 - 1.0) / 2.0
    tau = r / 2.0
    for m in range(1, MAX_SEARCH + 1):
        theta = 2.0 ** (-m)
        candidate = BarrierExponents(
            a=a, b=b, theta=theta, gamma=1.0 - theta / 2.0, tau=tau, r=r,
            k0=k0, k1=k1, delta=delta, delta_tilde=delta / (math.pi * alpha),
        )
        if check_exponents(candidate).passed:
            logger.debug(f"Exponents for a={a}: b={b}, theta={theta}, k0={k0}, k1={k1}, r={r}")
            return candidate
    raise InfeasibleExponentsError(f"no feasible theta = 2^-m with m <= {MAX_SEARCH} for a={a}")


# ---------------------------------------------------------------------------
# Evaluators
# ---------------------------------------------------------------------------

class BarrierKind(Enum):
    SUPER = "super"
    SUB = "sub"

    @property
    def sign(self) -> float:
        return 1.0 if self is BarrierKind.SUPER else -1.0

    @property
    def orientation(self) -> Orientation:
        return Orientation.SUPER if self is BarrierKind.SUPER else Orientation.SUB


def _shaped(values: np.ndarray, shape: tuple):
    return float(values[0]) if shape == () else values.reshape(shape)


@dataclass(frozen=True, eq=False)
class BarrierEvaluator:
    """
    Evaluates w (SUPER) or h (SUB) and their derivatives at points (x, y, t).

    The trajectory must carry the matching orientation and the delta of the
    exponents; the q corrector must be built for the same eps and b.
    """
    exponents: BarrierExponents
    trajectory: ParticleTrajectory
    layer: LayerProfile
    psi: PsiProfile
    q: QField
    eps: float
    kind: BarrierKind = BarrierKind.SUPER
    potential: PotentialSpec = SINUSOIDAL

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise BarrierDomainError(f"eps must lie in (0, 1), got {self.eps}")
        if self.trajectory.orientation is not self.kind.orientation:
            raise BarrierDomainError(
                f"{self.kind.value} barrier needs a {self.kind.orientation.name} trajectory, "
                f"got {self.trajectory.orientation.name}"
            )
        if not math.isclose(self.trajectory.delta, self.exponents.delta, rel_tol=1e-12):
            raise BarrierDomainError(
                f"trajectory delta {self.trajectory.delta} differs from exponent delta {self.exponents.delta}"
            )
        if not (math.isclose(self.q.eps, self.eps) and math.isclose(self.q.b, self.exponents.b)):
            raise BarrierDomainError(f"q corrector built for eps={self.q.eps}, b={self.q.b}")

    @property
    def sign(self) -> float:
        return self.kind.sign

    @property
    def T(self) -> float:
        return self.trajectory.T

    def _centers(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        unique, inverse = np.unique(t, return_inverse=True)
        z = np.array([self.trajectory.position_at(float(s)) for s in unique]).reshape(len(unique), -1)
        c = np.array([self.trajectory.velocity_at(float(s)) for s in unique]).reshape(len(unique), -1)
        return z[inverse.ravel()], c[inverse.ravel()]

    def _scaled(self, x, y, t):
        xb, yb, tb = np.broadcast_arrays(
            np.asarray(x, dtype=float), np.asarray(y, dtype=float), np.asarray(t, dtype=float)
        )
        shape = xb.shape
        x, y, t = xb.ravel(), yb.ravel(), tb.ravel()
        if np.any(y < 0):
            raise BarrierDomainError("barrier evaluated below the interface")
        slack = 1e-12 * max(1.0, self.T)
        if np.any(t < -slack) or np.any(t > self.T + slack):
            raise BarrierDomainError(f"time outside the trajectory span [0, {self.T}]")
        z, c = self._centers(t)
        X = (x[:, None] - z) / self.eps
        Y = np.broadcast_to((y / self.eps)[:, None], X.shape)
        return shape, y, t, X, Y, c

    def _ansatz(self, X, Y, c) -> np.ndarray:
        phi = np.asarray(self.layer.value(X, Y))
        psi = np.asarray(psi_at(self.psi, X, Y))
        return np.sum(phi - self.eps * c * psi, axis=1) + self.sign * self.eps * self.exponents.delta_tilde

    def _q_term(self, X, Y, c) -> np.ndarray:
        q, _, _ = self.q.evaluate(X, Y)
        return self.eps ** (self.exponents.a + 1.0) * np.sum(c * q, axis=1)

    def ansatz(self, x, y, t):
        """v_eps: the layer superposition with the psi correction and the eps*delta_tilde shift."""
        shape, _, _, X, Y, c = self._scaled(x, y, t)
        return _shaped(self._ansatz(X, Y, c), shape)

    def q_term(self, x, y, t):
        shape, _, _, X, Y, c = self._scaled(x, y, t)
        return _shaped(self._q_term(X, Y, c), shape)

    def value(self, x, y, t, include_q: bool = True):
        shape, y, t, X, Y, c = self._scaled(x, y, t)
        ex, e = self.exponents, self.eps
        w = self._ansatz(X, Y, c)
        if include_q:
            w = w + self._q_term(X, Y, c)
        w = w + self.sign * (e ** ex.theta * (y + e) ** ex.gamma + e ** (1.0 + ex.tau) * t)
        return _shaped(w, shape)

    def laplacian(self, x, y, t, include_q: bool = True):
        """
        Delta of the barrier in (x, y).

        phi and psi are harmonic; Delta[q(X, Y)] = -eps^-2 d_x phi(X, Y) g(Y).
        """
        shape, y, _, X, Y, c = self._scaled(x, y, t)
        ex, e = self.exponents, self.eps
        lap = self.sign * e ** ex.theta * ex.gamma * (ex.gamma - 1.0) * (y + e) ** (ex.gamma - 2.0)
        if include_q:
            dphi_dx, _ = self.layer.gradient(X, Y)
            lap = lap - e ** (ex.a - 1.0) * np.sum(c * np.asarray(dphi_dx) * self.q.cutoff(Y), axis=1)
        return _shaped(lap, shape)

    def normal_derivative(self, x, y, t, include_q: bool = True):
        """d_y of the barrier."""
        shape, y, _, X, Y, c = self._scaled(x, y, t)
        ex, e = self.exponents, self.eps
        _, dphi_dy = self.layer.gradient(X, Y)
        dpsi_dy = np.asarray(self.psi.extension.evaluate(X, Y, "dy"))
        dy = np.sum(np.asarray(dphi_dy) / e - c * dpsi_dy, axis=1)
        if include_q:
            _, _, qy = self.q.evaluate(X, Y)
            dy = dy + e ** ex.a * np.sum(c * qy, axis=1)
        dy = dy + self.sign * e ** ex.theta * ex.gamma * (y + e) ** (ex.gamma - 1.0)
        return _shaped(dy, shape)

    def ansatz_normal_derivative(self, x, y, t):
        """d_y of v_eps."""
        shape, _, _, X, Y, c = self._scaled(x, y, t)
        _, dphi_dy = self.layer.gradient(X, Y)
        dpsi_dy = np.asarray(self.psi.extension.evaluate(X, Y, "dy"))
        return _shaped(np.sum(np.asarray(dphi_dy) / self.eps - c * dpsi_dy, axis=1), shape)

    def time_derivative(self, x, y, t, step: float, include_q: bool = True) -> tuple[np.ndarray, np.ndarray]:
        """Centered differences with steps h and h/2; returns the h/2 value and its Richardson error estimate."""
        t = np.asarray(t, dtype=float)
        coarse = (self.value(x, y, t + step, include_q) - self.value(x, y, t - step, include_q)) / (2.0 * step)
        half = step / 2.0
        fine = (self.value(x, y, t + half, include_q) - self.value(x, y, t - half, include_q)) / step
        return np.asarray(fine), np.abs(np.asarray(coarse) - np.asarray(fine)) / 3.0

    def fd_laplacian(self, x, y, t, step: float, include_q: bool = True) -> tuple[np.ndarray, np.ndarray]:
        """5-point Laplacian with spacings s and s/2, s = min(step, y/2)."""
        x, y, t = (np.asarray(v, dtype=float) for v in np.broadcast_arrays(x, y, t))
        s = np.minimum(step, y / 2.0)
        centre = np.asarray(self.value(x, y, t, include_q))

        def stencil(h):
            around = (
                np.asarray(self.value(x + h, y, t, include_q))
                + np.asarray(self.value(x - h, y, t, include_q))
                + np.asarray(self.value(x, y + h, t, include_q))
                + np.asarray(self.value(x, y - h, t, include_q))
            )
            return (around - 4.0 * centre) / h ** 2

        coarse, fine = stencil(s), stencil(s / 2.0)
        return fine, np.abs(coarse - fine) / 3.0

    def fd_normal_derivative(self, x, t, step: float, include_q: bool = True) -> tuple[np.ndarray, np.ndarray]:
        """One-sided second-order d_y at y = 0 with spacings s and s/2."""
        x, t = (np.asarray(v, dtype=float) for v in np.broadcast_arrays(x, t))
        base = np.asarray(self.value(x, 0.0, t, include_q))

        def one_sided(h):
            return (
                -3.0 * base
                + 4.0 * np.asarray(self.value(x, h, t, include_q))
                - np.asarray(self.value(x, 2.0 * h, t, include_q))
            ) / (2.0 * h)

        coarse, fine = one_sided(step), one_sided(step / 2.0)
        return fine, np.abs(coarse - fine) / 3.0


def eval_ansatz_v(evaluator: BarrierEvaluator, x, y, t):
    """v_eps at (x, y, t)."""
    return evaluator.ansatz(x, y, t)


def eval_barrier(evaluator: BarrierEvaluator, x, y, t, include_q: bool = True):
    """w_eps (SUPER) or h_eps (SUB) at (x, y, t)."""
    return evaluator.value(x, y, t, include_q)


def build_barrier_pair(
    centers: Sequence[float],
    eps: float,
    a: float,
    delta: float,
    T: float,
    layer: LayerProfile,
    psi: PsiProfile,
    potential: PotentialSpec = SINUSOIDAL,
    threads: int = config.THREADS,
) -> tuple[BarrierEvaluator, BarrierEvaluator]:
    """Super and sub evaluators for one (eps, a, delta), sharing exponents and the q corrector."""
    exponents = select_exponents(a, delta, layer.alpha)
    initial = ParticleState(tuple(float(z) for z in centers))
    upper = integrate(initial, layer.c0, delta, Orientation.SUPER, T)
    lower = integrate(initial, layer.c0, delta, Orientation.SUB, T)
    q = QField(layer, eps, exponents.b, threads=threads)
    logger.info(f"Barrier pair: eps={eps}, a={a}, delta={delta}, theta={exponents.theta}, R={q.R:.4g}")
    return (
        BarrierEvaluator(exponents, upper, layer, psi, q, eps, BarrierKind.SUPER, potential),
        BarrierEvaluator(exponents, lower, layer, psi, q, eps, BarrierKind.SUB, potential),
    )


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def case_bands(exponents: BarrierExponents, eps: float) -> list[tuple[int, float, float]]:
    """(case, y_low, y_high) bands of the four bulk regimes."""
    b, a, r = exponents.b, exponents.a, exponents.r
    bands = [(1, eps ** (2.0 - b), eps ** (1.0 - b))]
    bands += [(2, eps ** (1.0 - k * b), eps ** (1.0 - (k + 1) * b)) for k in range(1, exponents.k0 + 1)]
    bands += [(3, eps ** (-k * a / 2.0), eps ** (-(k + 1) * a / 2.0)) for k in range(0, exponents.k1 + 1)]
    bands.append((4, eps ** (-1.0 - r), 4.0 * eps ** (-1.0 - r)))
    return bands


def classify_samples(y, exponents: BarrierExponents, eps: float) -> np.ndarray:
    """Case label per height: 0 on the interface, then 1..4 with the later regime winning on overlaps."""
    y = np.asarray(y, dtype=float)
    cases = np.full(y.shape, 2, dtype=int)
    cases[y >= 1.0] = 3
    cases[y >= eps ** (-1.0 - exponents.r)] = 4
    cases[(y > 0) & (y <= eps ** (1.0 - exponents.b))] = 1
    cases[y == 0] = 0
    return cases


def generate_samples(
    exponents: BarrierExponents,
    trajectory: ParticleTrajectory,
    eps: float,
    per_band: int = 3,
    n_times: int = 5,
) -> np.ndarray:
    """
    Sample rows (x, y, t, case): interface points plus log-spaced heights in
    each case band, at x = z_i(t) + eps*{-3, -1, 0, 1, 3} and n_times
    interior times of [0, T].
    """
    if per_band < 1 or n_times < 1:
        raise ValueError("per_band and n_times must be at least 1")
    heights = [(0, 0.0)]
    for case, low, high in case_bands(exponents, eps):
        heights += [(case, float(y)) for y in np.geomspace(low, high, per_band)]
    labels = np.array([h[0] for h in heights], dtype=float)
    ys = np.array([h[1] for h in heights])

    rows = []
    for t in np.linspace(0.0, trajectory.T, n_times + 2)[1:-1]:
        z = trajectory.position_at(t)
        xs = (z[:, None] + eps * np.asarray(X_OFFSETS)[None, :]).ravel()
        X, H = np.meshgrid(xs, np.arange(len(ys)), indexing="ij")
        rows.append(np.column_stack([X.ravel(), ys[H.ravel()], np.full(X.size, t), labels[H.ravel()]]))
    return np.vstack(rows)


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------

@dataclass
class ResidualReport(Report):
    """Report with the per-sample residual rows (x, y, t, case, margin, tol)."""
    rows: np.ndarray = field(default_factory=lambda: np.empty((0, 6)))

    def table(self) -> tuple[list[str], np.ndarray]:
        return ["x", "y", "t", "case", "margin", "tol"], self.rows


def _residuals(
    evaluator: BarrierEvaluator,
    x: np.ndarray,
    y: np.ndarray,
    t: np.ndarray,
    step: float,
    include_q: bool,
    spatial: str,
) -> tuple[np.ndarray, np.ndarray]:
    e, a = evaluator.eps, evaluator.exponents.a
    margin = np.empty_like(x)
    tol = np.empty_like(x)
    dt, dt_err = evaluator.time_derivative(x, y, t, step, include_q)

    on = y == 0.0
    if np.any(on):
        w = np.asarray(evaluator.value(x[on], 0.0, t[on], include_q))
        if spatial == "fd":
            dy, dy_err = evaluator.fd_normal_derivative(x[on], t[on], step, include_q)
        else:
            dy, dy_err = np.asarray(evaluator.normal_derivative(x[on], 0.0, t[on], include_q)), 0.0
        reaction = evaluator.potential.w_prime(w) / e
        lhs = e * dt[on] - dy + reaction
        scale = e * np.abs(dt[on]) + np.abs(dy) + np.abs(reaction)
        margin[on] = evaluator.sign * lhs
        tol[on] = 10.0 * (e * dt_err[on] + dy_err) + ROUNDOFF * scale

    inside = ~on
    if np.any(inside):
        if spatial == "fd":
            lap, lap_err = evaluator.fd_laplacian(x[inside], y[inside], t[inside], step, include_q)
        else:
            lap, lap_err = np.asarray(evaluator.laplacian(x[inside], y[inside], t[inside], include_q)), 0.0
        lhs = e ** a * dt[inside] - lap
        scale = e ** a * np.abs(dt[inside]) + np.abs(lap)
        margin[inside] = evaluator.sign * lhs
        tol[inside] = 10.0 * (e ** a * dt_err[inside] + lap_err) + ROUNDOFF * scale
    return margin, tol


def residual_check(
    evaluator: BarrierEvaluator,
    sample_points,
    eps: Optional[float] = None,
    include_q: bool = True,
    spatial: str = "analytic",
    hx: Optional[float] = None,
    threads: int = config.THREADS,
    chunk: int = 256,
) -> ResidualReport:
    """
    Check the barrier inequalities at the samples.

    SUPER: eps d_t w - d_y w + W'(w)/eps >= -tol on y = 0 and
    eps^a d_t w - Delta w >= -tol for y > 0. SUB: the same expressions
    <= +tol. The margin of a sample is the left-hand side times the kind's
    sign, so a sample passes when margin >= -tol. d_t is a centered
    difference with step min(hx, eps^2)/4 and tol is ten times its Richardson
    estimate (plus the spatial estimate when spatial="fd").

    Args:
        evaluator: Barrier to check
        sample_points: Rows (x, y, t) or (x, y, t, case)
        eps: Optional consistency check against evaluator.eps
        include_q: Drop the q corrector to expose the defect it removes
        spatial: "analytic" (closed-form Laplacian and d_y) or "fd"
        hx: Grid spacing for the step rule, default eps/8
        threads: Worker threads over sample chunks
        chunk: Samples per chunk

    Returns:
        ResidualReport with one check per case and the per-sample rows

    Raises:
        BarrierDomainError: For samples below the interface or whose time
            stencil leaves [0, T], or an eps mismatch
    """
    if eps is not None and not math.isclose(eps, evaluator.eps):
        raise BarrierDomainError(f"eps={eps} does not match the evaluator (eps={evaluator.eps})")
    if spatial not in ("analytic", "fd"):
        raise ValueError(f"spatial must be 'analytic' or 'fd', got '{spatial}'")
    e = evaluator.eps
    pts = np.asarray(sample_points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] not in (3, 4) or pts.shape[0] == 0:
        raise BarrierDomainError("sample points must be a non-empty array of rows (x, y, t[, case])")
    x, y, t = pts[:, 0], pts[:, 1], pts[:, 2]
    cases = pts[:, 3].astype(int) if pts.shape[1] == 4 else classify_samples(y, evaluator.exponents, e)
    step = min(e / 8.0 if hx is None else hx, e ** 2) / 4.0
    if np.any(y < 0):
        raise BarrierDomainError("sample below the interface")
    if np.any(t - step < 0) or np.any(t + step > evaluator.T):
        raise BarrierDomainError(f"time stencil of width {step:.2e} leaves [0, {evaluator.T}]")

    starts = list(range(0, x.size, chunk))

    def work(s: int) -> tuple[np.ndarray, np.ndarray]:
        sl = slice(s, s + chunk)
        return _residuals(evaluator, x[sl], y[sl], t[sl], step, include_q, spatial)

    logger.info(f"Residual check ({evaluator.kind.value}): {x.size} samples, step={step:.2e}, include_q={include_q}")
    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, starts))
    else:
        parts = [work(s) for s in starts]
    margin = np.concatenate([p[0] for p in parts])
    tol = np.concatenate([p[1] for p in parts])

    report = ResidualReport(title=f"{evaluator.kind.value}_residuals eps={e} a={evaluator.exponents.a}")
    for case in sorted(set(cases.tolist())):
        mask = cases == case
        slack = margin[mask] + tol[mask]
        idx = int(np.flatnonzero(mask)[int(np.argmin(slack))])
        report.add(
            f"{CASE_NAMES[case]}_residual",
            bool(np.all(slack >= 0)),
            float(margin[idx]),
            float(-tol[idx]),
            samples=int(mask.sum()),
            x=float(x[idx]),
            y=float(y[idx]),
            t=float(t[idx]),
        )
        report.constants[f"{CASE_NAMES[case]}_worst_margin"] = float(np.min(margin[mask]))

    if include_q:
        ex = evaluator.exponents
        magnitude = float(np.max(np.abs(evaluator.q_term(x, y, t))))
        report.constants["q_term_max"] = magnitude
        report.constants["q_term_C"] = magnitude / (e ** (ex.a + 1.0 - ex.b) * abs(math.log(e)))
    report.rows = np.column_stack([x, y, t, cases, margin, tol])
    for check in report.failed():
        logger.warning(f"Barrier inequality '{check.name}' violated: margin {check.measured:.3e} < {check.threshold:.3e}")
    return report


def ansatz_residual_check(
    evaluator: BarrierEvaluator,
    x,
    t,
    hx: Optional[float] = None,
) -> Report:
    """
    Interface inequality of the ansatz v_eps alone.

    sign * (eps d_t v - d_y v + W'(v)/eps) must stay above alpha*delta_tilde/2
    at the points (x, 0, t). The gap terms of w are left out: their interface
    contribution (W''(w) - gamma) eps^(theta+gamma-1) only vanishes as eps -> 0.

    Raises:
        BarrierDomainError: If a time stencil leaves [0, T]
    """
    e = evaluator.eps
    x, t = (np.ravel(v).astype(float) for v in np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float)))
    step = min(e / 8.0 if hx is None else hx, e ** 2) / 4.0
    if np.any(t - step < 0) or np.any(t + step > evaluator.T):
        raise BarrierDomainError(f"time stencil of width {step:.2e} leaves [0, {evaluator.T}]")

    def d_t(h):
        return (np.asarray(evaluator.ansatz(x, 0.0, t + h)) - np.asarray(evaluator.ansatz(x, 0.0, t - h))) / (2.0 * h)

    coarse, fine = d_t(step), d_t(step / 2.0)
    v = np.asarray(evaluator.ansatz(x, 0.0, t))
    dy = np.asarray(evaluator.ansatz_normal_derivative(x, 0.0, t))
    reaction = evaluator.potential.w_prime(v) / e
    margin = evaluator.sign * (e * fine - dy + reaction)
    tol = 10.0 * e * np.abs(coarse - fine) / 3.0 + ROUNDOFF * (e * np.abs(fine) + np.abs(dy) + np.abs(reaction))

    ex = evaluator.exponents
    floor = 0.5 * evaluator.layer.alpha * ex.delta_tilde
    worst = int(np.argmin(margin + tol))
    report = Report(title=f"{evaluator.kind.value}_ansatz eps={e}")
    report.add(
        "ansatz_boundary_residual",
        bool(np.all(margin + tol >= floor)),
        float(margin[worst]),
        floor,
        x=float(x[worst]),
        t=float(t[worst]),
    )
    report.constants["ansatz_worst_margin"] = float(np.min(margin))
    return report


def _check_pair(upper: BarrierEvaluator, lower: BarrierEvaluator, eps: float) -> None:
    if upper.kind is not BarrierKind.SUPER or lower.kind is not BarrierKind.SUB:
        raise BarrierDomainError("expected a SUPER and a SUB evaluator, in that order")
    if not (math.isclose(upper.eps, eps) and math.isclose(lower.eps, eps)):
        raise BarrierDomainError(f"barriers built for eps={upper.eps}/{lower.eps}, field has eps={eps}")
    if upper.potential is not lower.potential:
        raise BarrierDomainError("barriers use different potentials")


def initial_ordering_check(
    upper: BarrierEvaluator,
    lower: BarrierEvaluator,
    field_: Field,
    stride: int = 1,
    tol: float = 1e-9,
) -> Report:
    """h(., ., 0) <= u0 <= w(., ., 0) on the grid of an initial field."""
    _check_pair(upper, lower, field_.eps)
    if field_.time != 0.0:
        raise BarrierDomainError(f"initial ordering needs the field at t=0, got t={field_.time}")
    grid = field_.grid
    X, Y = np.meshgrid(grid.x[::stride], grid.y[::stride], indexing="ij")
    u = field_.values[::stride, ::stride]
    above = np.asarray(upper.value(X, Y, 0.0)) - u
    below = u - np.asarray(lower.value(X, Y, 0.0))

    report = Report(title=f"initial_ordering eps={field_.eps}")
    report.add("super_above_initial", float(above.min()) >= -tol, float(above.min()), -tol)
    report.add("sub_below_initial", float(below.min()) >= -tol, float(below.min()), -tol)
    report.constants["interface_gap_min"] = float(np.min(above[:, 0] + below[:, 0]))
    return report


def scheme_error_estimate(record: SolutionRecord) -> float:
    """Largest undivided fourth x-difference of the stored traces, over 12."""
    worst = 0.0
    for _, values in record.snapshots:
        trace = values[:, 0]
        if trace.size > 4:
            worst = max(worst, float(np.max(np.abs(np.diff(trace, n=4)))) / 12.0)
    return worst


def sandwich_check(
    record: SolutionRecord,
    upper: BarrierEvaluator,
    lower: BarrierEvaluator,
    stride: int = 1,
    slack: Optional[float] = None,
    max_listed: int = 20,
) -> Report:
    """
    h <= u <= w at every stored snapshot.

    The allowed slack defaults to ten times scheme_error_estimate(record).
    Violating points beyond the slack are listed (up to max_listed) in the
    check detail.
    """
    if record.y is None or not record.snapshots:
        raise BarrierDomainError("sandwich check needs a coupled-solver record with snapshots")
    _check_pair(upper, lower, record.eps)
    if slack is None:
        slack = 10.0 * scheme_error_estimate(record)
    x, y = record.x[::stride], record.y[::stride]
    X, Y = np.meshgrid(x, y, indexing="ij")
    horizon = min(upper.T, lower.T)

    worst_upper = -np.inf
    worst_lower = -np.inf
    gap = 0.0
    listed: list[dict] = []
    count = 0
    for t, values in record.snapshots:
        if t > horizon + 1e-12:
            raise BarrierDomainError(f"snapshot at t={t} beyond the barrier trajectories (T={horizon})")
        u = values[::stride, ::stride]
        w = np.asarray(upper.value(X, Y, t))
        h = np.asarray(lower.value(X, Y, t))
        over = u - w
        under = h - u
        worst_upper = max(worst_upper, float(over.max()))
        worst_lower = max(worst_lower, float(under.max()))
        gap = max(gap, float(np.max(w[:, 0] - h[:, 0])))
        bad = np.argwhere((over > slack) | (under > slack))
        count += len(bad)
        for i, j in bad[: max(0, max_listed - len(listed))]:
            listed.append({"t": float(t), "x": float(x[i]), "y": float(y[j])})
        logger.debug(f"sandwich t={t:.4g}: u-w <= {over.max():.3e}, h-u <= {under.max():.3e}")

    report = Report(title=f"sandwich eps={record.eps}")
    report.add("sandwich_upper", worst_upper <= slack, worst_upper, slack, violation_points=listed)
    report.add("sandwich_lower", worst_lower <= slack, worst_lower, slack, violation_points=listed)
    report.constants["violations"] = float(count)
    report.constants["max_interface_gap"] = gap
    report.constants["scheme_error_estimate"] = slack / 10.0
    if count:
        logger.warning(f"Sandwich violated at {count} grid points")
    return report
