# dislocation_core/harness.py
"""
Experiment orchestration.

- compare_ode_pde / bulk_limit_check / envelope_check compare a coupled run
  with the particle system and with the eps -> 0 limits.
- run_sweep executes an epsilon (and delta) sweep, writes every artifact and
  a machine-readable summary of pass/fail per criterion.
- verify runs the quick oracles: constants, layer identity, particle
  oracles, exponent feasibility, correctors, structural properties and the
  agreement of the coupled solver at a = 4 with the reduced fractional one.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from dislocation_core import config
from dislocation_core.artifacts import (
    generate_timestamp,
    write_csv,
    write_json,
    write_run_metadata,
    write_snapshot,
)
from dislocation_core.barriers import (
    build_barrier_pair,
    check_exponents,
    generate_samples,
    initial_ordering_check,
    residual_check,
    sandwich_check,
    select_exponents,
)
from dislocation_core.config import DomainConfig, ExperimentConfig, SimulationConfig, SolverConfig, TimeConfig
from dislocation_core.correctors import (
    QField,
    green_identity_check,
    q_poisson_check,
    solve_psi,
    verify_corrector_bounds,
)
from dislocation_core.coupled_solver import (
    SolutionRecord,
    energy,
    init_superposition,
    run,
    solve_reduced_fractional,
    step,
)
from dislocation_core.grids import Grid1D, Grid2D
from dislocation_core.layer_profile import (
    EXPLICIT_LAYER,
    LayerProfile,
    compute_constants,
    phi_explicit,
    solve_layer_general,
)
from dislocation_core.particle_ode import (
    Orientation,
    ParticleState,
    ParticleTrajectory,
    check_distance_bound,
    integrate,
    two_body_oracle,
)
from dislocation_core.potential import SINUSOIDAL, PotentialKind, PotentialSpec, validate_potential
from dislocation_core.reports import Report

logger = logging.getLogger(__name__)


class ComparisonError(ValueError):
    """Raised when a record and a trajectory cannot be compared."""
    pass


# ---------------------------------------------------------------------------
# Limit profiles
# ---------------------------------------------------------------------------

def limit_profile(x, z) -> np.ndarray:
    """Step-function limit sum_i H(x - z_i), with H(0) = 1/2."""
    x = np.asarray(x, dtype=float)
    return np.sum(np.heaviside(x[..., None] - np.asarray(z, dtype=float), 0.5), axis=-1)


def upper_envelope(x, z) -> np.ndarray:
    """Upper semicontinuous envelope: H*(0) = 1."""
    x = np.asarray(x, dtype=float)
    return np.sum(np.heaviside(x[..., None] - np.asarray(z, dtype=float), 1.0), axis=-1)


def lower_envelope(x, z) -> np.ndarray:
    """Lower semicontinuous envelope: H_*(0) = 0."""
    x = np.asarray(x, dtype=float)
    return np.sum(np.heaviside(x[..., None] - np.asarray(z, dtype=float), 0.0), axis=-1)


def arctan_superposition(x, y, z) -> np.ndarray:
    """Bulk limit (1/pi) sum_i (pi/2 + arctan((x - z_i)/y)); reduces to limit_profile on y = 0."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    return np.sum(0.5 + np.arctan2(x[..., None] - z, y[..., None]) / np.pi, axis=-1)


# ---------------------------------------------------------------------------
# Convergence tables
# ---------------------------------------------------------------------------

@dataclass
class ConvergenceRow:
    eps: float
    time: float
    crossing_errors: tuple[float, ...] = ()
    bulk_error: float = float("nan")
    flagged: bool = False

    @property
    def max_crossing_error(self) -> float:
        return max(self.crossing_errors) if self.crossing_errors else float("nan")


@dataclass
class ConvergenceTable:
    """Rows keyed by (eps, time); crossing and bulk errors are filled in by separate checks."""
    rows: list[ConvergenceRow] = field(default_factory=list)

    def row(self, eps: float, time: float) -> ConvergenceRow:
        for existing in self.rows:
            if math.isclose(existing.eps, eps) and math.isclose(existing.time, time, abs_tol=1e-12):
                return existing
        created = ConvergenceRow(float(eps), float(time))
        self.rows.append(created)
        return created

    def extend(self, other: "ConvergenceTable") -> None:
        for r in other.rows:
            target = self.row(r.eps, r.time)
            if r.crossing_errors:
                target.crossing_errors = r.crossing_errors
                target.flagged = r.flagged
            if not math.isnan(r.bulk_error):
                target.bulk_error = r.bulk_error

    @property
    def eps_values(self) -> list[float]:
        return sorted({r.eps for r in self.rows}, reverse=True)

    def for_eps(self, eps: float) -> list[ConvergenceRow]:
        return sorted((r for r in self.rows if math.isclose(r.eps, eps)), key=lambda r: r.time)

    def nearest(self, eps: float, time: float) -> ConvergenceRow:
        rows = self.for_eps(eps)
        if not rows:
            raise KeyError(f"no rows for eps={eps}")
        return min(rows, key=lambda r: abs(r.time - time))

    def to_table(self) -> tuple[list[str], np.ndarray]:
        n = max((len(r.crossing_errors) for r in self.rows), default=0)
        header = ["eps", "t"] + [f"err_{i + 1}" for i in range(n)] + ["bulk_error"]
        data = []
        for r in sorted(self.rows, key=lambda r: (-r.eps, r.time)):
            errors = list(r.crossing_errors) + [float("nan")] * (n - len(r.crossing_errors))
            data.append([r.eps, r.time] + errors + [r.bulk_error])
        return header, np.array(data, dtype=float).reshape(len(data), len(header))


def _require_unperturbed(trajectory: ParticleTrajectory) -> None:
    if trajectory.delta != 0.0 or trajectory.orientation is not Orientation.NONE:
        raise ComparisonError("comparison needs the unperturbed (delta = 0) trajectory")


def compare_ode_pde(
    record: SolutionRecord,
    trajectory: ParticleTrajectory,
    crossing_multiple: float = 5.0,
    table: Optional[ConvergenceTable] = None,
) -> ConvergenceTable:
    """
    Per-time errors |x_i(t) - z_i(t)| between tracked crossings and the particles.

    Rows whose largest error exceeds crossing_multiple * eps are flagged.

    Raises:
        ComparisonError: If the crossing count differs from the particle count,
            the trajectory is perturbed, or the record outlasts the trajectory
    """
    _require_unperturbed(trajectory)
    if record.n_layers != trajectory.n:
        raise ComparisonError(f"record tracks {record.n_layers} crossings, trajectory has {trajectory.n} particles")
    table = table if table is not None else ConvergenceTable()
    flagged = 0
    for t, crossings in zip(record.times, record.crossings):
        if t > trajectory.T * (1 + 1e-12):
            raise ComparisonError(f"record time {t} beyond the trajectory span {trajectory.T}")
        errors = np.abs(np.asarray(crossings) - trajectory.position_at(t))
        row = table.row(record.eps, t)
        row.crossing_errors = tuple(float(e) for e in errors)
        row.flagged = bool(np.max(errors) > crossing_multiple * record.eps)
        flagged += row.flagged
    if flagged:
        logger.warning(f"eps={record.eps}: {flagged} sample times exceed {crossing_multiple} eps")
    return table


def bulk_limit_check(
    record: SolutionRecord,
    trajectory: ParticleTrajectory,
    band_y0: float,
    table: Optional[ConvergenceTable] = None,
) -> ConvergenceTable:
    """
    sup over y >= band_y0 of |u - arctan_superposition(x, y, z(t))| per snapshot.

    Raises:
        ComparisonError: If the record has no bulk grid or snapshots, or band_y0 < 4 hx
    """
    if record.y is None or not record.snapshots:
        raise ComparisonError("bulk check needs a coupled-solver record with snapshots")
    if band_y0 < 4.0 * record.hx:
        raise ComparisonError(f"band_y0={band_y0} must be at least 4 hx = {4.0 * record.hx:.4g}")
    mask = record.y >= band_y0
    if not np.any(mask):
        raise ComparisonError(f"no grid rows above y0={band_y0}")
    X, Y = np.meshgrid(record.x, record.y[mask], indexing="ij")
    table = table if table is not None else ConvergenceTable()
    for t, values in record.snapshots:
        limit = arctan_superposition(X, Y, trajectory.position_at(min(t, trajectory.T)))
        table.row(record.eps, t).bulk_error = float(np.max(np.abs(values[:, mask] - limit)))
    return table


def monotone_trend(values: Sequence[float], allowance: float = 0.2) -> tuple[bool, int]:
    """
    Non-increasing sequence check allowing one inversion of at most `allowance` (relative).

    Returns:
        (passed, number of inversions)
    """
    inversions = [(v0, v1) for v0, v1 in zip(values, values[1:]) if v1 > v0]
    if not inversions:
        return True, 0
    if len(inversions) == 1:
        v0, v1 = inversions[0]
        return v1 <= (1.0 + allowance) * v0, 1
    return False, len(inversions)


def envelope_check(
    traces: Mapping[float, tuple[np.ndarray, np.ndarray]],
    trajectory: ParticleTrajectory,
    t: float,
    margin: float = 0.25,
    allowance: float = 0.2,
) -> Report:
    """
    Compare interface traces with the step-function limit at time t.

    Args:
        traces: eps -> (x, trace) at the common time t
        trajectory: Unperturbed particle trajectory
        t: Comparison time
        margin: Distance from every z_i(t) beyond which the trace must be
            within N eps / (pi margin) of the step profile
        allowance: Relative size of the one tolerated inversion in the midpoint trend

    Returns:
        Report with far-field and center-band checks per eps, plus the
        midpoint trend across eps when N >= 2
    """
    if margin <= 0:
        raise ValueError(f"margin must be positive, got {margin}")
    z = trajectory.position_at(t)
    n = z.size
    report = Report(title=f"envelope t={t}")
    midpoint = []
    for eps in sorted(traces, reverse=True):
        x, trace = (np.asarray(a, dtype=float) for a in traces[eps])
        away = np.min(np.abs(x[:, None] - z[None, :]), axis=1) >= margin
        deviation = float(np.max(np.abs(trace[away] - limit_profile(x[away], z)))) if np.any(away) else 0.0
        tol = n * eps / (np.pi * margin)
        report.add(f"far_field eps={eps}", deviation <= tol, deviation, tol, margin=margin)

        at_centers = np.interp(z, x, trace)
        levels = np.arange(1, n + 1)
        excess = float(np.max(np.maximum(np.maximum(levels - 1 - at_centers, at_centers - levels), 0.0)))
        report.add(f"center_band eps={eps}", excess == 0.0, excess, 0.0)

        if n >= 2:
            mids = 0.5 * (z[:-1] + z[1:])
            dev = float(np.max(np.abs(np.interp(mids, x, trace) - levels[:-1])))
            midpoint.append(dev)
            report.constants[f"midpoint_deviation eps={eps}"] = dev
    if len(midpoint) >= 2:
        passed, inversions = monotone_trend(midpoint, allowance)
        report.add("midpoint_trend", passed, float(inversions), 1.0)
    return report


def threshold_scan(outcomes: Mapping[tuple[float, float], bool]) -> Report:
    """
    Largest delta, and for it the largest eps, from which every smaller eps
    of the list passes all barrier checks.

    Args:
        outcomes: (eps, delta) -> all barrier checks passed
    """
    eps_values = sorted({e for e, _ in outcomes})
    deltas = sorted({d for _, d in outcomes}, reverse=True)
    report = Report(title="thresholds")
    eps0, delta0 = float("nan"), float("nan")
    for d in deltas:
        best = float("nan")
        for e in eps_values:
            if not outcomes.get((e, d), False):
                break
            best = e
        report.constants[f"eps0 delta={d}"] = best
        if math.isnan(delta0) and not math.isnan(best):
            eps0, delta0 = best, d
    report.constants["eps0"] = eps0
    report.constants["delta0"] = delta0
    report.add("thresholds_found", not math.isnan(eps0), eps0 if not math.isnan(eps0) else 0.0, None)
    return report


def reduction_simulation(eps: float = 0.1, T: float = 0.25) -> SimulationConfig:
    """Two layers at -0.5 and 0.5 with a quasi-static bulk (a = 4) on a strip four units tall."""
    return SimulationConfig(
        epsilon=eps,
        a=4.0,
        centers=(-0.5, 0.5),
        domain=DomainConfig(Lx=2.0, Ly=4.0),
        time=TimeConfig(T=T, snapshot_every=25),
    )


def reduction_check(
    simulation: SimulationConfig,
    potential: PotentialSpec = SINUSOIDAL,
    layer: LayerProfile = EXPLICIT_LAYER,
    multiple: float = 3.0,
) -> Report:
    """Final crossings of the coupled solver against the reduced fractional solver, within multiple * hx."""
    full = run(simulation, potential, layer, keep_snapshots=False)
    reduced = solve_reduced_fractional(simulation, potential)
    difference = float(np.max(np.abs(full.crossings[-1] - reduced.crossings[-1])))
    threshold = multiple * full.hx
    report = Report(title=f"reduction a={simulation.a} eps={simulation.epsilon}")
    report.add("reduction_consistency", difference <= threshold, difference, threshold, T=full.times[-1])
    logger.info(f"Reduction check: max crossing difference {difference:.3e} (threshold {threshold:.3e})")
    return report


# ---------------------------------------------------------------------------
# Sweep
# ---------------------------------------------------------------------------

@dataclass
class SweepResult:
    table: ConvergenceTable
    summary: Report
    output_dir: Path
    reports: dict[str, Report] = field(default_factory=dict)


def _entry_dir(root: Path, eps: float) -> Path:
    return root / f"eps_{eps:g}"


def _write_record(directory: Path, record: SolutionRecord, simulation: SimulationConfig) -> None:
    header, rows = record.crossing_table()
    write_csv(directory / "crossings.csv", header, rows)
    header, rows = record.energy_table()
    write_csv(directory / "energy.csv", header, rows)
    if record.snapshots:
        t, values = record.snapshots[-1]
        write_snapshot(
            directory / "final_field",
            values,
            {
                "grid": {"Lx": simulation.domain.Lx, "Ly": simulation.domain.Ly, "nx": simulation.nx, "ny": simulation.ny},
                "eps": simulation.epsilon,
                "a": simulation.a,
                "time": t,
                "config_hash": record.config_hash,
            },
        )


def _energy_check(report: Report, record: SolutionRecord) -> None:
    energies = np.asarray(record.energy)
    increase = float(np.max(np.diff(energies))) if energies.size > 1 else 0.0
    allowed = 1e-10 * max(1.0, float(np.max(np.abs(energies))))
    report.add(f"energy_monotone eps={record.eps}", increase <= allowed, increase, allowed)


def _barrier_suite(
    simulation: SimulationConfig,
    record: SolutionRecord,
    delta: float,
    layer: LayerProfile,
    psi,
    potential: PotentialSpec,
    directory: Path,
    stride: int,
    threads: int,
) -> Report:
    eps = simulation.epsilon
    upper, lower = build_barrier_pair(
        simulation.centers, eps, simulation.a, delta, simulation.time.T, layer, psi, potential, threads
    )
    suite = Report(title=f"barriers eps={eps} delta={delta}")
    grid = Grid2D(simulation.domain.Lx, simulation.domain.Ly, simulation.nx, simulation.ny)
    initial = init_superposition(simulation.centers, eps, layer, grid, simulation.a)
    suite.extend(initial_ordering_check(upper, lower, initial, stride=stride), prefix="initial.")
    for evaluator in (upper, lower):
        samples = generate_samples(evaluator.exponents, evaluator.trajectory, eps)
        residuals = residual_check(evaluator, samples, eps, hx=record.hx, threads=threads)
        suite.extend(residuals, prefix=f"{evaluator.kind.value}.")
        header, rows = residuals.table()
        write_csv(directory / f"residuals_{evaluator.kind.value}_delta_{delta:g}.csv", header, rows)
    sandwich = sandwich_check(record, upper, lower, stride=stride)
    suite.extend(sandwich, prefix="sandwich.")
    write_json(directory / f"exponents_delta_{delta:g}.json", upper.exponents.to_dict())
    write_json(directory / f"sandwich_report_delta_{delta:g}.json", sandwich.to_dict())
    return suite


def run_sweep(
    experiment: ExperimentConfig,
    out_dir: Optional[str | Path] = None,
    potential: PotentialSpec = SINUSOIDAL,
    layer: LayerProfile = EXPLICIT_LAYER,
    threads: int = config.THREADS,
    barriers: bool = True,
    barrier_stride: int = 4,
) -> SweepResult:
    """
    Run every eps of the sweep, compare with the particle system, and check
    the barriers for every delta.

    Each eps gets its own directory with crossings.csv, energy.csv, the
    final field and the barrier artifacts; the root holds trajectory.csv,
    convergence.csv, summary.json and run_metadata.json. Entries run
    concurrently on `threads` workers. A failing entry is recorded in the
    summary, the remaining entries still complete, and the first error is
    re-raised once everything is written.
    """
    started = generate_timestamp()
    root = Path(out_dir if out_dir is not None else experiment.output_dir) / experiment.scenario
    root.mkdir(parents=True, exist_ok=True)
    simulation = experiment.simulation
    tolerances = experiment.tolerances
    logger.info(f"Sweep '{experiment.scenario}': eps={list(experiment.eps_list)}, delta={list(experiment.delta_list)}")

    trajectory = integrate(ParticleState(simulation.centers), layer.c0, T=simulation.time.T)
    header, rows = trajectory.to_table()
    write_csv(root / "trajectory.csv", header, rows)
    psi = solve_psi(layer, potential, layer.c0, layer.alpha) if barriers else None

    def entry(eps: float) -> tuple[float, SolutionRecord]:
        cfg = experiment.simulation_for(eps)
        record = run(cfg, potential, layer)
        _write_record(_entry_dir(root, eps), record, cfg)
        logger.info(f"Sweep entry eps={eps} finished")
        return eps, record

    records: dict[float, SolutionRecord] = {}
    errors: list[BaseException] = []
    summary = Report(title=f"sweep {experiment.scenario}")
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        futures = {eps: pool.submit(entry, eps) for eps in experiment.eps_list}
        for eps, future in futures.items():
            try:
                _, records[eps] = future.result()
            except Exception as e:
                logger.exception(f"Sweep entry eps={eps} failed")
                summary.add(f"run eps={eps}", False, float("nan"), None, error=str(e))
                errors.append(e)

    table = ConvergenceTable()
    reports: dict[str, Report] = {}
    outcomes: dict[tuple[float, float], bool] = {}
    for eps in sorted(records, reverse=True):
        record = records[eps]
        compare_ode_pde(record, trajectory, tolerances.crossing_multiple, table)
        if tolerances.bulk_band_y0 >= 4.0 * record.hx:
            bulk_limit_check(record, trajectory, tolerances.bulk_band_y0, table)
        _energy_check(summary, record)
        if barriers:
            for delta in experiment.delta_list:
                try:
                    suite = _barrier_suite(
                        experiment.simulation_for(eps), record, delta, layer, psi, potential,
                        _entry_dir(root, eps), barrier_stride, threads,
                    )
                except Exception as e:
                    logger.exception(f"Barrier suite eps={eps} delta={delta} failed")
                    summary.add(f"barriers eps={eps} delta={delta}", False, float("nan"), None, error=str(e))
                    errors.append(e)
                    outcomes[(eps, delta)] = False
                    continue
                reports[f"barriers eps={eps} delta={delta}"] = suite
                outcomes[(eps, delta)] = suite.passed
                summary.add(
                    f"barrier_suite eps={eps} delta={delta}",
                    suite.passed,
                    float(len(suite.failed())),
                    0.0,
                    failed=[c.name for c in suite.failed()],
                )

    if table.rows:
        _aggregate(summary, table, records, trajectory, experiment)
    if outcomes:
        thresholds = threshold_scan(outcomes)
        reports["thresholds"] = thresholds
        summary.constants.update(thresholds.constants)

    header, rows = table.to_table()
    write_csv(root / "convergence.csv", header, rows)
    write_json(root / "summary.json", {
        "scenario": experiment.scenario,
        "config_hash": simulation.config_hash,
        "passed": summary.passed and not errors,
        "criteria": [c.to_dict() for c in summary.checks],
        "constants": summary.to_dict()["constants"],
    })
    for name, report in reports.items():
        write_json(root / f"{name.replace(' ', '_').replace('=', '_')}.json", report.to_dict())
    write_run_metadata(root, simulation.config_hash, started, {"scenario": experiment.scenario})
    logger.info(f"Sweep '{experiment.scenario}' finished: {'pass' if summary.passed else 'fail'}")
    if errors:
        raise errors[0]
    return SweepResult(table=table, summary=summary, output_dir=root, reports=reports)


def _aggregate(
    summary: Report,
    table: ConvergenceTable,
    records: Mapping[float, SolutionRecord],
    trajectory: ParticleTrajectory,
    experiment: ExperimentConfig,
) -> None:
    tolerances = experiment.tolerances
    eps_values = table.eps_values

    initial = max(table.nearest(e, 0.0).max_crossing_error - records[e].hx for e in eps_values)
    summary.add("initial_crossing", initial <= 0.0, initial, 0.0)

    worst = max(r.max_crossing_error / r.eps for r in table.rows if r.crossing_errors)
    summary.add("slow_motion", worst <= tolerances.crossing_multiple, worst, tolerances.crossing_multiple)

    T = experiment.simulation.time.T
    for sample_time in np.linspace(0.0, T, 5)[1:]:
        series = [table.nearest(e, sample_time).max_crossing_error for e in eps_values]
        if len(series) >= 2:
            passed, inversions = monotone_trend(series, tolerances.inversion_allowance)
            summary.add(f"crossing_trend t={sample_time:g}", passed, float(inversions), 1.0, errors=series)

    bulk = [table.nearest(e, T).bulk_error for e in eps_values]
    if not any(math.isnan(b) for b in bulk):
        if len(bulk) >= 2:
            passed, inversions = monotone_trend(bulk, tolerances.inversion_allowance)
            summary.add("bulk_trend", passed, float(inversions), 1.0, errors=bulk)
        summary.add("bulk_limit", bulk[-1] <= tolerances.bulk_max_error, bulk[-1], tolerances.bulk_max_error)
        roots = np.sqrt(np.asarray(eps_values))
        summary.constants["bulk_sqrt_eps_C"] = float(np.max(np.asarray(bulk) / roots))

    traces = {e: (records[e].x, records[e].snapshot_at(T)[:, 0]) for e in eps_values if records[e].snapshots}
    if traces:
        summary.extend(envelope_check(traces, trajectory, T, allowance=tolerances.inversion_allowance), prefix="envelope.")


# ---------------------------------------------------------------------------
# Quick verification
# ---------------------------------------------------------------------------

def _layer_identity(report: Report, potential: PotentialSpec) -> None:
    x = np.linspace(-50.0, 50.0, 1000)
    _, dphi_dy = EXPLICIT_LAYER.gradient(x, 0.0)
    defect = float(np.max(np.abs(np.asarray(dphi_dy) - potential.w_prime(phi_explicit(x, 0.0)))))
    report.add("layer_identity", defect <= 1e-10, defect, 1e-10)


def _general_layer(report: Report, potential: PotentialSpec) -> None:
    layer = solve_layer_general(potential)
    x, phi0 = layer.table()
    window = np.abs(x) <= 100.0
    error = float(np.max(np.abs(phi0[window] - phi_explicit(x[window], 0.0))))
    report.add("general_layer_matches_explicit", error <= 1e-6, error, 1e-6)


def _particle_oracles(report: Report, rng: np.random.Generator) -> None:
    c0 = 2.0 * np.pi
    trajectory = integrate(ParticleState((-0.5, 0.5)), c0, T=1.0, tol=1e-10)
    computed = float(np.diff(trajectory.position_at(1.0))[0])
    error = abs(computed - two_body_oracle(1.0, c0, 1.0))
    report.add("two_body_oracle", error <= 1e-6, error, 1e-6)

    worst = np.inf
    for n in (2, 3, 5):
        for _ in range(20):
            while True:
                z = np.sort(rng.uniform(-3.0, 3.0, n))
                if np.min(np.diff(z)) >= 0.05:
                    break
            bound = check_distance_bound(integrate(ParticleState(tuple(z)), c0, T=1.0))
            worst = min(worst, bound.constants["min_slack"])
    report.add("distance_bound", worst >= -1e-9, worst, -1e-9)


def _exponent_feasibility(report: Report, rng: np.random.Generator) -> None:
    values = np.concatenate([[0.5, 1.0, 2.0], rng.uniform(0.1, 5.0, 100)])
    failures = [float(a) for a in values if not check_exponents(select_exponents(float(a), 0.05)).passed]
    report.add("exponent_feasibility", not failures, float(len(failures)), 0.0, failing_a=failures[:10])


def _correctors(report: Report, layer: LayerProfile, potential: PotentialSpec, threads: int) -> None:
    psi = solve_psi(layer, potential, layer.c0, layer.alpha, grid1d=Grid1D(L=512.0, n=8192))
    report.add("psi_residual", psi.residual <= 1e-6, psi.residual, 1e-6)
    report.extend(green_identity_check(), prefix="corrector.")
    q = QField(layer, eps=0.1, b=0.5, threads=threads)
    report.extend(q_poisson_check(q), prefix="corrector.")
    report.extend(verify_corrector_bounds(q, psi), prefix="corrector.")


def _structural(report: Report, potential: PotentialSpec, layer: LayerProfile, steps: int = 100) -> None:
    eps, dt = 0.2, 0.01
    grid = Grid2D(2.0, 1.0, 161, 41)
    solver = SolverConfig()
    base = init_superposition((-0.3, 0.3), eps, layer, grid)
    shifted = init_superposition((-0.35, 0.25), eps, layer, grid)
    lifted = base.evolved(base.values + 1.0, 0.0)

    worst_energy = -np.inf
    worst_order = np.inf
    worst_shift = 0.0
    previous = energy(base, potential)
    for _ in range(steps):
        base = step(base, dt, potential, solver)
        shifted = step(shifted, dt, potential, solver)
        lifted = step(lifted, dt, potential, solver)
        current = energy(base, potential)
        worst_energy = max(worst_energy, current - previous)
        previous = current
        worst_order = min(worst_order, float(np.min(shifted.values - base.values)))
        worst_shift = max(worst_shift, float(np.max(np.abs(lifted.values - base.values - 1.0))))
    report.add("energy_monotone", worst_energy <= 1e-12, worst_energy, 1e-12)
    report.add("comparison_ordering", worst_order >= -1e-12, worst_order, -1e-12)
    report.add("shift_equivariance", worst_shift <= 1e-9, worst_shift, 1e-9)


def verify(
    potential: PotentialSpec = SINUSOIDAL,
    layer: LayerProfile = EXPLICIT_LAYER,
    general_layer: bool = False,
    seed: int = 0,
    threads: int = config.THREADS,
    reduction_multiple: float = 3.0,
) -> Report:
    """
    Quick oracle suite.

    Args:
        potential: Potential under test (the constants and layer identity
            oracles apply to the sinusoidal one only)
        layer: Layer used by the corrector and structural checks
        general_layer: Also solve the general-W layer and compare its trace
        seed: Seed for the random particle and exponent trials
        threads: Worker threads for the q corrector quadratures
        reduction_multiple: Allowed crossing gap between the coupled solver
            at a = 4 and the reduced fractional solver, in units of hx

    Returns:
        Report with one check per criterion
    """
    rng = np.random.default_rng(seed)
    report = Report(title="verify")
    report.extend(validate_potential(potential), prefix="potential.")
    if potential.kind is PotentialKind.SINUSOIDAL:
        c0, alpha = compute_constants(EXPLICIT_LAYER, potential)
        report.add("constants_c0", abs(c0 - 2.0 * np.pi) <= 1e-6, abs(c0 - 2.0 * np.pi), 1e-6, c0=c0)
        report.add("constants_alpha", abs(alpha - 1.0) <= 1e-10, abs(alpha - 1.0), 1e-10, alpha=alpha)
        _layer_identity(report, potential)
        if general_layer:
            _general_layer(report, potential)
    _particle_oracles(report, rng)
    _exponent_feasibility(report, rng)
    _correctors(report, layer, potential, threads)
    _structural(report, potential, layer)
    report.extend(reduction_check(reduction_simulation(), potential, layer, reduction_multiple))
    for check in report.failed():
        logger.warning(f"Verification check '{check.name}' failed: measured {check.measured:.3e}")
    logger.info(f"Verification: {len(report.checks) - len(report.failed())}/{len(report.checks)} checks passed")
    return report
