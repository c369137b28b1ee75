#!/usr/bin/env python3
# dislocation_cli.py
"""
Command-line entry point for the multilayer dislocation simulator and its
verification suite.

Usage:
    python3 dislocation_cli.py [--config PATH] [--out DIR] [--threads N] [--log-level LEVEL] COMMAND [options]

Examples:
    # Run one coupled simulation from a JSON configuration
    python3 dislocation_cli.py --config configs/two_layers.json --out runs/demo simulate

    # Integrate the particle system for three dislocations
    python3 dislocation_cli.py --out runs/ode ode --centers -1 0 1 --T 2

    # Build the correctors and check their bounds
    python3 dislocation_cli.py --out runs/correctors correctors --eps 0.1

    # Check the barriers for a = 1, delta = 0.05
    python3 dislocation_cli.py --out runs/barriers barriers --a 1 --delta 0.05 --eps 0.2 --centers -0.5 0.5 --T 0.2

    # Same check against a configured run (command-line values override it)
    python3 dislocation_cli.py --config configs/two_layers.json barriers --delta 0.05

    # Full epsilon sweep
    python3 dislocation_cli.py --config configs/sweep.json sweep

    # Quick oracle suite
    python3 dislocation_cli.py verify

Exit codes:
    0  every selected check passed
    1  at least one check failed
    2  invalid configuration or arguments
    3  numerical failure (non-convergence, collision, infeasible exponents)
    4  I/O failure
"""
import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np

from dislocation_core import config
from dislocation_core.artifacts import (
    ArtifactIntegrityError,
    generate_timestamp,
    save_layer_table,
    write_csv,
    write_json,
    write_run_metadata,
    write_snapshot,
)
from dislocation_core.barriers import (
    build_barrier_pair,
    generate_samples,
    initial_ordering_check,
    residual_check,
    sandwich_check,
)
from dislocation_core.config import (
    ConfigurationError,
    DomainConfig,
    ExperimentConfig,
    SimulationConfig,
    TimeConfig,
)
from dislocation_core.correctors import build_q, q_poisson_check, solve_psi, verify_corrector_bounds
from dislocation_core.coupled_solver import init_superposition, run, solve_reduced_fractional
from dislocation_core.grids import Grid2D
from dislocation_core.harness import run_sweep, verify
from dislocation_core.layer_profile import EXPLICIT_LAYER, LayerProfile, solve_layer_general
from dislocation_core.particle_ode import ParticleState, check_distance_bound, integrate
from dislocation_core.potential import PotentialKind, PotentialSpec, load_potential
from dislocation_core.reports import Report

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def resolve_layer(mode: str, potential: PotentialSpec, out_dir: Optional[Path] = None) -> LayerProfile:
    """
    Pick the transition layer for a run.

    The closed-form arctan layer belongs to the sinusoidal potential only;
    any other potential needs mode "general". A solved layer is saved to
    out_dir as layer.csv / layer.json.
    """
    if mode == "explicit":
        if potential.kind is not PotentialKind.SINUSOIDAL:
            raise ConfigurationError("the explicit layer requires the sinusoidal potential; use --layer general")
        return EXPLICIT_LAYER
    if mode != "general":
        raise ConfigurationError(f"layer must be 'explicit' or 'general', got '{mode}'")
    logger.info("Solving the transition layer for the configured potential")
    layer = solve_layer_general(potential)
    if out_dir is not None:
        save_layer_table(layer, out_dir)
    return layer


def finish(report: Report, out_dir: Path, config_hash: str, started: str, name: str = "summary.json") -> int:
    """Write the summary and run metadata, then turn the report into an exit code."""
    write_json(out_dir / name, report.to_dict())
    write_run_metadata(out_dir, config_hash, started, {"command": report.title})
    for check in report.failed():
        logger.warning(f"Check failed: {check.name} (measured {check.measured:.3e})")
    print(f"{report.title}: {len(report.checks) - len(report.failed())}/{len(report.checks)} checks passed")
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def _simulation_from_args(args) -> SimulationConfig:
    if not args.config:
        raise ConfigurationError("this command needs --config PATH")
    data = config.load_json_config(args.config)
    if "simulation" in data:
        data = data["simulation"]
    return SimulationConfig.from_dict(data)


def cmd_simulate(args) -> int:
    started = generate_timestamp()
    simulation = _simulation_from_args(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    potential = load_potential(simulation.potential)
    layer = resolve_layer(args.layer or simulation.layer, potential, out_dir)

    if args.reduced:
        record = solve_reduced_fractional(simulation, potential)
    else:
        record = run(simulation, potential, layer)

    header, rows = record.crossing_table()
    write_csv(out_dir / "crossings.csv", header, rows)
    header, rows = record.energy_table()
    write_csv(out_dir / "energy.csv", header, rows)
    for k, (t, values) in enumerate(record.snapshots):
        meta = {
            "grid": {"Lx": simulation.domain.Lx, "Ly": simulation.domain.Ly, "nx": simulation.nx, "ny": simulation.ny},
            "eps": simulation.epsilon,
            "a": simulation.a,
            "time": t,
            "reduced": bool(args.reduced),
        }
        write_snapshot(out_dir / "snapshots" / f"snapshot_{k:04d}", values, meta)
    write_json(out_dir / "config.json", simulation.to_dict())

    report = Report(title="simulate")
    energies = np.asarray(record.energy)
    increase = float(np.max(np.diff(energies))) if energies.size > 1 else 0.0
    allowed = 1e-10 * max(1.0, float(np.max(np.abs(energies))))
    report.add("energy_monotone", increase <= allowed, increase, allowed)
    if not args.reduced:
        report.add("field_in_band", record.band_violation == 0.0, record.band_violation, 0.0)
    return finish(report, out_dir, simulation.config_hash, started)


def cmd_ode(args) -> int:
    started = generate_timestamp()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    c0 = args.c0 if args.c0 is not None else EXPLICIT_LAYER.c0
    trajectory = integrate(
        ParticleState(tuple(args.centers)), c0, delta=args.delta, orientation=args.orientation, T=args.T, tol=args.tol
    )
    header, rows = trajectory.to_table()
    write_csv(out_dir / "trajectory.csv", header, rows)
    report = Report(title="ode")
    if trajectory.n > 1 and args.delta == 0.0 and args.orientation == "none":
        report.extend(check_distance_bound(trajectory))
    report.constants["min_distance"] = float(np.min(trajectory.min_distance())) if trajectory.n > 1 else float("inf")
    return finish(report, out_dir, "", started)


def cmd_correctors(args) -> int:
    started = generate_timestamp()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    potential = load_potential(args.potential)
    layer = resolve_layer(args.layer, potential, out_dir)
    psi = solve_psi(layer, potential, layer.c0, layer.alpha)
    header, rows = psi.to_table()
    write_csv(out_dir / "psi_trace.csv", header, rows)

    b = args.b if args.b is not None else 0.5
    q = build_q(layer, args.eps, b, threads=args.threads)
    header, rows = q.to_table()
    write_csv(out_dir / "q_samples.csv", header, rows)

    report = verify_corrector_bounds(q, psi, c_max=args.c_max)
    report.extend(q_poisson_check(q))
    write_json(out_dir / "bounds_report.json", report.to_dict())
    return finish(report, out_dir, "", started)


def _barrier_simulation(args) -> SimulationConfig:
    """The run the barriers are checked against: the --config run with any command-line value on top."""
    if args.config:
        simulation = _simulation_from_args(args)
        if args.eps is not None:
            simulation = simulation.with_epsilon(args.eps)
        overrides = {}
        if args.a is not None:
            overrides["a"] = args.a
        if args.centers is not None:
            overrides["centers"] = tuple(args.centers)
        if args.T is not None:
            overrides["time"] = replace(simulation.time, T=args.T)
        return replace(simulation, **overrides)
    missing = [f"--{name}" for name in ("a", "eps", "centers", "T") if getattr(args, name) is None]
    if missing:
        raise ConfigurationError(f"barriers needs --config or {', '.join(missing)}")
    centers = tuple(args.centers)
    Lx = max(abs(centers[0]), abs(centers[-1])) + 2.0
    return SimulationConfig(
        epsilon=args.eps,
        a=args.a,
        centers=centers,
        domain=DomainConfig(Lx=Lx, Ly=2.0),
        time=TimeConfig(T=args.T),
    )


def cmd_barriers(args) -> int:
    started = generate_timestamp()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    simulation = _barrier_simulation(args)
    eps, a, T = simulation.epsilon, simulation.a, simulation.time.T
    potential = load_potential(simulation.potential)
    layer = resolve_layer(args.layer or simulation.layer, potential, out_dir)
    psi = solve_psi(layer, potential, layer.c0, layer.alpha)
    upper, lower = build_barrier_pair(simulation.centers, eps, a, args.delta, T, layer, psi, potential, args.threads)
    write_json(out_dir / "exponents.json", upper.exponents.to_dict())

    report = Report(title="barriers")
    grid = Grid2D(simulation.domain.Lx, simulation.domain.Ly, simulation.nx, simulation.ny)
    initial = init_superposition(simulation.centers, eps, layer, grid, a)
    report.extend(initial_ordering_check(upper, lower, initial, stride=args.stride), prefix="initial.")

    tables = []
    for evaluator in (upper, lower):
        samples = generate_samples(evaluator.exponents, evaluator.trajectory, eps)
        residuals = residual_check(
            evaluator, samples, eps, include_q=not args.no_q, spatial=args.spatial, hx=grid.hx, threads=args.threads
        )
        report.extend(residuals, prefix=f"{evaluator.kind.value}.")
        header, rows = residuals.table()
        tables.append(rows)
        write_csv(out_dir / f"residuals_{evaluator.kind.value}.csv", header, rows)
    write_csv(out_dir / "residuals.csv", header, np.vstack(tables))

    if not args.skip_sandwich:
        record = run(simulation, potential, layer)
        sandwich = sandwich_check(record, upper, lower, stride=args.stride)
        write_json(out_dir / "sandwich_report.json", sandwich.to_dict())
        report.extend(sandwich, prefix="sandwich.")
    return finish(report, out_dir, simulation.config_hash, started)


def cmd_sweep(args) -> int:
    if not args.config:
        raise ConfigurationError("sweep needs --config PATH")
    experiment = ExperimentConfig.from_dict(config.load_json_config(args.config))
    potential = load_potential(experiment.simulation.potential)
    out_root = Path(args.out) if args.out_given else Path(experiment.output_dir)
    layer = resolve_layer(args.layer or experiment.simulation.layer, potential, out_root / experiment.scenario)
    result = run_sweep(
        experiment,
        out_dir=out_root,
        potential=potential,
        layer=layer,
        threads=args.threads,
        barriers=not args.skip_barriers,
        barrier_stride=args.stride,
    )
    summary = result.summary
    print(f"sweep {experiment.scenario}: {len(summary.checks) - len(summary.failed())}/{len(summary.checks)} checks passed")
    print(f"Artifacts in {result.output_dir}")
    return EXIT_OK if summary.passed else EXIT_CHECK_FAILED


def cmd_verify(args) -> int:
    started = generate_timestamp()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    potential = load_potential(args.potential)
    layer = resolve_layer("explicit" if potential.kind is PotentialKind.SINUSOIDAL else "general", potential)
    report = verify(potential, layer, general_layer=args.general_layer, seed=args.seed, threads=args.threads)
    return finish(report, out_dir, "", started)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Multilayer dislocation dynamics: simulation and verification",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Coupled simulation
  python3 dislocation_cli.py --config run.json --out runs/demo simulate

  # Particle system
  python3 dislocation_cli.py ode --centers -1 0 1 --T 2

  # Barrier residuals and sandwich check
  python3 dislocation_cli.py barriers --a 1 --delta 0.05 --eps 0.2 --centers -0.5 0.5 --T 0.2

  # Oracle suite
  python3 dislocation_cli.py verify

Environment (.env.local overrides .env):
  DISLOCATION_THREADS, DISLOCATION_LOG_LEVEL, DISLOCATION_OUTPUT_DIR, DISLOCATION_LAYER
        """,
    )
    parser.add_argument("--config", metavar="PATH", help="JSON configuration file")
    parser.add_argument("--out", metavar="DIR", default=None, help=f"Output directory (default: {config.OUTPUT_DIR}/<command>)")
    parser.add_argument(
        "--threads", type=int, default=config.THREADS, help=f"Worker threads (default: {config.THREADS})"
    )
    parser.add_argument(
        "--log-level",
        default=config.LOG_LEVEL,
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        type=str.upper,
        help=f"Logging level (default: {config.LOG_LEVEL})",
    )

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Run the coupled bulk/interface system from --config")
    p.add_argument("--layer", choices=["explicit", "general"], default=None, help="Transition layer (default: from config)")
    p.add_argument("--reduced", action="store_true", help="Run the reduced 1-D fractional equation instead")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("ode", help="Integrate the particle system")
    p.add_argument("--centers", type=float, nargs="+", required=True, help="Initial positions, increasing")
    p.add_argument("--c0", type=float, default=None, help="Mobility constant (default: 2*pi from the explicit layer)")
    p.add_argument("--delta", type=float, default=0.0, help="Drift magnitude (default: 0)")
    p.add_argument("--orientation", choices=["super", "none", "sub"], default="none")
    p.add_argument("--T", type=float, default=1.0, help="Final time (default: 1)")
    p.add_argument("--tol", type=float, default=1e-9, help="Relative tolerance (default: 1e-9)")
    p.set_defaults(handler=cmd_ode)

    p = sub.add_parser("correctors", help="Solve psi, build q and check their bounds")
    p.add_argument("--potential", default="sine", help="'sine' or a CSV table (u, W)")
    p.add_argument("--layer", choices=["explicit", "general"], default=config.LAYER_MODE)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--b", type=float, default=None, help="Cutoff exponent (default: 0.5)")
    p.add_argument("--c-max", dest="c_max", type=float, default=100.0, help="Largest accepted fitted constant")
    p.set_defaults(handler=cmd_correctors)

    p = sub.add_parser("barriers", help="Check barrier residuals and the sandwich property")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--a", type=float, default=None, help="Bulk exponent (default: from --config)")
    p.add_argument("--eps", type=float, default=None, help="Epsilon (default: from --config)")
    p.add_argument("--centers", type=float, nargs="+", default=None, help="Initial centers (default: from --config)")
    p.add_argument("--T", type=float, default=None, help="Final time (default: from --config)")
    p.add_argument("--layer", choices=["explicit", "general"], default=None)
    p.add_argument("--spatial", choices=["analytic", "fd"], default="analytic", help="Spatial operators in the residual")
    p.add_argument("--no-q", dest="no_q", action="store_true", help="Drop the q corrector from the barrier")
    p.add_argument("--stride", type=int, default=4, help="Grid stride for the ordering checks")
    p.add_argument("--skip-sandwich", dest="skip_sandwich", action="store_true", help="Do not run the coupled solver")
    p.set_defaults(handler=cmd_barriers)

    p = sub.add_parser("sweep", help="Run an epsilon/delta sweep from --config")
    p.add_argument("--layer", choices=["explicit", "general"], default=None)
    p.add_argument("--skip-barriers", dest="skip_barriers", action="store_true")
    p.add_argument("--stride", type=int, default=4)
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("verify", help="Quick oracle suite")
    p.add_argument("--potential", default="sine")
    p.add_argument("--general-layer", dest="general_layer", action="store_true", help="Also solve and compare the general layer")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_verify)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.getLogger().setLevel(args.log_level)
    args.out_given = args.out is not None
    if args.out is None:
        args.out = str(Path(config.OUTPUT_DIR) / args.command)
    if args.threads < 1:
        logger.error(f"--threads must be >= 1, got {args.threads}")
        return EXIT_CONFIG

    try:
        return args.handler(args)
    except (OSError, ArtifactIntegrityError) as e:
        logger.error(f"I/O error: {e}")
        return EXIT_IO
    except ValueError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG
    except (RuntimeError, ArithmeticError) as e:
        logger.exception(f"Numerical failure: {e}")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format='%(levelname)s: %(message)s', stream=sys.stderr)
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\nInterrupted by user")
        sys.exit(1)
