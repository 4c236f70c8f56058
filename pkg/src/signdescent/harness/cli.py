"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from ..core import InvalidInputError, RandomSource
from ..probes import DEFAULT_Z, probe_point
from ..problems import counterexample_problem, minibatch, quadratic_problem, rosenbrock, RosenbrockComponentOracle
from .config import ConfigError, load_config
from .registry import get_experiment, list_experiments
from .runner import OUTPUT_ENV, default_output_dir, run_experiment
from .tables import emit_bound_tables, emit_bound_validation

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
PROBE_PROBLEMS = ("rosenbrock", "counterexample", "quadratic")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="signdescent", description="Sign-based optimizer experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a config file or a canned experiment",
                         epilog=f"default output directory: ${OUTPUT_ENV} or ./results")
    run.add_argument("config", nargs="?", help="TOML config file")
    run.add_argument("--id", dest="exp_id", help="canned experiment id (see `list`)")
    run.add_argument("--seed", type=int, help="override the base seed")
    run.add_argument("--reps", type=int, help="override the repetition count")
    run.add_argument("--out", help="output directory")
    run.add_argument("--workers", type=int, default=1, help="processes for repetitions (output is identical)")

    sub.add_parser("list", help="list canned experiments")

    b = sub.add_parser("bounds", help="write the bound tables")
    b.add_argument("--out", required=True, help="output CSV file")

    pr = sub.add_parser("probe", help="estimate success probabilities and check bounds at a point")
    pr.add_argument("--id", dest="problem", required=True, choices=PROBE_PROBLEMS)
    pr.add_argument("--point", required=True, help="comma-separated coordinates")
    pr.add_argument("--samples", type=int, required=True)
    pr.add_argument("--tau", type=int, default=1, help="mini-batch size")
    pr.add_argument("--nu", type=float, default=1.0, help="Rosenbrock index-noise scale")
    pr.add_argument("--sigma", type=float, default=1.0, help="quadratic noise level")
    pr.add_argument("--eps", type=float, default=0.5, help="counterexample angle parameter")
    pr.add_argument("--seed", type=int, default=0)
    return p


def _overrides(cfg, args):
    changes = {}
    if args.seed is not None:
        changes["base_seed"] = args.seed
    if args.reps is not None:
        changes["repetitions"] = args.reps
    return cfg.replace(**changes) if changes else cfg


def _report(result) -> None:
    print(f"{result.config.experiment}: final f = {result.final_mean:.6g} +- {result.final_std:.6g} "
          f"over {result.final_values.size} reps -> {result.directory}")


def cmd_run(args) -> int:
    if (args.config is None) == (args.exp_id is None):
        raise ConfigError("give exactly one of a config file or --id")
    if args.workers < 1:
        raise ConfigError("--workers must be at least 1")
    out = Path(args.out) if args.out else None
    if args.config is not None:
        cfg = _overrides(load_config(args.config), args)
        _report(run_experiment(cfg, out, args.workers))
        return EXIT_OK
    exp = get_experiment(args.exp_id)
    root = out or default_output_dir()
    if exp.kind == "bound-tables":
        print(emit_bound_tables(root / exp.id / "bound-tables.csv"))
        return EXIT_OK
    if exp.kind == "bound-validation":
        print(emit_bound_validation(root / exp.id / "bound-validation.csv", seed=args.seed or 0))
        return EXIT_OK
    configs = [_overrides(c, args) for c in exp.variants]
    for cfg in configs:
        _report(run_experiment(cfg, root, args.workers))
    return EXIT_OK


def cmd_list(args) -> int:
    rows = list_experiments()
    width = max(len(r[0]) for r in rows)
    for exp_id, desc in rows:
        print(f"{exp_id.ljust(width)}  {desc}")
    return EXIT_OK


def cmd_bounds(args) -> int:
    print(emit_bound_tables(args.out))
    return EXIT_OK


def _parse_point(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",") if v.strip()], dtype=np.float64)
    except ValueError as exc:
        raise ConfigError(f"--point must be comma-separated numbers: {exc}") from exc


def cmd_probe(args) -> int:
    x = _parse_point(args.point)
    if x.size == 0:
        raise ConfigError("--point is empty")
    if args.samples < 2:
        raise ConfigError("--samples must be at least 2")
    if args.problem == "rosenbrock":
        if x.size < 2:
            raise ConfigError("Rosenbrock needs at least 2 coordinates")
        obj = rosenbrock(x.size)
        oracle = RosenbrockComponentOracle(obj, args.nu)
    elif args.problem == "counterexample":
        if x.size != 2:
            raise ConfigError("the counterexample point has 2 coordinates")
        obj, oracle = counterexample_problem(args.eps)
    else:
        obj, oracle = quadratic_problem(np.ones(x.size), args.sigma)
    if args.tau < 1:
        raise ConfigError("--tau must be at least 1")
    report = probe_point(obj, minibatch(oracle, args.tau), x, args.samples, RandomSource(args.seed), DEFAULT_Z)
    g = obj.gradient(x)
    print(f"# {args.problem} at x = {x.tolist()}, N = {report.N}, z = {report.z}")
    print("coordinate,g,rho_hat,half_width,mean,variance,third_central")
    for i, m in enumerate(report.moments):
        print(f"{i},{g[i]:.10g},{report.rho.probs[i]:.6g},{report.rho.half_widths[i]:.3g},"
              f"{m.mean:.10g},{m.variance:.10g},{m.third_central:.10g}")
    print("bound,coordinate,value,empirical,margin,passed,informative")
    for c in report.checks:
        print(f"{c.name},{c.coordinate},{c.bound:.6g},{c.empirical:.6g},{c.margin:.3g},{int(c.passed)},"
              f"{int(c.informative)}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "list": cmd_list, "bounds": cmd_bounds, "probe": cmd_probe}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvalidInputError, OSError, FloatingPointError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
