"""Running configured experiments and writing CSV output.

Per-repetition files hold one row per checkpoint (``k = 0, C, 2C, ...`` and
always ``k = K``) with the fixed column order of :data:`CSV_COLUMNS`.  Floats
are written with 17 significant digits, so values round-trip exactly.
Aggregates give the mean and the sample standard deviation (divisor
``R - 1``) over the ``R`` repetitions; with ``R = 1`` the std is NaN.
Every file starts with ``#`` lines echoing the library version and the full
config.
"""

from __future__ import annotations

import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .. import __version__
from ..core import RandomSource
from ..optimizers import (
    RunRecord,
    SsdmConfig,
    StepSchedule,
    run_parallel_majority_vote,
    run_sgd,
    run_signsgd,
    run_ssdm,
)
from ..probes import estimate_success_probabilities
from ..problems import (
    Node,
    PartitionedProblem,
    Quadratic,
    GaussianNoiseOracle,
    counterexample_problem,
    minibatch,
    random_partitioned_quadratics,
    rosenbrock,
    RosenbrockComponentOracle,
    scale_nodes,
)
from ..special import rho_norm
from .config import ExperimentConfig

CSV_COLUMNS = ("k", "gamma", "f", "g_l1", "g_l2", "rho_norm_hat", "bits_up", "bits_down", "rep", "seed")
AGGREGATE_COLUMNS = ("k", "gamma", "f_mean", "f_std", "g_l1_mean", "g_l1_std", "g_l2_mean", "g_l2_std",
                     "rho_norm_hat_mean", "rho_norm_hat_std", "bits_up", "bits_down", "reps")
OUTPUT_ENV = "SIGNDESCENT_OUTPUT_DIR"
DEFAULT_OUTPUT = "results"
# stream key for probe sampling, disjoint from node streams 0..M-1
_PROBE_STREAM = 2**31
_INT_COLUMNS = {"k", "bits_up", "bits_down", "rep", "seed", "reps"}


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)


def build_problem(cfg: ExperimentConfig) -> PartitionedProblem:
    """The configured problem as ``M`` nodes with mini-batched oracles.

    Shared-data problems give every node the same objective and oracle;
    ``partitioned-quadratic`` draws heterogeneous nodes from ``problem_seed``.
    """
    if cfg.problem == "partitioned-quadratic":
        base = random_partitioned_quadratics(cfg.M, cfg.dim, cfg.noise_sigma, RandomSource(cfg.problem_seed))
        if cfg.node_weights:
            base = scale_nodes(base, cfg.node_weights)
        nodes = [Node(n.objective, minibatch(n.oracle, cfg.tau),
                      None if n.sigma is None else n.sigma / np.sqrt(cfg.tau), n.smoothness)
                 for n in base.nodes]
        return PartitionedProblem(nodes)
    sigma = None
    if cfg.problem == "rosenbrock":
        obj = rosenbrock(cfg.dim)
        oracle = RosenbrockComponentOracle(obj, cfg.nu)
    elif cfg.problem == "counterexample":
        obj, oracle = counterexample_problem(cfg.eps)
    else:
        curv = np.asarray(cfg.curvature, dtype=np.float64) if cfg.curvature else np.ones(cfg.dim)
        obj = Quadratic(curv)
        oracle = GaussianNoiseOracle(obj, cfg.noise_sigma)
        sigma = oracle.variance_bound / np.sqrt(cfg.tau)
    oracle = minibatch(oracle, cfg.tau)
    node = Node(obj, oracle, sigma, float(np.max(obj.coordinate_smoothness)))
    return PartitionedProblem([node] * cfg.M)


def run_once(cfg: ExperimentConfig, seed: int) -> RunRecord:
    problem = build_problem(cfg)
    x0 = cfg.x0 or None
    if cfg.optimizer == "ssdm":
        return run_ssdm(problem, SsdmConfig(cfg.K, cfg.beta, cfg.gamma), seed, x0)
    schedule = StepSchedule(cfg.schedule, cfg.gamma)
    node = problem.nodes[0]
    if cfg.optimizer == "majority-vote":
        return run_parallel_majority_vote(problem.objective, problem.oracle_factory(), cfg.M,
                                          schedule, cfg.K, seed, x0)
    if cfg.optimizer == "sgd":
        return run_sgd(node.objective, node.oracle, schedule, cfg.K, seed, x0)
    option = 1 if cfg.optimizer == "signsgd-1" else 2
    return run_signsgd(node.objective, node.oracle, option, schedule, cfg.K, seed, x0)


def csv_checkpoints(K: int, stride: int) -> np.ndarray:
    ks = np.arange(0, K + 1, stride)
    if ks[-1] != K:
        ks = np.append(ks, K)
    return ks


def repetition_rows(cfg: ExperimentConfig, rep: int) -> np.ndarray:
    """Checkpoint rows (float array in :data:`CSV_COLUMNS` order) of one repetition."""
    seed = cfg.base_seed + rep
    record = run_once(cfg, seed)
    ks = csv_checkpoints(cfg.K, cfg.stride)
    if cfg.probe_samples > 0 and cfg.problem != "partitioned-quadratic":
        node = build_problem(cfg).nodes[0]
        probe_rng = RandomSource(seed).spawn(_PROBE_STREAM)
        for j, k in enumerate(ks):
            x = record.iterates[k]
            rho = estimate_success_probabilities(node.oracle, node.objective, x, cfg.probe_samples,
                                                 probe_rng.spawn(j))
            record.rho_norm_hat[k] = rho_norm(node.objective.gradient(x), rho)
    cols = [record.k, record.gamma, record.f, record.g_l1, record.g_l2, record.rho_norm_hat,
            record.bits_up, record.bits_down]
    rows = np.column_stack([np.asarray(c, dtype=np.float64)[ks] for c in cols])
    extra = np.tile([float(rep), float(seed)], (rows.shape[0], 1))
    return np.hstack([rows, extra])


def _fmt(value: float, column: str) -> str:
    if column in _INT_COLUMNS:
        return str(int(value))
    return "%.17g" % value


def header_lines(cfg: ExperimentConfig, extra: Optional[dict] = None) -> list:
    lines = [f"# signdescent {__version__}"]
    lines += [f"# {line}" for line in cfg.dumps().splitlines() if line]
    for key, value in (extra or {}).items():
        lines.append(f"# {key} = {value}")
    return lines


def write_csv(path: Path, columns, rows, header: list) -> None:
    out = list(header)
    out.append(",".join(columns))
    for row in rows:
        out.append(",".join(_fmt(v, c) for v, c in zip(row, columns)))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(out) + "\n")


def read_csv(path) -> tuple:
    """``(columns, float array)`` of a file written by this module, skipping ``#`` lines."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    columns = tuple(lines[0].split(","))
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]], dtype=np.float64)
    return columns, data.reshape(-1, len(columns))


def aggregate(per_rep: list) -> np.ndarray:
    stack = np.stack(per_rep)  # (R, rows, cols)
    R = stack.shape[0]
    idx = {c: i for i, c in enumerate(CSV_COLUMNS)}
    first = stack[0]
    out = [first[:, idx["k"]], first[:, idx["gamma"]]]
    for c in ("f", "g_l1", "g_l2", "rho_norm_hat"):
        vals = stack[:, :, idx[c]]
        out.append(vals.mean(axis=0))
        out.append(vals.std(axis=0, ddof=1) if R > 1 else np.full(vals.shape[1], np.nan))
    out += [first[:, idx["bits_up"]], first[:, idx["bits_down"]], np.full(first.shape[0], float(R))]
    return np.column_stack(out)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    directory: Path
    run_paths: list
    aggregate_path: Path
    final_values: np.ndarray

    @property
    def final_mean(self) -> float:
        return float(np.mean(self.final_values))

    @property
    def final_std(self) -> float:
        return float(np.std(self.final_values, ddof=1)) if self.final_values.size > 1 else float("nan")


def _safe_path(experiment: str) -> Path:
    parts = [re.sub(r"[^A-Za-z0-9._=+-]", "_", p) for p in experiment.split("/") if p and p != ".."]
    return Path(*parts)


def run_experiment(cfg: ExperimentConfig, out_dir=None, workers: int = 1) -> ExperimentResult:
    """``R`` runs with seeds ``base_seed + rep``; writes ``rep-XXX.csv`` files and ``aggregate.csv``.

    The output is identical for every ``workers`` value.
    """
    root = Path(out_dir) if out_dir is not None else Path(cfg.output) if cfg.output else default_output_dir()
    directory = root / _safe_path(cfg.experiment)
    reps = list(range(cfg.repetitions))
    if workers > 1 and len(reps) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_rep = list(pool.map(repetition_rows, [cfg] * len(reps), reps))
    else:
        per_rep = [repetition_rows(cfg, r) for r in reps]
    header = header_lines(cfg)
    paths = []
    for rep, rows in zip(reps, per_rep):
        path = directory / f"rep-{rep:03d}.csv"
        write_csv(path, CSV_COLUMNS, rows, header)
        paths.append(path)
    agg_path = directory / "aggregate.csv"
    write_csv(agg_path, AGGREGATE_COLUMNS, aggregate(per_rep),
              header + ["# std uses the R - 1 divisor"])
    finals = np.array([rows[-1, CSV_COLUMNS.index("f")] for rows in per_rep])
    return ExperimentResult(cfg, directory, paths, agg_path, finals)
