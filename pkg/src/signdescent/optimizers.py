"""Sign-based optimizers with per-iteration transcripts and bit accounting.

Every run derives one random stream per node from the run seed
(``RandomSource(seed).spawn(n)``), so results do not depend on the order in
which node work is executed.  Single-node methods use node 0's stream; this
is what makes a one-node majority vote replay plain signSGD exactly.

Bit accounting per iteration (``d`` = dimension, ``M`` = nodes):

=====================  ==================  ================================
method                 uplink              downlink
=====================  ==================  ================================
signSGD                ``d``               ``d``
majority vote          ``M d``             ``M d``
SSDM                   ``M d``             ``M d ceil(log2(2M + 1))``
SGD                    ``32 d``            ``32 d``
=====================  ==================  ================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .core import InvalidInputError, RandomSource, sign, stochastic_sign
from .problems import PartitionedProblem, SmoothObjective, StochasticOracle

FLOAT_BITS = 32


@dataclass(frozen=True)
class StepSchedule:
    """``constant``: ``gamma_k = gamma``; ``inverse-sqrt``: ``gamma_k = gamma / sqrt(k + 1)``."""

    kind: str
    gamma: float

    KINDS = ("constant", "inverse-sqrt")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise InvalidInputError(f"unknown schedule {self.kind!r}; expected one of {self.KINDS}")
        if not self.gamma > 0 or not math.isfinite(self.gamma):
            raise InvalidInputError("step size must be positive")

    @classmethod
    def constant(cls, gamma: float) -> "StepSchedule":
        return cls("constant", float(gamma))

    @classmethod
    def inverse_sqrt(cls, gamma0: float) -> "StepSchedule":
        return cls("inverse-sqrt", float(gamma0))

    def __call__(self, k: int) -> float:
        if self.kind == "constant":
            return self.gamma
        return self.gamma / math.sqrt(k + 1)


@dataclass
class SsdmConfig:
    """Iteration budget plus momentum and step size (defaults ``1 - 1/sqrt(K)`` and ``K^(-3/4)``)."""

    K: int
    beta: Optional[float] = None
    gamma: Optional[float] = None

    def __post_init__(self):
        self.K = int(self.K)
        if self.K < 1:
            raise InvalidInputError("K must be at least 1")
        if self.beta is None:
            self.beta = 1.0 - 1.0 / math.sqrt(self.K)
        if self.gamma is None:
            self.gamma = self.K ** -0.75
        if not 0.0 <= self.beta < 1.0:
            raise InvalidInputError("beta must lie in [0, 1)")
        if not self.gamma > 0:
            raise InvalidInputError("gamma must be positive")


@dataclass
class RunRecord:
    """Transcript of one run: row ``k`` describes iterate ``x_k`` (``k = 0..K``).

    ``bits_up``/``bits_down`` are cumulative bits spent to reach ``x_k``.
    ``rho_norm_hat`` stays NaN unless filled in by the probes.
    """

    method: str
    seed: int
    k: np.ndarray
    gamma: np.ndarray
    f: np.ndarray
    g_l1: np.ndarray
    g_l2: np.ndarray
    bits_up: np.ndarray
    bits_down: np.ndarray
    iterates: np.ndarray
    rho_norm_hat: np.ndarray = None
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.rho_norm_hat is None:
            self.rho_norm_hat = np.full(self.k.shape, np.nan)

    @property
    def K(self) -> int:
        return int(self.k[-1])

    @property
    def final_point(self) -> np.ndarray:
        return self.iterates[-1]

    @property
    def final_value(self) -> float:
        return float(self.f[-1])

    def rows(self):
        for j in range(self.k.shape[0]):
            yield (int(self.k[j]), float(self.gamma[j]), float(self.f[j]), float(self.g_l1[j]),
                   float(self.g_l2[j]), float(self.rho_norm_hat[j]),
                   int(self.bits_up[j]), int(self.bits_down[j]))


class _Recorder:
    def __init__(self, objective: SmoothObjective, K: int, x0: np.ndarray):
        self.objective = objective
        n = K + 1
        self.gamma = np.zeros(n)
        self.f = np.zeros(n)
        self.g_l1 = np.zeros(n)
        self.g_l2 = np.zeros(n)
        self.bits_up = np.zeros(n, dtype=np.int64)
        self.bits_down = np.zeros(n, dtype=np.int64)
        self.iterates = np.zeros((n, x0.shape[0]))
        self.K = K

    def log(self, k: int, x: np.ndarray, gamma: float, up: int, down: int, fx: Optional[float] = None):
        g = self.objective.gradient(x)
        self.f[k] = self.objective.value(x) if fx is None else fx
        self.g_l1[k] = np.abs(g).sum()
        self.g_l2[k] = math.sqrt(float(np.dot(g, g)))
        self.gamma[k] = gamma
        self.bits_up[k] = up
        self.bits_down[k] = down
        self.iterates[k] = x

    def finish(self, method: str, seed: int, config: dict) -> RunRecord:
        return RunRecord(method=method, seed=seed, k=np.arange(self.K + 1), gamma=self.gamma,
                         f=self.f, g_l1=self.g_l1, g_l2=self.g_l2, bits_up=self.bits_up,
                         bits_down=self.bits_down, iterates=self.iterates, config=config)


def _start(objective: SmoothObjective, x0) -> np.ndarray:
    x = objective.initial_point() if x0 is None else np.array(x0, dtype=np.float64)
    if x.shape != (objective.dim,):
        raise InvalidInputError(f"x0 must have dimension {objective.dim}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("x0 must be finite")
    return x


def _check_K(K: int) -> int:
    K = int(K)
    if K < 1:
        raise InvalidInputError("K must be at least 1")
    return K


def signsgd_step_opt1(x: np.ndarray, oracle: StochasticOracle, gamma: float, rng: RandomSource) -> np.ndarray:
    """``x - gamma * sign(g_hat(x))``."""
    if not gamma > 0:
        raise InvalidInputError("step size must be positive")
    return x - gamma * sign(oracle.sample(x, rng))


def signsgd_step_opt2(x: np.ndarray, oracle: StochasticOracle, objective: SmoothObjective,
                      gamma: float, rng: RandomSource, fx: Optional[float] = None):
    """Take the sign step only if it strictly lowers ``f``.

    Returns ``(x_next, f(x_next))``; ties keep ``x``.
    """
    candidate = signsgd_step_opt1(x, oracle, gamma, rng)
    fx = objective.value(x) if fx is None else fx
    fc = objective.value(candidate)
    if fc < fx:
        return candidate, fc
    return x, fx


def run_signsgd(objective: SmoothObjective, oracle: StochasticOracle, option: int,
                schedule: StepSchedule, K: int, seed: int, x0=None) -> RunRecord:
    """Single-node signSGD; ``option`` 1 always steps, option 2 keeps the better of ``x`` and the step."""
    if option not in (1, 2):
        raise InvalidInputError("option must be 1 or 2")
    K = _check_K(K)
    x = _start(objective, x0)
    rng = RandomSource(seed).spawn(0)
    d = objective.dim
    rec = _Recorder(objective, K, x)
    fx = objective.value(x)
    rec.log(0, x, schedule(0), 0, 0, fx)
    for k in range(K):
        gamma = schedule(k)
        if option == 1:
            x = signsgd_step_opt1(x, oracle, gamma, rng)
            fx = None
        else:
            x, fx = signsgd_step_opt2(x, oracle, objective, gamma, rng, fx)
        rec.log(k + 1, x, schedule(k + 1), (k + 1) * d, (k + 1) * d, fx)
    config = {"method": f"signsgd-opt{option}", "schedule": schedule.kind, "gamma": schedule.gamma, "K": K}
    return rec.finish(f"signsgd-opt{option}", seed, config)


OracleSource = Union[StochasticOracle, Callable[[int], StochasticOracle]]


def run_parallel_majority_vote(objective: SmoothObjective, oracle_factory: OracleSource, M: int,
                               schedule: StepSchedule, K: int, seed: int, x0=None) -> RunRecord:
    """Parameter-server signSGD: ``M`` nodes send signs, the server returns the majority sign.

    ``oracle_factory`` is either one oracle shared by all nodes (shared data)
    or a callable mapping node index to that node's oracle (partitioned data).
    """
    M = int(M)
    if M < 1:
        raise InvalidInputError("M must be at least 1")
    K = _check_K(K)
    x = _start(objective, x0)
    if isinstance(oracle_factory, StochasticOracle):
        oracles = [oracle_factory] * M
    else:
        oracles = [oracle_factory(n) for n in range(M)]
    root = RandomSource(seed)
    rngs = [root.spawn(n) for n in range(M)]
    d = objective.dim
    per_iter = M * d
    rec = _Recorder(objective, K, x)
    rec.log(0, x, schedule(0), 0, 0)
    for k in range(K):
        gamma = schedule(k)
        x = x - gamma * _vote(oracles, rngs, x)
        rec.log(k + 1, x, schedule(k + 1), (k + 1) * per_iter, (k + 1) * per_iter)
    config = {"method": "majority-vote", "M": M, "schedule": schedule.kind, "gamma": schedule.gamma, "K": K}
    return rec.finish("majority-vote", seed, config)


def _vote(oracles, rngs, x: np.ndarray) -> np.ndarray:
    # same result as majority_vote([sign(o.sample(x, r)) ...]) with one validation per call
    total = np.zeros(x.shape[0])
    for o, r in zip(oracles, rngs):
        total += np.sign(o.sample(x, r))
    if not np.all(np.isfinite(total)):
        raise InvalidInputError("oracle returned non-finite entries")
    return np.sign(total)


def ssdm_downlink_bits(M: int) -> int:
    """Bits per coordinate to broadcast an integer in ``[-M, M]``."""
    return math.ceil(math.log2(2 * M + 1))


def run_ssdm(problem: PartitionedProblem, config: SsdmConfig, seed: int, x0=None,
             sign_operator: str = "stochastic") -> RunRecord:
    """Stochastic sign descent with momentum on a partitioned problem.

    Each node keeps ``m_k = beta m_{k-1} + (1 - beta) g_hat_k`` (with
    ``m_{-1}`` equal to the first sample) and sends the stochastic sign of
    ``m_k``; the server broadcasts the integer sum ``s_k`` and every node
    applies ``x - (gamma / M) s_k``.  ``sign_operator="deterministic"``
    swaps in the plain sign, for comparison only.
    """
    if sign_operator not in ("stochastic", "deterministic"):
        raise InvalidInputError("sign_operator must be 'stochastic' or 'deterministic'")
    objective = problem.objective
    K = config.K
    beta, gamma = config.beta, config.gamma
    M = problem.M
    x = _start(objective, x0)
    root = RandomSource(seed)
    rngs = [root.spawn(n) for n in range(M)]
    oracles = [node.oracle for node in problem.nodes]
    d = objective.dim
    up_iter = M * d
    down_iter = M * d * ssdm_downlink_bits(M)
    momenta: list[Optional[np.ndarray]] = [None] * M
    rec = _Recorder(objective, K, x)
    rec.log(0, x, gamma, 0, 0)
    for k in range(K):
        total = np.zeros(d, dtype=np.int64)
        for n in range(M):
            g_hat = oracles[n].sample(x, rngs[n])
            if momenta[n] is None:
                momenta[n] = g_hat
            else:
                momenta[n] = beta * momenta[n] + (1.0 - beta) * g_hat
            if sign_operator == "stochastic":
                total += stochastic_sign(momenta[n], rngs[n])
            else:
                total += sign(momenta[n])
        x = x - (gamma / M) * total
        rec.log(k + 1, x, gamma, (k + 1) * up_iter, (k + 1) * down_iter)
    cfg = {"method": "ssdm", "M": M, "beta": beta, "gamma": gamma, "K": K, "sign_operator": sign_operator}
    return rec.finish("ssdm", seed, cfg)


def run_sgd(objective: SmoothObjective, oracle: StochasticOracle, schedule: StepSchedule,
            K: int, seed: int, x0=None) -> RunRecord:
    """Plain SGD baseline, charged 32 bits per coordinate each way."""
    K = _check_K(K)
    x = _start(objective, x0)
    rng = RandomSource(seed).spawn(0)
    per_iter = FLOAT_BITS * objective.dim
    rec = _Recorder(objective, K, x)
    rec.log(0, x, schedule(0), 0, 0)
    for k in range(K):
        with np.errstate(over="ignore", invalid="ignore"):
            x = x - schedule(k) * oracle.sample(x, rng)
        if not np.all(np.isfinite(x)):
            raise FloatingPointError(f"SGD diverged at iteration {k + 1}")
        rec.log(k + 1, x, schedule(k + 1), (k + 1) * per_iter, (k + 1) * per_iter)
    config = {"method": "sgd", "schedule": schedule.kind, "gamma": schedule.gamma, "K": K}
    return rec.finish("sgd", seed, config)
