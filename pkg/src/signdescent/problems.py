"""Objectives with known smoothness and stochastic-gradient oracles.

Objectives expose ``value``, ``gradient``, per-coordinate smoothness
constants and, when known, the optimal value.  Oracles draw gradient
estimates from a caller-supplied :class:`~signdescent.core.RandomSource`
and hold no random state of their own, so one oracle can serve many runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import InvalidInputError, RandomSource, as_vector


class SmoothObjective:
    """Base class for coordinate-wise smooth objectives."""

    name = "objective"
    dim: int
    coordinate_smoothness: np.ndarray
    optimum_value: Optional[float] = None

    def value(self, x) -> float:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError

    def initial_point(self) -> np.ndarray:
        return np.zeros(self.dim)

    @property
    def mean_smoothness(self) -> float:
        """``L_bar``, the average of the coordinate smoothness constants."""
        return float(np.mean(self.coordinate_smoothness))

    def quadratic_form(self):
        """``(curvature, center, offset)`` if the objective is a separable quadratic."""
        return None


class StochasticOracle:
    """Base class for gradient estimators ``g_hat(x)``."""

    bias_allowed = False
    minibatch_size = 1

    def __init__(self, objective: SmoothObjective):
        self.objective = objective

    @property
    def dim(self) -> int:
        return self.objective.dim

    def sample(self, x, rng: RandomSource) -> np.ndarray:
        raise NotImplementedError

    def sample_batch(self, x, n: int, rng: RandomSource) -> np.ndarray:
        """``n`` independent samples as an ``(n, dim)`` array."""
        return np.stack([self.sample(x, rng) for _ in range(n)])


# ---------------------------------------------------------------------------
# Rosenbrock


class Rosenbrock(SmoothObjective):
    """``sum_{i<d} 100 (x_{i+1} - x_i^2)^2 + (1 - x_i)^2``.

    The function is not globally smooth, so ``coordinate_smoothness`` holds
    local constants over the box ``[-box, box]^d``: for each coordinate the
    largest Hessian row sum ``|H_ii| + sum_j |H_ij|`` found on a grid.  Row
    sums (rather than the diagonal alone) make ``diag(L) - H`` diagonally
    dominant, so the coordinate descent inequality holds inside the box.
    """

    name = "rosenbrock"

    def __init__(self, d: int, box: float = 2.0, grid_points: int = 41):
        d = int(d)
        if d < 2:
            raise InvalidInputError("Rosenbrock needs d >= 2")
        self.dim = d
        self.box = float(box)
        self.optimum_value = 0.0
        self.coordinate_smoothness = _rosenbrock_row_sums(d, self.box, grid_points)

    def value(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        head, tail = x[:-1], x[1:]
        return float(np.sum(100.0 * (tail - head * head) ** 2 + (1.0 - head) ** 2))

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        head, tail = x[:-1], x[1:]
        r = tail - head * head
        g = np.zeros_like(x)
        g[:-1] = -400.0 * head * r - 2.0 * (1.0 - head)
        g[1:] += 200.0 * r
        return g

    def component_gradient(self, x, i: int) -> np.ndarray:
        """Gradient of the ``i``-th summand (0-based, ``0 <= i < d-1``)."""
        x = np.asarray(x, dtype=np.float64)
        g = np.zeros_like(x)
        r = x[i + 1] - x[i] * x[i]
        g[i] = -400.0 * x[i] * r - 2.0 * (1.0 - x[i])
        g[i + 1] = 200.0 * r
        return g

    def initial_point(self) -> np.ndarray:
        x0 = np.ones(self.dim)
        x0[0] = -1.2
        return x0


def _rosenbrock_row_sums(d: int, box: float, n: int) -> np.ndarray:
    t = np.linspace(-box, box, n)
    prev, cur, nxt = np.meshgrid(t, t, t, indexing="ij")
    # Hessian row i touches x_{i-1}, x_i, x_{i+1}
    diag_head = 1200.0 * cur * cur - 400.0 * nxt + 2.0   # i is a head (i < d-1)
    off_next = np.abs(400.0 * cur)                         # |H_{i,i+1}|
    off_prev = np.abs(400.0 * prev)                        # |H_{i,i-1}|
    first = np.max(np.abs(diag_head) + off_next)
    middle = np.max(np.abs(diag_head + 200.0) + off_next + off_prev)
    last = np.max(200.0 + np.abs(400.0 * t))
    L = np.full(d, middle)
    L[0] = first
    L[-1] = last
    return L


def rosenbrock(d: int) -> Rosenbrock:
    return Rosenbrock(d)


class RosenbrockComponentOracle(StochasticOracle):
    """``grad f_i(x) + xi`` with ``i`` uniform over the ``d-1`` summands, ``xi ~ N(0, nu^2 I)``.

    Biased: its mean is ``grad f(x) / (d - 1)``, a positive rescaling that
    leaves signs of the mean intact.
    """

    bias_allowed = True

    def __init__(self, objective: Rosenbrock, nu: float):
        super().__init__(objective)
        if nu < 0:
            raise InvalidInputError("nu must be nonnegative")
        self.nu = float(nu)

    def sample(self, x, rng: RandomSource) -> np.ndarray:
        i = int(rng.integers(0, self.dim - 1))
        g = self.objective.component_gradient(x, i)
        if self.nu > 0.0:
            g += self.nu * rng.normal(self.dim)
        return g

    def sample_batch(self, x, n: int, rng: RandomSource) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        d = self.dim
        idx = rng.integers(0, d - 1, size=n)
        xi, xn = x[idx], x[idx + 1]
        r = xn - xi * xi
        out = np.zeros((n, d))
        rows = np.arange(n)
        out[rows, idx] = -400.0 * xi * r - 2.0 * (1.0 - xi)
        out[rows, idx + 1] = 200.0 * r
        if self.nu > 0.0:
            out += self.nu * rng.normal((n, d))
        return out


def rosenbrock_component_oracle(d: int, nu: float) -> RosenbrockComponentOracle:
    return RosenbrockComponentOracle(Rosenbrock(d), nu)


# ---------------------------------------------------------------------------
# Two-direction least squares on which plain signSGD stalls


class TwoDirectionLeastSquares(SmoothObjective):
    """``(<a1, x>^2 + <a2, x>^2) / 2`` with ``a1 = (1+eps, -1+eps)``, ``a2 = (-1+eps, 1+eps)``."""

    name = "counterexample"

    def __init__(self, eps: float):
        eps = float(eps)
        if not 0.0 < eps < 1.0:
            raise InvalidInputError(f"eps must lie in (0, 1), got {eps}")
        self.eps = eps
        self.dim = 2
        self.directions = np.array([[1.0 + eps, -1.0 + eps], [-1.0 + eps, 1.0 + eps]])
        self.optimum_value = 0.0
        A = self.directions.T @ self.directions
        # Gershgorin row sums: diag(L) - A is diagonally dominant hence PSD
        self.coordinate_smoothness = np.abs(A).sum(axis=1)

    def value(self, x) -> float:
        p = self.directions @ np.asarray(x, dtype=np.float64)
        return float(0.5 * np.dot(p, p))

    def gradient(self, x) -> np.ndarray:
        p = self.directions @ np.asarray(x, dtype=np.float64)
        return self.directions.T @ p

    def initial_point(self) -> np.ndarray:
        return np.array([1.0, 1.0])

    def in_low_success_cone(self, x) -> bool:
        """True when ``<a1, x> <a2, x> > 0``, the region where sign information is useless."""
        p = self.directions @ np.asarray(x, dtype=np.float64)
        return bool(p[0] * p[1] > 0)


class TwoDirectionOracle(StochasticOracle):
    """Unbiased oracle returning ``2 <a_i, x> a_i`` for ``i`` in {1, 2} with probability 1/2 each."""

    def sample(self, x, rng: RandomSource) -> np.ndarray:
        i = int(rng.integers(0, 2))
        a = self.objective.directions[i]
        return 2.0 * float(np.dot(a, x)) * a

    def sample_batch(self, x, n: int, rng: RandomSource) -> np.ndarray:
        idx = rng.integers(0, 2, size=n)
        a = self.objective.directions[idx]
        return 2.0 * (a @ np.asarray(x, dtype=np.float64))[:, None] * a


def counterexample_problem(eps: float):
    obj = TwoDirectionLeastSquares(eps)
    return obj, TwoDirectionOracle(obj)


# ---------------------------------------------------------------------------
# Separable quadratics


class Quadratic(SmoothObjective):
    """``f(x) = 1/2 sum_i h_i (x_i - c_i)^2 + offset`` with ``L_i = h_i``."""

    name = "quadratic"

    def __init__(self, curvature, center=None, offset: float = 0.0):
        h = as_vector(curvature, "curvature")
        if np.any(h <= 0):
            raise InvalidInputError("curvature entries must be positive")
        self.curvature = h
        self.center = np.zeros_like(h) if center is None else as_vector(center, "center")
        if self.center.shape != h.shape:
            raise InvalidInputError("center and curvature dims differ")
        self.offset = float(offset)
        self.dim = h.shape[0]
        self.coordinate_smoothness = h.copy()
        self.optimum_value = self.offset

    def value(self, x) -> float:
        r = np.asarray(x, dtype=np.float64) - self.center
        return float(0.5 * np.dot(self.curvature * r, r) + self.offset)

    def gradient(self, x) -> np.ndarray:
        return self.curvature * (np.asarray(x, dtype=np.float64) - self.center)

    def initial_point(self) -> np.ndarray:
        return self.center + 1.0

    def quadratic_form(self):
        return self.curvature, self.center, self.offset


class GaussianNoiseOracle(StochasticOracle):
    """``grad f(x) + sigma * N(0, I)`` with per-coordinate standard deviations."""

    def __init__(self, objective: SmoothObjective, noise_sigma):
        super().__init__(objective)
        s = np.asarray(noise_sigma, dtype=np.float64).reshape(-1)
        if s.size == 1:
            s = np.full(objective.dim, float(s[0]))
        if s.shape[0] != objective.dim:
            raise InvalidInputError("noise_sigma dimension mismatch")
        if np.any(s < 0) or not np.all(np.isfinite(s)):
            raise InvalidInputError("noise_sigma must be finite and nonnegative")
        self.noise_sigma = s
        self._noisy = bool(np.any(s > 0))

    @property
    def variance_bound(self) -> float:
        """``sigma_n`` with ``E||g_hat - grad f||^2 = sigma_n^2``."""
        return float(np.linalg.norm(self.noise_sigma))

    def sample(self, x, rng: RandomSource) -> np.ndarray:
        g = self.objective.gradient(x)
        if self._noisy:
            g = g + self.noise_sigma * rng.normal(self.dim)
        return g

    def sample_batch(self, x, n: int, rng: RandomSource) -> np.ndarray:
        g = np.broadcast_to(self.objective.gradient(x), (n, self.dim))
        if not self._noisy:
            return g.copy()
        return g + self.noise_sigma * rng.normal((n, self.dim))


class ExactGradientOracle(StochasticOracle):
    """Noiseless oracle; consumes no randomness."""

    def sample(self, x, rng: RandomSource) -> np.ndarray:
        return self.objective.gradient(x)

    def sample_batch(self, x, n: int, rng: RandomSource) -> np.ndarray:
        return np.tile(self.objective.gradient(x), (n, 1))


def quadratic_problem(diag, noise_sigma, center=None):
    obj = Quadratic(diag, center)
    return obj, GaussianNoiseOracle(obj, noise_sigma)


# ---------------------------------------------------------------------------
# Wrappers


class MinibatchOracle(StochasticOracle):
    """Average of ``tau`` i.i.d. base samples."""

    def __init__(self, base: StochasticOracle, tau: int):
        tau = int(tau)
        if tau < 1:
            raise InvalidInputError("mini-batch size must be at least 1")
        super().__init__(base.objective)
        self.base = base
        self.minibatch_size = tau
        self.bias_allowed = base.bias_allowed

    def sample(self, x, rng: RandomSource) -> np.ndarray:
        if self.minibatch_size == 1:
            return self.base.sample(x, rng)
        return self.base.sample_batch(x, self.minibatch_size, rng).mean(axis=0)

    def sample_batch(self, x, n: int, rng: RandomSource) -> np.ndarray:
        tau = self.minibatch_size
        if tau == 1:
            return self.base.sample_batch(x, n, rng)
        raw = self.base.sample_batch(x, n * tau, rng)
        return raw.reshape(n, tau, self.dim).mean(axis=1)


def minibatch(oracle: StochasticOracle, tau: int) -> MinibatchOracle:
    return MinibatchOracle(oracle, tau)


class ScaledObjective(SmoothObjective):
    """``w * f`` for a positive weight ``w``."""

    def __init__(self, base: SmoothObjective, weight: float):
        if not weight > 0:
            raise InvalidInputError("weights must be positive")
        self.base = base
        self.weight = float(weight)
        self.name = f"{base.name}*{weight:g}"
        self.dim = base.dim
        self.coordinate_smoothness = self.weight * base.coordinate_smoothness
        self.optimum_value = None if base.optimum_value is None else self.weight * base.optimum_value

    def value(self, x) -> float:
        return self.weight * self.base.value(x)

    def gradient(self, x) -> np.ndarray:
        return self.weight * self.base.gradient(x)

    def initial_point(self) -> np.ndarray:
        return self.base.initial_point()

    def quadratic_form(self):
        form = self.base.quadratic_form()
        if form is None:
            return None
        h, c, off = form
        return self.weight * h, c, self.weight * off


class ScaledOracle(StochasticOracle):
    def __init__(self, base: StochasticOracle, weight: float, objective: ScaledObjective):
        super().__init__(objective)
        self.base = base
        self.weight = float(weight)
        self.bias_allowed = base.bias_allowed
        self.minibatch_size = base.minibatch_size

    def sample(self, x, rng: RandomSource) -> np.ndarray:
        return self.weight * self.base.sample(x, rng)

    def sample_batch(self, x, n: int, rng: RandomSource) -> np.ndarray:
        return self.weight * self.base.sample_batch(x, n, rng)


# ---------------------------------------------------------------------------
# Partitioned (multi-node) problems


@dataclass
class Node:
    """One worker: its local objective, oracle, variance bound and smoothness."""

    objective: SmoothObjective
    oracle: StochasticOracle
    sigma: Optional[float]
    smoothness: float


class AverageObjective(SmoothObjective):
    """``(1/M) sum_n f_n``."""

    name = "average"

    def __init__(self, parts: Sequence[SmoothObjective]):
        if not parts:
            raise InvalidInputError("need at least one node objective")
        dims = {p.dim for p in parts}
        if len(dims) != 1:
            raise InvalidInputError(f"node objectives have inconsistent dims {sorted(dims)}")
        self.parts = list(parts)
        self.dim = parts[0].dim
        self.coordinate_smoothness = np.mean([p.coordinate_smoothness for p in parts], axis=0)
        self.optimum_value = self._optimum_value()

    def value(self, x) -> float:
        if len(self.parts) == 1:
            return self.parts[0].value(x)
        return float(np.mean([p.value(x) for p in self.parts]))

    def gradient(self, x) -> np.ndarray:
        if len(self.parts) == 1:
            return self.parts[0].gradient(x)
        return np.mean([p.gradient(x) for p in self.parts], axis=0)

    def initial_point(self) -> np.ndarray:
        return self.parts[0].initial_point()

    def minimizer(self) -> Optional[np.ndarray]:
        """Closed-form minimizer when every part is a separable quadratic."""
        forms = [p.quadratic_form() for p in self.parts]
        if any(f is None for f in forms):
            return None
        h = np.sum([f[0] for f in forms], axis=0)
        hc = np.sum([f[0] * f[1] for f in forms], axis=0)
        return hc / h

    def _optimum_value(self) -> Optional[float]:
        if len(self.parts) == 1:
            return self.parts[0].optimum_value
        xstar = self.minimizer()
        return None if xstar is None else self.value(xstar)


class PartitionedProblem:
    """``M`` nodes, each owning ``f_n``; the global objective is their average."""

    def __init__(self, nodes: Sequence[Node]):
        self.nodes = list(nodes)
        self.objective = AverageObjective([n.objective for n in self.nodes])

    @classmethod
    def single(cls, objective: SmoothObjective, oracle: StochasticOracle, sigma: Optional[float] = None):
        """Wrap one objective/oracle pair as a one-node problem."""
        return cls([Node(objective, oracle, sigma, float(np.max(objective.coordinate_smoothness)))])

    @property
    def M(self) -> int:
        return len(self.nodes)

    @property
    def dim(self) -> int:
        return self.objective.dim

    @property
    def sigma_tilde(self) -> Optional[float]:
        if any(n.sigma is None for n in self.nodes):
            return None
        return float(np.mean([n.sigma for n in self.nodes]))

    @property
    def L_tilde(self) -> float:
        return float(np.mean([n.smoothness for n in self.nodes]))

    def oracle_factory(self, noiseless: bool = False) -> Callable[[int], StochasticOracle]:
        if noiseless:
            return lambda n: ExactGradientOracle(self.nodes[n].objective)
        return lambda n: self.nodes[n].oracle

    def minimizer(self) -> Optional[np.ndarray]:
        return self.objective.minimizer()


def partitioned_quadratics(curvatures, centers, noise_sigmas) -> PartitionedProblem:
    """One separable quadratic per node with an unbiased Gaussian oracle.

    ``sigma_n`` is the l2 norm of the node's noise vector and ``L^n`` the
    largest curvature entry.
    """
    if not (len(curvatures) == len(centers) == len(noise_sigmas)) or len(curvatures) == 0:
        raise InvalidInputError("need matching, non-empty per-node curvature/center/noise lists")
    nodes = []
    for h, c, s in zip(curvatures, centers, noise_sigmas):
        obj = Quadratic(h, c)
        oracle = GaussianNoiseOracle(obj, s)
        nodes.append(Node(obj, oracle, oracle.variance_bound, float(np.max(obj.curvature))))
    dims = {n.objective.dim for n in nodes}
    if len(dims) != 1:
        raise InvalidInputError(f"node dims are inconsistent: {sorted(dims)}")
    return PartitionedProblem(nodes)


def random_partitioned_quadratics(M: int, d: int, noise: float, rng: RandomSource,
                                  spread: float = 2.0) -> PartitionedProblem:
    """Heterogeneous nodes: curvatures in [0.5, 2], centers in [-spread, spread]."""
    curv = [0.5 + 1.5 * rng.uniform(d) for _ in range(M)]
    cent = [spread * (2.0 * rng.uniform(d) - 1.0) for _ in range(M)]
    return partitioned_quadratics(curv, cent, [np.full(d, float(noise))] * M)


def scale_nodes(problem: PartitionedProblem, weights) -> PartitionedProblem:
    """Multiply every node's loss (and hence gradients, oracle, ``sigma_n``, ``L^n``) by ``w_n > 0``."""
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if w.shape[0] != problem.M:
        raise InvalidInputError(f"need {problem.M} weights, got {w.shape[0]}")
    if np.any(~(w > 0)) or not np.all(np.isfinite(w)):
        raise InvalidInputError("weights must be finite and positive")
    nodes = []
    for node, wn in zip(problem.nodes, w):
        obj = ScaledObjective(node.objective, wn)
        nodes.append(Node(obj, ScaledOracle(node.oracle, wn, obj),
                          None if node.sigma is None else wn * node.sigma,
                          wn * node.smoothness))
    return PartitionedProblem(nodes)


def descent_gap(objective: SmoothObjective, x, y) -> float:
    """RHS minus LHS of the coordinate descent inequality (nonnegative when it holds)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    step = y - x
    rhs = objective.value(x) + float(np.dot(objective.gradient(x), step)) \
        + 0.5 * float(np.dot(objective.coordinate_smoothness, step * step))
    return rhs - objective.value(y)

