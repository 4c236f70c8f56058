"""Monte-Carlo estimation of success probabilities and moments, bound checks
and the right-hand sides of the convergence rates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import InvalidInputError, RandomSource, as_vector
from .optimizers import RunRecord
from .problems import SmoothObjective, StochasticOracle
from .special import (
    MomentEstimates,
    SuccessProbabilityVector,
    chebyshev_spb_bound,
    clt_spb_bound,
    gauss_spb_bound,
    improved_gauss_spb_bound,
    rho_norm,
)

DEFAULT_Z = 3.0
_CHUNK_ROWS = 8192


def half_width(p_hat, n: int, z: float = DEFAULT_Z):
    """Normal-approximation half-width ``z sqrt(p(1-p)/n)``."""
    p_hat = np.asarray(p_hat, dtype=np.float64)
    return z * np.sqrt(p_hat * (1.0 - p_hat) / n)


def _chunks(n: int):
    done = 0
    while done < n:
        m = min(_CHUNK_ROWS, n - done)
        yield m
        done += m


def estimate_success_probabilities(oracle: StochasticOracle, objective: SmoothObjective, x,
                                   N: int, rng: RandomSource, z: float = DEFAULT_Z) -> SuccessProbabilityVector:
    """Fraction of ``N`` oracle draws whose sign matches the true gradient's.

    Coordinates with zero true gradient are marked undefined (``probs`` NaN).
    """
    N = int(N)
    if N < 1:
        raise InvalidInputError("N must be at least 1")
    x = as_vector(x, "x")
    true_sign = np.sign(objective.gradient(x))
    hits = np.zeros(x.shape[0], dtype=np.int64)
    for m in _chunks(N):
        draws = oracle.sample_batch(x, m, rng)
        hits += np.sum(np.sign(draws) == true_sign, axis=0)
    defined = true_sign != 0
    probs = np.where(defined, hits / N, np.nan)
    hw = np.where(defined, half_width(np.nan_to_num(probs), N, z), np.nan)
    return SuccessProbabilityVector(probs, hw, defined)


def moments_from_samples(samples: np.ndarray) -> list[MomentEstimates]:
    """Per-column mean, unbiased variance and mean ``|X - mean|^3``."""
    samples = np.asarray(samples, dtype=np.float64)
    n = samples.shape[0]
    if n < 2:
        raise InvalidInputError("need at least two samples")
    mean = samples.mean(axis=0)
    dev = samples - mean
    var = np.sum(dev * dev, axis=0) / (n - 1)
    third = np.mean(np.abs(dev) ** 3, axis=0)
    return [MomentEstimates(float(m), float(v), float(t), n) for m, v, t in zip(mean, var, third)]


def estimate_moments(oracle: StochasticOracle, x, N: int, rng: RandomSource) -> list[MomentEstimates]:
    """Moment estimates of each coordinate of ``g_hat(x)`` from ``N`` draws."""
    N = int(N)
    if N < 2:
        raise InvalidInputError("N must be at least 2")
    x = as_vector(x, "x")
    return moments_from_samples(oracle.sample_batch(x, N, rng))


# ---------------------------------------------------------------------------
# Rate right-hand sides (natural logarithm throughout)


def _check_rate_args(gamma: float, d: int, Lbar: float, K: int):
    if not gamma > 0 or int(d) < 1 or Lbar < 0 or int(K) < 1:
        raise InvalidInputError("need gamma > 0, d >= 1, Lbar >= 0, K >= 1")


def rate_rhs_theorem1(f0_minus_fstar: float, gamma0: float, d: int, Lbar: float, K: int) -> float:
    """Bound on the smallest expected rho-norm for ``gamma_k = gamma0/sqrt(k+1)``."""
    _check_rate_args(gamma0, d, Lbar, K)
    rk = math.sqrt(K)
    return f0_minus_fstar / (gamma0 * rk) + 1.5 * gamma0 * d * Lbar * math.log(K) / rk


def rate_rhs_constant_step(f0_minus_fstar: float, gamma: float, d: int, Lbar: float, K: int) -> float:
    """Bound on the time-averaged expected rho-norm for a constant step ``gamma``."""
    _check_rate_args(gamma, d, Lbar, K)
    return f0_minus_fstar / (gamma * K) + 0.5 * gamma * d * Lbar


def tuned_constant_step(f0_minus_fstar: float, d: int, Lbar: float, K: int) -> float:
    """Step ``sqrt(2 (f0 - f*) / (d Lbar K))`` that balances the two constant-step terms."""
    return math.sqrt(2.0 * f0_minus_fstar / (d * Lbar * K))


def rate_rhs_theorem2(f0_minus_fstar: float, gamma0: float, d: int, Lbar: float, K: int) -> float:
    """Bound on the averaged rho-norm for the monotone variant with ``gamma0/sqrt(k+1)`` steps."""
    _check_rate_args(gamma0, d, Lbar, K)
    return (f0_minus_fstar / gamma0 + gamma0 * d * Lbar) / math.sqrt(K)


def rate_rhs_theorem4(delta_f: float, sigma_tilde: float, L_tilde: float, d: int, K: int) -> float:
    """Bound on the averaged gradient l2-norm of SSDM with default momentum and step."""
    if int(K) < 1 or int(d) < 1:
        raise InvalidInputError("need K >= 1 and d >= 1")
    return (3.0 * delta_f + 16.0 * sigma_tilde + 8.0 * L_tilde * math.sqrt(d)
            + 3.0 * L_tilde * d / math.sqrt(K)) / K ** 0.25


# ---------------------------------------------------------------------------
# Trajectory probes


@dataclass
class RhoNormTrajectory:
    ks: np.ndarray
    values: np.ndarray
    running_average: np.ndarray
    min_probability: np.ndarray

    @property
    def time_average(self) -> float:
        return float(self.running_average[-1])


def checkpoints(K: int, stride: Optional[int] = None) -> np.ndarray:
    """Iterations ``0, C, 2C, ... < K`` with default ``C = max(1, K // 100)``."""
    stride = max(1, K // 100) if stride is None else int(stride)
    if stride < 1:
        raise InvalidInputError("checkpoint stride must be positive")
    return np.arange(0, K, stride)


def empirical_rho_norm_trajectory(record: RunRecord, objective: SmoothObjective, oracle: StochasticOracle,
                                  N: int, rng: RandomSource, stride: Optional[int] = None,
                                  z: float = DEFAULT_Z, fill_record: bool = True) -> RhoNormTrajectory:
    """rho-norm of the true gradient at checkpointed iterates, with estimated ``rho``.

    The running average over checkpoints estimates the time-averaged
    left-hand side of the constant-step rate.  With ``fill_record`` the
    values are written into ``record.rho_norm_hat``.
    """
    ks = checkpoints(record.K, stride)
    values = np.zeros(ks.shape[0])
    mins = np.zeros(ks.shape[0])
    for j, k in enumerate(ks):
        x = record.iterates[k]
        rho = estimate_success_probabilities(oracle, objective, x, N, rng, z)
        values[j] = rho_norm(objective.gradient(x), rho)
        mins[j] = rho.min()
        if fill_record:
            record.rho_norm_hat[k] = values[j]
    running = np.cumsum(values) / np.arange(1, ks.shape[0] + 1)
    return RhoNormTrajectory(ks, values, running, mins)


# ---------------------------------------------------------------------------
# Bound validation


@dataclass
class BoundCheck:
    """One bound compared against an empirical success probability."""

    name: str
    coordinate: int
    bound: float
    empirical: float
    half_width: float
    informative: bool

    @property
    def margin(self) -> float:
        return self.empirical + self.half_width - self.bound

    @property
    def passed(self) -> bool:
        return self.margin >= 0.0


@dataclass
class ProbeReport:
    """Everything measured at one point."""

    x: np.ndarray
    rho: SuccessProbabilityVector
    moments: list
    N: int
    z: float
    checks: list = field(default_factory=list)

    def failures(self) -> list:
        """Informative checks that the empirical probability violates."""
        return [c for c in self.checks if c.informative and not c.passed]


def probe_point(objective: SmoothObjective, oracle: StochasticOracle, x, N: int, rng: RandomSource,
                z: float = DEFAULT_Z) -> ProbeReport:
    """Estimate ``rho`` and moments at ``x`` and compare with the SPB lower bounds.

    The Gauss bounds need unbiased unimodal symmetric noise, so they are
    marked uninformative for oracles with ``bias_allowed``.  The Chebyshev
    and CLT bounds are stated for the sign of the oracle mean, so they use the
    estimated moments and are only checked where that mean has the sign of
    the true gradient.  A bound at or below 1/2 is reported but uninformative.
    """
    x = as_vector(x, "x")
    rho = estimate_success_probabilities(oracle, objective, x, N, rng.spawn(0), z)
    moments = estimate_moments(oracle, x, max(N, 2), rng.spawn(1))
    g = objective.gradient(x)
    checks = []
    for i, m in enumerate(moments):
        if not rho.defined[i]:
            continue
        p, hw = float(rho.probs[i]), float(rho.half_widths[i])
        sigma = math.sqrt(m.variance)
        unbiased = not oracle.bias_allowed
        checks.append(BoundCheck("gauss", i, gauss_spb_bound(abs(g[i]), sigma), p, hw, unbiased))
        checks.append(BoundCheck("gauss-improved", i, improved_gauss_spb_bound(abs(g[i]), sigma), p, hw,
                                 unbiased))
        if m.mean != 0.0 and np.sign(m.mean) == np.sign(g[i]):
            cheb = chebyshev_spb_bound(m.mean, m.variance, 1)
            checks.append(BoundCheck("chebyshev", i, cheb, p, hw, cheb > 0.5))
            if sigma > 0:
                clt = clt_spb_bound(m.mean, sigma, m.third_central ** (1.0 / 3.0), 1)
                checks.append(BoundCheck("clt", i, clt, p, hw, clt > 0.5))
    return ProbeReport(x, rho, moments, N, z, checks)


@dataclass
class GaussianCell:
    abs_g: float
    sigma: float
    rho_hat: float
    half_width: float
    gauss: float
    improved: float

    @property
    def gauss_ok(self) -> bool:
        return self.rho_hat >= self.gauss - self.half_width

    @property
    def improved_ok(self) -> bool:
        return self.rho_hat >= self.improved - self.half_width


def gaussian_spb_grid(abs_g_values: Sequence[float], sigma_values: Sequence[float], N: int,
                      rng: RandomSource, z: float = DEFAULT_Z) -> list[GaussianCell]:
    """Empirical success probability of ``g + sigma N(0,1)`` on a grid, next to both Gauss bounds."""
    cells = []
    for i, a in enumerate(abs_g_values):
        for j, s in enumerate(sigma_values):
            draws = a + s * rng.spawn(i, j).normal(int(N))
            p = float(np.mean(draws > 0))
            cells.append(GaussianCell(float(a), float(s), p, float(half_width(p, N, z)),
                                      gauss_spb_bound(a, s), improved_gauss_spb_bound(a, s)))
    return cells
