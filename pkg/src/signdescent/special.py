"""Special functions, success-probability norms and SPB lower bounds.

All functions are pure.  Bound functions return their raw value even when it
is vacuous (below 1/2) so callers can see when a bound says nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import InvalidInputError, as_vector, check_same_dim

SQRT3 = math.sqrt(3.0)

# above this many trials the pmf is evaluated in log space
_EXACT_COMB_LIMIT = 1000


@dataclass
class SuccessProbabilityVector:
    """Per-coordinate success probabilities ``rho_i``.

    ``defined`` marks coordinates where the true gradient is nonzero; the
    probability of an undefined coordinate is a placeholder (NaN from the
    estimators) and never contributes to a norm.
    """

    probs: np.ndarray
    half_widths: Optional[np.ndarray] = None
    defined: Optional[np.ndarray] = None

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64).reshape(-1)
        if self.defined is None:
            self.defined = ~np.isnan(self.probs)
        else:
            self.defined = np.asarray(self.defined, dtype=bool).reshape(-1)
            if self.defined.shape != self.probs.shape:
                raise InvalidInputError("defined mask does not match probs")
        p = self.probs[self.defined]
        if np.any((p < 0.0) | (p > 1.0)) or np.any(np.isnan(p)):
            raise InvalidInputError("success probabilities must lie in [0, 1]")
        if self.half_widths is not None:
            self.half_widths = np.asarray(self.half_widths, dtype=np.float64).reshape(-1)
            if self.half_widths.shape != self.probs.shape:
                raise InvalidInputError("half_widths does not match probs")

    @property
    def dim(self) -> int:
        return self.probs.shape[0]

    def min(self) -> float:
        """Smallest probability over defined coordinates (NaN if none)."""
        if not np.any(self.defined):
            return float("nan")
        return float(np.min(self.probs[self.defined]))

    def argmin(self) -> int:
        masked = np.where(self.defined, self.probs, np.inf)
        return int(np.argmin(masked))


@dataclass(frozen=True)
class MomentEstimates:
    """Mean, variance and third absolute central moment of one coordinate."""

    mean: float
    variance: float
    third_central: float
    sample_count: int = 0

    def __post_init__(self):
        if not self.variance >= 0.0:
            raise InvalidInputError("variance must be nonnegative")
        if not self.third_central >= 0.0:
            raise InvalidInputError("third central moment must be nonnegative")


def _probs(rho, dim: int) -> np.ndarray:
    if isinstance(rho, SuccessProbabilityVector):
        p = rho.probs
    else:
        p = np.asarray(rho, dtype=np.float64).reshape(-1)
    if p.shape[0] != dim:
        raise InvalidInputError(f"dimension mismatch: gradient has {dim}, rho has {p.shape[0]}")
    return p


def _weighted_l1(g: np.ndarray, weights: np.ndarray) -> float:
    # zero-gradient coordinates contribute nothing, whatever the weight placeholder
    nz = g != 0.0
    return float(np.sum(weights[nz] * np.abs(g[nz])))


def rho_norm(g, rho) -> float:
    """``sum_i (2 rho_i - 1) |g_i|``.

    Negative only if some ``rho_i < 1/2``, which is the point of computing it
    for diagnostics.
    """
    g = as_vector(g, "g")
    return _weighted_l1(g, 2.0 * _probs(rho, g.shape[0]) - 1.0)


def _sigma(sigma, g: np.ndarray) -> np.ndarray:
    s = as_vector(sigma, "sigma")
    check_same_dim(g, s, "g and sigma")
    if np.any(s < 0):
        raise InvalidInputError("sigma must be nonnegative")
    return s


def l12_norm(g, sigma) -> float:
    """Mixed l1 / squared-l2 measure ``sum_i g_i^2 / (|g_i| + sqrt(3) sigma_i)``."""
    g = as_vector(g, "g")
    s = _sigma(sigma, g)
    nz = g != 0.0
    a = np.abs(g[nz])
    return float(np.sum(a * a / (a + SQRT3 * s[nz])))


def improved_l12_norm(g, sigma) -> float:
    """Tighter variant weighting ``|g_i|`` by ``1 - 1/(1 + z + z^2)``, ``z = |g_i|/(sqrt(3) sigma_i)``."""
    g = as_vector(g, "g")
    s = _sigma(sigma, g)
    nz = g != 0.0
    a = np.abs(g[nz])
    sn = s[nz]
    weights = np.ones_like(a)
    noisy = sn > 0.0
    # tiny sigma overflows z to inf, which correctly gives weight 1
    with np.errstate(over="ignore"):
        z = a[noisy] / (SQRT3 * sn[noisy])
        weights[noisy] = 1.0 - 1.0 / (1.0 + z + z * z)
    return float(np.sum(weights * a))


def erf(x: float) -> float:
    """Error function, accurate to a few ulp (backed by :func:`math.erf`)."""
    x = float(x)
    if not math.isfinite(x):
        raise InvalidInputError("erf needs a finite argument")
    return math.erf(x)


def _binom_pmf_terms(M: int, p: float, ks: range) -> list[float]:
    q = 1.0 - p
    if M <= _EXACT_COMB_LIMIT:
        return [math.comb(M, k) * p**k * q ** (M - k) for k in ks]
    lp, lq = math.log(p), math.log(q)
    base = math.lgamma(M + 1)
    return [math.exp(base - math.lgamma(k + 1) - math.lgamma(M - k + 1) + k * lp + (M - k) * lq) for k in ks]


def binomial_tail(M: int, p: float, l: int) -> float:
    """``P(Binomial(M, p) >= l)``.

    Sums whichever tail is the smaller one and complements if needed, so the
    result never leaves [0, 1].

    >>> round(binomial_tail(3, 0.6, 2), 12)
    0.648
    """
    M, l = int(M), int(l)
    if M < 1:
        raise InvalidInputError("M must be a positive integer")
    if not 0 <= l <= M + 1:
        raise InvalidInputError(f"l must lie in [0, M+1], got {l}")
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise InvalidInputError(f"p must lie in [0, 1], got {p}")
    if l == 0:
        return 1.0
    if l == M + 1:
        return 0.0
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    if l > M * p:
        upper = math.fsum(_binom_pmf_terms(M, p, range(l, M + 1)))
        return min(1.0, upper)
    lower = math.fsum(_binom_pmf_terms(M, p, range(0, l)))
    return max(0.0, 1.0 - lower)


def reg_inc_beta_symmetric(p: float, l: int) -> float:
    """Regularized incomplete beta ``I(p; l, l)`` for integer ``l >= 1``.

    Uses ``I(p; l, l) = P(Binomial(2l-1, p) >= l)``.
    """
    l = int(l)
    if l < 1:
        raise InvalidInputError("l must be a positive integer")
    return binomial_tail(2 * l - 1, p, l)


def vote_count(M: int) -> int:
    """``l = floor((M + 1) / 2)``, the votes needed to win among ``M`` nodes."""
    M = int(M)
    if M < 1:
        raise InvalidInputError("M must be a positive integer")
    return (M + 1) // 2


def majority_weights(rho, M: int) -> np.ndarray:
    """``2 I(rho_i; l, l) - 1`` for each entry of ``rho`` (NaN passes through)."""
    l = vote_count(M)
    p = np.asarray(rho, dtype=np.float64).reshape(-1)
    out = np.full(p.shape, np.nan)
    for i, pi in enumerate(p):
        if not np.isnan(pi):
            out[i] = 2.0 * reg_inc_beta_symmetric(pi, l) - 1.0
    return out


def rho_m_norm(g, rho, M: int) -> float:
    """Majority-vote norm ``sum_i (2 I(rho_i; l, l) - 1) |g_i|``, ``l = floor((M+1)/2)``."""
    g = as_vector(g, "g")
    p = _probs(rho, g.shape[0])
    weights = np.zeros_like(p)
    nz = g != 0.0
    weights[nz] = majority_weights(p[nz], M)
    return _weighted_l1(g, weights)


def hoeffding_speedup_bound(rho_min: float, M: int) -> float:
    """Lower factor ``1 - exp(-(2 rho_min - 1)^2 l)`` relating the majority norm to l1."""
    rho_min = float(rho_min)
    if not 0.5 < rho_min <= 1.0:
        raise InvalidInputError(f"rho_min must lie in (1/2, 1], got {rho_min}")
    l = vote_count(M)
    return 1.0 - math.exp(-((2.0 * rho_min - 1.0) ** 2) * l)


def _check_abs_g_sigma(abs_g: float, sigma: float) -> tuple[float, float]:
    abs_g, sigma = float(abs_g), float(sigma)
    if abs_g < 0 or sigma < 0 or not (math.isfinite(abs_g) and math.isfinite(sigma)):
        raise InvalidInputError("abs_g and sigma must be finite and nonnegative")
    if abs_g == 0.0 and sigma == 0.0:
        raise InvalidInputError("abs_g and sigma cannot both be zero")
    return abs_g, sigma


def gauss_spb_bound(abs_g: float, sigma: float) -> float:
    """Success-probability lower bound for unimodal symmetric noise."""
    abs_g, sigma = _check_abs_g_sigma(abs_g, sigma)
    return 0.5 + 0.5 * abs_g / (abs_g + SQRT3 * sigma)


def improved_gauss_spb_bound(abs_g: float, sigma: float) -> float:
    """Second-order refinement of :func:`gauss_spb_bound`; never smaller."""
    abs_g, sigma = _check_abs_g_sigma(abs_g, sigma)
    if sigma == 0.0:
        return 1.0
    z = abs_g / (SQRT3 * sigma)
    return 1.0 - 0.5 / (1.0 + z + z * z)


def chebyshev_spb_bound(mu: float, sigma2: float, tau: int) -> float:
    """``1 - sigma^2 / (tau mu^2)`` for a mini-batch of ``tau`` i.i.d. samples."""
    mu, sigma2 = float(mu), float(sigma2)
    if mu == 0.0:
        raise InvalidInputError("mu must be nonzero")
    if sigma2 < 0:
        raise InvalidInputError("sigma2 must be nonnegative")
    if int(tau) < 1:
        raise InvalidInputError("tau must be a positive integer")
    return 1.0 - sigma2 / (int(tau) * mu * mu)


def clt_spb_bound(mu: float, sigma: float, nu: float, tau: int) -> float:
    """Berry-Esseen based bound ``(1 + erf(|mu| sqrt(tau) / (sqrt(2) sigma)) - nu^3/(sigma^3 sqrt(tau))) / 2``.

    ``nu`` is the cube root of the third absolute central moment.
    """
    mu, sigma, nu = float(mu), float(sigma), float(nu)
    if mu == 0.0:
        raise InvalidInputError("mu must be nonzero")
    if not sigma > 0.0:
        raise InvalidInputError("sigma must be positive")
    if nu < 0:
        raise InvalidInputError("nu must be nonnegative")
    tau = int(tau)
    if tau < 1:
        raise InvalidInputError("tau must be a positive integer")
    rt = math.sqrt(tau)
    return 0.5 * (1.0 + erf(abs(mu) * rt / (math.sqrt(2.0) * sigma)) - (nu / sigma) ** 3 / rt)


def required_minibatch(moments: MomentEstimates) -> float:
    """Threshold ``2 min(sigma^2/mu^2, nu^3/(|mu| sigma^2))``; any larger mini-batch gives SPB."""
    mu, var, nu3 = moments.mean, moments.variance, moments.third_central
    if mu == 0.0:
        raise InvalidInputError("mean must be nonzero")
    if var == 0.0:
        return 0.0
    first = var / (mu * mu)
    if math.isinf(nu3):
        return 2.0 * first
    return 2.0 * min(first, nu3 / (abs(mu) * var))
