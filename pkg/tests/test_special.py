import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import integrate, special as sp, stats

from signdescent.core import InvalidInputError
from signdescent.special import (
    MomentEstimates,
    SuccessProbabilityVector,
    binomial_tail,
    chebyshev_spb_bound,
    clt_spb_bound,
    erf,
    gauss_spb_bound,
    hoeffding_speedup_bound,
    improved_gauss_spb_bound,
    improved_l12_norm,
    l12_norm,
    majority_weights,
    reg_inc_beta_symmetric,
    required_minibatch,
    rho_m_norm,
    rho_norm,
    vote_count,
)

SQRT3 = math.sqrt(3.0)
P_GRID = [round(0.05 * i, 2) for i in range(1, 20)]
probs = st.floats(0.0, 1.0)
grads = arrays(np.float64, st.integers(1, 8), elements=st.floats(-100, 100))


def enumerate_tail(M, p, l):
    """P(#successes >= l) by summing over all 2^M outcomes."""
    total = 0.0
    for outcome in itertools.product((0, 1), repeat=M):
        s = sum(outcome)
        if s >= l:
            total += p**s * (1 - p) ** (M - s)
    return total


def quad_beta(p, l):
    val, _ = integrate.quad(lambda t: t ** (l - 1) * (1 - t) ** (l - 1), 0.0, p, epsabs=1e-14, epsrel=1e-13)
    return val / sp.beta(l, l)


# ---- success-probability containers ---------------------------------------

def test_success_probability_vector_validation():
    v = SuccessProbabilityVector([0.7, np.nan, 0.9])
    assert v.defined.tolist() == [True, False, True]
    assert v.min() == 0.7 and v.argmin() == 0
    assert math.isnan(SuccessProbabilityVector([np.nan]).min())
    with pytest.raises(InvalidInputError):
        SuccessProbabilityVector([1.2])
    with pytest.raises(InvalidInputError):
        MomentEstimates(0.0, -1.0, 0.0)


# ---- norms -----------------------------------------------------------------

def test_rho_norm_examples():
    assert rho_norm([2.0, -3.0], [0.75, 0.6]) == pytest.approx(1.6, abs=1e-15)
    g = np.array([1.0, -2.0, 3.5])
    assert rho_norm(g, np.ones(3)) == pytest.approx(6.5)
    assert rho_norm(g, np.full(3, 0.5)) == 0.0
    # placeholder at a zero-gradient coordinate is ignored
    assert rho_norm([0.0, 2.0], [np.nan, 0.75]) == pytest.approx(1.0)
    with pytest.raises(InvalidInputError):
        rho_norm([1.0, 2.0], [0.6])


def test_l12_examples():
    assert l12_norm([1.0, -2.0], [0.0, 0.0]) == pytest.approx(3.0)
    assert l12_norm([1.0], [1 / SQRT3]) == pytest.approx(0.5)
    assert l12_norm([0.0, 0.0], [1.0, 2.0]) == 0.0
    assert improved_l12_norm([1.0, -2.0], [0.0, 0.0]) == pytest.approx(3.0)
    assert improved_l12_norm([1.0], [1 / SQRT3]) == pytest.approx(2 / 3)
    with pytest.raises(InvalidInputError):
        l12_norm([1.0], [-1.0])


@given(grads, st.data())
def test_improved_l12_dominates_l12(g, data):
    s = data.draw(arrays(np.float64, g.shape, elements=st.floats(0.0, 100)))
    assert improved_l12_norm(g, s) >= l12_norm(g, s) - 1e-12 * (1 + np.sum(np.abs(g)))
    assert l12_norm(g, s) <= np.sum(np.abs(g)) + 1e-12


@given(grads, st.data())
def test_l12_order_preserving(g, data):
    g = np.abs(g)
    bump = data.draw(arrays(np.float64, g.shape, elements=st.floats(0.0, 10)))
    s = data.draw(arrays(np.float64, g.shape, elements=st.floats(0.0, 10)))
    assert l12_norm(g, s) <= l12_norm(g + bump, s) + 1e-9


@given(grads, st.data())
def test_positive_definite_under_spb(g, data):
    rho = data.draw(arrays(np.float64, g.shape, elements=st.floats(0.51, 1.0)))
    s = data.draw(arrays(np.float64, g.shape, elements=st.floats(0.0, 10)))
    zero = not np.any(g)
    assert (rho_norm(g, rho) == 0) == zero
    assert (l12_norm(g, s) == 0) == zero


@given(grads, st.data())
def test_gauss_weights_give_at_least_l12(g, data):
    s = data.draw(arrays(np.float64, g.shape, elements=st.floats(0.01, 10)))
    rho = [gauss_spb_bound(abs(a), b) for a, b in zip(g, s)]
    assert rho_norm(g, rho) >= l12_norm(g, s) - 1e-9


def test_coordinate_chain_grid():
    for a in np.linspace(0.01, 10, 40):
        for s in np.linspace(0.0, 10, 41):
            val = a * a / (a + SQRT3 * s)
            if s < SQRT3 / 2 * a:
                assert val >= 0.4 * a - 1e-12
            else:
                assert val >= SQRT3 / 5 * a * a / s - 1e-12


# ---- erf and the binomial tail -------------------------------------------

def test_erf_examples():
    assert erf(0.0) == 0.0
    assert erf(1.0) == pytest.approx(0.8427007929, abs=1e-10)
    assert erf(1.0) > 1 / math.sqrt(2)
    # quadrature oracle of 2/sqrt(pi) int_0^x e^{-t^2} dt
    for x in (-2.5, -0.3, 0.7, 1.9, 4.0):
        q, _ = integrate.quad(lambda t: math.exp(-t * t), 0.0, x, epsabs=1e-15)
        assert erf(x) == pytest.approx(2 / math.sqrt(math.pi) * q, abs=1e-12)
    with pytest.raises(InvalidInputError):
        erf(float("nan"))


def test_binomial_tail_examples():
    assert binomial_tail(5, 0.3, 0) == 1.0
    assert binomial_tail(3, 0.6, 2) == pytest.approx(0.648, abs=1e-15)
    assert binomial_tail(3, 0.5, 2) == pytest.approx(0.5, abs=1e-15)
    assert binomial_tail(4, 0.7, 5) == 0.0
    assert binomial_tail(4, 0.0, 1) == 0.0 and binomial_tail(4, 1.0, 4) == 1.0


@pytest.mark.parametrize("args", [(0, 0.5, 1), (3, 1.5, 1), (3, -0.1, 1), (3, 0.5, 5), (3, 0.5, -1)])
def test_binomial_tail_rejects(args):
    with pytest.raises(InvalidInputError):
        binomial_tail(*args)


def test_binomial_tail_matches_enumeration():
    for M in range(1, 11):
        for p in (0.05, 0.3, 0.5, 0.62, 0.99):
            for l in range(M + 2):
                assert binomial_tail(M, p, l) == pytest.approx(enumerate_tail(M, p, l), abs=1e-13)


@pytest.mark.parametrize("M", [50, 999, 1001, 5000])
def test_binomial_tail_large_M_matches_scipy(M):
    for p in (0.01, 0.4999, 0.5, 0.73):
        for l in (1, M // 3, M // 2, M // 2 + 1, M):
            assert binomial_tail(M, p, l) == pytest.approx(stats.binom.sf(l - 1, M, p), abs=1e-10)


@given(st.integers(1, 60), probs, st.data())
def test_binomial_tail_monotone_and_bounded(M, p, data):
    l = data.draw(st.integers(0, M + 1))
    t = binomial_tail(M, p, l)
    assert 0.0 <= t <= 1.0
    if l <= M:
        assert binomial_tail(M, p, l + 1) <= t + 1e-12
    q = data.draw(st.floats(p, 1.0))
    assert binomial_tail(M, q, l) >= t - 1e-12


def test_reg_inc_beta_examples():
    for p in P_GRID:
        assert reg_inc_beta_symmetric(p, 1) == pytest.approx(p, abs=1e-15)
    assert reg_inc_beta_symmetric(0.6, 2) == pytest.approx(0.6**2 * (3 - 2 * 0.6), abs=1e-15)
    assert reg_inc_beta_symmetric(0.6, 2) == pytest.approx(binomial_tail(3, 0.6, 2), abs=1e-15)
    for l in range(1, 6):
        assert reg_inc_beta_symmetric(0.0, l) == 0.0 and reg_inc_beta_symmetric(1.0, l) == 1.0
    with pytest.raises(InvalidInputError):
        reg_inc_beta_symmetric(0.5, 0)


def test_reg_inc_beta_matches_quadrature_and_scipy():
    for l in range(1, 9):
        for p in P_GRID:
            val = reg_inc_beta_symmetric(p, l)
            assert abs(val - quad_beta(p, l)) <= 1e-9
            assert abs(val - sp.betainc(l, l, p)) <= 1e-12


def test_even_odd_identity_by_enumeration():
    # 2 I(rho; l, l) - 1 = P(S_{2l} >= l+1) - P(S_{2l} <= l-1)
    for l in range(1, 7):
        for rho in P_GRID:
            lhs = 2 * reg_inc_beta_symmetric(rho, l) - 1
            rhs = enumerate_tail(2 * l, rho, l + 1) - (1 - enumerate_tail(2 * l, rho, l))
            assert lhs == pytest.approx(rhs, abs=1e-12)


# ---- majority-vote norm and speedup ---------------------------------------

def test_vote_count_and_weights():
    assert [vote_count(M) for M in range(1, 7)] == [1, 1, 2, 2, 3, 3]
    w = majority_weights([0.6, np.nan], 3)
    assert w[0] == pytest.approx(2 * 0.648 - 1) and np.isnan(w[1])
    with pytest.raises(InvalidInputError):
        vote_count(0)


@given(grads, st.data())
def test_rho_m_norm_examples(g, data):
    rho = data.draw(arrays(np.float64, g.shape, elements=st.floats(0.5, 1.0)))
    assert rho_m_norm(g, rho, 1) == pytest.approx(rho_norm(g, rho), abs=1e-9)
    for l in range(1, 5):
        assert rho_m_norm(g, rho, 2 * l) == rho_m_norm(g, rho, 2 * l - 1)
    M = data.draw(st.integers(1, 20))
    assert rho_m_norm(g, np.ones(g.shape), M) == pytest.approx(np.sum(np.abs(g)))


def test_hoeffding_examples():
    assert hoeffding_speedup_bound(1.0, 1) == pytest.approx(1 - math.exp(-1))
    for rho in (0.55, 0.7, 0.95):
        vals = [hoeffding_speedup_bound(rho, M) for M in range(1, 30)]
        assert all(b >= a for a, b in zip(vals, vals[1:]))
    for bad in (0.5, 0.3, 1.01):
        with pytest.raises(InvalidInputError):
            hoeffding_speedup_bound(bad, 3)


def test_hoeffding_sandwich_with_mixed_rho():
    rng = np.random.default_rng(0)
    for rho_min in np.arange(0.55, 0.96, 0.05):
        for M in range(1, 16):
            g = rng.normal(size=7) * 3
            rho = rng.uniform(rho_min, 1.0, size=7)
            l1 = np.sum(np.abs(g))
            val = rho_m_norm(g, rho, M)
            assert hoeffding_speedup_bound(rho_min, M) * l1 <= val <= l1 + 1e-12


# ---- success-probability bounds ---------------------------------------------

def test_gauss_bound_examples():
    assert gauss_spb_bound(2.0, 0.0) == 1.0
    assert gauss_spb_bound(SQRT3 * 0.7, 0.7) == pytest.approx(0.75)
    assert gauss_spb_bound(1e-12, 1.0) == pytest.approx(0.5)
    assert improved_gauss_spb_bound(2.0, 0.0) == 1.0
    assert improved_gauss_spb_bound(SQRT3 * 0.7, 0.7) == pytest.approx(5 / 6)
    with pytest.raises(InvalidInputError):
        gauss_spb_bound(0.0, 0.0)
    with pytest.raises(InvalidInputError):
        improved_gauss_spb_bound(-1.0, 1.0)


def test_gauss_bounds_grid_monotone_and_dominated():
    a_grid = np.linspace(0.01, 10, 30)
    s_grid = np.linspace(0.01, 10, 30)
    G = np.array([[gauss_spb_bound(a, s) for s in s_grid] for a in a_grid])
    I = np.array([[improved_gauss_spb_bound(a, s) for s in s_grid] for a in a_grid])
    assert np.all(I >= G) and np.all((G >= 0.5) & (G <= 1))
    assert np.all(np.diff(G, axis=0) > 0) and np.all(np.diff(G, axis=1) < 0)


def test_gauss_bound_holds_for_gaussian_noise_exactly():
    # P(g + sigma Z > 0) = Phi(g / sigma) computed independently
    for a in (0.01, 0.3, 1.0, 5.0):
        for s in (0.1, 1.0, 3.0):
            exact = stats.norm.cdf(a / s)
            assert exact >= improved_gauss_spb_bound(a, s) >= gauss_spb_bound(a, s)


def test_chebyshev_examples():
    assert chebyshev_spb_bound(2.0, 0.0, 1) == 1.0
    assert chebyshev_spb_bound(0.5, 3.0, 2 * 3.0 / 0.25) == pytest.approx(0.5)
    assert chebyshev_spb_bound(1.0, 1.0, 4) == pytest.approx(0.75)
    assert chebyshev_spb_bound(1.0, 9.0, 1) == -8.0  # vacuous values are not clamped
    vals = [chebyshev_spb_bound(-0.3, 2.0, t) for t in range(1, 50)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    with pytest.raises(InvalidInputError):
        chebyshev_spb_bound(0.0, 1.0, 1)
    with pytest.raises(InvalidInputError):
        chebyshev_spb_bound(1.0, 1.0, 0)


def test_clt_examples():
    assert clt_spb_bound(1.3, 1.3, 1.3, 2) == pytest.approx(0.5 * (1 + 0.8427007929497149 - 1 / math.sqrt(2)))
    assert clt_spb_bound(1.0, 1.0, 1.0, 2) == pytest.approx(0.5678, abs=1e-4)
    assert clt_spb_bound(0.1, 1.0, 1.2, 10**12) == pytest.approx(1.0, abs=1e-5)
    for tau in (1, 3, 100):
        assert clt_spb_bound(-2.0, 0.5, 0.1, tau) <= 1.0
    with pytest.raises(InvalidInputError):
        clt_spb_bound(1.0, 0.0, 1.0, 1)


def test_chebyshev_clt_crossover():
    nu_ratio = (2 * math.sqrt(2 / math.pi)) ** (1 / 3)  # Gaussian nu / sigma
    for ratio in (0.05, 0.1, 0.2):
        assert chebyshev_spb_bound(1.0, ratio**2, 1) > clt_spb_bound(1.0, ratio, ratio * nu_ratio, 1)
    for ratio in (5.0, 10.0):
        tau = 128
        assert clt_spb_bound(1.0, ratio, ratio * nu_ratio, tau) > chebyshev_spb_bound(1.0, ratio**2, tau)


def test_required_minibatch_examples():
    assert required_minibatch(MomentEstimates(1.0, 0.0, 0.0)) == 0.0
    assert required_minibatch(MomentEstimates(1.0, 1.0, math.inf)) == pytest.approx(2.0)
    assert required_minibatch(MomentEstimates(1.0, 4.0, 2.0)) == pytest.approx(1.0)
    with pytest.raises(InvalidInputError):
        required_minibatch(MomentEstimates(0.0, 1.0, 1.0))


@given(st.floats(0.01, 10), st.floats(0.01, 10))
def test_required_minibatch_makes_chebyshev_informative(mu, sigma):
    m = MomentEstimates(mu, sigma**2, math.inf)
    tau = math.floor(required_minibatch(m)) + 1
    assert chebyshev_spb_bound(mu, sigma**2, tau) > 0.5
