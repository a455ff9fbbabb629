import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from explogistic.distributions import (
    ExpLogisticParams,
    _log_normalizer_scaled,
    exp_logpdf,
    explogistic_logpdf,
    explogistic_unnorm_logpdf,
    log_normalizer_k,
    logistic_logccdf,
    logistic_logcdf,
    normalizer_k,
    reported_quantile,
    sample_missing,
    sample_reported,
)
from explogistic.errors import DomainError, SamplingError

from oracles import mp_logistic_logcdf, trapezoid_k

SIM = ExpLogisticParams(0.5, 2.0, 0.5)
CRASH = ExpLogisticParams(0.12, 12.2, 1.30)

# Frozen from oracles.trapezoid_k (x in [0, 200], 1e7 points).
K_SIM_TRAPEZOID = 0.4025534822198856
K_CRASH_TRAPEZOID = 0.24081942947577403
# log(lam e^{-lam x} F(x) / k) at x=3 for SIM, using K_SIM_TRAPEZOID.
LOGPDF_SIM_AT_3 = -1.4101478757327486

params = st.builds(
    ExpLogisticParams,
    lam=st.floats(0.01, 10.0),
    mu_bias=st.floats(-50.0, 50.0),
    sigma_bias=st.floats(0.01, 20.0),
)


def test_exp_logpdf_examples():
    assert exp_logpdf(0.0, 1.0) == 0.0
    assert exp_logpdf(2.0, 0.5) == pytest.approx(math.log(0.5) - 1.0, abs=1e-15)
    assert exp_logpdf(2.0, 0.5) == pytest.approx(-1.693147, abs=1e-6)
    assert exp_logpdf(10.0, 0.12) == pytest.approx(math.log(0.12) - 1.2, abs=1e-15)
    assert exp_logpdf(10.0, 0.12) == pytest.approx(stats.expon(scale=1 / 0.12).logpdf(10.0))


@pytest.mark.parametrize("x, lam", [(-1.0, 1.0), (1.0, 0.0), (1.0, -2.0), (float("nan"), 1.0)])
def test_exp_logpdf_domain(x, lam):
    with pytest.raises(DomainError):
        exp_logpdf(x, lam)


def test_logistic_logcdf_examples():
    assert logistic_logcdf(2.0, 2.0, 0.5) == pytest.approx(math.log(0.5), abs=1e-15)
    assert logistic_logcdf(1e300, 2.0, 0.5) == 0.0
    assert logistic_logcdf(0.0, 2.0, 0.5) == pytest.approx(-math.log1p(math.e**4), abs=1e-14)
    assert logistic_logcdf(0.0, 2.0, 0.5) == pytest.approx(mp_logistic_logcdf(0, 2, 0.5), abs=1e-14)
    assert logistic_logcdf(0.0, 2.0, 0.5) == pytest.approx(-4.01815, abs=1e-5)


def test_logistic_logccdf_examples():
    assert logistic_logccdf(2.0, 2.0, 0.5) == pytest.approx(math.log(0.5), abs=1e-15)
    assert logistic_logccdf(-1e300, 2.0, 0.5) == 0.0
    assert logistic_logccdf(4.0, 2.0, 0.5) == pytest.approx(-math.log1p(math.e**4), abs=1e-14)


@pytest.mark.parametrize("fn", [logistic_logcdf, logistic_logccdf])
def test_logistic_scale_domain(fn):
    with pytest.raises(DomainError):
        fn(1.0, 0.0, 0.0)


def test_logistic_far_tails_are_finite():
    assert logistic_logcdf(-1e6, 1e4, 1e-6) == pytest.approx(-(1e6 + 1e4) / 1e-6, rel=1e-12)
    assert logistic_logccdf(1e6, -1e4, 1e-6) == pytest.approx(-(1e6 + 1e4) / 1e-6, rel=1e-12)


def test_logistic_against_scipy():
    x = np.linspace(-30, 30, 301)
    assert np.allclose(logistic_logcdf(x, 1.5, 2.0), stats.logistic(1.5, 2.0).logcdf(x), atol=1e-12)
    assert np.allclose(logistic_logccdf(x, 1.5, 2.0), stats.logistic(1.5, 2.0).logsf(x), atol=1e-12)


@given(x=st.floats(0, 1e6), mu=st.floats(-1e4, 1e4), sigma=st.floats(1e-6, 1e4))
def test_cdf_and_ccdf_sum_to_one(x, mu, sigma):
    total = math.exp(logistic_logcdf(x, mu, sigma)) + math.exp(logistic_logccdf(x, mu, sigma))
    assert abs(total - 1.0) <= 1e-12


def test_unnorm_logpdf_examples():
    assert explogistic_unnorm_logpdf(2.0, SIM) == pytest.approx(-1.693147 + math.log(0.5), abs=1e-6)
    assert explogistic_unnorm_logpdf(2.0, SIM) == pytest.approx(-2.386294, abs=1e-6)
    brute = math.log(0.5 * 1.0 / (1 + math.exp(4.0)))
    assert explogistic_unnorm_logpdf(0.0, SIM) == pytest.approx(brute, abs=1e-14)
    assert explogistic_unnorm_logpdf(0.0, SIM) == pytest.approx(-4.71130, abs=1e-5)
    x = np.linspace(0, 50, 501)
    flat = ExpLogisticParams(0.5, -1e6, 0.5)
    assert np.max(np.abs(explogistic_unnorm_logpdf(x, flat) - exp_logpdf(x, 0.5))) <= 1e-9


def test_unnorm_rejects_negative_x():
    with pytest.raises(DomainError):
        explogistic_unnorm_logpdf(-0.1, SIM)


@pytest.mark.parametrize("bad", [(0.0, 1.0, 1.0), (1.0, float("inf"), 1.0), (1.0, 1.0, -1.0)])
def test_params_validation(bad):
    with pytest.raises(DomainError):
        ExpLogisticParams(*bad)


def test_normalizer_unbiased_limit():
    assert normalizer_k(ExpLogisticParams(0.5, -1e6, 0.5), 1e-8) == pytest.approx(1.0, abs=1e-8)


def test_normalizer_matches_trapezoid_oracle():
    assert abs(normalizer_k(SIM, 1e-8) - K_SIM_TRAPEZOID) < 1e-8
    # 200 truncates e^{-24} ~ 3.8e-11 of the mass at lam=0.12
    assert abs(normalizer_k(CRASH, 1e-8) - K_CRASH_TRAPEZOID) < 1e-9


def test_normalizer_crash_parameters():
    k = normalizer_k(CRASH)
    assert 0 < k < 1
    assert 1 - k == pytest.approx(0.759, abs=1e-3)


@pytest.mark.parametrize("lam, mu", [(0.5, 2.0), (0.12, 12.2), (2.0, 0.7)])
def test_normalizer_step_limit(lam, mu):
    # sigma -> 0: reporting is a step at mu, so k = P(X > mu) = exp(-lam mu)
    k = normalizer_k(ExpLogisticParams(lam, mu, 1e-7), 1e-10)
    assert k == pytest.approx(math.exp(-lam * mu), abs=1e-9)


def test_normalizer_monotone_in_location():
    for lam in (0.1, 0.5, 2.0):
        for sigma in (0.05, 0.5, 3.0):
            ks = np.array([normalizer_k(ExpLogisticParams(lam, mu, sigma))
                           for mu in np.linspace(-5, 15, 41)])
            assert np.all(np.diff(ks) <= 0)
            # strict once k is resolvably below 1
            below = ks[:-1] < 1 - 1e-6
            assert np.all(np.diff(ks)[below] < 0)


@settings(max_examples=60, deadline=None)
@given(params)
def test_normalizer_in_unit_interval(p):
    k = normalizer_k(p)
    assert 0 < k <= 1


@settings(max_examples=60, deadline=None)
@given(params)
def test_scaled_log_normalizer_agrees(p):
    k = normalizer_k(p, 1e-12)
    if k > 1e-3:
        assert _log_normalizer_scaled(p, 1e-10) == pytest.approx(math.log(k), abs=1e-7)


def test_log_normalizer_survives_underflow():
    # k ~ exp(-1e4) is far below the smallest double
    p = ExpLogisticParams(1.0, 1e4, 1e-6)
    assert log_normalizer_k(p) == pytest.approx(-1e4, rel=1e-9)
    # lam * sigma > 1: mass sits at x = 0, k ~ 2 exp(-mu / 2)
    p = ExpLogisticParams(1.0, 1e4, 2.0)
    assert log_normalizer_k(p) == pytest.approx(-5000 + math.log(2), abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(x=st.floats(0, 1e6), lam=st.floats(1e-3, 1e2), mu=st.floats(-1e4, 1e4),
       sigma=st.floats(1e-6, 1e4))
def test_log_density_finite_over_wide_ranges(x, lam, mu, sigma):
    p = ExpLogisticParams(lam, mu, sigma)
    assert math.isfinite(explogistic_unnorm_logpdf(x, p))
    assert math.isfinite(log_normalizer_k(p))
    assert math.isfinite(explogistic_logpdf(x, p))


def test_logpdf_normalised():
    val, _ = integrate.quad(lambda x: math.exp(explogistic_logpdf(x, SIM)), 0, np.inf,
                            epsabs=1e-11, limit=200)
    assert val == pytest.approx(1.0, abs=1e-6)


def test_logpdf_unbiased_limit():
    x = np.linspace(0, 40, 81)
    flat = ExpLogisticParams(0.5, -1e6, 0.5)
    assert np.max(np.abs(explogistic_logpdf(x, flat) - exp_logpdf(x, 0.5))) <= 1e-9


def test_logpdf_matches_oracle():
    assert explogistic_logpdf(3.0, SIM) == pytest.approx(LOGPDF_SIM_AT_3, abs=1e-8)


def test_trapezoid_oracle_is_what_was_frozen():
    assert trapezoid_k(*SIM.as_tuple()) == pytest.approx(K_SIM_TRAPEZOID, abs=1e-15)


def test_samplers_empty():
    rng = np.random.default_rng(0)
    assert sample_reported(SIM, 0, rng).size == 0
    assert sample_missing(SIM, 0, rng).size == 0


def test_samplers_reject_negative_n():
    with pytest.raises(DomainError):
        sample_reported(SIM, -1, np.random.default_rng(0))


def _moments(p):
    k = K_SIM_TRAPEZOID
    pdf = lambda x: p.lam * math.exp(-p.lam * x) / (1 + math.exp(-(x - p.mu_bias) / p.sigma_bias)) / k
    m1, _ = integrate.quad(lambda x: x * pdf(x), 0, np.inf, epsabs=1e-12)
    m2, _ = integrate.quad(lambda x: x * x * pdf(x), 0, np.inf, epsabs=1e-12)
    return m1, math.sqrt(m2 - m1 * m1)


def test_sample_reported_mean():
    n = 10**6
    x = sample_reported(SIM, n, np.random.default_rng(11))
    mean, sd = _moments(SIM)
    assert abs(x.mean() - mean) < 3 * sd / math.sqrt(n)


def test_sample_reported_unbiased_case_is_exponential():
    x = sample_reported(ExpLogisticParams(0.5, -1e6, 0.5), 20000, np.random.default_rng(3))
    assert stats.kstest(x, stats.expon(scale=2.0).cdf).pvalue > 0.01


def test_sample_missing_unbiased_case_is_exponential():
    x = sample_missing(ExpLogisticParams(0.5, 1e6, 0.5), 20000, np.random.default_rng(4))
    assert stats.kstest(x, stats.expon(scale=2.0).cdf).pvalue > 0.01


def test_mixture_of_strata_is_exponential():
    n = 10**5
    n_rep = math.ceil(n * normalizer_k(SIM))
    rng = np.random.default_rng(5)
    pooled = np.concatenate([sample_reported(SIM, n_rep, rng), sample_missing(SIM, n - n_rep, rng)])
    assert stats.kstest(pooled, stats.expon(scale=2.0).cdf).pvalue > 0.01


def test_samplers_deterministic():
    a = sample_reported(SIM, 1000, np.random.default_rng(9))
    b = sample_reported(SIM, 1000, np.random.default_rng(9))
    assert np.array_equal(a, b)
    a = sample_missing(SIM, 1000, np.random.default_rng(9))
    b = sample_missing(SIM, 1000, np.random.default_rng(9))
    assert np.array_equal(a, b)


def test_sampler_gives_up_when_nothing_is_reported():
    hopeless = ExpLogisticParams(1.0, 1e4, 1e-3)
    with pytest.raises(SamplingError):
        sample_reported(hopeless, 2, np.random.default_rng(0))


def test_reported_quantile_inverts_cdf():
    q = np.array([0.01, 0.25, 0.5, 0.75, 0.99])
    x = reported_quantile(SIM, q)
    for qi, xi in zip(q, x):
        mass, _ = integrate.quad(lambda t: math.exp(explogistic_logpdf(t, SIM)), 0, xi, epsabs=1e-12)
        assert mass == pytest.approx(qi, abs=1e-7)
