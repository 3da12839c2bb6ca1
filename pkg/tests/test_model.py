import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from etasbayes.catalog import Catalog, Event, TimeDomain
from etasbayes.model import (EtasParams, MagnitudeModel, ZeroIntensityError,
                             conditional_intensity, exact_log_likelihood,
                             gr_inverse_cdf, gr_log_density, gr_sample,
                             integrated_intensity, triggering_kernel)

PAPER_PARAMS = EtasParams(0.1, 0.089, 2.29, 0.11, 1.08)
M0 = 2.5


def random_params(rng):
    return EtasParams(
        mu=rng.uniform(0.01, 1.0),
        K=rng.uniform(0.01, 0.5),
        alpha=rng.uniform(0.1, 3.0),
        c=rng.uniform(0.01, 1.0),
        p=rng.uniform(1.05, 2.0),
    )


def random_catalog(rng, n, t_lo=0.0, t_hi=1000.0):
    return Catalog(rng.uniform(t_lo, t_hi, n), M0 + rng.exponential(0.4, n))


# -- triggering kernel ---------------------------------------------------------


def test_kernel_identity_at_parent_magnitude():
    p = EtasParams(0.0, 0.089, 2.29, 0.11, 1.08)
    v = triggering_kernel(1e-12, Event(0.0, M0, 0), p, M0)
    assert v == pytest.approx(p.K, rel=1e-9)


def test_kernel_zero_at_or_before_parent():
    p = PAPER_PARAMS
    ev = Event(5.0, 6.0, 0)
    assert triggering_kernel(5.0, ev, p, M0) == 0.0
    assert triggering_kernel(4.0, ev, p, M0) == 0.0


def test_kernel_frozen_value():
    # independent extended-precision evaluation of the closed formula
    p = EtasParams(0.0, 0.089, 2.29, 0.11, 1.08)
    v = triggering_kernel(1.0, Event(0.0, 6.7, 0), p, M0)
    assert v == pytest.approx(110.2020355490186, rel=1e-12)


def test_kernel_total_mass_matches_quadrature():
    p = PAPER_PARAMS
    ev = Event(0.0, 4.5, 0)
    analytic = p.K * math.exp(p.alpha * (ev.magnitude - M0)) * p.c / (p.p - 1)
    quad, _ = integrate.quad(lambda t: triggering_kernel(t, ev, p, M0),
                             0.0, np.inf)
    assert quad == pytest.approx(analytic, rel=1e-8)


# -- conditional intensity -----------------------------------------------------


def test_intensity_empty_history_is_mu():
    assert conditional_intensity(3.0, Catalog([], []), PAPER_PARAMS, M0) \
        == PAPER_PARAMS.mu


def test_intensity_single_parent_at_m0():
    lam = conditional_intensity(1e-12, Catalog([0.0], [M0]), PAPER_PARAMS, M0)
    assert lam == pytest.approx(PAPER_PARAMS.mu + PAPER_PARAMS.K, rel=1e-9)


def test_intensity_matches_bruteforce_sum():
    rng = np.random.default_rng(1)
    hist = random_catalog(rng, 3, 0, 10)
    p = PAPER_PARAMS
    t = 12.0
    expected = p.mu + sum(
        triggering_kernel(t, hist[i], p, M0) for i in range(3))
    assert conditional_intensity(t, hist, p, M0) == pytest.approx(expected,
                                                                  rel=1e-12)


def test_intensity_rejects_future_history():
    with pytest.raises(ValueError):
        conditional_intensity(1.0, Catalog([2.0], [3.0]), PAPER_PARAMS, M0)


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=25, deadline=None)
def test_intensity_at_least_mu(seed):
    rng = np.random.default_rng(seed)
    p = random_params(rng)
    hist = random_catalog(rng, int(rng.integers(0, 20)), 0, 50)
    assert conditional_intensity(51.0, hist, p, M0) >= p.mu


def test_intensity_no_overflow_large_magnitude():
    # alpha (m - M0) near 9.6 must stay finite
    p = EtasParams(0.1, 0.089, 2.29, 0.11, 1.08)
    lam = conditional_intensity(0.5, Catalog([0.0], [6.7]), p, M0)
    assert math.isfinite(lam) and lam > p.mu


# -- integrated intensity ------------------------------------------------------


def test_integral_background_only():
    dom = TimeDomain(0.0, 1000.0, M0)
    empty = Catalog([], [])
    assert integrated_intensity(dom, empty, empty, PAPER_PARAMS) == \
        pytest.approx(100.0, rel=1e-12)


def test_integral_event_at_t2_contributes_zero():
    dom = TimeDomain(0.0, 1000.0, M0)
    empty = Catalog([], [])
    only_end = Catalog([1000.0], [5.0])
    assert integrated_intensity(dom, only_end, empty, PAPER_PARAMS) == \
        pytest.approx(100.0, rel=1e-12)


def test_integral_single_event_frozen_value():
    dom = TimeDomain(0.0, 1000.0, M0)
    v = integrated_intensity(dom, Catalog([500.0], [6.7]), Catalog([], []),
                             PAPER_PARAMS)
    assert v == pytest.approx(1001.8297206272309, rel=1e-12)


def test_integral_matches_quadrature_oracle():
    dom = TimeDomain(0.0, 1000.0, M0)
    modeled = Catalog([500.0], [6.7])
    p = PAPER_PARAMS

    def lam(t):
        return p.mu + triggering_kernel(t, modeled[0], p, M0)

    quad, _ = integrate.quad(lam, dom.t1, dom.t2, points=[500.0], limit=200)
    v = integrated_intensity(dom, modeled, Catalog([], []), p)
    assert v == pytest.approx(quad, rel=1e-8)


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=20, deadline=None)
def test_integral_quadrature_property(seed):
    rng = np.random.default_rng(seed)
    p = random_params(rng)
    n = int(rng.integers(1, 8))
    cat = random_catalog(rng, n, 0, 100)
    dom = TimeDomain(0.0, 100.0, M0)

    def lam(t):
        tot = p.mu
        for i in range(n):
            tot += triggering_kernel(t, cat[i], p, M0)
        return tot

    pieces = np.unique(np.concatenate([[dom.t1], cat.times, [dom.t2]]))
    quad = sum(integrate.quad(lam, a, b, limit=100)[0]
               for a, b in zip(pieces, pieces[1:]))
    v = integrated_intensity(dom, cat, Catalog([], []), p)
    assert v == pytest.approx(quad, rel=1e-8)


@given(st.floats(10.0, 2000.0), st.floats(1.0, 500.0))
@settings(max_examples=30, deadline=None)
def test_integral_monotone_in_t2(t2, extend):
    cat = Catalog([5.0, 8.0], [4.0, 5.5])
    empty = Catalog([], [])
    v1 = integrated_intensity(TimeDomain(0, t2, M0), cat, empty, PAPER_PARAMS)
    v2 = integrated_intensity(TimeDomain(0, t2 + extend, M0), cat, empty,
                              PAPER_PARAMS)
    assert v2 >= v1


def test_integral_history_uses_t1():
    dom = TimeDomain(500.0, 1000.0, M0)
    hist = Catalog([100.0], [6.0])
    empty = Catalog([], [])
    p = PAPER_PARAMS
    v = integrated_intensity(dom, empty, hist, p)
    w_lo = ((500.0 - 100.0) / p.c + 1) ** (1 - p.p)
    w_hi = ((1000.0 - 100.0) / p.c + 1) ** (1 - p.p)
    expected = p.mu * 500.0 + p.K * math.exp(p.alpha * 3.5) \
        * p.c / (p.p - 1) * (w_lo - w_hi)
    assert v == pytest.approx(expected, rel=1e-12)


def test_integral_rejects_p_at_one():
    with pytest.raises(ValueError):
        EtasParams(0.1, 0.1, 1.0, 0.1, 1.0)


# -- exact log-likelihood ------------------------------------------------------


def naive_log_likelihood(dom, modeled, history, p):
    """Independent oracle: python double loop + adaptive quadrature."""
    all_t = np.concatenate([history.times, modeled.times])
    all_m = np.concatenate([history.mags, modeled.mags])

    def lam(t):
        tot = p.mu
        for th, mh in zip(all_t, all_m):
            if th < t:
                tot += p.K * math.exp(p.alpha * (mh - dom.m0)) \
                    * ((t - th) / p.c + 1.0) ** (-p.p)
        return tot

    pieces = np.unique(np.concatenate(
        [[dom.t1], all_t[(all_t > dom.t1) & (all_t < dom.t2)], [dom.t2]]))
    big_lambda = sum(integrate.quad(lam, a, b, limit=200)[0]
                     for a, b in zip(pieces, pieces[1:]))
    logsum = 0.0
    for t in modeled.times:
        logsum += math.log(lam(t))
    return -big_lambda + logsum


def test_loglik_empty_modeled():
    dom = TimeDomain(0.0, 1000.0, M0)
    empty = Catalog([], [])
    assert exact_log_likelihood(dom, empty, empty, PAPER_PARAMS) == \
        pytest.approx(-100.0, rel=1e-12)


def test_loglik_zero_intensity_signalled():
    dom = TimeDomain(0.0, 10.0, M0)
    p = EtasParams(0.0, 0.089, 2.29, 0.11, 1.08)
    with pytest.raises(ZeroIntensityError):
        exact_log_likelihood(dom, Catalog([5.0], [3.0]), Catalog([], []), p)


def test_loglik_matches_naive_oracle():
    rng = np.random.default_rng(7)
    dom = TimeDomain(0.0, 200.0, M0)
    modeled = random_catalog(rng, 10, 0, 200)
    p = PAPER_PARAMS
    ours = exact_log_likelihood(dom, modeled, Catalog([], []), p)
    oracle = naive_log_likelihood(dom, modeled, Catalog([], []), p)
    assert ours == pytest.approx(oracle, rel=1e-8)


def test_loglik_with_history_matches_naive_oracle():
    rng = np.random.default_rng(8)
    dom = TimeDomain(100.0, 300.0, M0)
    history = Catalog([20.0, 60.0], [6.0, 4.0])
    modeled = random_catalog(rng, 12, 100, 300)
    p = PAPER_PARAMS
    ours = exact_log_likelihood(dom, modeled, history, p)
    oracle = naive_log_likelihood(dom, modeled, history, p)
    assert ours == pytest.approx(oracle, rel=1e-8)


def test_loglik_permutation_invariant():
    rng = np.random.default_rng(9)
    times = rng.uniform(0, 100, 15)
    mags = M0 + rng.exponential(0.4, 15)
    dom = TimeDomain(0.0, 100.0, M0)
    empty = Catalog([], [])
    base = exact_log_likelihood(dom, Catalog(times, mags), empty, PAPER_PARAMS)
    perm = rng.permutation(15)
    other = exact_log_likelihood(
        dom, Catalog(times[perm], mags[perm], np.arange(15)[perm]), empty,
        PAPER_PARAMS)
    assert other == base


def test_loglik_simultaneous_events_excluded_from_own_history():
    # two events at the same instant see mu only (strict past)
    dom = TimeDomain(0.0, 10.0, M0)
    cat = Catalog([5.0, 5.0], [3.0, 4.0])
    p = PAPER_PARAMS
    v = exact_log_likelihood(dom, cat, Catalog([], []), p)
    lam0 = integrated_intensity(dom, cat, Catalog([], []), p)
    assert v == pytest.approx(-lam0 + 2 * math.log(p.mu), rel=1e-12)


# -- magnitude model -----------------------------------------------------------


def test_gr_log_density_at_truncation():
    mm = MagnitudeModel(M0)
    assert gr_log_density(M0 + 1e-12, mm) == pytest.approx(math.log(math.log(10)),
                                                           rel=1e-9)


def test_gr_log_density_one_above():
    mm = MagnitudeModel(M0)
    assert gr_log_density(M0 + 1.0, mm) == pytest.approx(
        math.log(math.log(10)) - math.log(10), rel=1e-12)


def test_gr_density_normalizes():
    mm = MagnitudeModel(M0)
    total, _ = integrate.quad(lambda m: math.exp(gr_log_density(m, mm)),
                              M0, np.inf)
    assert total == pytest.approx(1.0, rel=1e-9)


def test_gr_log_density_rejects_below_m0():
    with pytest.raises(ValueError):
        gr_log_density(M0, MagnitudeModel(M0))


def test_gr_inverse_cdf_example():
    # u = 0.9 leaves survival 0.1: one magnitude unit above M0 at b = 1
    assert gr_inverse_cdf(0.9, MagnitudeModel(M0)) == pytest.approx(3.5)


def test_gr_sample_empty():
    assert gr_sample(0, MagnitudeModel(M0), np.random.default_rng(0)).size == 0


def test_gr_sample_mean_matches_analytic():
    mm = MagnitudeModel(M0)
    rng = np.random.default_rng(42)
    m = gr_sample(100_000, mm, rng)
    assert np.all(m > M0)
    se = m.std() / math.sqrt(m.size)
    assert abs(m.mean() - (M0 + 1 / math.log(10))) < 3 * se


def test_gr_sample_ks():
    mm = MagnitudeModel(M0)
    rng = np.random.default_rng(11)
    m = gr_sample(100_000, mm, rng)
    stat, _ = stats.kstest(m - M0, stats.expon(scale=1 / mm.beta).cdf)
    assert stat < 1.63 / math.sqrt(m.size)  # 1% critical value
