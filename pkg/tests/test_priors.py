import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats

from etasbayes.model import EtasParams
from etasbayes.priors import (GammaDist, InternalParams, LogNormalDist,
                              PriorSpec, UniformDist, default_priors, forward,
                              forward_derivative, inverse, sample_prior,
                              suggest_mu_prior, to_etas, to_internal)

DEFAULTS = default_priors()
ALL_TARGETS = DEFAULTS.targets


def bisect_gamma_quantile(q, shape, rate, lo=0.0, hi=1e6):
    """Independent oracle: bisection on the regularized incomplete gamma."""
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if special.gammainc(shape, rate * mid) < q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_forward_uniform_medians():
    assert forward(0.0, UniformDist(1.0, 2.0)) == pytest.approx(1.5)
    assert forward(0.0, UniformDist(0.0, 10.0)) == pytest.approx(5.0)


def test_forward_gamma_median_vs_bisection_oracle():
    med = forward(0.0, GammaDist(0.5, 0.5))
    oracle = bisect_gamma_quantile(0.5, 0.5, 0.5)
    assert med == pytest.approx(oracle, rel=1e-10)


def test_forward_lognormal_exact_identity():
    d = LogNormalDist(-1.0, 0.5)
    for th in (-2.0, 0.0, 1.7):
        assert forward(th, d) == pytest.approx(math.exp(-1.0 + 0.5 * th),
                                               rel=1e-14)


def test_inverse_examples():
    assert inverse(1.5, UniformDist(1.0, 2.0)) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        inverse(2.5, UniformDist(1.0, 2.0))
    with pytest.raises(ValueError):
        inverse(1.0, UniformDist(1.0, 2.0))  # support boundary excluded


def test_round_trip_all_defaults():
    # the contract: forward(inverse(x)) = x to 1e-10 relative over the
    # support interior
    rng = np.random.default_rng(0)
    q = rng.uniform(1e-6, 1.0 - 1e-6, 1000)
    for target in ALL_TARGETS:
        x = target.ppf(q)
        np.testing.assert_allclose(forward(inverse(x, target), target), x,
                                   rtol=1e-10)


def test_round_trip_internal_scale_moderate():
    # away from the saturating tails the composition also inverts in theta
    rng = np.random.default_rng(2)
    theta = rng.uniform(-4, 4, 500)
    for target in ALL_TARGETS:
        back = inverse(forward(theta, target), target)
        np.testing.assert_allclose(back, theta, rtol=1e-9, atol=1e-9)


def test_quantile_preservation():
    rng = np.random.default_rng(1)
    theta = rng.uniform(-6, 6, 500)
    for target in ALL_TARGETS:
        np.testing.assert_allclose(target.cdf(forward(theta, target)),
                                   special.ndtr(theta), rtol=1e-10, atol=1e-12)


@given(st.floats(-6, 6), st.floats(1e-4, 6))
@settings(max_examples=60, deadline=None)
def test_forward_strictly_monotone(th, gap):
    for target in ALL_TARGETS:
        assert forward(th, target) < forward(th + gap, target)


def test_forward_derivative_uniform_analytic():
    # phi(0) * width
    v = forward_derivative(0.0, UniformDist(0.0, 10.0))
    assert v == pytest.approx(10.0 / math.sqrt(2 * math.pi), rel=1e-12)


def test_forward_derivative_lognormal_identity():
    d = LogNormalDist(-1.0, 0.5)
    for th in (-1.3, 0.0, 2.1):
        assert forward_derivative(th, d) == pytest.approx(
            forward(th, d) * d.sdlog, rel=1e-12)


def test_forward_derivative_matches_fd():
    h = 1e-6
    for target in ALL_TARGETS:
        for th in (-2.0, -0.5, 0.0, 0.8, 2.0):
            fd = (forward(th + h, target) - forward(th - h, target)) / (2 * h)
            assert forward_derivative(th, target) == pytest.approx(fd, rel=1e-6)


@given(st.floats(-8, 8))
@settings(max_examples=60, deadline=None)
def test_forward_derivative_positive(th):
    for target in ALL_TARGETS:
        assert forward_derivative(th, target) > 0.0


def test_tail_clamp_keeps_values_finite():
    for target in ALL_TARGETS:
        for th in (-500.0, 500.0):
            assert math.isfinite(forward(th, target)) or \
                isinstance(target, (GammaDist, LogNormalDist))
        assert math.isfinite(forward(-500.0, target))


def test_pushforward_ks_all_defaults():
    rng = np.random.default_rng(123)
    z = rng.standard_normal(100_000)
    crit = 1.63 / math.sqrt(z.size)  # 1% level
    cdfs = {
        "mu": stats.gamma(a=0.5, scale=2.0).cdf,
        "K": stats.lognorm(s=0.5, scale=math.exp(-1.0)).cdf,
        "alpha": stats.uniform(0, 10).cdf,
        "c": stats.uniform(0, 1).cdf,
        "p": stats.uniform(1, 1).cdf,
    }
    for name, target in zip(("mu", "K", "alpha", "c", "p"), ALL_TARGETS):
        x = forward(z, target)
        stat, _ = stats.kstest(x, cdfs[name])
        assert stat < crit, f"{name} pushforward KS {stat} >= {crit}"


def test_sample_prior_supports():
    rng = np.random.default_rng(5)
    s = sample_prior(DEFAULTS, 20_000, rng)
    assert s.shape == (20_000, 5)
    assert np.all(s[:, 2] >= 0.0) and np.all(s[:, 2] <= 10.0)
    assert np.all(s[:, 3] >= 0.0) and np.all(s[:, 3] <= 1.0)
    assert np.all(s[:, 4] >= 1.0) and np.all(s[:, 4] <= 2.0)
    # empirical mu median vs Gamma(0.5, 0.5) median
    med_oracle = bisect_gamma_quantile(0.5, 0.5, 0.5)
    n = s.shape[0]
    se_rank = 1.96 * 0.5 / math.sqrt(n)
    frac_below = np.mean(s[:, 0] < med_oracle)
    assert abs(frac_below - 0.5) < 3 * se_rank


def test_sample_prior_empty():
    assert sample_prior(DEFAULTS, 0, np.random.default_rng(0)).shape == (0, 5)


def test_internal_params_finite_required():
    with pytest.raises(ValueError):
        InternalParams(math.nan, 0, 0, 0, 0)


def test_prior_spec_p_lower_bound():
    with pytest.raises(ValueError):
        PriorSpec(p=UniformDist(0.5, 2.0))


def test_to_internal_round_trip():
    params = EtasParams(0.1, 0.089, 2.29, 0.11, 1.08)
    theta = to_internal(params, DEFAULTS)
    back = to_etas(theta, DEFAULTS)
    np.testing.assert_allclose(back.as_array(), params.as_array(), rtol=1e-10)


def test_contains():
    assert DEFAULTS.contains(EtasParams(0.3, 0.1, 1.0, 0.2, 1.1))
    assert not DEFAULTS.contains(EtasParams(0.3, 0.1, 11.0, 0.2, 1.1))


def test_suggest_mu_prior():
    d = suggest_mu_prior(n_events=200, duration_days=1000.0)
    assert d.shape == pytest.approx(0.5)
    # prior mean = half the gross rate
    assert d.shape / d.rate == pytest.approx(0.1)
    with pytest.raises(ValueError):
        suggest_mu_prior(0, 1000.0)
