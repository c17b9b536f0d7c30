import math

import numpy as np
import pytest
from scipy import integrate, optimize, stats

from ioi.bayes import (
    GriddedLogDensity,
    bivariate_variance_posterior,
    mu_posterior_tprior,
    regression_beta1_posterior,
    trinomial_pi1_posterior,
    variance_posterior,
)
from ioi.distributions import InvGamma, Normal, make_rng
from oracles import riemann_midpoint


def test_variance_posterior_examples():
    assert variance_posterior(4, 64, 9, 8.0) == InvGamma(8.5, 64 + 4.5 * 8.0)
    assert variance_posterior(4, 64, 0, 123.0) == InvGamma(4, 64)


def test_variance_posterior_mean_increases_with_sigma2_hat():
    means = [variance_posterior(4, 64, 9, s).expectation() for s in np.linspace(0.1, 50, 100)]
    assert np.all(np.diff(means) > 0)


def test_mu_tprior_flat_limit():
    d = mu_posterior_tprior(17, -0.3, 1e7, 2.7, 9, 9.0)
    ref = Normal(2.7, 1.0)
    x = np.linspace(-2, 7.4, 400)
    assert np.max(np.abs(d.pdf(x) - ref.pdf(x))) < 1e-6


def test_mu_tprior_mode_between_prior_and_data():
    d = mu_posterior_tprior(17, -0.3, 4 / 3, 2.7, 9, 9.0)
    res = optimize.minimize_scalar(lambda m: -float(d.logpdf_unnormalized(m)), bracket=(-0.3, 1.0, 2.7), method="golden")
    assert -0.3 < res.x < 2.7


def test_mu_tprior_no_data_is_prior_shape():
    d = mu_posterior_tprior(17, -0.3, 4 / 3, 2.7, 0, 9.0)
    ref = stats.t(17, loc=-0.3, scale=4 / 3)
    x = np.linspace(-6, 6, 300)
    assert np.max(np.abs(d.pdf(x) - ref.pdf(x))) < 1e-9


def test_trinomial_exponents():
    d = trinomial_pi1_posterior(1.5, 11.5, (4, 2, 6), 0.2)
    p = np.linspace(0.01, 0.79, 200)
    expected = 4.5 * np.log(p) + 6 * np.log(0.8 - p) + 10.5 * np.log1p(-p)
    diff = d.logpdf_unnormalized(p) - expected
    assert np.ptp(diff) < 1e-12
    assert d.support == (0.0, pytest.approx(0.8))


def test_trinomial_no_counts_is_restricted_prior():
    d = trinomial_pi1_posterior(1.5, 11.5, (0, 0, 0), 0.2)
    p = np.linspace(0.001, 0.799, 300)
    prior = stats.beta(1.5, 11.5).pdf(p)
    ratio = d.pdf(p) / prior
    assert np.ptp(ratio) / ratio.mean() < 1e-10
    assert float(d.pdf(0.9)) == 0.0


def test_trinomial_normalizer_vs_riemann():
    d = trinomial_pi1_posterior(1.5, 11.5, (4, 2, 6), 0.2)
    riemann = riemann_midpoint(lambda p: np.exp(d.logpdf_unnormalized(p)), 0.0, 0.8, 1_000_000)
    assert math.exp(d.log_norm) == pytest.approx(riemann, rel=1e-8)


def test_trinomial_rejects_bad_input():
    with pytest.raises(ValueError):
        trinomial_pi1_posterior(1.5, 11.5, (4, -1, 6), 0.2)
    with pytest.raises(ValueError):
        trinomial_pi1_posterior(1.5, 11.5, (4, 2, 6), 1.0)


def test_beta1_posterior_formula_and_flat_limit():
    d = regression_beta1_posterior(4.4, 0.36, 2.25, 12.0, 5.3)
    var = 1 / (12 / 2.25 + 1 / 0.36)
    assert d.variance == pytest.approx(var)
    assert d.mean == pytest.approx(var * (5.3 * 12 / 2.25 + 4.4 / 0.36))
    assert min(5.3, 4.4) < d.mean < max(5.3, 4.4)
    flat = regression_beta1_posterior(4.4, 1e12, 2.25, 12.0, 5.3)
    assert flat.mean == pytest.approx(5.3, abs=1e-9)
    assert flat.variance == pytest.approx(2.25 / 12, rel=1e-9)


def test_beta1_posterior_guards():
    with pytest.raises(ValueError):
        regression_beta1_posterior(4.4, 0.36, 2.25, 0.0, 5.3)
    with pytest.raises(ValueError):
        regression_beta1_posterior(4.4, -1.0, 2.25, 1.0, 5.3)


def test_bivariate_variance_tau_zero_is_conjugate():
    d = bivariate_variance_posterior(49.5, 48.0, 100, 93.0, 20.0, 1.1, 0.0)
    ref = InvGamma(49.5 + 50, 48 + 93 / 2)
    x = np.linspace(0.5, 2.0, 500)
    assert np.max(np.abs(d.pdf(x) - ref.pdf(x))) < 1e-9


def test_bivariate_variance_prior_mean():
    assert InvGamma(49.5, 48).expectation() == pytest.approx(48 / 48.5)


def test_bivariate_variance_kernel_is_prior_times_likelihood():
    alpha, beta, n, sxx, sxy, sy, tau = 49.5, 48.0, 100, 93.0, 20.0, 1.1, 0.3
    d = bivariate_variance_posterior(alpha, beta, n, sxx, sxy, sy, tau)
    s2 = np.linspace(0.4, 2.5, 400)
    sx = np.sqrt(s2)
    prior = InvGamma(alpha, beta).logpdf(s2)
    k = 1 - tau * tau
    loglik = -n * np.log(sx) - sxx / (2 * k * s2) + tau / k * sxy / (sx * sy)
    # the kernel carries the prior's x^(-alpha-1) and the sigma_x^(-n) factor
    ratio = d.logpdf(s2) - (prior + loglik)
    assert np.var(ratio) < 1e-12


def test_bivariate_variance_normalizer_vs_riemann():
    d = bivariate_variance_posterior(49.5, 48.0, 100, 93.0, 20.0, 1.1, 0.3)
    riemann = riemann_midpoint(lambda s: np.exp(d.logpdf_unnormalized(s)), 1e-9, 20.0, 1_000_000)
    assert math.exp(d.log_norm) == pytest.approx(riemann, rel=1e-8)


def test_bivariate_variance_rejects_unit_tau():
    with pytest.raises(ValueError):
        bivariate_variance_posterior(49.5, 48.0, 100, 93.0, 20.0, 1.1, 1.0)


def test_gridded_density_normalized_and_sampled():
    d = mu_posterior_tprior(17, -0.3, 4 / 3, 2.7, 9, 9.0)
    assert integrate.quad(d.pdf, -np.inf, np.inf, epsabs=1e-12)[0] == pytest.approx(1.0, abs=1e-6)
    assert d.cdf(d.center) == pytest.approx(integrate.quad(d.pdf, -30, d.center)[0], abs=1e-8)
    grid = np.linspace(d.center - 12, d.center + 12, 241)
    cdf = d.cdf(grid)
    x = d.sample(make_rng(6), 20_000)
    assert stats.kstest(x, lambda t: np.interp(t, grid, cdf)).pvalue > 0.001


def test_gridded_density_outside_support():
    d = GriddedLogDensity(lambda x: -x, 0.0, math.inf, 1.0, 1.0)
    assert d.logpdf(-1.0) == -math.inf
    assert d.pdf(2.0) == pytest.approx(math.exp(-2.0), rel=1e-10)
