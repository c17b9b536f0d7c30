"""Bayesian full conditional posteriors.

Conjugate cases return a :mod:`ioi.distributions` family.  The rest return a
:class:`GriddedLogDensity`, which holds the log of the unnormalized
prior-times-likelihood and finds its normalizer by quadrature only when a
normalized value is asked for.  Metropolis updates need just the kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from scipy import integrate

from .distributions import InvGamma, Normal, _scalar

__all__ = [
    "GriddedLogDensity",
    "variance_posterior",
    "mu_posterior_tprior",
    "trinomial_pi1_posterior",
    "regression_beta1_posterior",
    "bivariate_variance_posterior",
]

METROPOLIS = "metropolis"
INVERSE_CDF = "inverse_cdf"

# width, in envelope scales, of the central quadrature panel
_CORE_WIDTH = 30.0
_TABLE_SIZE = 4096


@dataclass(frozen=True)
class GriddedLogDensity:
    """Univariate density known up to a constant.

    Parameters
    ----------
    log_kernel : callable
        Log of the unnormalized density, vectorized, ``-inf`` off support.
    lo, hi : float
        Support; either end may be infinite.
    center, scale : float
        Rough location and spread of the mass, used to place quadrature
        breakpoints and the sampling table.
    sampler : {"metropolis", "inverse_cdf"}
        How a Gibbs sampler should update this coordinate.
    """

    log_kernel: Callable
    lo: float
    hi: float
    center: float
    scale: float
    sampler: str = METROPOLIS

    @property
    def support(self) -> tuple[float, float]:
        return (self.lo, self.hi)

    def logpdf_unnormalized(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.lo) & (x <= self.hi)
        with np.errstate(all="ignore"):
            out = np.asarray(self.log_kernel(np.where(inside, x, self._anchor)), dtype=float)
        return _scalar(np.where(inside, out, -np.inf))

    @cached_property
    def _anchor(self) -> float:
        return float(min(max(self.center, self.lo), self.hi))

    @cached_property
    def _breaks(self) -> list[float]:
        c, w = self._anchor, _CORE_WIDTH * self.scale
        pts = [self.lo, c - w, c - 0.1 * w, c, c + 0.1 * w, c + w, self.hi]
        pts = sorted({min(max(p, self.lo), self.hi) for p in pts})
        return pts

    @cached_property
    def log_norm(self) -> float:
        """Log of the integral of ``exp(log_kernel)`` over the support."""
        ref = float(self.logpdf_unnormalized(self._anchor))
        if not np.isfinite(ref):
            grid = np.linspace(*self._table_range, 257)
            ref = float(np.max(self.logpdf_unnormalized(grid)))
        if not np.isfinite(ref):
            raise ValueError("log kernel is -inf everywhere it was probed")

        def f(x):
            return math.exp(float(self.logpdf_unnormalized(x)) - ref)

        total = 0.0
        for a, b in zip(self._breaks[:-1], self._breaks[1:]):
            if b > a:
                total += integrate.quad(f, a, b, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
        if not (np.isfinite(total) and total > 0):
            raise ValueError("density cannot be normalized")
        return ref + math.log(total)

    def logpdf(self, x):
        return _scalar(np.asarray(self.logpdf_unnormalized(x)) - self.log_norm)

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def cdf(self, x):
        if np.ndim(x):
            return np.array([self.cdf(v) for v in np.ravel(x)]).reshape(np.shape(x))
        x = float(x)
        if x <= self.lo:
            return 0.0
        if x >= self.hi:
            return 1.0
        knots = [b for b in self._breaks if b < x] + [x]
        total = 0.0
        for a, b in zip(knots[:-1], knots[1:]):
            total += integrate.quad(self.pdf, a, b, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
        return min(total, 1.0)

    @cached_property
    def _table_range(self) -> tuple[float, float]:
        w = _CORE_WIDTH * self.scale
        lo = self.lo if math.isfinite(self.lo) else self._anchor - w
        hi = self.hi if math.isfinite(self.hi) else self._anchor + w
        return max(lo, self._anchor - w), min(hi, self._anchor + w)

    @cached_property
    def _table(self) -> tuple[np.ndarray, np.ndarray]:
        grid = np.linspace(*self._table_range, _TABLE_SIZE)
        dens = np.exp(np.asarray(self.logpdf_unnormalized(grid)) - self.log_norm)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
        return grid, cum / cum[-1]

    def sample(self, rng, size=None):
        """Approximate draw by inverting a trapezoid cdf table."""
        grid, cum = self._table
        return _scalar(np.interp(rng.random(size), cum, grid))

    def expectation(self) -> float:
        grid, cum = self._table
        mids = 0.5 * (grid[1:] + grid[:-1])
        return float(np.dot(mids, np.diff(cum)))


def variance_posterior(alpha0: float, beta0: float, n: int, sigma2_hat: float) -> InvGamma:
    """Posterior of a normal variance with known mean under an InvGamma prior.

    ``sigma2_hat`` is the mean squared deviation about the known mean.
    """
    if n == 0:
        return InvGamma(alpha0, beta0)
    return InvGamma(alpha0 + 0.5 * n, beta0 + 0.5 * n * sigma2_hat)


def mu_posterior_tprior(
    nu0: float, mu0: float, sigma0: float, xbar: float, n: int, sigma2: float
) -> GriddedLogDensity:
    """Posterior of a normal mean (known variance) under a scaled-t prior.

    The prior is a t density with ``nu0`` degrees of freedom, location ``mu0``
    and scale ``sigma0``.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    half = 0.5 * (nu0 + 1.0)
    denom = sigma0 * sigma0 * nu0

    def log_kernel(mu):
        d = mu - mu0
        out = -half * np.log1p(d * d / denom)
        if n:
            out = out - n * (xbar - mu) ** 2 / (2.0 * sigma2)
        return out

    prior_var = sigma0 * sigma0 * (nu0 / (nu0 - 2.0) if nu0 > 2 else 1.0)
    prec = 1.0 / prior_var + (n / sigma2 if n else 0.0)
    center = (mu0 / prior_var + (n * xbar / sigma2 if n else 0.0)) / prec
    return GriddedLogDensity(log_kernel, -math.inf, math.inf, center, math.sqrt(1.0 / prec))


def trinomial_pi1_posterior(alpha: float, beta: float, counts, pi2: float) -> GriddedLogDensity:
    """Posterior of ``pi1`` given ``pi2`` under a beta-shaped prior on ``[0, 1 - pi2]``."""
    x1, x2, x3 = (int(c) for c in counts)
    if min(x1, x2, x3) < 0:
        raise ValueError("counts must be non-negative")
    if not 0.0 <= pi2 < 1.0:
        raise ValueError("pi2 must lie in [0, 1)")
    e1 = alpha + x1 - 1.0
    e2 = float(x3)
    e3 = beta - 1.0
    top = 1.0 - pi2

    def log_kernel(p):
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (
                np.where(e1 == 0, 0.0, e1 * np.log(p))
                + np.where(e2 == 0, 0.0, e2 * np.log(top - p))
                + np.where(e3 == 0, 0.0, e3 * np.log1p(-p))
            )
        return out

    a, b = e1 + 1.0, e2 + 1.0
    center = top * a / (a + b)
    scale = top * math.sqrt(a * b / ((a + b) ** 2 * (a + b + 1.0)))
    return GriddedLogDensity(log_kernel, 0.0, top, center, scale)


def regression_beta1_posterior(mu0: float, sigma0_sq: float, sigma2: float, sxx1: float, beta1_hat: float) -> Normal:
    """Normal posterior of one regression coefficient given all the others.

    Parameters
    ----------
    mu0, sigma0_sq : float
        Normal prior mean and variance.
    sigma2 : float
        Error variance.
    sxx1 : float
        Sum of squares of the coefficient's covariate.
    beta1_hat : float
        Least squares estimate of the coefficient with the others held fixed.
    """
    if not sxx1 > 0:
        raise ValueError("covariate sum of squares must be > 0")
    if not (sigma0_sq > 0 and sigma2 > 0):
        raise ValueError("variances must be > 0")
    var = 1.0 / (sxx1 / sigma2 + 1.0 / sigma0_sq)
    return Normal(var * (beta1_hat * sxx1 / sigma2 + mu0 / sigma0_sq), var)


def bivariate_variance_posterior(
    alpha: float, beta: float, n: int, sum_sq: float, sum_cross: float, other_sd: float, tau: float
) -> GriddedLogDensity:
    """Posterior of one variance of a bivariate normal with the rest known.

    Parameters
    ----------
    alpha, beta : float
        InvGamma prior shape and scale.
    n : int
        Number of pairs.
    sum_sq : float
        Sum of squared deviations of this axis about its mean.
    sum_cross : float
        Sum of cross products of deviations about both means.
    other_sd : float
        Standard deviation of the other axis.
    tau : float
        Correlation.
    """
    if not tau * tau < 1.0:
        raise ValueError("correlation must satisfy tau^2 < 1")
    k = 1.0 - tau * tau
    shape = alpha + 1.0 + 0.5 * n
    cross = tau / k * sum_cross / other_sd

    def log_kernel(s2):
        with np.errstate(divide="ignore", invalid="ignore"):
            out = -shape * np.log(s2) - (beta + 0.5 * sum_sq / k) / s2 + cross / np.sqrt(s2)
        return np.where(s2 > 0, out, -np.inf)

    # moment match to the tau = 0 conjugate form
    a = alpha + 0.5 * n
    b = beta + 0.5 * sum_sq / k
    center = b / (a + 1.0)
    scale = b / ((a - 1.0) * math.sqrt(a - 2.0)) if a > 2.5 else center
    return GriddedLogDensity(log_kernel, 0.0, math.inf, center, scale)
