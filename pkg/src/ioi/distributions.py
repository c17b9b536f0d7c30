"""Univariate distribution primitives.

Every family here is parametrized exactly the way the inference code needs
it, which is not always the scipy convention:

* ``InvGamma(shape, scale)`` has density proportional to
  ``x**(-shape - 1) * exp(-scale / x)`` on ``x > 0``, so its mean is
  ``scale / (shape - 1)``.  ``scale`` is *not* a rate.
* ``NonStdT(df, loc, scale)`` is the standard ``t(df)`` density of
  ``(x - loc) / scale`` divided by ``scale``.
* ``ScaledBeta(a, b, lo, hi)`` is a Beta(a, b) density mapped linearly onto
  ``[lo, hi]``.
* ``TruncNormal(lo, hi)`` is the *standard* normal truncated to ``(lo, hi)``.

All randomness goes through an explicitly passed ``numpy.random.Generator``;
use :func:`make_rng` to build the reproducible PCG64 stream used throughout
the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "Distribution",
    "Normal",
    "InvGamma",
    "NonStdT",
    "ScaledBeta",
    "ChiSquare",
    "TruncNormal",
    "Binomial",
    "make_rng",
    "logpdf",
    "cdf",
    "quantile",
    "sample",
]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

# bisection stops once the bracket is this narrow (absolute, in x units)
QUANTILE_XTOL = 1e-12


def make_rng(seed: int) -> np.random.Generator:
    """Return the package's reproducible 64-bit random stream (PCG64)."""
    return np.random.Generator(np.random.PCG64(seed))


class Distribution:
    """Common interface: ``logpdf``, ``pdf``, ``cdf``, ``quantile``, ``sample``.

    ``logpdf``/``pdf``/``cdf`` accept scalars or arrays.  ``quantile`` is
    computed by bracketed bisection on ``cdf`` for every family.
    """

    discrete = False

    @property
    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def logpdf(self, x):
        raise NotImplementedError

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def cdf(self, x):
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None):
        raise NotImplementedError

    def expectation(self) -> float:
        raise NotImplementedError

    def _guess(self, p: float) -> tuple[float, float]:
        """Rough location and width used to seed the quantile bracket."""
        raise NotImplementedError

    def quantile(self, p):
        if self.discrete:
            raise ValueError(f"quantile is not defined for discrete {type(self).__name__}")
        if np.ndim(p):
            return np.array([self.quantile(float(q)) for q in np.ravel(p)]).reshape(np.shape(p))
        p = float(p)
        if not 0.0 < p < 1.0:
            raise ValueError(f"quantile requires p in (0, 1), got {p}")
        lo, hi = self._bracket(p)
        while hi - lo > QUANTILE_XTOL:
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if self.cdf(mid) < p:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def _bracket(self, p: float) -> tuple[float, float]:
        s_lo, s_hi = self.support
        center, width = self._guess(p)
        lo = max(center - width, s_lo)
        hi = min(center + width, s_hi)
        step = width
        while lo > s_lo and self.cdf(lo) >= p:
            step *= 2.0
            lo = max(center - step, s_lo)
        step = width
        while hi < s_hi and self.cdf(hi) <= p:
            step *= 2.0
            hi = min(center + step, s_hi)
        return float(lo), float(hi)


def _scalar(a):
    a = np.asarray(a)
    return float(a) if a.ndim == 0 else a


def _check_positive(**kwargs):
    for name, value in kwargs.items():
        if not (np.isfinite(value) and value > 0):
            raise ValueError(f"{name} must be finite and > 0, got {value}")


@dataclass(frozen=True)
class Normal(Distribution):
    mean: float
    variance: float

    def __post_init__(self):
        _check_positive(variance=self.variance)
        if not np.isfinite(self.mean):
            raise ValueError("mean must be finite")

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)

    @property
    def support(self):
        return (-math.inf, math.inf)

    def logpdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mean) / self.sd
        return -0.5 * z * z - _LOG_SQRT_2PI - math.log(self.sd)

    def cdf(self, x):
        return special.ndtr((np.asarray(x, dtype=float) - self.mean) / self.sd)

    def sample(self, rng, size=None):
        return self.mean + self.sd * rng.standard_normal(size)

    def expectation(self):
        return self.mean

    def _guess(self, p):
        return self.mean + self.sd * float(special.ndtri(p)), self.sd


@dataclass(frozen=True)
class InvGamma(Distribution):
    """Inverse gamma with shape ``shape`` and *scale* ``scale`` (mean scale/(shape-1))."""

    shape: float
    scale: float

    def __post_init__(self):
        _check_positive(shape=self.shape, scale=self.scale)

    @property
    def support(self):
        return (0.0, math.inf)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        a, b = self.shape, self.scale
        with np.errstate(divide="ignore", invalid="ignore"):
            out = a * math.log(b) - special.gammaln(a) - (a + 1.0) * np.log(x) - b / x
        return _scalar(np.where(x > 0, out, -np.inf))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            out = special.gammaincc(self.shape, self.scale / np.where(x > 0, x, 1.0))
        return _scalar(np.where(x > 0, out, 0.0))

    def sample(self, rng, size=None):
        return self.scale / rng.standard_gamma(self.shape, size)

    def expectation(self):
        if self.shape <= 1:
            return math.inf
        return self.scale / (self.shape - 1.0)

    def _guess(self, p):
        x = self.scale / float(special.gammainccinv(self.shape, p))
        return x, 0.5 * x


@dataclass(frozen=True)
class NonStdT(Distribution):
    df: float
    loc: float
    scale: float

    def __post_init__(self):
        _check_positive(df=self.df, scale=self.scale)

    @property
    def support(self):
        return (-math.inf, math.inf)

    def logpdf(self, x):
        nu = self.df
        z = (np.asarray(x, dtype=float) - self.loc) / self.scale
        const = (
            special.gammaln(0.5 * (nu + 1.0))
            - special.gammaln(0.5 * nu)
            - 0.5 * math.log(nu * math.pi)
            - math.log(self.scale)
        )
        return const - 0.5 * (nu + 1.0) * np.log1p(z * z / nu)

    def cdf(self, x):
        return special.stdtr(self.df, (np.asarray(x, dtype=float) - self.loc) / self.scale)

    def sample(self, rng, size=None):
        return self.loc + self.scale * rng.standard_t(self.df, size)

    def expectation(self):
        return self.loc if self.df > 1 else math.nan

    def _guess(self, p):
        return self.loc + self.scale * float(special.stdtrit(self.df, p)), self.scale


@dataclass(frozen=True)
class ScaledBeta(Distribution):
    """Beta(a, b) stretched onto ``[lo, hi]``."""

    a: float
    b: float
    lo: float
    hi: float

    def __post_init__(self):
        _check_positive(a=self.a, b=self.b)
        if not self.hi > self.lo:
            raise ValueError(f"need hi > lo, got [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def support(self):
        return (self.lo, self.hi)

    def logpdf(self, x):
        u = (np.asarray(x, dtype=float) - self.lo) / self.width
        inside = (u >= 0.0) & (u <= 1.0)
        uc = np.clip(u, 0.0, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (
                special.xlog1py(self.b - 1.0, -uc)
                + special.xlogy(self.a - 1.0, uc)
                - special.betaln(self.a, self.b)
                - math.log(self.width)
            )
        return _scalar(np.where(inside, out, -np.inf))

    def cdf(self, x):
        u = np.clip((np.asarray(x, dtype=float) - self.lo) / self.width, 0.0, 1.0)
        return special.betainc(self.a, self.b, u)

    def sample(self, rng, size=None):
        return self.lo + self.width * rng.beta(self.a, self.b, size)

    def expectation(self):
        return self.lo + self.width * self.a / (self.a + self.b)

    def _guess(self, p):
        return self.lo + self.width * float(special.betaincinv(self.a, self.b, p)), 0.01 * self.width


@dataclass(frozen=True)
class ChiSquare(Distribution):
    df: float

    def __post_init__(self):
        _check_positive(df=self.df)

    @property
    def support(self):
        return (0.0, math.inf)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        k = 0.5 * self.df
        with np.errstate(divide="ignore", invalid="ignore"):
            out = special.xlogy(k - 1.0, x) - 0.5 * x - k * math.log(2.0) - special.gammaln(k)
        return _scalar(np.where(x > 0, out, -np.inf))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return _scalar(special.gammainc(0.5 * self.df, np.maximum(x, 0.0) / 2.0))

    def sample(self, rng, size=None):
        return rng.chisquare(self.df, size)

    def expectation(self):
        return float(self.df)

    def _guess(self, p):
        x = 2.0 * float(special.gammaincinv(0.5 * self.df, p))
        return x, 0.5 * x + 1e-3


@dataclass(frozen=True)
class TruncNormal(Distribution):
    """Standard normal restricted to ``(lo, hi)``."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError(f"need hi > lo, got ({self.lo}, {self.hi})")
        if self._mass <= 0:
            raise ValueError("truncation interval carries no normal mass")

    @property
    def _mass(self) -> float:
        # upper-tail intervals lose precision through ndtr(hi) - ndtr(lo)
        if self.lo > 0:
            return float(special.ndtr(-self.lo) - special.ndtr(-self.hi))
        return float(special.ndtr(self.hi) - special.ndtr(self.lo))

    @property
    def support(self):
        return (self.lo, self.hi)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        out = -0.5 * x * x - _LOG_SQRT_2PI - math.log(self._mass)
        return _scalar(np.where((x > self.lo) & (x < self.hi), out, -np.inf))

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), self.lo, self.hi)
        if self.lo > 0:
            return (special.ndtr(-self.lo) - special.ndtr(-x)) / self._mass
        return (special.ndtr(x) - special.ndtr(self.lo)) / self._mass

    def sample(self, rng, size=None):
        u = rng.random(size)
        if self.lo > 0:
            return -special.ndtri(special.ndtr(-self.lo) - u * self._mass)
        return special.ndtri(special.ndtr(self.lo) + u * self._mass)

    def expectation(self):
        return float((np.exp(-0.5 * self.lo**2) - np.exp(-0.5 * self.hi**2)) / (math.sqrt(2 * math.pi) * self._mass))

    def _guess(self, p):
        lo_c, hi_c = max(self.lo, -40.0), min(self.hi, 40.0)
        return 0.5 * (lo_c + hi_c), 0.5 * (hi_c - lo_c)


@dataclass(frozen=True)
class Binomial(Distribution):
    trials: int
    p: float

    discrete = True

    def __post_init__(self):
        if int(self.trials) != self.trials or self.trials < 0:
            raise ValueError(f"trials must be a non-negative integer, got {self.trials}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")

    @property
    def support(self):
        return (0.0, float(self.trials))

    def logpdf(self, x):
        """Log mass function; ``-inf`` off the integer support."""
        x = np.asarray(x, dtype=float)
        k = np.floor(x)
        valid = (k == x) & (x >= 0) & (x <= self.trials)
        kc = np.clip(k, 0, self.trials)
        n = self.trials
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (
                special.gammaln(n + 1.0)
                - special.gammaln(kc + 1.0)
                - special.gammaln(n - kc + 1.0)
                + special.xlogy(kc, self.p)
                + special.xlog1py(n - kc, -self.p)
            )
        return _scalar(np.where(valid, out, -np.inf))

    def cdf(self, x):
        k = np.floor(np.asarray(x, dtype=float))
        n = self.trials
        kc = np.clip(k, 0, max(n - 1, 0))
        # P(X <= k) = I_{1-p}(n - k, k + 1)
        inner = special.betainc(np.maximum(n - kc, 1e-300), kc + 1.0, 1.0 - self.p) if n > 0 else 1.0
        return _scalar(np.where(k < 0, 0.0, np.where(k >= n, 1.0, inner)))

    def sample(self, rng, size=None):
        return rng.binomial(self.trials, self.p, size)

    def expectation(self):
        return self.trials * self.p


def logpdf(d: Distribution, x):
    return d.logpdf(x)


def cdf(d: Distribution, x):
    return d.cdf(x)


def quantile(d: Distribution, p):
    return d.quantile(p)


def sample(d: Distribution, rng: np.random.Generator, size=None):
    return d.sample(rng, size)
