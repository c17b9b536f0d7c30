"""Fiducial densities built from a primary random variable.

A fiducial model is a data generating algorithm ``q = phi(gamma, theta)``
in which the primary random variable ``gamma`` has a known pre-data density
``pi0``.  Once ``q`` is observed, the mapping can be inverted to give
``theta(gamma)`` and ``gamma(theta)``.  A global pre-data (GPD) function
``omega`` reweights ``pi0`` into the post-data density

    pi1(gamma) = C * omega(theta(gamma)) * pi0(gamma),

and the fiducial density of ``theta`` follows by a change of variables,
``pi1(gamma(theta)) * |d gamma / d theta|``.

Besides the generic machinery the module carries the closed forms used by
the scenarios, the step-inversion density for a binomial count and the
Fisher-z style mapping for a correlation coefficient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy import integrate, special

from .distributions import (
    ChiSquare,
    Distribution,
    InvGamma,
    Normal,
    ScaledBeta,
    TruncNormal,
    _scalar,
)

__all__ = [
    "ConstantGpd",
    "ConstantOnSupportGpd",
    "ZeroOnIntervalGpd",
    "IntervalWeightedGpd",
    "FiducialMapping",
    "FiducialModel",
    "Pi1Density",
    "FiducialDensity",
    "StepInversionDensity",
    "TauFiducialDensity",
    "check_condition1",
    "build_pi1",
    "fiducial_density",
    "normal_mean_conditional",
    "variance_conditional",
    "normal_mean_model",
    "variance_model",
    "stepinv_mapping",
    "discrete_fiducial_stepinv",
    "tau_gamma",
    "tau_mapping",
    "tau_model",
    "select_truncation_v",
    "largest_truncation_v",
]

# upper limit on the truncation point of the tau primary variable
MAX_TRUNCATION_V = 1e3
# fraction of the largest admissible truncation point actually used
TRUNCATION_SAFETY = 0.99

_QUAD = dict(epsabs=1e-13, epsrel=1e-12, limit=200)


# ---------------------------------------------------------------------------
# GPD functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstantGpd:
    """``omega(theta) = level`` over the whole parameter space."""

    level: float = 1.0

    def __post_init__(self):
        if not self.level > 0:
            raise ValueError("GPD level must be > 0")

    def __call__(self, theta):
        return _scalar(np.full(np.shape(theta), self.level))

    def breakpoints(self) -> tuple[float, ...]:
        return ()

    def upper_bound(self) -> float:
        return self.level


@dataclass(frozen=True)
class ConstantOnSupportGpd:
    """``level`` on ``[lo, hi]`` and zero outside."""

    level: float = 1.0
    lo: float = -math.inf
    hi: float = math.inf

    def __post_init__(self):
        if not self.level > 0:
            raise ValueError("GPD level must be > 0")
        if not self.lo < self.hi:
            raise ValueError("GPD support needs lo < hi")

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        return _scalar(np.where((theta >= self.lo) & (theta <= self.hi), self.level, 0.0))

    def breakpoints(self):
        return tuple(b for b in (self.lo, self.hi) if math.isfinite(b))

    def upper_bound(self):
        return self.level


@dataclass(frozen=True)
class ZeroOnIntervalGpd:
    """Zero on ``[lo, hi]`` and ``level`` elsewhere."""

    lo: float
    hi: float
    level: float = 1.0

    def __post_init__(self):
        if not self.level > 0:
            raise ValueError("GPD level must be > 0")
        if not self.lo < self.hi:
            raise ValueError("GPD interval needs lo < hi")

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        return _scalar(np.where((theta >= self.lo) & (theta <= self.hi), 0.0, self.level))

    def breakpoints(self):
        return (self.lo, self.hi)

    def upper_bound(self):
        return self.level


@dataclass(frozen=True)
class IntervalWeightedGpd:
    """``level * (1 + nu * h(theta))``, where ``h`` vanishes off its interval.

    ``h`` is normally a :class:`ScaledBeta` on ``[theta_0, theta_1]`` with
    both shape parameters above one, so the function is continuous.
    """

    nu: float
    h: ScaledBeta
    level: float = 1.0

    def __post_init__(self):
        if not self.nu >= 0:
            raise ValueError("nu must be >= 0")
        if not self.level > 0:
            raise ValueError("GPD level must be > 0")

    def __call__(self, theta):
        return self.level * (1.0 + self.nu * np.asarray(self.h.pdf(theta)))

    def breakpoints(self):
        return (self.h.lo, self.h.hi)

    def upper_bound(self):
        grid = np.linspace(self.h.lo, self.h.hi, 4097)
        return self.level * (1.0 + self.nu * float(np.max(self.h.pdf(grid))) * 1.01)


# ---------------------------------------------------------------------------
# mappings and models
# ---------------------------------------------------------------------------


def _identity(x):
    return x


@dataclass(frozen=True)
class FiducialMapping:
    """Data generating relation ``q = forward(gamma, theta)`` at a fixed ``q``.

    ``inverse_theta`` and ``inverse_gamma`` solve the relation for one
    variable given the other.  ``to_coord``/``from_coord`` is an increasing
    reparametrization of ``theta`` on which grids are laid out; it only
    matters for parameters with awkward floating point behaviour such as a
    correlation near +-1.  When given, ``gamma_of_coord`` and
    ``coord_of_gamma`` work directly in that coordinate.

    A ``discrete`` mapping has no inverse; ``gamma_interval(theta)`` then
    returns the bounds of the set of ``gamma`` that reproduce ``q``.
    """

    forward: Callable
    inverse_theta: Callable
    inverse_gamma: Callable
    dgamma_dtheta: Callable
    gamma_support: tuple[float, float]
    theta_support: tuple[float, float]
    to_coord: Callable = _identity
    from_coord: Callable = _identity
    gamma_of_coord: Callable | None = None
    coord_of_gamma: Callable | None = None
    discrete: bool = False
    gamma_interval: Callable | None = None

    def jacobian(self, theta):
        return np.abs(self.dgamma_dtheta(theta))

    def gamma_at_coord(self, c):
        if self.gamma_of_coord is not None:
            return self.gamma_of_coord(c)
        return self.inverse_gamma(self.from_coord(c))

    def coord_at_gamma(self, g):
        if self.coord_of_gamma is not None:
            return self.coord_of_gamma(g)
        return self.to_coord(self.inverse_theta(g))


@dataclass(frozen=True)
class FiducialModel:
    """Observed fiducial statistic, primary density, mapping and GPD function."""

    q_observed: float
    pi0: Distribution
    mapping: FiducialMapping
    gpd: object = field(default_factory=ConstantGpd)

    @property
    def gamma_range(self) -> tuple[float, float]:
        """``G_x``: the mapping's gamma support intersected with ``pi0``'s."""
        m_lo, m_hi = self.mapping.gamma_support
        p_lo, p_hi = self.pi0.support
        lo, hi = max(m_lo, p_lo), min(m_hi, p_hi)
        if not lo < hi:
            raise ValueError("the set of feasible gamma values is empty")
        return float(lo), float(hi)


def _gamma_grid(model: FiducialModel, size: int) -> np.ndarray:
    lo, hi = model.gamma_range
    # infinite ends are replaced by extreme quantiles of pi0
    if not math.isfinite(lo):
        lo = float(model.pi0.quantile(1e-12))
    if not math.isfinite(hi):
        hi = float(model.pi0.quantile(1.0 - 1e-12))
    return np.linspace(lo, hi, size + 2)[1:-1]


def _strictly_monotone(y: np.ndarray) -> bool:
    d = np.diff(y)
    return bool(np.all(d > 0) or np.all(d < 0))


def check_condition1(model: FiducialModel, grid_size: int = 10_000) -> bool:
    """Numerically test that gamma and theta are in one-to-one correspondence.

    The gamma grid over ``G_x`` is mapped to theta, which must be finite and
    strictly monotone and must map back to the same gamma values.  A theta
    grid reaching past both ends of the image is then mapped forward; the
    points that land inside ``G_x`` must form one contiguous, strictly
    monotone run.  This catches folds, where several theta values share a
    gamma value.

    Parameters
    ----------
    model : FiducialModel
    grid_size : int, default 10000
        Number of points in each grid, at least 100.

    Returns
    -------
    bool
    """
    if grid_size < 100:
        raise ValueError("grid_size must be >= 100")
    g_lo, g_hi = model.gamma_range
    mp = model.mapping
    if mp.discrete:
        # every theta owns a whole gamma interval, so no bijection exists
        return False
    gammas = _gamma_grid(model, grid_size)
    with np.errstate(all="ignore"):
        coords = np.asarray(mp.coord_at_gamma(gammas), dtype=float)
        if not np.all(np.isfinite(coords)) or not _strictly_monotone(coords):
            return False
        back = np.asarray(mp.gamma_at_coord(coords), dtype=float)
        if not np.all(np.abs(back - gammas) <= 1e-8 * (1.0 + np.abs(gammas))):
            return False

        c_lo, c_hi = sorted((coords[0], coords[-1]))
        pad = c_hi - c_lo
        s_lo, s_hi = (mp.to_coord(t) for t in mp.theta_support)
        c_grid = np.linspace(max(c_lo - pad, s_lo), min(c_hi + pad, s_hi), grid_size + 2)[1:-1]
        g_of_c = np.asarray(mp.gamma_at_coord(c_grid), dtype=float)
    inside = np.flatnonzero((g_of_c > g_lo) & (g_of_c < g_hi))
    if inside.size < 2:
        return False
    if inside[-1] - inside[0] + 1 != inside.size:
        return False
    return _strictly_monotone(g_of_c[inside])


# ---------------------------------------------------------------------------
# post-data densities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Pi1Density:
    """Normalized post-data density of the primary variable.

    Use :func:`build_pi1` rather than the constructor.
    """

    model: FiducialModel
    log_norm: float

    @property
    def support(self):
        return self.model.gamma_range

    def logpdf(self, g):
        g = np.asarray(g, dtype=float)
        lo, hi = self.support
        inside = (g > lo) & (g < hi)
        with np.errstate(all="ignore"):
            theta = self.model.mapping.inverse_theta(np.where(inside, g, 0.5 * (lo + hi) if math.isfinite(lo + hi) else 0.0))
            w = np.asarray(self.model.gpd(theta), dtype=float)
            out = np.log(w) + np.asarray(self.model.pi0.logpdf(g)) + self.log_norm
        return _scalar(np.where(inside, out, -np.inf))

    def pdf(self, g):
        return np.exp(self.logpdf(g))

    def cdf(self, g):
        if np.ndim(g):
            return np.array([self.cdf(v) for v in np.ravel(g)]).reshape(np.shape(g))
        lo, hi = self.support
        g = float(g)
        if g <= lo:
            return 0.0
        if g >= hi:
            return 1.0
        cuts = [c for c in self._cuts() if lo < c < g]
        return min(1.0, _piecewise_quad(self.pdf, [lo, *cuts, g]))

    def _cuts(self) -> list[float]:
        return _gamma_cuts(self.model)

    def sample(self, rng, size=None):
        """Rejection sampling from ``pi0`` with acceptance ``omega / max omega``."""
        if size is not None:
            return np.array([self.sample(rng) for _ in range(int(np.prod(size)))]).reshape(size)
        lo, hi = self.support
        bound = self.model.gpd.upper_bound()
        for _ in range(1_000_000):
            g = float(self.model.pi0.sample(rng))
            if not lo < g < hi:
                continue
            w = float(self.model.gpd(self.model.mapping.inverse_theta(g)))
            if rng.random() * bound < w:
                return g
        raise RuntimeError("rejection sampler for pi1 failed to accept")


def _piecewise_quad(f, knots) -> float:
    total = 0.0
    for a, b in zip(knots[:-1], knots[1:]):
        if b > a:
            total += integrate.quad(f, a, b, **_QUAD)[0]
    return total


def _gamma_cuts(model: FiducialModel) -> list[float]:
    lo, hi = model.gamma_range
    with np.errstate(all="ignore"):
        cuts = [float(model.mapping.inverse_gamma(b)) for b in model.gpd.breakpoints()]
    return sorted(c for c in cuts if np.isfinite(c) and lo < c < hi)


def build_pi1(model: FiducialModel) -> Pi1Density:
    """Build ``pi1(gamma) = C * omega(theta(gamma)) * pi0(gamma)`` on ``G_x``.

    The normalizer is found by adaptive quadrature, split at the gamma images
    of the GPD function's breakpoints.

    Raises
    ------
    ValueError
        If the mapping fails the bijectivity check or the reweighted density
        has zero or non-finite mass.
    """
    if not check_condition1(model):
        raise ValueError("mapping is not a bijection between gamma and theta; use the step-inversion density for discrete data")
    lo, hi = model.gamma_range
    raw = Pi1Density(model, 0.0)
    mass = _piecewise_quad(raw.pdf, [lo, *_gamma_cuts(model), hi])
    if not np.isfinite(mass):
        raise ValueError("GPD-weighted primary density has non-finite mass")
    if mass <= 0:
        raise ValueError("GPD function is zero over every feasible gamma value")
    return Pi1Density(model, -math.log(mass))


@dataclass(frozen=True)
class FiducialDensity:
    """Fiducial density of ``theta``: ``pi1(gamma(theta)) * |d gamma / d theta|``."""

    pi1: Pi1Density

    @property
    def mapping(self) -> FiducialMapping:
        return self.pi1.model.mapping

    @property
    def support(self) -> tuple[float, float]:
        lo, hi = self.pi1.support
        with np.errstate(all="ignore"):
            ends = sorted(float(self.mapping.inverse_theta(g)) if math.isfinite(g) else math.nan for g in (lo, hi))
        t_lo, t_hi = self.mapping.theta_support
        return (ends[0] if math.isfinite(ends[0]) else t_lo, ends[1] if math.isfinite(ends[1]) else t_hi)

    def logpdf(self, theta):
        theta = np.asarray(theta, dtype=float)
        t_lo, t_hi = self.mapping.theta_support
        ok = (theta > t_lo) & (theta < t_hi)
        safe = np.where(ok, theta, self.mapping.inverse_theta(0.5 * sum(self._finite_gamma_ends())))
        with np.errstate(all="ignore"):
            g = self.mapping.inverse_gamma(safe)
            out = np.asarray(self.pi1.logpdf(g)) + np.log(self.mapping.jacobian(safe))
        return _scalar(np.where(ok, out, -np.inf))

    def _finite_gamma_ends(self):
        lo, hi = self.pi1.support
        if math.isfinite(lo) and math.isfinite(hi):
            return lo, hi
        if math.isfinite(lo):
            return lo, lo + 2.0
        if math.isfinite(hi):
            return hi - 2.0, hi
        return -1.0, 1.0

    def pdf(self, theta):
        return np.exp(self.logpdf(theta))

    def cdf(self, theta):
        if np.ndim(theta):
            return np.array([self.cdf(v) for v in np.ravel(theta)]).reshape(np.shape(theta))
        lo, hi = self.support
        if theta <= lo:
            return 0.0
        if theta >= hi:
            return 1.0
        g = float(self.mapping.inverse_gamma(theta))
        c = self.pi1.cdf(g)
        return c if self.mapping.dgamma_dtheta(theta) > 0 else 1.0 - c

    def sample(self, rng, size=None):
        g = self.pi1.sample(rng, size)
        return _scalar(self.mapping.inverse_theta(g))


def fiducial_density(model: FiducialModel) -> FiducialDensity:
    """Fiducial density of the parameter under ``model``."""
    return FiducialDensity(build_pi1(model))


# ---------------------------------------------------------------------------
# normal mean and variance
# ---------------------------------------------------------------------------


def normal_mean_conditional(xbar: float, sigma2: float, n: int) -> Normal:
    """Fiducial density of a normal mean with known variance: N(xbar, sigma2/n)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return Normal(xbar, sigma2 / n)


def variance_conditional(sigma2_hat: float, n: int) -> InvGamma:
    """Fiducial density of a normal variance with known mean.

    ``sigma2_hat`` is the mean squared deviation about the known mean; the
    result is ``InvGamma(n/2, n * sigma2_hat / 2)``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not sigma2_hat > 0:
        raise ValueError("sigma2_hat must be > 0")
    return InvGamma(0.5 * n, 0.5 * n * sigma2_hat)


def normal_mean_model(xbar: float, sigma2: float, n: int, gpd=None) -> FiducialModel:
    """Generic model for ``xbar = mu + (sigma / sqrt(n)) * gamma``, gamma ~ N(0, 1)."""
    k = math.sqrt(sigma2 / n)
    mapping = FiducialMapping(
        forward=lambda g, mu: mu + k * g,
        inverse_theta=lambda g: xbar - k * np.asarray(g),
        inverse_gamma=lambda mu: (xbar - np.asarray(mu)) / k,
        dgamma_dtheta=lambda mu: np.full(np.shape(mu), -1.0 / k),
        gamma_support=(-math.inf, math.inf),
        theta_support=(-math.inf, math.inf),
    )
    return FiducialModel(xbar, Normal(0.0, 1.0), mapping, gpd or ConstantGpd())


def variance_model(sigma2_hat: float, n: int, gpd=None) -> FiducialModel:
    """Generic model for ``sigma2_hat = (sigma2 / n) * gamma``, gamma ~ chi2(n)."""
    s = n * sigma2_hat
    mapping = FiducialMapping(
        forward=lambda g, v: v * np.asarray(g) / n,
        inverse_theta=lambda g: s / np.asarray(g),
        inverse_gamma=lambda v: s / np.asarray(v),
        dgamma_dtheta=lambda v: -s / np.asarray(v) ** 2,
        gamma_support=(0.0, math.inf),
        theta_support=(0.0, math.inf),
        to_coord=np.log,
        from_coord=np.exp,
    )
    return FiducialModel(sigma2_hat, ChiSquare(n), mapping, gpd or ConstantOnSupportGpd(1.0, 0.0, math.inf))


# ---------------------------------------------------------------------------
# step inversion for a binomial count
# ---------------------------------------------------------------------------


def _beta_q(a: float, b: float, w):
    """Quantile of Beta(a, b) at ``w``; ``a == 0`` and ``b == 0`` are point masses."""
    if a == 0:
        return np.zeros_like(np.asarray(w, dtype=float))
    if b == 0:
        return np.ones_like(np.asarray(w, dtype=float))
    return special.betaincinv(a, b, w)


def _beta_cdf(a: float, b: float, u):
    if a == 0:
        return np.ones_like(np.asarray(u, dtype=float))
    if b == 0:
        return np.zeros_like(np.asarray(u, dtype=float))
    return special.betainc(a, b, u)


@dataclass(frozen=True)
class StepInversionDensity(Distribution):
    """Fiducial density of a binomial proportion from step inversion.

    The count ``x`` out of ``trials`` is generated as the smallest ``y`` with
    ``gamma < F(y | u)``, ``gamma ~ U(0, 1)``.  Given ``x`` the consistent
    values of ``gamma`` for a proportion ``u`` form ``[F(x-1|u), F(x|u))``;
    read the other way round, each ``gamma`` is consistent with the interval
    of proportions ``[a(gamma), b(gamma)]``.  With a flat local pre-data
    function each ``gamma`` spreads its mass uniformly over that interval.

    With ``w = 1 - gamma`` the interval ends are the ``w`` quantiles of
    Beta(x, m - x + 1) and Beta(x + 1, m - x), so the proportion is uniform
    between two comonotone beta variables.  The density is rescaled to
    ``[0, hi]``, where ``hi = 1 - pi1_known`` in the trinomial use.  Swapping
    ``x`` for ``m - x`` reflects the density about 1/2, which the evaluation
    uses to stay in the accurate lower half.
    """

    successes: int
    trials: int
    hi: float = 1.0

    def __post_init__(self):
        if self.trials <= 0:
            raise ValueError("step inversion needs at least one trial")
        if not 0 <= self.successes <= self.trials:
            raise ValueError("successes must lie in [0, trials]")
        if not self.hi > 0:
            raise ValueError("upper end must be > 0")

    @property
    def support(self):
        return (0.0, float(self.hi))

    @property
    def _ab(self):
        x, m = self.successes, self.trials
        return (x, m - x + 1), (x + 1, m - x)

    def interval(self, w):
        """Proportions (on the unit scale) consistent with ``w = 1 - gamma``."""
        (a1, b1), (a2, b2) = self._ab
        return _beta_q(a1, b1, w), _beta_q(a2, b2, w)

    def _mirror(self) -> "StepInversionDensity":
        return StepInversionDensity(self.trials - self.successes, self.trials, 1.0)

    def _unit_pdf(self, u: float) -> float:
        if u == 0.0 and self.successes == 0 or u == 1.0 and self.successes == self.trials:
            # logarithmic pole at the end favoured by an extreme count
            return math.inf
        if not 0.0 < u < 1.0:
            return 0.0
        if u > 0.5:
            # work near zero, where the beta quantiles keep full precision
            return self._mirror()._unit_pdf(1.0 - u)
        (a1, b1), (a2, b2) = self._ab
        w_lo = float(_beta_cdf(a2, b2, u))
        w_hi = float(_beta_cdf(a1, b1, u))
        if w_hi <= w_lo:
            return 0.0

        def inv_width(w):
            lo, hi = self.interval(w)
            return 1.0 / (hi - lo)

        return integrate.quad(inv_width, w_lo, w_hi, **_QUAD)[0]

    def _unit_cdf(self, u: float) -> float:
        if u <= 0.0:
            return 0.0
        if u >= 1.0:
            return 1.0
        if u > 0.5:
            return 1.0 - self._mirror()._unit_cdf(1.0 - u)
        (a1, b1), (a2, b2) = self._ab
        w_lo = float(_beta_cdf(a2, b2, u))
        w_hi = float(_beta_cdf(a1, b1, u))

        def frac(w):
            lo, hi = self.interval(w)
            return (u - lo) / (hi - lo)

        inner = integrate.quad(frac, w_lo, w_hi, **_QUAD)[0] if w_hi > w_lo else 0.0
        return min(1.0, w_lo + inner)

    def pdf(self, x):
        if np.ndim(x):
            return np.array([self.pdf(v) for v in np.ravel(x)]).reshape(np.shape(x))
        return self._unit_pdf(float(x) / self.hi) / self.hi

    def logpdf(self, x):
        with np.errstate(divide="ignore"):
            return _scalar(np.log(self.pdf(x)))

    def cdf(self, x):
        if np.ndim(x):
            return np.array([self.cdf(v) for v in np.ravel(x)]).reshape(np.shape(x))
        return self._unit_cdf(float(x) / self.hi)

    def sample(self, rng, size=None):
        w = rng.random(size)
        lo, hi = self.interval(w)
        return _scalar(self.hi * (lo + (hi - lo) * rng.random(size)))

    def expectation(self):
        return self.hi * (2 * self.successes + 1) / (2.0 * (self.trials + 1))

    def _guess(self, p):
        return self.expectation(), 0.25 * self.hi


def stepinv_mapping(successes: int, trials: int, pi1_known: float = 0.0) -> FiducialMapping:
    """Discrete data generating mapping for a count with ``trials`` fixed.

    The parameter is the cell proportion ``pi2`` on ``[0, 1 - pi1_known]``.
    """
    scale = 1.0 - pi1_known

    def forward(g, pi2):
        u = np.asarray(pi2) / scale
        ys = np.arange(trials + 1)
        cdfs = special.bdtr(ys, trials, u)
        return int(np.argmax(np.asarray(g) < cdfs))

    def gamma_interval(pi2):
        u = np.asarray(pi2, dtype=float) / scale
        lo = special.bdtr(successes - 1, trials, u) if successes > 0 else np.zeros_like(u)
        return lo, special.bdtr(successes, trials, u)

    def no_inverse(*_):
        raise ValueError("the step-inversion mapping has no pointwise inverse")

    return FiducialMapping(
        forward=forward,
        inverse_theta=no_inverse,
        inverse_gamma=no_inverse,
        dgamma_dtheta=no_inverse,
        gamma_support=(0.0, 1.0),
        theta_support=(0.0, scale),
        discrete=True,
        gamma_interval=gamma_interval,
    )


def discrete_fiducial_stepinv(successes: int, trials: int, pi1_known: float = 0.0, lpd=None) -> StepInversionDensity:
    """Fiducial density of ``pi2`` given ``pi1`` from a trinomial count.

    Parameters
    ----------
    successes : int
        The count ``x2``.
    trials : int
        ``x2 + x3``, treated as already generated.
    pi1_known : float
        Conditioning value of ``pi1``; the density lives on ``[0, 1 - pi1_known]``.
    lpd : GPD-like function, optional
        Local pre-data function.  Only functions that are constant on the
        parameter range are supported.

    Returns
    -------
    StepInversionDensity
    """
    if trials <= 0:
        raise ValueError("step inversion needs at least one trial")
    if not 0.0 <= pi1_known < 1.0:
        raise ValueError("pi1_known must lie in [0, 1)")
    hi = 1.0 - pi1_known
    if lpd is not None:
        flat = isinstance(lpd, ConstantGpd) or (
            isinstance(lpd, ConstantOnSupportGpd) and lpd.lo <= 0.0 and lpd.hi >= hi
        )
        if not flat:
            raise NotImplementedError("unsupported LPD function: only constant-on-support is implemented")
    return StepInversionDensity(int(successes), int(trials), hi)


# ---------------------------------------------------------------------------
# correlation coefficient
# ---------------------------------------------------------------------------


def tau_gamma(z, z_hat: float, n: int):
    """Primary variable value at ``z = atanh(tau)`` for observed ``z_hat``."""
    z = np.asarray(z, dtype=float)
    return (z_hat - z) * math.sqrt(n) * np.sqrt(1.0 + np.tanh(z) ** 2)


def _tau_dgamma_dz(z, z_hat: float, n: int):
    t = np.tanh(z)
    root = np.sqrt(1.0 + t * t)
    return math.sqrt(n) * (-root + (z_hat - z) * t * (1.0 - t * t) / root)


def _tau_solve_z(g, z_hat: float, n: int):
    """Vectorized bisection for ``tau_gamma(z) = g``, polished by Newton steps."""
    g = np.asarray(g, dtype=float)
    reach = np.abs(g) / math.sqrt(n) + 1.0
    lo = z_hat - reach
    hi = z_hat + reach
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        above = tau_gamma(mid, z_hat, n) > g
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    z = 0.5 * (lo + hi)
    for _ in range(2):
        d = _tau_dgamma_dz(z, z_hat, n)
        step = (tau_gamma(z, z_hat, n) - g) / np.where(d != 0, d, 1.0)
        z = np.where(np.abs(step) < (hi - lo) + 1e-12, z - step, z)
    return z


def tau_mapping(tau_hat: float, n: int, v: float) -> FiducialMapping:
    """Mapping ``atanh(tau_hat) = atanh(tau) + gamma / sqrt(n (1 + tau^2))``.

    The primary variable is standard normal truncated to ``(-v, v)``; see
    :func:`tau_model` for the full model.  Grids are laid out in
    ``z = atanh(tau)`` so that values of ``tau`` within rounding of +-1
    remain distinguishable.

    Raises
    ------
    ValueError
        If the mapping is not one-to-one for this truncation point.
    """
    if not abs(tau_hat) < 1:
        raise ValueError("tau_hat must lie in (-1, 1)")
    if n < 4:
        raise ValueError("n must be >= 4")
    if not v > 0:
        raise ValueError("v must be > 0")
    mapping = _tau_mapping(tau_hat, n, v)
    if not check_condition1(FiducialModel(tau_hat, TruncNormal(-v, v), mapping, ConstantOnSupportGpd(1.0, -1.0, 1.0))):
        raise ValueError(f"tau mapping is not one-to-one at v={v}")
    return mapping


def _tau_mapping(tau_hat: float, n: int, v: float) -> FiducialMapping:
    z_hat = math.atanh(tau_hat)
    sqn = math.sqrt(n)

    def forward(g, tau):
        tau = np.asarray(tau, dtype=float)
        return np.tanh(np.arctanh(tau) + np.asarray(g) / (sqn * np.sqrt(1.0 + tau * tau)))

    return FiducialMapping(
        forward=forward,
        inverse_theta=lambda g: np.tanh(_tau_solve_z(g, z_hat, n)),
        inverse_gamma=lambda tau: tau_gamma(np.arctanh(tau), z_hat, n),
        dgamma_dtheta=lambda tau: _tau_dgamma_dz(np.arctanh(tau), z_hat, n) / (1.0 - np.asarray(tau) ** 2),
        gamma_support=(-v, v),
        theta_support=(-1.0, 1.0),
        to_coord=np.arctanh,
        from_coord=np.tanh,
        gamma_of_coord=lambda z: tau_gamma(z, z_hat, n),
        coord_of_gamma=lambda g: _tau_solve_z(g, z_hat, n),
    )


def tau_model(tau_hat: float, n: int, v: float) -> FiducialModel:
    """Fiducial model for a correlation with a flat GPD function on [-1, 1]."""
    return FiducialModel(tau_hat, TruncNormal(-v, v), _tau_mapping(tau_hat, n, v), ConstantOnSupportGpd(1.0, -1.0, 1.0))


def largest_truncation_v(n: int, tau_hat: float, cap: float = MAX_TRUNCATION_V) -> float:
    """Largest ``v <= cap`` keeping the tau mapping one-to-one, found analytically.

    ``gamma(z)`` can only turn back between ``z = 0`` and ``z_hat``.  Any
    local extremum there caps ``v`` at its smallest ``|gamma|``.
    """
    z_hat = math.atanh(tau_hat)
    if z_hat == 0.0:
        return cap
    zs = np.linspace(0.0, z_hat, 513)
    d = _tau_dgamma_dz(zs, z_hat, n)
    flips = np.flatnonzero(np.sign(d[:-1]) != np.sign(d[1:]))
    if flips.size == 0:
        return cap
    best = cap
    for i in flips:
        a, b = zs[i], zs[i + 1]
        # bisection on the sign of the derivative
        fa = d[i]
        for _ in range(60):
            mid = 0.5 * (a + b)
            fm = _tau_dgamma_dz(mid, z_hat, n)
            if np.sign(fm) == np.sign(fa):
                a, fa = mid, fm
            else:
                b = mid
        best = min(best, abs(float(tau_gamma(0.5 * (a + b), z_hat, n))))
    return best


def select_truncation_v(n: int, tau_hat: float, grid_size: int = 10_000) -> float:
    """Truncation point for the tau primary variable.

    Returns 0.99 times the largest ``v <= 1000`` that passes
    :func:`check_condition1`, located by bisection to relative precision
    1e-3.

    Raises
    ------
    ValueError
        If even ``v = 1`` fails.
    """
    if not abs(tau_hat) < 1:
        raise ValueError("tau_hat must lie in (-1, 1)")

    def ok(v):
        return check_condition1(tau_model(tau_hat, n, v), grid_size)

    if ok(MAX_TRUNCATION_V):
        return TRUNCATION_SAFETY * MAX_TRUNCATION_V
    if not ok(1.0):
        raise ValueError("no truncation point v >= 1 keeps the tau mapping one-to-one")
    lo, hi = 1.0, MAX_TRUNCATION_V
    while (hi - lo) > 1e-3 * lo:
        mid = math.sqrt(lo * hi) if hi > 4 * lo else 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return TRUNCATION_SAFETY * lo


@dataclass(frozen=True)
class TauFiducialDensity(Distribution):
    """Closed-form fiducial density of a correlation ``tau``.

    Equivalent to :func:`fiducial_density` on :func:`tau_model` but with no
    quadrature: since ``gamma`` decreases in ``tau``, the cdf is
    ``P(Gamma >= gamma(tau))`` for the truncated normal ``Gamma``.
    """

    tau_hat: float
    n: int
    v: float

    def __post_init__(self):
        if not abs(self.tau_hat) < 1:
            raise ValueError("tau_hat must lie in (-1, 1)")
        if not self.v > 0:
            raise ValueError("v must be > 0")

    @cached_property
    def _z_hat(self) -> float:
        return math.atanh(self.tau_hat)

    @cached_property
    def _log_mass(self) -> float:
        return math.log(special.ndtr(self.v) - special.ndtr(-self.v))

    @cached_property
    def support(self):
        z = _tau_solve_z(np.array([self.v, -self.v]), self._z_hat, self.n)
        return float(np.tanh(z[0])), float(np.tanh(z[1]))

    def gamma(self, tau):
        return tau_gamma(np.arctanh(tau), self._z_hat, self.n)

    def logpdf(self, tau):
        tau = np.asarray(tau, dtype=float)
        ok = np.abs(tau) < 1.0
        safe = np.where(ok, tau, 0.0)
        z = np.arctanh(safe)
        g = tau_gamma(z, self._z_hat, self.n)
        jac = np.abs(_tau_dgamma_dz(z, self._z_hat, self.n)) / (1.0 - safe * safe)
        with np.errstate(divide="ignore"):
            out = -0.5 * g * g - 0.5 * math.log(2.0 * math.pi) - self._log_mass + np.log(jac)
        return _scalar(np.where(ok & (np.abs(g) < self.v), out, -np.inf))

    def cdf(self, tau):
        tau = np.asarray(tau, dtype=float)
        with np.errstate(divide="ignore"):
            g = self.gamma(np.clip(tau, -1.0, 1.0))
        g = np.clip(np.nan_to_num(g, nan=0.0), -self.v, self.v)
        # upper tail form keeps precision when gamma is large and positive
        out = (special.ndtr(-g) - special.ndtr(-self.v)) / math.exp(self._log_mass)
        out = np.where(tau <= -1.0, 0.0, np.where(tau >= 1.0, 1.0, out))
        return _scalar(np.clip(out, 0.0, 1.0))

    def sample(self, rng, size=None):
        g = TruncNormal(-self.v, self.v).sample(rng, size)
        return _scalar(np.tanh(_tau_solve_z(g, self._z_hat, self.n)))

    def _guess(self, p):
        return self.tau_hat, 0.1
