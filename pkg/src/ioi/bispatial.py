"""Bispatial post-data densities.

A bispatial scenario singles out a narrow interval ``[theta0, theta1]`` of a
parameter that had a substantial pre-data probability.  A one-sided P value
for the matching sampling-space hypothesis is mapped by a post-data opinion
(PDO) curve to ``kappa``, the post-data probability of the parameter-space
hypothesis ``H_P``.  The overall density then takes the form

    b(theta) = c * (1 + nu * h(theta)) * f_S(theta)   on the interval,
    b(theta) = c * f_S(theta)                        elsewhere,

where ``f_S`` is the neutral fiducial density, ``h`` is a density on the
interval that vanishes at both ends and ``c = 1 / (1 + nu * M_h)`` with
``M_h = int h f_S``.  Requiring ``P_b(H_P) = kappa`` fixes

    nu = (kappa - A) / ((1 - kappa) * M_h),    A = P_{f_S}(H_P).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate, special

from .distributions import ScaledBeta, _scalar

__all__ = [
    "Orientation",
    "PowerLaw",
    "Table",
    "BispatialSpec",
    "BDensity",
    "choose_orientation",
    "pdo_kappa",
    "interval_moments",
    "solve_nu",
    "build_b_density",
    "one_sided_pvalue",
]


class Orientation(enum.Enum):
    """Which parameter-space hypothesis the P value speaks to.

    ``LOWER``: ``H_P`` is ``theta >= theta0`` and ``p = F(t | theta0)``.
    ``UPPER``: ``H_P`` is ``theta <= theta1`` and ``p = F'(t | theta1)``.
    """

    LOWER = "lower"
    UPPER = "upper"


@dataclass(frozen=True)
class PowerLaw:
    """PDO curve ``kappa = p ** exponent``."""

    exponent: float

    def __post_init__(self):
        if not self.exponent > 0:
            raise ValueError("exponent must be > 0")

    def __call__(self, p: float) -> float:
        return float(p) ** self.exponent


@dataclass(frozen=True)
class Table:
    """PDO curve interpolated linearly between ``(p, kappa)`` points."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pts = tuple((float(p), float(k)) for p, k in self.points)
        object.__setattr__(self, "points", pts)
        ps = np.array([p for p, _ in pts])
        ks = np.array([k for _, k in pts])
        if len(pts) < 2 or np.any(np.diff(ps) <= 0):
            raise ValueError("PDO table needs at least two points with increasing p")
        if np.any(np.diff(ks) < 0):
            raise ValueError("PDO table kappa values must be non-decreasing")
        if ps[-1] != 1.0 or ks[-1] != 1.0:
            raise ValueError("PDO table must end at (1, 1)")
        if ps[0] > 0.0 or np.any(ks < 0) or np.any(ks > 1):
            raise ValueError("PDO table must start at p <= 0 with kappa in [0, 1]")

    def __call__(self, p: float) -> float:
        ps, ks = zip(*self.points)
        return float(np.interp(p, ps, ks))


def pdo_kappa(curve, p: float) -> float:
    """Post-data probability of ``H_P`` for a one-sided P value ``p``."""
    if not p > 0:
        raise ValueError("P value must be > 0 to give a usable kappa")
    if p > 1:
        raise ValueError("P value must be <= 1")
    return curve(p)


def choose_orientation(f_at_lo: float, fprime_at_hi: float) -> tuple[Orientation, float]:
    """Pick the hypothesis pair from the two one-sided tail probabilities.

    Parameters
    ----------
    f_at_lo : float
        ``F(t | theta0)``, the lower tail of the statistic at the interval's
        lower end.
    fprime_at_hi : float
        ``F'(t | theta1)``, the upper tail at the interval's upper end.

    Returns
    -------
    (Orientation, float)
        The orientation and the P value that goes with it.  Ties go to
        ``LOWER``.
    """
    if f_at_lo <= fprime_at_hi:
        return Orientation.LOWER, float(f_at_lo)
    return Orientation.UPPER, float(fprime_at_hi)


def one_sided_pvalue(statistic: float, null_value: float, sd: float, side: Orientation) -> float:
    """Normal-theory one-sided P value.

    ``LOWER`` gives ``Phi((statistic - null) / sd)`` and ``UPPER`` its upper
    tail.  The caller passes the already shifted null, e.g. ``mu1 + eps``.
    """
    if not sd > 0:
        raise ValueError("sd must be > 0")
    zscore = (statistic - null_value) / sd
    if side is Orientation.LOWER:
        return float(special.ndtr(zscore))
    return float(special.ndtr(-zscore))


@dataclass(frozen=True)
class BispatialSpec:
    """Everything needed to turn ``kappa`` into a b-density.

    Parameters
    ----------
    lo, hi : float
        The interval ``[theta0, theta1]``; a zero-width interval is rejected.
    h : ScaledBeta
        Density on exactly ``[lo, hi]`` with both shapes above one, so it
        vanishes at the ends.
    f_s : density
        Neutral fiducial density with ``pdf``/``logpdf``/``cdf``.
    orientation : Orientation
    pdo : PDO curve, optional
        Only needed by callers that go through :func:`pdo_kappa`.
    panels : int, default 0
        ``0`` integrates ``h * f_S`` adaptively.  A positive value uses that
        many 32-point Gauss-Legendre panels, which is much faster inside a
        sampler and exact to rounding for smooth ``f_S``.
    """

    lo: float
    hi: float
    h: ScaledBeta
    f_s: object
    orientation: Orientation
    pdo: object = None
    panels: int = 0

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("bispatial interval must have positive width (eps = 0 is not supported)")
        if not isinstance(self.h, ScaledBeta):
            raise TypeError("h must be a ScaledBeta on the interval")
        if not (math.isclose(self.h.lo, self.lo) and math.isclose(self.h.hi, self.hi)):
            raise ValueError("h must live exactly on the bispatial interval")
        if not (self.h.a > 1 and self.h.b > 1):
            raise ValueError("h must vanish at the interval ends (shapes > 1)")


_GL_X, _GL_W = np.polynomial.legendre.leggauss(32)


def interval_moments(spec: BispatialSpec) -> tuple[float, float]:
    """Return ``(A, M_h)``: ``P_{f_S}(H_P)`` and ``int_lo^hi h f_S``."""
    if spec.orientation is Orientation.LOWER:
        a = 1.0 - float(spec.f_s.cdf(spec.lo))
    else:
        a = float(spec.f_s.cdf(spec.hi))

    def integrand(t):
        return spec.h.pdf(t) * spec.f_s.pdf(t)

    if spec.panels > 0:
        edges = np.linspace(spec.lo, spec.hi, spec.panels + 1)
        half = 0.5 * np.diff(edges)
        mids = 0.5 * (edges[:-1] + edges[1:])
        nodes = (mids[:, None] + half[:, None] * _GL_X[None, :]).ravel()
        weights = (half[:, None] * _GL_W[None, :]).ravel()
        m_h = float(np.dot(weights, integrand(nodes)))
    else:
        m_h = integrate.quad(integrand, spec.lo, spec.hi, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
    return a, m_h


def solve_nu(spec: BispatialSpec, kappa: float, moments: tuple[float, float] | None = None) -> float:
    """Weight ``nu`` on ``h`` that gives ``H_P`` post-data probability ``kappa``.

    Raises
    ------
    ValueError
        If ``kappa`` is not above the neutral probability ``A`` (the value it
        would have with ``nu = 0``) or if ``kappa >= 1``.
    """
    a, m_h = moments if moments is not None else interval_moments(spec)
    if not kappa < 1.0:
        raise ValueError("kappa must be < 1")
    if kappa < a:
        raise ValueError(f"kappa below neutral fiducial probability ({kappa} < {a})")
    if not m_h > 0:
        raise ValueError("h * f_S has no mass on the interval")
    return (kappa - a) / ((1.0 - kappa) * m_h)


@dataclass(frozen=True)
class BDensity:
    """Overall post-data density of one parameter.

    Build with :func:`build_b_density`.
    """

    spec: BispatialSpec
    kappa: float
    nu: float
    a: float
    m_h: float
    c: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "c", 1.0 / (1.0 + self.nu * self.m_h))

    @cached_property
    def _log_c(self) -> float:
        return math.log(self.c)

    def logpdf(self, theta):
        theta = np.asarray(theta, dtype=float)
        with np.errstate(divide="ignore"):
            base = np.asarray(self.spec.f_s.logpdf(theta), dtype=float)
        boost = np.log1p(self.nu * np.asarray(self.spec.h.pdf(theta)))
        return _scalar(self._log_c + base + boost)

    def pdf(self, theta):
        return np.exp(self.logpdf(theta))

    def cdf(self, theta):
        """``c * (F_S(theta) + nu * int_lo^min(theta, hi) h f_S)``."""
        if np.ndim(theta):
            return np.array([self.cdf(t) for t in np.ravel(theta)]).reshape(np.shape(theta))
        theta = float(theta)
        top = min(theta, self.spec.hi)
        extra = 0.0
        if top > self.spec.lo and self.nu > 0:
            extra = integrate.quad(
                lambda t: self.spec.h.pdf(t) * self.spec.f_s.pdf(t), self.spec.lo, top, epsabs=1e-14, epsrel=1e-12
            )[0]
        return self.c * (float(self.spec.f_s.cdf(theta)) + self.nu * extra)

    def prob_hp(self) -> float:
        """Post-data probability of ``H_P``; equals ``kappa`` by construction."""
        return self.c * (self.a + self.nu * self.m_h)

    def sample(self, rng, size=None):
        """Rejection sampling from ``f_S``."""
        if size is not None:
            return np.array([self.sample(rng) for _ in range(int(np.prod(size)))]).reshape(size)
        h = self.spec.h
        mode = h.lo + h.width * (h.a - 1.0) / (h.a + h.b - 2.0)
        bound = 1.0 + self.nu * float(h.pdf(mode)) * 1.001
        while True:
            t = float(self.spec.f_s.sample(rng))
            if rng.random() * bound < 1.0 + self.nu * float(h.pdf(t)):
                return t


def build_b_density(spec: BispatialSpec, kappa: float) -> BDensity:
    """Construct the b-density whose ``H_P`` probability is ``kappa``."""
    a, m_h = interval_moments(spec)
    nu = solve_nu(spec, kappa, (a, m_h))
    return BDensity(spec, float(kappa), nu, a, m_h)
