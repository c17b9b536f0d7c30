"""Worked inference problems wired up as Gibbs samplers.

Each builder returns a :class:`ScenarioSpec` holding the full conditionals,
the data summaries they read, starting values and closed-form or
quadrature reference curves for the marginals.

==========================  ==============================================
scenario                    parameters
==========================  ==============================================
``student_fiducial``        normal mean and variance, both fiducial
``student_bayes_sigma``     fiducial mean, InvGamma-prior variance
``student_bayes_mu``        t-prior mean, fiducial variance
``student_bispatial``       bispatial mean, InvGamma-prior variance
``trinomial``               beta-prior ``pi1``, step-inversion ``pi2``
``regression``              four coefficients and error variance
``regression_fiducial``     the all-fiducial version of ``regression``
``bivariate``               two means, two variances and a correlation
==========================  ==============================================
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy import integrate, special

from . import bayes
from .bispatial import (
    BispatialSpec,
    BDensity,
    Orientation,
    PowerLaw,
    Table,
    choose_orientation,
    interval_moments,
    one_sided_pvalue,
    pdo_kappa,
    solve_nu,
)
from .distributions import Distribution, InvGamma, Normal, NonStdT, ScaledBeta, _scalar, make_rng
from .fiducial import (
    TRUNCATION_SAFETY,
    TauFiducialDensity,
    discrete_fiducial_stepinv,
    largest_truncation_v,
    normal_mean_conditional,
    variance_conditional,
)
from .gibbs import ConditionalSpec, Metropolis

__all__ = [
    "ScenarioSpec",
    "BivariateSums",
    "ConfidenceDensityTau",
    "student_fiducial",
    "student_bayes_sigma",
    "student_bayes_mu",
    "student_bispatial",
    "trinomial",
    "regression",
    "regression_fiducial",
    "bivariate",
    "tau_mle",
    "fisher_information_tau",
    "confidence_density_tau",
    "generate_synthetic",
    "parse_pdo",
    "format_pdo",
    "SCENARIOS",
    "build_scenario",
    "overdispersed_initial",
    "to_config",
    "from_config",
]

# shape of the beta density placed on every bispatial interval
H_SHAPE = 4.0
# Gauss-Legendre panels for the interval mass inside the sampler
B_PANELS = 4


@dataclass(eq=False)
class ScenarioSpec:
    """A ready-to-run set of full conditionals.

    Attributes
    ----------
    name : str
        Key in :data:`SCENARIOS`.
    params : tuple of str
        Parameter names in output column order.
    conditionals : list of ConditionalSpec
    data : dict
        Summaries the conditionals read; passed to ``run_chain``.
    settings : dict
        Scalar constants the scenario was built from.
    dataset : dict of ndarray or None
        Raw data for the scenarios that need it.
    initial : dict
        Starting values.
    references : dict
        Named densities (``pdf``/``cdf``) to overlay on chain output.
    """

    name: str
    params: tuple[str, ...]
    conditionals: list[ConditionalSpec]
    data: dict[str, Any]
    settings: dict[str, Any]
    dataset: dict[str, np.ndarray] | None = None
    initial: dict[str, float] = field(default_factory=dict)
    references: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        names = [c.name for c in self.conditionals]
        if sorted(names) != sorted(self.params) or len(set(names)) != len(names):
            raise ValueError("every parameter needs exactly one conditional")

    def __eq__(self, other):
        if not isinstance(other, ScenarioSpec):
            return NotImplemented
        if (self.name, self.params, self.settings, self.initial) != (other.name, other.params, other.settings, other.initial):
            return False
        if (self.dataset is None) != (other.dataset is None):
            return False
        if self.dataset is None:
            return True
        return self.dataset.keys() == other.dataset.keys() and all(
            np.array_equal(self.dataset[k], other.dataset[k]) for k in self.dataset
        )

    def conditional(self, name: str) -> ConditionalSpec:
        return next(c for c in self.conditionals if c.name == name)


# ---------------------------------------------------------------------------
# PDO curve text form
# ---------------------------------------------------------------------------


def parse_pdo(text: str):
    """``"power:0.6"`` or ``"table:0:0,0.5:0.7,1:1"`` to a PDO curve."""
    kind, _, rest = text.strip().partition(":")
    if kind == "power":
        return PowerLaw(float(rest))
    if kind == "table":
        pts = tuple(tuple(float(v) for v in item.split(":")) for item in rest.split(","))
        return Table(pts)
    raise ValueError(f"unknown PDO curve {text!r}")


def format_pdo(curve) -> str:
    if isinstance(curve, str):
        return format_pdo(parse_pdo(curve))
    if isinstance(curve, PowerLaw):
        return f"power:{curve.exponent!r}"
    if isinstance(curve, Table):
        return "table:" + ",".join(f"{p!r}:{k!r}" for p, k in curve.points)
    raise TypeError(f"not a PDO curve: {curve!r}")


# ---------------------------------------------------------------------------
# shared pieces
# ---------------------------------------------------------------------------


def _b_or_neutral(f_s, lo: float, hi: float, f_at_lo: float, fprime_at_hi: float, curve):
    """b-density for one update, or ``f_s`` itself when no reweighting is possible.

    The neutral density is used when the P value underflows to zero or when
    the PDO curve asks for less than ``f_s`` already gives ``H_P``.
    """
    side, p = choose_orientation(f_at_lo, fprime_at_hi)
    if not p > 0:
        return f_s
    kappa = pdo_kappa(curve, p)
    spec = BispatialSpec(lo, hi, ScaledBeta(H_SHAPE, H_SHAPE, lo, hi), f_s, side, curve, B_PANELS)
    a, m_h = interval_moments(spec)
    if kappa <= a or kappa >= 1.0:
        return f_s
    nu = solve_nu(spec, kappa, (a, m_h))
    return BDensity(spec, kappa, nu, a, m_h)


def _sigma2_hat(d: dict, mu: float) -> float:
    """Mean squared deviation about ``mu`` from ``n``, ``xbar`` and ``s2``."""
    n = d["n"]
    return ((n - 1) * d["s2"] + n * (d["xbar"] - mu) ** 2) / n


def _student_data(n: int, xbar: float, s2: float) -> dict:
    if n < 2:
        raise ValueError("n must be >= 2")
    if not s2 > 0:
        raise ValueError("s2 must be > 0")
    return {"n": int(n), "xbar": float(xbar), "s2": float(s2)}


def _mu_fiducial(state, d):
    return normal_mean_conditional(d["xbar"], state["sigma2"], d["n"])


def _sigma2_fiducial(state, d):
    return variance_conditional(_sigma2_hat(d, state["mu"]), d["n"])


def _sigma2_bayes(state, d):
    return bayes.variance_posterior(d["alpha0"], d["beta0"], d["n"], _sigma2_hat(d, state["mu"]))


# ---------------------------------------------------------------------------
# normal mean and variance
# ---------------------------------------------------------------------------


def student_fiducial(n: int, xbar: float, s2: float) -> ScenarioSpec:
    """Fiducial mean and fiducial variance of a normal sample.

    References are the marginals ``NonStdT(n-1, xbar, s/sqrt(n))`` and
    ``InvGamma((n-1)/2, (n-1)s^2/2)`` of the joint the pair defines.
    """
    d = _student_data(n, xbar, s2)
    conds = [ConditionalSpec("mu", _mu_fiducial), ConditionalSpec("sigma2", _sigma2_fiducial)]
    refs = {
        "mu": NonStdT(n - 1, xbar, math.sqrt(s2 / n)),
        "sigma2": InvGamma(0.5 * (n - 1), 0.5 * (n - 1) * s2),
    }
    return ScenarioSpec(
        "student_fiducial", ("mu", "sigma2"), conds, d, dict(n=int(n), xbar=float(xbar), s2=float(s2)),
        initial={"mu": float(xbar), "sigma2": float(s2)}, references=refs,
    )


def student_bayes_sigma(n: int, xbar: float, s2: float, alpha0: float, beta0: float) -> ScenarioSpec:
    """Fiducial mean with an InvGamma(alpha0, beta0) prior on the variance."""
    d = _student_data(n, xbar, s2)
    if not (alpha0 > 0 and beta0 > 0):
        raise ValueError("alpha0 and beta0 must be > 0")
    d.update(alpha0=float(alpha0), beta0=float(beta0))
    conds = [ConditionalSpec("mu", _mu_fiducial), ConditionalSpec("sigma2", _sigma2_bayes)]
    df = 2.0 * alpha0 + n - 1
    refs = {
        "mu": NonStdT(df, xbar, math.sqrt((2.0 * beta0 + (n - 1) * s2) / (df * n))),
        "sigma2": InvGamma(alpha0 + 0.5 * (n - 1), beta0 + 0.5 * (n - 1) * s2),
        "sigma2_prior": InvGamma(alpha0, beta0),
    }
    settings = dict(n=int(n), xbar=float(xbar), s2=float(s2), alpha0=float(alpha0), beta0=float(beta0))
    return ScenarioSpec(
        "student_bayes_sigma", ("mu", "sigma2"), conds, d, settings,
        initial={"mu": float(xbar), "sigma2": float(s2)}, references=refs,
    )


def _tprior_log(mu, d):
    z = (np.asarray(mu) - d["mu0"]) / d["sigma0"]
    return -0.5 * (d["nu0"] + 1.0) * np.log1p(z * z / d["nu0"])


def _joint18_mu_marginal(d) -> bayes.GriddedLogDensity:
    n = d["n"]

    def log_kernel(mu):
        ss = (n - 1) * d["s2"] + n * (d["xbar"] - np.asarray(mu)) ** 2
        return _tprior_log(mu, d) - 0.5 * n * np.log(ss)

    return bayes.GriddedLogDensity(log_kernel, -math.inf, math.inf, d["xbar"], math.sqrt(d["s2"] / n))


def _joint18_sigma2_marginal(d) -> bayes.GriddedLogDensity:
    n = d["n"]
    sd_t = math.sqrt(d["s2"] / n)

    def log_kernel_one(s2: float) -> float:
        # integrate the joint over mu at fixed variance
        def f(mu):
            return math.exp(float(_tprior_log(mu, d)) - n * (d["xbar"] - mu) ** 2 / (2.0 * s2))

        mass = integrate.quad(f, -math.inf, math.inf, points=None, epsabs=0, epsrel=1e-11, limit=200)[0]
        if not mass > 0:
            lo, hi = min(d["mu0"], d["xbar"]) - 50 * sd_t, max(d["mu0"], d["xbar"]) + 50 * sd_t
            mass = integrate.quad(f, lo, hi, epsabs=0, epsrel=1e-11, limit=400)[0]
        return -(0.5 * n + 1.0) * math.log(s2) - 0.5 * (n - 1) * d["s2"] / s2 + math.log(mass)

    def log_kernel(s2):
        s2 = np.asarray(s2, dtype=float)
        flat = [log_kernel_one(float(v)) if v > 0 else -math.inf for v in np.ravel(s2)]
        return np.array(flat).reshape(s2.shape)

    shape, scale = 0.5 * (n - 1), 0.5 * (n - 1) * d["s2"]
    center = scale / (shape + 1.0)
    return bayes.GriddedLogDensity(log_kernel, 0.0, math.inf, center, center)


def student_bayes_mu(n: int, xbar: float, s2: float, nu0: float, mu0: float, sigma0: float) -> ScenarioSpec:
    """Scaled-t prior on the mean with a fiducial variance.

    References are the marginals of the implied joint, found by quadrature.
    """
    d = _student_data(n, xbar, s2)
    if not (nu0 > 0 and sigma0 > 0):
        raise ValueError("nu0 and sigma0 must be > 0")
    d.update(nu0=float(nu0), mu0=float(mu0), sigma0=float(sigma0))

    def mu_post(state, dd):
        return bayes.mu_posterior_tprior(dd["nu0"], dd["mu0"], dd["sigma0"], dd["xbar"], dd["n"], state["sigma2"])

    conds = [
        ConditionalSpec("mu", mu_post, Metropolis(math.sqrt(s2 / n) * 2.4)),
        ConditionalSpec("sigma2", _sigma2_fiducial),
    ]
    refs = {
        "mu": _joint18_mu_marginal(d),
        "sigma2": _joint18_sigma2_marginal(d),
        "mu_prior": NonStdT(nu0, mu0, sigma0),
    }
    settings = dict(n=int(n), xbar=float(xbar), s2=float(s2), nu0=float(nu0), mu0=float(mu0), sigma0=float(sigma0))
    return ScenarioSpec(
        "student_bayes_mu", ("mu", "sigma2"), conds, d, settings,
        initial={"mu": float(xbar), "sigma2": float(s2)}, references=refs,
    )


def student_bispatial(
    n: int, xbar: float, s2: float, mu1: float, eps: float, pdo, alpha0: float, beta0: float
) -> ScenarioSpec:
    """Bispatial mean around ``[mu1 - eps, mu1 + eps]`` with an InvGamma-prior variance.

    The test statistic is the sample mean and the neutral density is the
    fiducial ``N(xbar, sigma2 / n)``.
    """
    if not eps > 0:
        raise ValueError("eps must be > 0")
    d = _student_data(n, xbar, s2)
    curve = parse_pdo(pdo) if isinstance(pdo, str) else pdo
    d.update(mu1=float(mu1), eps=float(eps), pdo=curve, alpha0=float(alpha0), beta0=float(beta0))

    def mu_b(state, dd):
        sd = math.sqrt(state["sigma2"] / dd["n"])
        lo, hi = dd["mu1"] - dd["eps"], dd["mu1"] + dd["eps"]
        f_s = Normal(dd["xbar"], state["sigma2"] / dd["n"])
        f_lo = one_sided_pvalue(dd["xbar"], lo, sd, Orientation.LOWER)
        fp_hi = one_sided_pvalue(dd["xbar"], hi, sd, Orientation.UPPER)
        return _b_or_neutral(f_s, lo, hi, f_lo, fp_hi, dd["pdo"])

    conds = [
        ConditionalSpec("mu", mu_b, Metropolis(math.sqrt(s2 / n) * 2.4)),
        ConditionalSpec("sigma2", _sigma2_bayes),
    ]
    refs = {
        "mu_h": ScaledBeta(H_SHAPE, H_SHAPE, mu1 - eps, mu1 + eps),
        "sigma2_prior": InvGamma(alpha0, beta0),
    }
    settings = dict(
        n=int(n), xbar=float(xbar), s2=float(s2), mu1=float(mu1), eps=float(eps),
        pdo=format_pdo(curve), alpha0=float(alpha0), beta0=float(beta0),
    )
    return ScenarioSpec(
        "student_bispatial", ("mu", "sigma2"), conds, d, settings,
        initial={"mu": float(xbar), "sigma2": float(s2)}, references=refs,
    )


# ---------------------------------------------------------------------------
# trinomial
# ---------------------------------------------------------------------------


def trinomial(counts, alpha: float, beta: float) -> ScenarioSpec:
    """Beta-shaped prior on ``pi1`` and a step-inversion fiducial ``pi2``.

    Parameters
    ----------
    counts : sequence of 3 int
        ``(x1, x2, x3)``.
    alpha, beta : float
        Shapes of the ``pi1`` prior.

    References are the prior ``Beta(alpha, beta)`` of ``pi1`` and the
    marginals of the Jeffreys posterior ``Dirichlet(x1 + 1/2, x2 + 1/2, x3 + 1/2)``.
    """
    if len(counts) != 3:
        raise ValueError("need three counts")
    counts = tuple(int(c) for c in counts)
    if min(counts) < 0:
        raise ValueError("counts must be non-negative")
    if sum(counts) == 0:
        raise ValueError("counts must not all be zero")
    if counts[1] + counts[2] == 0:
        raise ValueError("step inversion for pi2 needs x2 + x3 > 0 (zero trials)")
    d = {"counts": counts, "alpha": float(alpha), "beta": float(beta)}

    def pi1_post(state, dd):
        return bayes.trinomial_pi1_posterior(dd["alpha"], dd["beta"], dd["counts"], state["pi2"])

    def pi2_fid(state, dd):
        c = dd["counts"]
        return discrete_fiducial_stepinv(c[1], c[1] + c[2], state["pi1"])

    conds = [ConditionalSpec("pi1", pi1_post, Metropolis(0.1)), ConditionalSpec("pi2", pi2_fid)]
    m = sum(counts) + 1.5
    refs = {
        "pi1_prior": ScaledBeta(alpha, beta, 0.0, 1.0),
        "pi1_jeffreys": ScaledBeta(counts[0] + 0.5, m - counts[0] - 0.5, 0.0, 1.0),
        "pi2_jeffreys": ScaledBeta(counts[1] + 0.5, m - counts[1] - 0.5, 0.0, 1.0),
    }
    n = sum(counts)
    init = {"pi1": (counts[0] + 0.5) / (n + 1.5), "pi2": (counts[1] + 0.5) / (n + 1.5)}
    settings = dict(x1=counts[0], x2=counts[1], x3=counts[2], alpha=float(alpha), beta=float(beta))
    return ScenarioSpec("trinomial", ("pi1", "pi2"), conds, d, settings, initial=init, references=refs)


# ---------------------------------------------------------------------------
# linear regression
# ---------------------------------------------------------------------------

REGRESSION_PARAMS = ("beta0", "beta1", "beta2", "beta3", "sigma2")


def _regression_dataset(dataset: dict) -> dict[str, np.ndarray]:
    missing = {"x1", "x2", "x3", "y"} - set(dataset)
    if missing:
        raise ValueError(f"regression dataset lacks {sorted(missing)}")
    return {k: np.asarray(dataset[k], dtype=float) for k in ("x1", "x2", "x3", "y")}


def _regression_data(dataset: dict) -> dict:
    y = np.asarray(dataset["y"], dtype=float)
    cols = [np.asarray(dataset[k], dtype=float) for k in ("x1", "x2", "x3")]
    n = y.size
    if any(c.size != n for c in cols):
        raise ValueError("covariates and response must have equal length")
    design = np.column_stack([np.ones(n), *cols])
    gram = design.T @ design
    if np.any(np.diag(gram)[1:] <= 0):
        raise ValueError("degenerate design: a covariate has zero sum of squares")
    xty = design.T @ y
    return {"n": n, "gram": gram, "xty": xty, "yty": float(y @ y), "design": design, "y": y}


def _coef(state) -> np.ndarray:
    return np.array([state["beta0"], state["beta1"], state["beta2"], state["beta3"]])


def _partial_ls(state, d, j: int) -> float:
    """Least squares estimate of coefficient ``j`` with the others held fixed."""
    b = _coef(state)
    g = d["gram"]
    return (d["xty"][j] - (g[j] @ b - g[j, j] * b[j])) / g[j, j]


def _rss(state, d) -> float:
    b = _coef(state)
    return max(d["yty"] - 2.0 * b @ d["xty"] + b @ d["gram"] @ b, 0.0)


def _coef_fiducial(j: int) -> Callable:
    def build(state, d):
        g = d["gram"][j, j]
        return Normal(_partial_ls(state, d, j), state["sigma2"] / g)

    return build


def _reg_sigma2(state, d):
    return InvGamma(0.5 * d["n"], 0.5 * _rss(state, d))


def _regression_references(d: dict) -> dict:
    n = d["n"]
    gram_inv = np.linalg.inv(d["gram"])
    ols = gram_inv @ d["xty"]
    rss_min = d["yty"] - ols @ d["xty"]
    df = n - 4
    refs = {
        f"beta{j}_fiducial": NonStdT(df, float(ols[j]), math.sqrt(rss_min / df * gram_inv[j, j])) for j in range(4)
    }
    refs["sigma2_fiducial"] = InvGamma(0.5 * df, 0.5 * rss_min)
    return refs


def _regression_initial(d: dict) -> dict:
    ols = np.linalg.solve(d["gram"], d["xty"])
    rss = d["yty"] - ols @ d["xty"]
    init = {f"beta{j}": float(ols[j]) for j in range(4)}
    init["sigma2"] = float(rss / (d["n"] - 4))
    return init


def regression(dataset: dict, mu0: float, sigma0: float, delta: float, pdo) -> ScenarioSpec:
    """Four-coefficient normal linear regression with mixed pre-data knowledge.

    ``beta0``, ``beta2`` and ``sigma2`` get fiducial conditionals, ``beta1``
    a normal-prior posterior and ``beta3`` a bispatial density around
    ``[-delta, delta]``.  References are the marginals of the all-fiducial
    system (see :func:`regression_fiducial`) and the ``beta1`` prior.

    ``dataset`` maps ``x1``, ``x2``, ``x3`` and ``y`` to equal-length arrays.
    """
    if not delta > 0:
        raise ValueError("delta must be > 0")
    dataset = _regression_dataset(dataset)
    d = _regression_data(dataset)
    curve = parse_pdo(pdo) if isinstance(pdo, str) else pdo
    d.update(mu0=float(mu0), sigma0=float(sigma0), delta=float(delta), pdo=curve)

    def beta1_post(state, dd):
        return bayes.regression_beta1_posterior(
            dd["mu0"], dd["sigma0"] ** 2, state["sigma2"], dd["gram"][1, 1], _partial_ls(state, dd, 1)
        )

    def beta3_b(state, dd):
        g = dd["gram"][3, 3]
        est = _partial_ls(state, dd, 3)
        sd = math.sqrt(state["sigma2"] / g)
        f_s = Normal(est, state["sigma2"] / g)
        f_lo = one_sided_pvalue(est, -dd["delta"], sd, Orientation.LOWER)
        fp_hi = one_sided_pvalue(est, dd["delta"], sd, Orientation.UPPER)
        return _b_or_neutral(f_s, -dd["delta"], dd["delta"], f_lo, fp_hi, dd["pdo"])

    init = _regression_initial(d)
    conds = [
        ConditionalSpec("beta0", _coef_fiducial(0)),
        ConditionalSpec("beta1", beta1_post),
        ConditionalSpec("beta2", _coef_fiducial(2)),
        ConditionalSpec("beta3", beta3_b, Metropolis(2.4 * math.sqrt(init["sigma2"] / d["gram"][3, 3]))),
        ConditionalSpec("sigma2", _reg_sigma2),
    ]
    refs = _regression_references(d)
    refs["beta1_prior"] = Normal(mu0, sigma0**2)
    refs["beta3_h"] = ScaledBeta(H_SHAPE, H_SHAPE, -delta, delta)
    settings = dict(mu0=float(mu0), sigma0=float(sigma0), delta=float(delta), pdo=format_pdo(curve))
    return ScenarioSpec("regression", REGRESSION_PARAMS, conds, d, settings, dataset, init, refs)


def regression_fiducial(dataset: dict) -> ScenarioSpec:
    """All-fiducial regression: every coefficient ``N(partial LS, sigma2 / sum x_j^2)``.

    These conditionals are compatible; their joint is proportional to
    ``sigma2**(-n/2 - 1) * exp(-RSS(beta) / (2 sigma2))``, whose marginals
    are the references.
    """
    dataset = _regression_dataset(dataset)
    d = _regression_data(dataset)
    conds = [ConditionalSpec(f"beta{j}", _coef_fiducial(j)) for j in range(4)]
    conds.append(ConditionalSpec("sigma2", _reg_sigma2))
    return ScenarioSpec(
        "regression_fiducial", REGRESSION_PARAMS, conds, d, {}, dataset, _regression_initial(d), _regression_references(d)
    )


# ---------------------------------------------------------------------------
# bivariate normal
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BivariateSums:
    """Sufficient summaries of paired data about the sample means."""

    n: int
    xbar: float
    ybar: float
    sxx: float
    syy: float
    sxy: float

    @classmethod
    def from_data(cls, x, y) -> "BivariateSums":
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        dx, dy = x - x.mean(), y - y.mean()
        return cls(x.size, float(x.mean()), float(y.mean()), float(dx @ dx), float(dy @ dy), float(dx @ dy))

    def about(self, mu_x: float, mu_y: float) -> tuple[float, float, float]:
        """``(sum x'^2, sum y'^2, sum x'y')`` for deviations about ``(mu_x, mu_y)``."""
        ex, ey = self.xbar - mu_x, self.ybar - mu_y
        return (self.sxx + self.n * ex * ex, self.syy + self.n * ey * ey, self.sxy + self.n * ex * ey)

    @property
    def r(self) -> float:
        return self.sxy / math.sqrt(self.sxx * self.syy)


def _tau_cubic(tau, n, a, b, s):
    return ((-n * tau + s) * tau + (n - a - b)) * tau + s


def _tau_loglik(tau, n, a, b, s):
    k = 1.0 - tau * tau
    return -0.5 * n * math.log(k) - (a + b - 2.0 * tau * s) / (2.0 * k)


def tau_mle(sums: BivariateSums, mu_x: float, mu_y: float, sigma_x: float, sigma_y: float) -> float:
    """Maximum likelihood correlation with means and standard deviations known.

    Solves ``-n t^3 + S t^2 + (n - A - B) t + S = 0`` with ``A``, ``B``, ``S``
    the standardized sums of squares and cross products.  Among roots in
    ``(-1, 1)`` the log-likelihood maximizer is returned, ties going to the
    smallest ``|t|``.

    Raises
    ------
    ValueError
        If no root lies in ``(-1, 1)``.
    """
    if not (sigma_x > 0 and sigma_y > 0):
        raise ValueError("standard deviations must be > 0")
    n = sums.n
    sxx, syy, sxy = sums.about(mu_x, mu_y)
    a, b, s = sxx / sigma_x**2, syy / sigma_y**2, sxy / (sigma_x * sigma_y)
    roots = np.roots([-n, s, n - a - b, s])
    scale = max(1.0, np.max(np.abs(roots)))
    cands = []
    for r in roots:
        if abs(r.imag) > 1e-7 * scale:
            continue
        t = float(r.real)
        for _ in range(3):
            d = (-3.0 * n * t + 2.0 * s) * t + (n - a - b)
            if d == 0:
                break
            t -= _tau_cubic(t, n, a, b, s) / d
        if -1.0 < t < 1.0:
            cands.append(t)
    if not cands:
        raise ValueError("no root of the likelihood equation lies in (-1, 1)")
    ll = [_tau_loglik(t, n, a, b, s) for t in cands]
    best = max(ll)
    tied = [t for t, v in zip(cands, ll) if v >= best - 1e-12 * max(1.0, abs(best))]
    return min(tied, key=abs)


def fisher_information_tau(tau: float, n: int) -> float:
    """``n (1 + tau^2) / (1 - tau^2)^2``."""
    if not abs(tau) < 1:
        raise ValueError("|tau| must be < 1")
    return n * (1.0 + tau * tau) / (1.0 - tau * tau) ** 2


@dataclass(frozen=True)
class ConfidenceDensityTau(Distribution):
    """Density of ``tau`` implied by ``atanh(r) ~ N(atanh(tau), 1/(n-3))``."""

    r: float
    n: int

    def __post_init__(self):
        if self.n <= 3:
            raise ValueError("n must be > 3")
        if not abs(self.r) < 1:
            raise ValueError("|r| must be < 1")

    @property
    def support(self):
        return (-1.0, 1.0)

    def _z(self, tau):
        return (np.arctanh(tau) - math.atanh(self.r)) * math.sqrt(self.n - 3)

    def logpdf(self, tau):
        tau = np.asarray(tau, dtype=float)
        ok = np.abs(tau) < 1.0
        safe = np.where(ok, tau, 0.0)
        z = self._z(safe)
        out = -0.5 * z * z - 0.5 * math.log(2.0 * math.pi) + 0.5 * math.log(self.n - 3) - np.log1p(-safe * safe)
        return _scalar(np.where(ok, out, -np.inf))

    def cdf(self, tau):
        tau = np.clip(np.asarray(tau, dtype=float), -1.0, 1.0)
        with np.errstate(divide="ignore"):
            return _scalar(special.ndtr(self._z(tau)))

    def sample(self, rng, size=None):
        z = math.atanh(self.r) + rng.standard_normal(size) / math.sqrt(self.n - 3)
        return _scalar(np.tanh(z))

    def _guess(self, p):
        return self.r, 0.1


def confidence_density_tau(r: float, n: int) -> ConfidenceDensityTau:
    return ConfidenceDensityTau(float(r), int(n))


BIVARIATE_PARAMS = ("mu_x", "mu_y", "sigma2_x", "sigma2_y", "tau")


def _tau_b(state, d):
    sums, eps, curve = d["sums"], d["eps"], d["pdo"]
    sx, sy = math.sqrt(state["sigma2_x"]), math.sqrt(state["sigma2_y"])
    t_hat = tau_mle(sums, state["mu_x"], state["mu_y"], sx, sy)
    v = TRUNCATION_SAFETY * largest_truncation_v(sums.n, t_hat)
    f_s = TauFiducialDensity(t_hat, sums.n, v)
    sd = 1.0 / math.sqrt(fisher_information_tau(eps, sums.n))
    f_lo = one_sided_pvalue(t_hat, -eps, sd, Orientation.LOWER)
    fp_hi = one_sided_pvalue(t_hat, eps, sd, Orientation.UPPER)
    return _b_or_neutral(f_s, -eps, eps, f_lo, fp_hi, curve)


def bivariate(dataset: dict, alpha_x: float, beta_x: float, alpha_y: float, beta_y: float, eps: float, pdo) -> ScenarioSpec:
    """Bivariate normal with fiducial means, InvGamma-prior variances and a bispatial correlation.

    ``xbar`` and ``ybar`` are sample means.  References are the single-axis
    fiducial marginals of each mean and variance, the variance priors and
    the Fisher-z confidence density of the correlation.  ``dataset`` maps
    ``x`` and ``y`` to equal-length arrays.
    """
    if not eps > 0:
        raise ValueError("eps must be > 0")
    x = np.asarray(dataset["x"], dtype=float)
    y = np.asarray(dataset["y"], dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d arrays of equal length")
    sums = BivariateSums.from_data(x, y)
    if sums.n < 5:
        raise ValueError("need at least 5 pairs")
    curve = parse_pdo(pdo) if isinstance(pdo, str) else pdo
    d = dict(sums=sums, alpha_x=float(alpha_x), beta_x=float(beta_x), alpha_y=float(alpha_y), beta_y=float(beta_y), eps=float(eps), pdo=curve)

    def mu_x(state, dd):
        s = dd["sums"]
        t = state["tau"]
        ratio = math.sqrt(state["sigma2_x"] / state["sigma2_y"])
        return Normal(s.xbar + t * ratio * (state["mu_y"] - s.ybar), state["sigma2_x"] * (1.0 - t * t) / s.n)

    def mu_y(state, dd):
        s = dd["sums"]
        t = state["tau"]
        ratio = math.sqrt(state["sigma2_y"] / state["sigma2_x"])
        return Normal(s.ybar + t * ratio * (state["mu_x"] - s.xbar), state["sigma2_y"] * (1.0 - t * t) / s.n)

    def var_x(state, dd):
        sxx, _, sxy = dd["sums"].about(state["mu_x"], state["mu_y"])
        return bayes.bivariate_variance_posterior(
            dd["alpha_x"], dd["beta_x"], dd["sums"].n, sxx, sxy, math.sqrt(state["sigma2_y"]), state["tau"]
        )

    def var_y(state, dd):
        _, syy, sxy = dd["sums"].about(state["mu_x"], state["mu_y"])
        return bayes.bivariate_variance_posterior(
            dd["alpha_y"], dd["beta_y"], dd["sums"].n, syy, sxy, math.sqrt(state["sigma2_x"]), state["tau"]
        )

    n = sums.n
    vx, vy = sums.sxx / (n - 1), sums.syy / (n - 1)
    conds = [
        ConditionalSpec("mu_x", mu_x),
        ConditionalSpec("mu_y", mu_y),
        ConditionalSpec("sigma2_x", var_x, Metropolis(2.4 * vx * math.sqrt(2.0 / n))),
        ConditionalSpec("sigma2_y", var_y, Metropolis(2.4 * vy * math.sqrt(2.0 / n))),
        ConditionalSpec("tau", _tau_b, Metropolis(2.4 / math.sqrt(n))),
    ]
    refs = {
        "mu_x": NonStdT(n - 1, sums.xbar, math.sqrt(vx / n)),
        "mu_y": NonStdT(n - 1, sums.ybar, math.sqrt(vy / n)),
        "sigma2_x": InvGamma(0.5 * (n - 1), 0.5 * sums.sxx),
        "sigma2_y": InvGamma(0.5 * (n - 1), 0.5 * sums.syy),
        "sigma2_x_prior": InvGamma(alpha_x, beta_x),
        "sigma2_y_prior": InvGamma(alpha_y, beta_y),
        "tau_confidence": confidence_density_tau(sums.r, n),
    }
    init = {"mu_x": sums.xbar, "mu_y": sums.ybar, "sigma2_x": vx, "sigma2_y": vy, "tau": float(sums.r)}
    settings = dict(
        alpha_x=float(alpha_x), beta_x=float(beta_x), alpha_y=float(alpha_y), beta_y=float(beta_y),
        eps=float(eps), pdo=format_pdo(curve),
    )
    dataset = {"x": x, "y": y}
    return ScenarioSpec("bivariate", BIVARIATE_PARAMS, conds, d, settings, dataset, init, refs)


# ---------------------------------------------------------------------------
# synthetic data
# ---------------------------------------------------------------------------

# the 27 covariate triples, in itertools.product([-1, 0, 1], repeat=3) order
COVARIATE_GRID = np.array([(a, b, c) for a in (-1, 0, 1) for b in (-1, 0, 1) for c in (-1, 0, 1)], dtype=float)

# rows of COVARIATE_GRID left out by the only three 18-row designs with
# sums x1 = -1, x2 = 2, x3 = 1, x1x2 = 3, x1x3 = 4, x2x3 = -3
# (exhaustive search over all 9-row exclusions, repeated in the tests)
CONSTRAINED_DESIGNS = (
    (4, 5, 8, 9, 13, 18, 19, 21, 22),
    (5, 8, 9, 10, 13, 16, 18, 19, 21),
    (5, 8, 9, 12, 13, 14, 18, 19, 21),
)


def generate_synthetic(kind: str, seed: int, **params) -> dict[str, np.ndarray]:
    """Reproducible synthetic dataset.

    Parameters
    ----------
    kind : {"regression", "bivariate"}
    seed : int
    **params
        ``regression``: ``beta`` (4 values, default (0, 5, -2, 1)),
        ``sigma`` (1.5), ``constrained`` (True; use one of the designs with
        the target covariate sums, otherwise any 18 distinct triples).
        ``bivariate``: ``n`` (100), ``mu_x``, ``mu_y`` (0), ``sigma_x``,
        ``sigma_y`` (1) and ``tau`` (0.3).

    Returns
    -------
    dict of ndarray
        ``x1, x2, x3, y`` or ``x, y``.
    """
    rng = make_rng(seed)
    if kind == "regression":
        beta = np.asarray(params.get("beta", (0.0, 5.0, -2.0, 1.0)), dtype=float)
        sigma = float(params.get("sigma", 1.5))
        if params.get("constrained", True):
            drop = CONSTRAINED_DESIGNS[int(rng.integers(len(CONSTRAINED_DESIGNS)))]
            rows = np.delete(np.arange(27), drop)
            rows = rng.permutation(rows)
        else:
            rows = rng.choice(27, size=18, replace=False)
        x = COVARIATE_GRID[rows]
        y = beta[0] + x @ beta[1:] + sigma * rng.standard_normal(x.shape[0])
        return {"x1": x[:, 0].copy(), "x2": x[:, 1].copy(), "x3": x[:, 2].copy(), "y": y}
    if kind == "bivariate":
        n = int(params.get("n", 100))
        tau = float(params.get("tau", 0.3))
        if not abs(tau) < 1:
            raise ValueError("|tau| must be < 1")
        z1 = rng.standard_normal(n)
        z2 = rng.standard_normal(n)
        x = params.get("mu_x", 0.0) + params.get("sigma_x", 1.0) * z1
        y = params.get("mu_y", 0.0) + params.get("sigma_y", 1.0) * (tau * z1 + math.sqrt(1.0 - tau * tau) * z2)
        return {"x": x, "y": y}
    raise ValueError(f"unknown dataset kind {kind!r}")


# ---------------------------------------------------------------------------
# registry and configuration text
# ---------------------------------------------------------------------------


def _default_regression_data(seed: int = 2) -> dict:
    return generate_synthetic("regression", seed)


def _default_bivariate_data(seed: int = 5) -> dict:
    return generate_synthetic("bivariate", seed)


def _trinomial_flat(x1: int, x2: int, x3: int, alpha: float, beta: float) -> ScenarioSpec:
    return trinomial((x1, x2, x3), alpha, beta)


# scenario name -> (builder, default settings, default dataset factory or None);
# builders taking data receive it as the ``dataset`` keyword
SCENARIOS: dict[str, tuple[Callable, dict, Callable | None]] = {
    "student_fiducial": (student_fiducial, dict(n=9, xbar=2.7, s2=9.0), None),
    "student_bayes_sigma": (student_bayes_sigma, dict(n=9, xbar=2.7, s2=9.0, alpha0=4.0, beta0=64.0), None),
    "student_bayes_mu": (student_bayes_mu, dict(n=9, xbar=2.7, s2=9.0, nu0=17.0, mu0=-0.3, sigma0=4.0 / 3.0), None),
    "student_bispatial": (
        student_bispatial,
        dict(n=9, xbar=2.7, s2=9.0, mu1=0.0, eps=0.2, pdo="power:0.6", alpha0=4.0, beta0=64.0),
        None,
    ),
    "trinomial": (_trinomial_flat, dict(x1=4, x2=2, x3=6, alpha=1.5, beta=11.5), None),
    "regression": (regression, dict(mu0=4.4, sigma0=0.6, delta=0.1, pdo="power:0.6"), _default_regression_data),
    "regression_fiducial": (regression_fiducial, {}, _default_regression_data),
    "bivariate": (
        bivariate,
        dict(alpha_x=49.5, beta_x=48.0, alpha_y=49.5, beta_y=34.0, eps=0.02, pdo="power:0.6"),
        _default_bivariate_data,
    ),
}


def build_scenario(name: str, settings: dict | None = None, dataset: dict | None = None) -> ScenarioSpec:
    """Build a registered scenario, filling unspecified settings with defaults.

    Raises
    ------
    KeyError
        If ``name`` is not registered.
    """
    if name not in SCENARIOS:
        raise KeyError(f"unknown scenario {name!r}")
    builder, defaults, make_data = SCENARIOS[name]
    kwargs = dict(defaults)
    unknown = set(settings or {}) - set(defaults)
    if unknown:
        raise ValueError(f"unknown settings for {name}: {sorted(unknown)}")
    kwargs.update(settings or {})
    if make_data is not None:
        kwargs["dataset"] = dataset if dataset is not None else make_data()
    return builder(**kwargs)


def overdispersed_initial(spec: ScenarioSpec, m: int) -> list[dict[str, float]]:
    """``m`` starting points spread over the reference marginals.

    Chain ``i`` starts each parameter at reference quantile ``u`` taken from
    an evenly spaced grid on ``[0.005, 0.995]``, rotated per parameter so the
    starts are not all jointly extreme.  Parameters without a reference that
    has a quantile function keep ``spec.initial``.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    us = np.linspace(0.005, 0.995, m) if m > 1 else np.array([0.5])
    starts = [dict(spec.initial) for _ in range(m)]
    for k, name in enumerate(spec.params):
        ref = spec.references.get(name)
        if ref is None or not hasattr(ref, "quantile"):
            continue
        for i in range(m):
            starts[i][name] = float(ref.quantile(float(us[(i + k) % m])))
    return starts


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _parse(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def to_config(spec: ScenarioSpec, extra: dict[str, dict] | None = None) -> str:
    """Serialize a scenario to ``key = value`` text with sections.

    Sections: ``[scenario]`` (name), ``[settings]``, ``[initial]`` and
    ``[dataset]`` (comma-separated columns), plus any ``extra`` sections.
    """
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp["scenario"] = {"name": spec.name}
    cp["settings"] = {k: _fmt(v) for k, v in spec.settings.items()}
    cp["initial"] = {k: _fmt(v) for k, v in spec.initial.items()}
    if spec.dataset is not None:
        cp["dataset"] = {k: ", ".join(repr(float(v)) for v in arr) for k, arr in spec.dataset.items()}
    for name, section in (extra or {}).items():
        cp[name] = {k: _fmt(v) for k, v in section.items()}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def read_config(text: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp.read_string(text)
    return cp


def from_config(text: str) -> ScenarioSpec:
    """Rebuild a scenario from :func:`to_config` text."""
    cp = read_config(text)
    if not cp.has_section("scenario") or "name" not in cp["scenario"]:
        raise ValueError("configuration needs a [scenario] section with a name")
    name = cp["scenario"]["name"]
    settings = {k: _parse(v) for k, v in cp["settings"].items()} if cp.has_section("settings") else {}
    dataset = None
    if cp.has_section("dataset"):
        dataset = {k: np.array([float(t) for t in v.split(",")]) for k, v in cp["dataset"].items()}
    spec = build_scenario(name, settings, dataset)
    if cp.has_section("initial"):
        spec.initial.update({k: float(v) for k, v in cp["initial"].items()})
    return spec
