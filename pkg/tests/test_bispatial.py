import math

import numpy as np
import pytest
from scipy import integrate, special, stats

from ioi.bispatial import (
    BDensity,
    BispatialSpec,
    Orientation,
    PowerLaw,
    Table,
    build_b_density,
    choose_orientation,
    interval_moments,
    one_sided_pvalue,
    pdo_kappa,
    solve_nu,
)
from ioi.distributions import NonStdT, Normal, ScaledBeta, make_rng
from ioi.fiducial import TauFiducialDensity
from oracles import nu_by_bracketing, normal_tail


def _spec(side=Orientation.UPPER, f_s=None, lo=-0.2, hi=0.2, panels=0):
    return BispatialSpec(lo, hi, ScaledBeta(4, 4, lo, hi), f_s or Normal(0, 1), side, PowerLaw(0.6), panels)


def _random_spec(rng):
    lo = rng.uniform(-2, 2)
    hi = lo + rng.uniform(0.01, 1.5)
    if rng.random() < 0.5:
        f_s = Normal(rng.uniform(-2, 2), rng.uniform(0.05, 2) ** 2)
    else:
        f_s = NonStdT(rng.uniform(2, 20), rng.uniform(-2, 2), rng.uniform(0.1, 2))
    side = Orientation.LOWER if rng.random() < 0.5 else Orientation.UPPER
    # shapes >= 2 keep h Lipschitz at the ends, so a finite probe offset
    # measures the continuity gap rather than a sqrt-type approach
    h = ScaledBeta(rng.uniform(2, 6), rng.uniform(2, 6), lo, hi)
    return BispatialSpec(lo, hi, h, f_s, side)


def _total_mass(b: BDensity):
    s = b.spec
    pieces = [(-math.inf, s.lo), (s.lo, s.hi), (s.hi, math.inf)]
    return sum(integrate.quad(b.pdf, a, c, epsabs=1e-13, epsrel=1e-12, limit=200)[0] for a, c in pieces)


def _prob_hp_by_quadrature(b: BDensity):
    s = b.spec
    if s.orientation is Orientation.LOWER:
        pieces = [(s.lo, s.hi), (s.hi, math.inf)]
    else:
        pieces = [(-math.inf, s.lo), (s.lo, s.hi)]
    return sum(integrate.quad(b.pdf, a, c, epsabs=1e-13, epsrel=1e-12, limit=200)[0] for a, c in pieces)


# ---------------------------------------------------------------- orientation and P values


def test_choose_orientation_examples():
    assert choose_orientation(0.01, 0.99) == (Orientation.LOWER, 0.01)
    assert choose_orientation(0.99, 0.01) == (Orientation.UPPER, 0.01)
    assert choose_orientation(0.5, 0.5) == (Orientation.LOWER, 0.5)


def test_pdo_kappa_examples():
    assert pdo_kappa(PowerLaw(0.6), 1.0) == 1.0
    assert pdo_kappa(PowerLaw(0.6), 0.01) == pytest.approx(0.0630957, abs=1e-6)
    assert pdo_kappa(Table(((0, 0), (1, 1))), 0.25) == 0.25


def test_pdo_kappa_errors():
    with pytest.raises(ValueError):
        pdo_kappa(PowerLaw(0.6), 0.0)
    with pytest.raises(ValueError):
        pdo_kappa(PowerLaw(0.6), 1.5)


def test_pdo_curve_validation():
    with pytest.raises(ValueError):
        PowerLaw(0.0)
    with pytest.raises(ValueError):
        Table(((0, 0), (0.5, 0.7), (0.9, 0.5), (1, 1)))
    with pytest.raises(ValueError):
        Table(((0, 0), (0.5, 0.5)))


def test_pdo_curves_monotone():
    ps = np.linspace(1e-6, 1, 200)
    for curve in (PowerLaw(0.6), Table(((0, 0), (0.05, 0.2), (0.5, 0.7), (1, 1)))):
        ks = [pdo_kappa(curve, p) for p in ps]
        assert np.all(np.diff(ks) >= 0)
        assert ks[-1] == 1.0
        assert all(0 < k <= 1 for k in ks)


def test_one_sided_pvalue_examples():
    assert one_sided_pvalue(1.3, 1.3, 0.7, Orientation.LOWER) == 0.5
    assert one_sided_pvalue(2.7, 0.2, 1.0, Orientation.UPPER) == pytest.approx(normal_tail(2.5), rel=1e-12)
    assert one_sided_pvalue(2.7, 0.2, 1.0, Orientation.UPPER) == pytest.approx(0.0062097, abs=1e-6)
    n, eps = 100, 0.02
    sd = 1.0 / math.sqrt(n * (1 + eps**2) / (1 - eps**2) ** 2)
    assert one_sided_pvalue(0.0, eps, sd, Orientation.UPPER) == pytest.approx(0.5, abs=0.1)
    with pytest.raises(ValueError):
        one_sided_pvalue(0.0, 0.0, 0.0, Orientation.LOWER)


def _tau_hat_cdf(t, tau, n=100):
    # atanh(tau_hat) = atanh(tau) + Gamma / sqrt(n (1 + tau^2))
    return special.ndtr((math.atanh(t) - math.atanh(tau)) * math.sqrt(n * (1 + tau * tau)))


@pytest.mark.parametrize(
    "tail",
    [
        lambda theta: special.ndtr((2.7 - theta) / 1.0),  # normal sample mean
        lambda theta: special.ndtr((0.8 - theta) / 0.35),  # least squares slope
        lambda theta: _tau_hat_cdf(0.0, theta, n=20),  # correlation estimate
    ],
    ids=["mean", "slope", "tau"],
)
def test_statistic_cdf_strictly_decreasing_in_parameter(tail):
    thetas = np.linspace(-0.5, 0.5, 1000)
    vals = np.array([tail(t) for t in thetas])
    assert np.all(np.diff(vals) < 0)


# ---------------------------------------------------------------- nu and the b-density


def test_solve_nu_example():
    spec = _spec()
    a, m_h = interval_moments(spec)
    assert a == pytest.approx(special.ndtr(0.2), abs=1e-15)
    nu = solve_nu(spec, 0.9)
    assert nu == pytest.approx(8.0, abs=0.1)
    assert nu == pytest.approx(nu_by_bracketing(a, m_h, 0.9), rel=1e-8)


def test_solve_nu_near_one_large_and_finite():
    nu = solve_nu(_spec(), 0.99999)
    assert math.isfinite(nu) and nu > 1e4


def test_solve_nu_kappa_equal_a_gives_zero():
    spec = _spec()
    a, _ = interval_moments(spec)
    assert abs(solve_nu(spec, a)) < 1e-10


def test_solve_nu_errors():
    spec = _spec()
    a, _ = interval_moments(spec)
    with pytest.raises(ValueError, match="kappa below neutral"):
        solve_nu(spec, a - 0.01)
    with pytest.raises(ValueError):
        solve_nu(spec, 1.0)


def test_nu_strictly_increasing_in_kappa():
    spec = _spec()
    a, _ = interval_moments(spec)
    nus = [solve_nu(spec, k) for k in np.linspace(a + 1e-3, 0.999, 20)]
    assert np.all(np.diff(nus) > 0)


def test_b_density_at_neutral_kappa_is_f_s():
    spec = _spec(f_s=Normal(0.3, 0.5))
    a, _ = interval_moments(spec)
    b = build_b_density(spec, a)
    x = np.linspace(-2, 2, 500)
    assert np.max(np.abs(b.pdf(x) - spec.f_s.pdf(x))) < 1e-12


@pytest.mark.parametrize("seed", range(20))
def test_b_density_contract(seed):
    rng = np.random.default_rng(seed)
    spec = _random_spec(rng)
    a, m_h = interval_moments(spec)
    kappa = a + (1 - a) * rng.uniform(0.05, 0.95)
    b = build_b_density(spec, kappa)
    assert _total_mass(b) == pytest.approx(1.0, abs=1e-6)
    assert abs(b.prob_hp() - kappa) < 1e-6
    assert abs(_prob_hp_by_quadrature(b) - kappa) < 1e-6
    for end in (spec.lo, spec.hi):
        d = 1e-12 * (spec.hi - spec.lo)
        left, right = float(b.pdf(end - d)), float(b.pdf(end + d))
        assert abs(left - right) / float(b.pdf(end)) < 1e-6
    assert b.nu == pytest.approx(nu_by_bracketing(a, m_h, kappa), rel=1e-8)


def test_interval_probability_identity():
    # P(|theta| <= 0.2) = c (M0 + nu M_h) with M0 the f_S mass of the interval
    spec = _spec(f_s=Normal(2.7, 1.0))
    a, _ = interval_moments(spec)
    b = build_b_density(spec, 0.5 * (a + 1))
    m0 = float(spec.f_s.cdf(0.2) - spec.f_s.cdf(-0.2))
    direct = integrate.quad(b.pdf, -0.2, 0.2, epsabs=1e-14)[0]
    assert direct == pytest.approx(b.c * (m0 + b.nu * b.m_h), abs=1e-12)


def test_gauss_legendre_panels_match_adaptive():
    for f_s in (Normal(0.05, 0.01), TauFiducialDensity(0.1, 100, 36.0)):
        a0, m0 = interval_moments(_spec(f_s=f_s, lo=-0.02, hi=0.02))
        a1, m1 = interval_moments(_spec(f_s=f_s, lo=-0.02, hi=0.02, panels=4))
        assert a0 == a1
        assert m1 == pytest.approx(m0, rel=1e-12)


def test_b_density_cdf_and_sampler():
    spec = _spec(f_s=Normal(0.1, 0.04))
    a, _ = interval_moments(spec)
    b = build_b_density(spec, 0.5 * (a + 1))
    for x in (-0.5, -0.1, 0.05, 0.3):
        assert b.cdf(x) == pytest.approx(integrate.quad(b.pdf, -3, x, points=[-0.2, 0.2], epsabs=1e-13)[0], abs=1e-9)
    s = b.sample(make_rng(4), 5000)
    assert stats.kstest(s, b.cdf).pvalue > 0.001


def test_spec_validation():
    with pytest.raises(ValueError, match="positive width"):
        BispatialSpec(0.2, 0.2, ScaledBeta(4, 4, 0.2, 0.3), Normal(0, 1), Orientation.LOWER)
    with pytest.raises(ValueError):
        BispatialSpec(-0.2, 0.2, ScaledBeta(4, 4, -0.3, 0.2), Normal(0, 1), Orientation.LOWER)
    with pytest.raises(ValueError):
        BispatialSpec(-0.2, 0.2, ScaledBeta(1, 4, -0.2, 0.2), Normal(0, 1), Orientation.LOWER)
    with pytest.raises(TypeError):
        BispatialSpec(-0.2, 0.2, Normal(0, 1), Normal(0, 1), Orientation.LOWER)
