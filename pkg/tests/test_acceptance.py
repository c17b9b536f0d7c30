"""Acceptance criteria, one recorded line per criterion.

Each test records its outcome before asserting, so the terminal summary
shows a PASS or FAIL line for every criterion even when a check fails.
A criterion passes only if all of its parts pass.
"""

import configparser
import math
import time

import numpy as np
import pytest
from scipy import integrate
from scipy.integrate import simpson

from conftest import ACCEPTANCE_LINES
from ioi.bispatial import build_b_density, interval_moments, pdo_kappa, PowerLaw, solve_nu
from ioi.cli import main
from ioi.diagnostics import SMALL, VERDICT_RANK, gelman_rubin, ks_one_sample, scan_order_sensitivity
from ioi.distributions import NonStdT, InvGamma, Normal, make_rng
from ioi.fiducial import build_pi1, check_condition1, discrete_fiducial_stepinv, normal_mean_model, tau_model, variance_model
from ioi.gibbs import ConditionalSpec, FixedScan, GibbsConfig, UniformRandomScan, run_chain
from ioi.scenarios import (
    BivariateSums,
    _tau_cubic,
    build_scenario,
    fisher_information_tau,
    generate_synthetic,
    overdispersed_initial,
    regression_fiducial,
    student_bispatial,
    tau_mle,
)
from oracles import cosine_grid, nu_by_bracketing, normal_tail, stepinv_unnormalized
from test_bispatial import _prob_hp_by_quadrature, _random_spec, _total_mass


def record(k: int, ok: bool, detail: str) -> None:
    prev_ok, prev = ACCEPTANCE_LINES.get(k, (True, ""))
    ACCEPTANCE_LINES[k] = (prev_ok and bool(ok), f"{prev}; {detail}" if prev else detail)


# ---------------------------------------------------------------------------
# 1: compatible normal mean/variance system
# ---------------------------------------------------------------------------


def test_criterion_1_student_chain_matches_references():
    spec = build_scenario("student_bayes_sigma")
    start = time.perf_counter()
    chain = run_chain(spec.conditionals, GibbsConfig(200_000, 2_000, 1, UniformRandomScan(), spec.initial), spec.data)
    elapsed = time.perf_counter() - start
    d_mu = ks_one_sample(chain.retained("mu"), NonStdT(16, 2.7, math.sqrt(200 / 144)))[0]
    d_s2 = ks_one_sample(chain.retained("sigma2"), InvGamma(8, 100))[0]
    ok = d_mu < 0.015 and d_s2 < 0.015 and elapsed < 60
    record(1, ok, f"KS D mu={d_mu:.4f} sigma2={d_s2:.4f} (< 0.015), {elapsed:.1f} s (< 60)")
    assert ok


# ---------------------------------------------------------------------------
# 2: strong argument identity
# ---------------------------------------------------------------------------


def test_criterion_2_strong_identity():
    worst = 0.0
    for model, grid in (
        (normal_mean_model(2.7, 9.0, 9), np.linspace(-8, 8, 1000)),
        (variance_model(9.0, 9), np.linspace(0.5, 25, 1000)),
    ):
        pi1 = build_pi1(model)
        worst = max(worst, float(np.max(np.abs(pi1.pdf(grid) - model.pi0.pdf(grid)))))
    ok = worst < 1e-12
    record(2, ok, f"max|pi1 - pi0| = {worst:.2e} (< 1e-12)")
    assert ok


# ---------------------------------------------------------------------------
# 3: b-density contract
# ---------------------------------------------------------------------------


def test_criterion_3_b_density_contract():
    worst_mass = worst_hp = worst_gap = worst_nu = 0.0
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        spec = _random_spec(rng)
        a, m_h = interval_moments(spec)
        kappa = a + (1 - a) * rng.uniform(0.05, 0.95)
        b = build_b_density(spec, kappa)
        worst_mass = max(worst_mass, abs(_total_mass(b) - 1.0))
        worst_hp = max(worst_hp, abs(_prob_hp_by_quadrature(b) - kappa))
        d = 1e-12 * (spec.hi - spec.lo)
        for end in (spec.lo, spec.hi):
            gap = abs(float(b.pdf(end - d)) - float(b.pdf(end + d))) / float(b.pdf(end))
            worst_gap = max(worst_gap, gap)
        worst_nu = max(worst_nu, abs(b.nu / nu_by_bracketing(a, m_h, kappa) - 1.0))
    ok = worst_mass < 1e-6 and worst_hp < 1e-6 and worst_gap < 1e-6 and worst_nu < 1e-8
    record(
        3, ok,
        f"20 specs: |int b - 1| {worst_mass:.1e}, |P_b(H_P) - kappa| {worst_hp:.1e}, "
        f"continuity gap {worst_gap:.1e}, nu vs bracketing {worst_nu:.1e}",
    )
    assert ok


def test_criterion_3_kappa_equal_a():
    spec = _random_spec(np.random.default_rng(77))
    a, m_h = interval_moments(spec)
    nu = solve_nu(spec, a, (a, m_h))
    ok = abs(nu) < 1e-10
    record(3, ok, f"kappa = A gives |nu| = {abs(nu):.1e} (< 1e-10)")
    assert ok


# ---------------------------------------------------------------------------
# 4: P value spot value
# ---------------------------------------------------------------------------

KAPPA_STATED = 0.047313


def _spot_values():
    spec = student_bispatial(9, 2.7, 9.0, 0.0, 0.2, "power:0.6", 4.0, 64.0)
    dens = spec.conditional("mu").builder({"mu": 0.0, "sigma2": 9.0}, spec.data)
    p = dens.kappa ** (1 / 0.6)
    return p, dens.kappa


def test_criterion_4_pvalue():
    p, kappa = _spot_values()
    ok = abs(p - 0.0062097) < 1e-7 and abs(p - normal_tail(2.5)) < 1e-15
    record(4, ok, f"p = {p:.7f} (1 - Phi(2.5))")
    assert ok


def test_criterion_4_kappa_computed():
    p, kappa = _spot_values()
    # 0.0062097^0.6 evaluates to 0.0474068; the stated 0.047313 does not follow from its own formula
    assert kappa == pytest.approx(pdo_kappa(PowerLaw(0.6), normal_tail(2.5)), abs=1e-15)
    assert kappa == pytest.approx(0.0474068, abs=1e-6)


@pytest.mark.xfail(strict=True, reason="stated kappa 0.047313 is inconsistent with p**0.6 = 0.0474068")
def test_criterion_4_kappa_stated_value():
    _, kappa = _spot_values()
    ok = abs(kappa - KAPPA_STATED) < 1e-6
    record(4, ok, f"kappa = {kappa:.7f} vs stated {KAPPA_STATED} +/- 1e-6 (stated value is p^0.6 miscomputed)")
    assert ok


# ---------------------------------------------------------------------------
# 5: trinomial
# ---------------------------------------------------------------------------


def test_criterion_5_stepinv_oracle():
    x, m, pi1 = 2, 8, 0.3
    hi = 1 - pi1
    d = discrete_fiducial_stepinv(x, m, pi1)
    u = cosine_grid(1.0, 4001)
    raw = np.array([stepinv_unnormalized(v, x, m) for v in u])
    norm = simpson(raw, x=u)
    probe = np.linspace(0.01, 0.99, 49)
    expected = np.array([stepinv_unnormalized(v, x, m) for v in probe]) / norm / hi
    err = float(np.max(np.abs(d.pdf(probe * hi) - expected)))
    ok = err < 1e-10
    record(5, ok, f"step inversion vs oracle {err:.1e} (< 1e-10)")
    assert ok


@pytest.mark.slow
def test_criterion_5_scan_orders():
    spec = build_scenario("trinomial")
    cfg = GibbsConfig(1_000_000, 2_000, 5, UniformRandomScan(), spec.initial)
    report = scan_order_sensitivity(spec.conditionals, spec.data, [("pi1", "pi2"), ("pi2", "pi1")], cfg)
    worst = max(c.statistic for c in report.ks)
    ok = VERDICT_RANK[report.verdict] <= VERDICT_RANK[SMALL] and worst < 0.05
    record(5, ok, f"1e6 rows x 2 fixed orders: verdict {report.verdict}, max KS D {worst:.4f} (< 0.05)")
    assert ok


# ---------------------------------------------------------------------------
# 6: regression
# ---------------------------------------------------------------------------


def _reg_state(rng):
    return {"beta0": rng.normal(), "beta1": rng.normal(5, 1), "beta2": rng.normal(-2, 1), "beta3": rng.normal(1, 1), "sigma2": rng.uniform(0.5, 4)}


def test_criterion_6_beta1_vs_quadrature():
    spec = build_scenario("regression")
    design, y = spec.data["design"], spec.data["y"]
    prior = Normal(4.4, 0.36)
    rng = make_rng(6)
    worst = 0.0
    for _ in range(3):
        s = _reg_state(rng)
        cond = spec.conditional("beta1").builder(s, spec.data)

        def log_k(v):
            b = np.array([s["beta0"], v, s["beta2"], s["beta3"]])
            r = y - design @ b
            return -(r @ r) / (2 * s["sigma2"]) + prior.logpdf(v)

        ref0 = log_k(cond.mean)
        sd = math.sqrt(cond.variance)
        lo, hi = cond.mean - 12 * sd, cond.mean + 12 * sd
        z = integrate.quad(lambda v: math.exp(log_k(v) - ref0), lo, hi, epsabs=0, epsrel=1e-13)[0]
        grid = np.linspace(lo, hi, 1000)
        ref = np.exp([log_k(v) - ref0 for v in grid]) / z
        worst = max(worst, float(np.max(np.abs(cond.pdf(grid) - ref))))
    ok = worst < 1e-8
    record(6, ok, f"beta1 closed form vs quadrature {worst:.1e} (< 1e-8)")
    assert ok


def test_criterion_6_beta0_identity():
    spec = regression_fiducial(generate_synthetic("regression", 2))
    ds = spec.dataset
    n = ds["y"].size
    rng = make_rng(7)
    worst = 0.0
    for _ in range(5):
        s = _reg_state(rng)
        mean = ds["y"].mean() - sum(s[f"beta{j}"] * ds[f"x{j}"].mean() for j in (1, 2, 3))
        grid = mean + np.linspace(-6, 6, 1000) * math.sqrt(s["sigma2"] / n)
        ours = spec.conditional("beta0").builder(s, spec.data).pdf(grid)
        worst = max(worst, float(np.max(np.abs(ours - Normal(mean, s["sigma2"] / n).pdf(grid)))))
    ok = worst < 1e-10
    record(6, ok, f"beta0 conditional identity {worst:.1e} (< 1e-10)")
    assert ok


@pytest.mark.slow
def test_criterion_6_end_to_end(tmp_path):
    start = time.perf_counter()
    status = main([
        "run", "regression", "--transitions", "500000", "--burn-in", "5000",
        "--scan", "fixed:beta0,beta1,beta2,beta3,sigma2", "--out", str(tmp_path),
    ])
    elapsed = time.perf_counter() - start
    cp = configparser.ConfigParser()
    cp.read(tmp_path / "summary.txt")
    rates = {s: cp[s].getfloat("acceptance") for s in cp.sections() if "acceptance" in cp[s]}
    ok = status == 0 and elapsed < 300 and rates and all(0.15 <= r <= 0.7 for r in rates.values())
    record(6, ok, f"5e5 sweeps in {elapsed:.0f} s (< 300), acceptance {', '.join(f'{k} {v:.3f}' for k, v in rates.items())}")
    assert ok


# ---------------------------------------------------------------------------
# 7: bivariate
# ---------------------------------------------------------------------------


def test_criterion_7_closed_form_checks():
    cond1 = check_condition1(tau_model(0.5, 100, 36.0))
    info_ok = all(fisher_information_tau(0.0, n) == n for n in (5, 100, 12345))
    zero = tau_mle(BivariateSums(100, 0.0, 0.0, 100.0, 100.0, 0.0), 0.0, 0.0, 1.0, 1.0)
    rng = make_rng(8)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(5, 500))
        x = rng.normal(size=n)
        y = rng.uniform(-0.9, 0.9) * x + rng.normal(size=n)
        sums = BivariateSums.from_data(x, y)
        mx, my = rng.normal(scale=0.2, size=2)
        sx, sy = rng.uniform(0.5, 2.0, size=2)
        t = tau_mle(sums, mx, my, sx, sy)
        a, b, s = sums.about(mx, my)
        worst = max(worst, abs(_tau_cubic(t, n, a / sx**2, b / sy**2, s / (sx * sy))))
    ok = cond1 and info_ok and zero == 0.0 and worst < 1e-10
    record(7, ok, f"Condition 1 at (100, 0.5, 36) {cond1}; I(0, n) = n {info_ok}; S_xy = 0 gives {zero}; cubic residual {worst:.1e}")
    assert ok


@pytest.mark.slow
def test_criterion_7_b_density_mass_near_zero():
    spec = build_scenario("bivariate")
    chain = run_chain(spec.conditionals, GibbsConfig(100_000, 5_000, 1, UniformRandomScan(), spec.initial), spec.data)
    p_b = float(np.mean(np.abs(chain.retained("tau")) <= 0.02))
    conf = spec.references["tau_confidence"]
    p_conf = float(conf.cdf(0.02) - conf.cdf(-0.02))
    ok = p_b > p_conf
    record(7, ok, f"P_b(|tau| <= 0.02) = {p_b:.4f} > P_conf = {p_conf:.4f}")
    assert ok


# ---------------------------------------------------------------------------
# 8: determinism and scan semantics
# ---------------------------------------------------------------------------


def test_criterion_8_bit_identical_csv(tmp_path):
    args = ["run", "student_bispatial", "--transitions", "5000", "--burn-in", "1000", "--seed", "42"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    same = (tmp_path / "a" / "chain.csv").read_bytes() == (tmp_path / "b" / "chain.csv").read_bytes()
    record(8, same, f"identical config gives bit-identical chain CSV {same}")
    assert same



def test_criterion_8_random_scan_frequency():
    k = 3
    conds = [ConditionalSpec(n, lambda s, d: Normal(0.0, 1.0)) for n in ("a", "b", "c")]
    n = 300_000
    chain = run_chain(conds, GibbsConfig(n, 1, 3, UniformRandomScan(), {"a": 0, "b": 0, "c": 0}))
    freq = np.bincount(chain.updated, minlength=k) / n
    se = math.sqrt((1 / k) * (1 - 1 / k) / n)
    worst = float(np.max(np.abs(freq - 1 / k)) / se)
    ok = worst < 3
    record(8, ok, f"selection frequencies {', '.join(f'{f:.4f}' for f in freq)} within {worst:.2f} SE of 1/3")
    assert ok


def _batch_corr(a, b, batches=32):
    size = a.size // batches
    rs = [np.corrcoef(a[i * size : (i + 1) * size], b[i * size : (i + 1) * size])[0, 1] for i in range(batches)]
    return float(np.corrcoef(a, b)[0, 1]), float(np.std(rs, ddof=1) / math.sqrt(batches))


@pytest.mark.parametrize("scan", [FixedScan(("a", "b")), UniformRandomScan()], ids=["fixed", "random"])
def test_criterion_8_toy_correlation(scan):
    conds = [
        ConditionalSpec("a", lambda s, d: Normal(0.5 * s["b"], 0.75)),
        ConditionalSpec("b", lambda s, d: Normal(0.5 * s["a"], 0.75)),
    ]
    chain = run_chain(conds, GibbsConfig(200_000, 1_000, 4, scan, {"a": 0.0, "b": 0.0}))
    r, se = _batch_corr(chain.retained("a"), chain.retained("b"))
    ok = abs(r - 0.5) < 3 * se
    name = "fixed" if isinstance(scan, FixedScan) else "random"
    record(8, ok, f"{name} scan correlation {r:.4f} +/- {se:.4f} (0.5 within 3 SE)")
    assert ok


# ---------------------------------------------------------------------------
# 9: R-hat
# ---------------------------------------------------------------------------


def test_criterion_9_rhat_overdispersed():
    spec = build_scenario("student_bayes_sigma")
    starts = overdispersed_initial(spec, 4)
    chains = [
        run_chain(spec.conditionals, GibbsConfig(100_000, 2_000, 10 + i, UniformRandomScan(), starts[i]), spec.data)
        for i in range(4)
    ]
    rhat = {p: gelman_rubin(chains, p) for p in spec.params}
    ok = all(v < 1.01 for v in rhat.values())
    record(9, ok, "4 overdispersed chains: " + ", ".join(f"R-hat {p} {v:.4f}" for p, v in rhat.items()) + " (< 1.01)")
    assert ok


def test_criterion_9_rhat_divergent_fixture():
    # each chain samples its own fixed target; the targets are 5 sd apart
    def chain_for(center, seed):
        conds = [ConditionalSpec("x", lambda s, d: Normal(center, 1.0))]
        return run_chain(conds, GibbsConfig(10_000, 100, seed, UniformRandomScan(), {"x": center}))

    chains = [chain_for(0.0, 1), chain_for(5.0, 2)]
    rhat = gelman_rubin(chains, "x")
    ok = rhat > 2.0
    record(9, ok, f"divergent fixture R-hat {rhat:.2f} (>> 1.1)")
    assert ok
