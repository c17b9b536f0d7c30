"""Convergence and compatibility diagnostics for Gibbs output.

When the full conditionals are incompatible, the limiting density of the
sampler may depend on the scan order.  :func:`scan_order_sensitivity` runs
one chain per fixed order and compares them marginal by marginal (two-sample
Kolmogorov-Smirnov) and pair by pair (Fisher-z test on sample correlations),
then grades the variation.

Verdict policy (engine constants, not derived from theory):

==================  ==========================================================
``undetectable``    every KS p value > 0.01 and every ``|z|`` < 2.58
``negligible``      every KS statistic < 0.01
``small``           every KS statistic < 0.05
``substantial``     anything else
==================  ==========================================================

KS p values and z statistics inside the sensitivity analysis use effective
sample sizes (rows divided by the estimated integrated autocorrelation
time), since chain rows are not independent.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import special, stats

from .gibbs import N_BATCHES, Chain, ConditionalSpec, FixedScan, GibbsConfig, run_chain

__all__ = [
    "UNDETECTABLE",
    "NEGLIGIBLE",
    "SMALL",
    "SUBSTANTIAL",
    "KS_P_MIN",
    "Z_MAX",
    "D_NEGLIGIBLE",
    "D_SMALL",
    "KsComparison",
    "CorrelationComparison",
    "DiagnosticsReport",
    "gelman_rubin",
    "ks_two_sample",
    "ks_one_sample",
    "fisher_z_test",
    "autocorrelation_time",
    "scan_order_sensitivity",
    "verdict",
]

UNDETECTABLE = "undetectable"
NEGLIGIBLE = "negligible"
SMALL = "small"
SUBSTANTIAL = "substantial"
VERDICT_RANK = {UNDETECTABLE: 0, NEGLIGIBLE: 1, SMALL: 2, SUBSTANTIAL: 3}

KS_P_MIN = 0.01
Z_MAX = 2.58
D_NEGLIGIBLE = 0.01
D_SMALL = 0.05

# minimum acceptance rate counted as "bounded away from zero"
MIN_ACCEPTANCE = 0.01
MIN_RHAT_ROWS = 100


def gelman_rubin(chains: Sequence[Chain], parameter: str, burn_in: int | None = None) -> float:
    """Potential scale reduction factor ``sqrt((W (n-1)/n + B/n) / W)``.

    Parameters
    ----------
    chains : sequence of Chain
        At least two, with equal retained lengths of at least 100.
    parameter : str
    burn_in : int, optional
        Rows to drop from every chain; defaults to each chain's own burn-in.

    Raises
    ------
    ValueError
        On fewer than two chains, unequal or short retained lengths, or zero
        within-chain variance.
    """
    if len(chains) < 2:
        raise ValueError("need at least 2 chains")
    cols = [c.retained(parameter, burn_in) for c in chains]
    return _rhat(cols)


def _rhat(cols: Sequence[np.ndarray]) -> float:
    n = cols[0].size
    if any(c.size != n for c in cols):
        raise ValueError("chains must have equal retained lengths")
    if n < MIN_RHAT_ROWS:
        raise ValueError(f"need at least {MIN_RHAT_ROWS} retained rows per chain")
    x = np.vstack(cols)
    w = float(np.mean(x.var(axis=1, ddof=1)))
    if not w > 0:
        raise ValueError("zero within-chain variance")
    b = n * float(x.mean(axis=1).var(ddof=1))
    return math.sqrt((w * (n - 1) / n + b / n) / w)


def ks_two_sample(a, b) -> tuple[float, float]:
    """Two-sample KS statistic and asymptotic p value."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("samples must be non-empty")
    res = stats.ks_2samp(a, b, method="asymp")
    return float(res.statistic), float(res.pvalue)


def ks_one_sample(a, reference) -> tuple[float, float]:
    """One-sample KS statistic and p value against ``reference.cdf``."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        raise ValueError("samples must be non-empty")
    res = stats.kstest(a, lambda t: np.asarray(reference.cdf(t), dtype=float))
    return float(res.statistic), float(res.pvalue)


def fisher_z_test(r1: float, n1: float, r2: float, n2: float) -> float:
    """z statistic for equality of two correlations from independent samples.

    ``(atanh r1 - atanh r2) / sqrt(1/(n1-3) + 1/(n2-3))``; sample sizes may
    be effective (non-integer) sizes.
    """
    if n1 <= 3 or n2 <= 3:
        raise ValueError("sample sizes must exceed 3")
    clip = 1.0 - 1e-15
    z1 = math.atanh(max(-clip, min(clip, r1)))
    z2 = math.atanh(max(-clip, min(clip, r2)))
    return (z1 - z2) / math.sqrt(1.0 / (n1 - 3.0) + 1.0 / (n2 - 3.0))


def autocorrelation_time(x) -> float:
    """Integrated autocorrelation time from 32 batch means, at least 1."""
    x = np.asarray(x, dtype=float)
    size = x.size // N_BATCHES
    if size < 2:
        return 1.0
    var = x.var(ddof=1)
    if not var > 0:
        return 1.0
    means = x[: size * N_BATCHES].reshape(N_BATCHES, size).mean(axis=1)
    return max(1.0, size * float(means.var(ddof=1)) / var)


def _ks_pvalue(d: float, n1: float, n2: float) -> float:
    en = math.sqrt(n1 * n2 / (n1 + n2))
    return float(special.kolmogorov(d * en))


@dataclass(frozen=True)
class KsComparison:
    parameter: str
    orders: tuple[int, int]
    statistic: float
    pvalue: float


@dataclass(frozen=True)
class CorrelationComparison:
    pair: tuple[str, str]
    orders: tuple[int, int]
    r: tuple[float, float]
    z: float


@dataclass
class DiagnosticsReport:
    """Outcome of a scan-order sensitivity analysis.

    Attributes
    ----------
    orders : list of tuple of str
    rhat : dict
        Parameter to R-hat across the per-order chains.
    ks : list of KsComparison
    correlations : list of CorrelationComparison
    verdict : str
        One of ``undetectable``, ``negligible``, ``small``, ``substantial``.
    checklist : dict
        Empirical proxies for recurrence and irreducibility.
    """

    orders: list[tuple[str, ...]]
    rhat: dict[str, float]
    ks: list[KsComparison]
    correlations: list[CorrelationComparison]
    verdict: str
    checklist: dict[str, bool] = field(default_factory=dict)

    def to_text(self) -> str:
        lines = ["[verdict]", f"variation = {self.verdict}", "", "[orders]"]
        lines += [f"order{i} = {','.join(o)}" for i, o in enumerate(self.orders)]
        lines += ["", "[rhat]"]
        lines += [f"{k} = {v!r}" for k, v in self.rhat.items()]
        lines += ["", "[ks]"]
        lines += [
            f"{c.parameter}.order{c.orders[0]}_vs_order{c.orders[1]} = D {c.statistic!r} p {c.pvalue!r}" for c in self.ks
        ]
        lines += ["", "[correlation]"]
        lines += [
            f"{c.pair[0]}:{c.pair[1]}.order{c.orders[0]}_vs_order{c.orders[1]} = r {c.r[0]!r} {c.r[1]!r} z {c.z!r}"
            for c in self.correlations
        ]
        lines += ["", "[checklist]"]
        lines += [f"{k} = {v}" for k, v in self.checklist.items()]
        return "\n".join(lines) + "\n"


def verdict(ks: Sequence[KsComparison], correlations: Sequence[CorrelationComparison]) -> str:
    """Grade scan-order variation by the module's fixed thresholds."""
    if all(c.pvalue > KS_P_MIN for c in ks) and all(abs(c.z) < Z_MAX for c in correlations):
        return UNDETECTABLE
    worst = max((c.statistic for c in ks), default=0.0)
    if worst < D_NEGLIGIBLE:
        return NEGLIGIBLE
    if worst < D_SMALL:
        return SMALL
    return SUBSTANTIAL


def _checklist(chains: Sequence[Chain]) -> dict[str, bool]:
    moved = True
    accept = True
    for c in chains:
        rows = c.samples[c.config.burn_in :]
        # a coordinate that never changes after burn-in suggests an absorbing state
        moved &= bool(np.all(np.ptp(rows, axis=0) > 0))
        accept &= all(v > MIN_ACCEPTANCE for v in c.acceptance.values())
    return {"no_absorbing_state_observed": moved, "acceptance_bounded_away_from_zero": accept}


def scan_order_sensitivity(
    conditionals: Sequence[ConditionalSpec],
    data,
    orders: Sequence[FixedScan | Sequence[str]],
    config: GibbsConfig,
) -> DiagnosticsReport:
    """Run one chain per fixed scan order and compare their output.

    Parameters
    ----------
    conditionals : sequence of ConditionalSpec
    data
        Passed to every builder.
    orders : sequence of FixedScan or name sequences
        At least two.  Repeats are allowed and get distinct seeds.
    config : GibbsConfig
        Template; its scan is replaced by each order and chain ``i`` uses
        seed ``config.seed + i``.

    Returns
    -------
    DiagnosticsReport
    """
    scans = [o if isinstance(o, FixedScan) else FixedScan(tuple(o)) for o in orders]
    if len(scans) < 2:
        raise ValueError("need at least 2 scan orders")
    chains = [
        run_chain(conditionals, replace(config, scan=s, seed=(config.seed + i) % 2**64), data)
        for i, s in enumerate(scans)
    ]
    names = chains[0].names
    kept = [c.samples[c.config.burn_in :] for c in chains]
    iat = [[autocorrelation_time(rows[:, j]) for j in range(len(names))] for rows in kept]

    rhat = {}
    for j, nm in enumerate(names):
        try:
            rhat[nm] = _rhat([rows[:, j] for rows in kept])
        except ValueError:
            rhat[nm] = math.nan

    ks = []
    cors = []
    for a, b in itertools.combinations(range(len(chains)), 2):
        for j, nm in enumerate(names):
            d = float(stats.ks_2samp(kept[a][:, j], kept[b][:, j], method="asymp").statistic)
            ne_a = kept[a].shape[0] / iat[a][j]
            ne_b = kept[b].shape[0] / iat[b][j]
            ks.append(KsComparison(nm, (a, b), d, _ks_pvalue(d, ne_a, ne_b)))
        for j, k in itertools.combinations(range(len(names)), 2):
            ra = _corr(kept[a][:, j], kept[a][:, k])
            rb = _corr(kept[b][:, j], kept[b][:, k])
            ne_a = kept[a].shape[0] / max(iat[a][j], iat[a][k])
            ne_b = kept[b].shape[0] / max(iat[b][j], iat[b][k])
            z = fisher_z_test(ra, ne_a, rb, ne_b) if min(ne_a, ne_b) > 3 else 0.0
            cors.append(CorrelationComparison((names[j], names[k]), (a, b), (ra, rb), z))

    return DiagnosticsReport(
        [s.order for s in scans], rhat, ks, cors, verdict(ks, cors), _checklist(chains)
    )


def _corr(x: np.ndarray, y: np.ndarray) -> float:
    if x.std() == 0 or y.std() == 0:
        return 0.0
    return float(np.corrcoef(x, y)[0, 1])
