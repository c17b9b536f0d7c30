"""Gibbs sampling over a set of full conditional densities.

The conditionals need not be compatible, i.e. there may be no joint density
that has them all as its full conditionals.  The sampler still defines a
Markov chain, and its limiting density is what gets summarized.

Two scan orders are supported.  Under a fixed scan one transition is a
complete sweep through the parameters in the given order and only the state
after the sweep is recorded.  Under a uniform random scan one transition
updates a single parameter chosen with probability ``1/k``.

A coordinate is updated either by an exact draw from its conditional or by
one random-walk Metropolis step targeting it.  Metropolis step sizes are
tuned during burn-in only and frozen afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .distributions import make_rng

__all__ = [
    "DirectSample",
    "Metropolis",
    "ConditionalSpec",
    "FixedScan",
    "UniformRandomScan",
    "GibbsConfig",
    "Chain",
    "run_chain",
    "metropolis_update",
    "monte_carlo_expectation",
]

# burn-in step-size tuning
ADAPT_WINDOW = 200
ADAPT_HIGH, ADAPT_LOW = 0.5, 0.25
ADAPT_UP, ADAPT_DOWN = 1.1, 0.9

N_BATCHES = 32


@dataclass(frozen=True)
class DirectSample:
    """Update by an exact draw from the conditional density."""


@dataclass(frozen=True)
class Metropolis:
    """Update by one normal random-walk Metropolis step."""

    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("Metropolis scale must be > 0")


@dataclass(frozen=True)
class ConditionalSpec:
    """Full conditional density of one parameter.

    ``builder(state, data)`` returns the density of ``name`` given the
    current values of the other parameters in ``state`` (a mapping from
    name to value that the builder must not modify).  The density needs
    ``sample(rng)`` for :class:`DirectSample` updates and ``logpdf`` (or the
    cheaper ``logpdf_unnormalized``) for :class:`Metropolis` updates.
    """

    name: str
    builder: Callable[[Mapping[str, float], Any], Any]
    update: DirectSample | Metropolis = field(default_factory=DirectSample)


@dataclass(frozen=True)
class FixedScan:
    """Systematic sweep in ``order`` (parameter names)."""

    order: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "order", tuple(self.order))


@dataclass(frozen=True)
class UniformRandomScan:
    """Update one uniformly chosen parameter per transition."""


@dataclass(frozen=True)
class GibbsConfig:
    """Run length, burn-in, seed, scan order and starting point.

    ``burn_in`` transitions are part of ``n_transitions``; they are recorded
    but excluded from estimates and are the only period in which Metropolis
    step sizes are tuned.
    """

    n_transitions: int
    burn_in: int
    seed: int
    scan: FixedScan | UniformRandomScan
    initial: Mapping[str, float]

    def __post_init__(self):
        if self.n_transitions <= 0:
            raise ValueError("n_transitions must be > 0")
        if not 0 <= self.burn_in < self.n_transitions:
            raise ValueError("burn_in must satisfy 0 <= burn_in < n_transitions")
        if self.seed < 0 or self.seed >= 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "initial", dict(self.initial))


@dataclass
class Chain:
    """Recorded states, one row per transition.

    Attributes
    ----------
    names : tuple of str
        Column order.
    samples : ndarray, shape (n_transitions, k)
    config : GibbsConfig
    acceptance : dict
        Post burn-in Metropolis acceptance rate per Metropolis coordinate.
    scales : dict
        Final (frozen) Metropolis step sizes.
    updated : ndarray or None
        Index of the coordinate updated at each transition under a random
        scan; ``None`` under a fixed scan.
    """

    names: tuple[str, ...]
    samples: np.ndarray
    config: GibbsConfig
    acceptance: dict[str, float] = field(default_factory=dict)
    scales: dict[str, float] = field(default_factory=dict)
    updated: np.ndarray | None = None

    def __len__(self) -> int:
        return self.samples.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.samples[:, self.names.index(name)]

    def retained(self, name: str, burn_in: int | None = None) -> np.ndarray:
        """Column ``name`` with the burn-in rows dropped."""
        b = self.config.burn_in if burn_in is None else burn_in
        return self.column(name)[b:]


def metropolis_update(logpdf: Callable[[float], float], current: float, scale: float, rng, current_logp: float | None = None):
    """One random-walk Metropolis step.

    Parameters
    ----------
    logpdf : callable
        Log target density, possibly unnormalized.
    current : float
    scale : float
        Standard deviation of the normal proposal.
    rng : numpy.random.Generator
    current_logp : float, optional
        ``logpdf(current)`` if already known.

    Returns
    -------
    (float, bool)
        The new value and whether the proposal was accepted.
    """
    lp0 = logpdf(current) if current_logp is None else current_logp
    proposal = current + scale * rng.standard_normal()
    lp1 = float(logpdf(proposal))
    if lp1 >= lp0 or (lp1 > -math.inf and rng.random() < math.exp(lp1 - lp0)):
        return proposal, True
    return current, False


def _target(density):
    return getattr(density, "logpdf_unnormalized", None) or density.logpdf


def run_chain(conditionals: Sequence[ConditionalSpec], config: GibbsConfig, data=None) -> Chain:
    """Run the Gibbs sampler.

    Returns
    -------
    Chain
        ``config.n_transitions`` rows, bit-identical for identical inputs.

    Raises
    ------
    ValueError
        If a starting value is missing or outside its conditional's support,
        or the scan order does not cover every parameter exactly once.
    RuntimeError
        If a Metropolis coordinate accepted nothing during burn-in.
    """
    if not conditionals:
        raise ValueError("need at least one conditional")
    names = tuple(c.name for c in conditionals)
    if len(set(names)) != len(names):
        raise ValueError("parameter names must be unique")
    missing = [n for n in names if n not in config.initial]
    if missing:
        raise ValueError(f"no initial value for {missing}")
    k = len(names)
    if isinstance(config.scan, FixedScan):
        if sorted(config.scan.order) != sorted(names):
            raise ValueError("fixed scan order must list every parameter exactly once")
        sweep = [names.index(n) for n in config.scan.order]
    elif isinstance(config.scan, UniformRandomScan):
        sweep = None
    else:
        raise TypeError(f"unknown scan order {config.scan!r}")

    rng = make_rng(config.seed)
    state = {n: float(config.initial[n]) for n in names}
    scale = [c.update.scale if isinstance(c.update, Metropolis) else 0.0 for c in conditionals]
    is_mh = [isinstance(c.update, Metropolis) for c in conditionals]
    win_prop = [0] * k
    win_acc = [0] * k
    burn_acc = [0] * k
    burn_prop = [0] * k
    post_acc = [0] * k
    post_prop = [0] * k

    def update(j: int, in_burn: bool):
        spec = conditionals[j]
        density = spec.builder(state, data)
        if density is None:
            raise ValueError(f"builder for {spec.name} returned no density")
        if not is_mh[j]:
            value = float(density.sample(rng))
            if not math.isfinite(value):
                raise ValueError(f"non-finite draw for {spec.name}")
            state[spec.name] = value
            return
        target = _target(density)
        lp0 = float(target(state[spec.name]))
        if not lp0 > -math.inf or math.isnan(lp0):
            raise ValueError(f"current value of {spec.name} has zero conditional density")
        new, accepted = metropolis_update(target, state[spec.name], scale[j], rng, lp0)
        state[spec.name] = new
        if in_burn:
            burn_prop[j] += 1
            burn_acc[j] += accepted
            win_prop[j] += 1
            win_acc[j] += accepted
            if win_prop[j] == ADAPT_WINDOW:
                rate = win_acc[j] / ADAPT_WINDOW
                if rate > ADAPT_HIGH:
                    scale[j] *= ADAPT_UP
                elif rate < ADAPT_LOW:
                    scale[j] *= ADAPT_DOWN
                win_prop[j] = win_acc[j] = 0
        else:
            post_prop[j] += 1
            post_acc[j] += accepted

    n = config.n_transitions
    out = np.empty((n, k))
    chosen = None if sweep is not None else np.empty(n, dtype=np.int64)
    for i in range(n):
        in_burn = i < config.burn_in
        if sweep is not None:
            for j in sweep:
                update(j, in_burn)
        else:
            j = int(rng.integers(k))
            chosen[i] = j
            update(j, in_burn)
        if i + 1 == config.burn_in:
            for j in range(k):
                if is_mh[j] and burn_prop[j] > 0 and burn_acc[j] == 0:
                    raise RuntimeError(f"Metropolis update for {names[j]} accepted nothing during burn-in")
        out[i] = [state[nm] for nm in names]

    acceptance = {}
    for j in range(k):
        if is_mh[j]:
            prop = post_prop[j] or burn_prop[j]
            acc = post_acc[j] if post_prop[j] else burn_acc[j]
            acceptance[names[j]] = acc / prop if prop else math.nan
    scales = {names[j]: scale[j] for j in range(k) if is_mh[j]}
    return Chain(names, out, config, acceptance, scales, chosen)


def monte_carlo_expectation(chain: Chain, h: Callable, burn_in: int | None = None, vectorized: bool = False) -> tuple[float, float]:
    """Estimate ``E[h(theta)]`` from the retained rows with a batch-means SE.

    Parameters
    ----------
    chain : Chain
    h : callable
        Function of one parameter vector (a row, ordered as
        ``chain.names``).  With ``vectorized=True`` it receives the whole
        ``(rows, k)`` block and must return one value per row.
    burn_in : int, optional
        Rows to drop; defaults to the chain's configured burn-in.

    Returns
    -------
    (float, float)
        Estimate and standard error from 32 batch means.
    """
    b = chain.config.burn_in if burn_in is None else burn_in
    rows = chain.samples[b:]
    if rows.shape[0] < N_BATCHES:
        raise ValueError(f"need at least {N_BATCHES} retained rows")
    if vectorized:
        vals = np.asarray(h(rows), dtype=float)
    else:
        vals = np.array([h(r) for r in rows], dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError("h is not finite on every retained row")
    size = vals.size // N_BATCHES
    means = vals[: size * N_BATCHES].reshape(N_BATCHES, size).mean(axis=1)
    return float(vals.mean()), float(means.std(ddof=1) / math.sqrt(N_BATCHES))
