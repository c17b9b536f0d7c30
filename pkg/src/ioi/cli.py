"""Command line front end.

::

    ioi run student_bayes_sigma --seed 1 --transitions 200000 --burn-in 2000
    ioi run --config my_run.ini --out results/
    ioi list

Output files: ``chain.csv`` (``chain_<i>.csv`` with ``--chains``),
``summary.txt``, ``reference_<name>.csv``, ``histogram_<param>.csv`` and
``diagnostics.txt``.  A usage error exits with status 2 and any other
failure with status 1, each printing one ``error: ...`` line on stderr.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import _checklist, _rhat
from .gibbs import Chain, FixedScan, GibbsConfig, UniformRandomScan, monte_carlo_expectation, run_chain
from .scenarios import (
    SCENARIOS,
    ScenarioSpec,
    build_scenario,
    from_config,
    overdispersed_initial,
    read_config,
    to_config,
)

__all__ = ["RunConfig", "parse_scan", "emit_histogram", "write_chain_csv", "summarize", "run", "main"]

OUTPUT_ENV = "IOI_OUTPUT_DIR"
DEFAULT_OUTPUT = "ioi-output"
CURVE_POINTS = 201
QUANTILES = (0.025, 0.5, 0.975)


class UsageError(Exception):
    """Bad command line or configuration (exit status 2)."""


@dataclass(frozen=True)
class RunConfig:
    """One CLI run.

    ``scenario`` is a registered name; ``config_path`` points at a scenario
    configuration file and takes precedence when given.
    """

    scenario: str | None
    config_path: str | None
    seed: int
    n_transitions: int
    burn_in: int
    scan: str
    out: str
    thin: int = 1
    bins: int = 50
    chains: int = 1

    def __post_init__(self):
        if self.thin < 1:
            raise UsageError("--thin must be >= 1")
        if self.bins < 2:
            raise UsageError("--bins must be >= 2")
        if self.chains < 1:
            raise UsageError("--chains must be >= 1")
        if self.n_transitions <= 0:
            raise UsageError("--transitions must be > 0")
        if not 0 <= self.burn_in < self.n_transitions:
            raise UsageError("--burn-in must satisfy 0 <= burn-in < transitions")
        if not 0 <= self.seed < 2**64:
            raise UsageError("--seed must be an unsigned 64-bit integer")


def parse_scan(text: str, params: tuple[str, ...]):
    """``"random"`` or ``"fixed:a,b,..."`` to a scan order over ``params``."""
    text = text.strip()
    if text == "random":
        return UniformRandomScan()
    if text.startswith("fixed:"):
        order = tuple(t.strip() for t in text[len("fixed:") :].split(",") if t.strip())
        if sorted(order) != sorted(params):
            raise UsageError(f"fixed scan must list each of {', '.join(params)} exactly once")
        return FixedScan(order)
    if text == "fixed":
        return FixedScan(params)
    raise UsageError(f"scan must be 'random' or 'fixed:<names>', got {text!r}")


def emit_histogram(samples, bins: int, range: tuple[float, float] | None = None) -> list[tuple[float, float, float]]:
    """Density-normalized histogram rows ``(left, right, density)``.

    Raises
    ------
    ValueError
        On empty samples or fewer than two bins.
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("cannot histogram an empty sample")
    if bins < 2:
        raise ValueError("bins must be >= 2")
    if range is None:
        lo, hi = float(x.min()), float(x.max())
        if hi == lo:
            lo, hi = lo - 0.5, hi + 0.5
        range = (lo, hi)
    counts, edges = np.histogram(x, bins=bins, range=range)
    total = counts.sum()
    if total == 0:
        raise ValueError("no samples fall inside the histogram range")
    dens = counts / (total * np.diff(edges))
    return [(float(edges[i]), float(edges[i + 1]), float(dens[i])) for i in np.arange(bins)]


def write_chain_csv(path: Path, chain: Chain, thin: int = 1) -> None:
    """Header ``transition,<params>``; every ``thin``-th row, 1-based index."""
    idx = np.arange(0, len(chain), thin)
    with open(path, "w", newline="") as fh:
        fh.write("transition," + ",".join(chain.names) + "\n")
        for i in idx:
            fh.write(str(i + 1) + "," + ",".join(repr(float(v)) for v in chain.samples[i]) + "\n")


def summarize(chain: Chain) -> dict[str, dict[str, float]]:
    """Per parameter mean, batch-means SE, quantiles and acceptance rate."""
    out = {}
    for j, nm in enumerate(chain.names):
        mean, se = monte_carlo_expectation(chain, lambda rows, j=j: rows[:, j], vectorized=True)
        q = np.quantile(chain.retained(nm), QUANTILES)
        row = {"mean": mean, "se": se, "q2.5": float(q[0]), "q50": float(q[1]), "q97.5": float(q[2])}
        if nm in chain.acceptance:
            row["acceptance"] = chain.acceptance[nm]
        out[nm] = row
    return out


def _summary_text(spec: ScenarioSpec, cfg: RunConfig, chains: list[Chain]) -> str:
    lines = [
        "[run]",
        f"scenario = {spec.name}",
        f"seed = {cfg.seed}",
        f"transitions = {cfg.n_transitions}",
        f"burn_in = {cfg.burn_in}",
        f"scan = {cfg.scan}",
        f"chains = {len(chains)}",
        f"version = {__version__}",
    ]
    for i, ch in enumerate(chains):
        for nm, row in summarize(ch).items():
            head = nm if len(chains) == 1 else f"chain{i}.{nm}"
            lines += ["", f"[{head}]"] + [f"{k} = {v!r}" for k, v in row.items()]
    return "\n".join(lines) + "\n"


def _param_for(ref_name: str, params: tuple[str, ...]) -> str | None:
    hits = [p for p in params if ref_name == p or ref_name.startswith(p + "_")]
    return max(hits, key=len) if hits else None


def _curve_grid(ref, samples: np.ndarray | None) -> np.ndarray:
    # cover both the chain's range and the curve's own bulk
    ends = []
    if samples is not None:
        ends.append(np.quantile(samples, [0.0005, 0.9995]))
    if hasattr(ref, "quantile"):
        ends.append((float(ref.quantile(0.0005)), float(ref.quantile(0.9995))))
    if ends:
        lo, hi = min(e[0] for e in ends), max(e[1] for e in ends)
    else:
        lo, hi = ref.support
    support = getattr(ref, "support", (-math.inf, math.inf))
    pad = 0.05 * (hi - lo)
    lo, hi = max(lo - pad, support[0]), min(hi + pad, support[1])
    return np.linspace(lo, hi, CURVE_POINTS)


def _write_curve(path: Path, x: np.ndarray, dens: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write("x,density\n")
        for a, b in zip(x, dens):
            fh.write(f"{float(a)!r},{float(b)!r}\n")


def _write_rows(path: Path, header: str, rows) -> None:
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for r in rows:
            fh.write(",".join(repr(float(v)) for v in r) + "\n")


def _write_references(out: Path, spec: ScenarioSpec, chain: Chain) -> None:
    for name, ref in spec.references.items():
        param = _param_for(name, spec.params)
        samples = chain.retained(param) if param else None
        x = _curve_grid(ref, samples)
        dens = np.array([float(ref.pdf(v)) for v in x])
        _write_curve(out / f"reference_{name}.csv", x, dens)
        if param and param.startswith("sigma2"):
            # same curve for the standard deviation: 2 s f(s^2)
            sd_name = "sigma" + name[len("sigma2") :]
            s = np.sqrt(np.clip(x, 0.0, None))
            _write_curve(out / f"reference_{sd_name}.csv", s, 2.0 * s * dens)


def _write_histograms(out: Path, spec: ScenarioSpec, chain: Chain, bins: int) -> None:
    for nm in spec.params:
        x = chain.retained(nm)
        _write_rows(out / f"histogram_{nm}.csv", "bin_left,bin_right,density", emit_histogram(x, bins))
        if nm.startswith("sigma2") and np.all(x >= 0):
            sd = "sigma" + nm[len("sigma2") :]
            _write_rows(out / f"histogram_{sd}.csv", "bin_left,bin_right,density", emit_histogram(np.sqrt(x), bins))


def _diagnostics_text(spec: ScenarioSpec, chains: list[Chain]) -> str:
    lines = ["[rhat]"]
    for nm in spec.params:
        if len(chains) < 2:
            lines.append(f"{nm} = nan")
            continue
        try:
            lines.append(f"{nm} = {_rhat([c.retained(nm) for c in chains])!r}")
        except ValueError:
            lines.append(f"{nm} = nan")
    lines += ["", "[acceptance]"]
    for i, c in enumerate(chains):
        lines += [f"chain{i}.{k} = {v!r}" for k, v in c.acceptance.items()]
    lines += ["", "[checklist]"]
    lines += [f"{k} = {v}" for k, v in _checklist(chains).items()]
    return "\n".join(lines) + "\n"


def _load_spec(cfg: RunConfig) -> ScenarioSpec:
    if cfg.config_path:
        try:
            text = Path(cfg.config_path).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        name = read_config(text).get("scenario", "name", fallback=None)
        if name not in SCENARIOS:
            raise UsageError(f"unknown scenario {name!r}")
        return from_config(text)
    if cfg.scenario not in SCENARIOS:
        raise UsageError(f"unknown scenario {cfg.scenario!r}")
    return build_scenario(cfg.scenario)


def run(cfg: RunConfig) -> int:
    """Execute one run and write all output files; returns the exit status."""
    spec = _load_spec(cfg)
    scan = parse_scan(cfg.scan, spec.params)
    starts = [spec.initial] if cfg.chains == 1 else overdispersed_initial(spec, cfg.chains)
    configs = [
        GibbsConfig(cfg.n_transitions, cfg.burn_in, (cfg.seed + i) % 2**64, scan, starts[i]) for i in range(cfg.chains)
    ]
    if cfg.chains == 1:
        chains = [run_chain(spec.conditionals, configs[0], spec.data)]
    else:
        with ThreadPoolExecutor(max_workers=cfg.chains) as pool:
            chains = list(pool.map(lambda c: run_chain(spec.conditionals, c, spec.data), configs))

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.chains == 1:
        write_chain_csv(out / "chain.csv", chains[0], cfg.thin)
    else:
        for i, ch in enumerate(chains):
            write_chain_csv(out / f"chain_{i}.csv", ch, cfg.thin)
    (out / "summary.txt").write_text(_summary_text(spec, cfg, chains))
    _write_references(out, spec, chains[0])
    _write_histograms(out, spec, chains[0], cfg.bins)
    (out / "diagnostics.txt").write_text(_diagnostics_text(spec, chains))
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ioi", description="Gibbs sampling over fiducial, bispatial and Bayesian full conditionals.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    r = sub.add_parser("run", help="run a scenario and write output files")
    r.add_argument("scenario", nargs="?", help="registered scenario name")
    r.add_argument("--config", help="scenario configuration file (overrides the name)")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--transitions", type=int, default=None)
    r.add_argument("--burn-in", type=int, default=None)
    r.add_argument("--scan", default=None, help="'random' or 'fixed:<comma-separated names>'")
    r.add_argument("--out", default=None, help=f"output directory (default ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
    r.add_argument("--thin", type=int, default=None, help="write every n-th row of the chain")
    r.add_argument("--bins", type=int, default=None, help="histogram bin count")
    r.add_argument("--chains", type=int, default=None, help="independent chains for R-hat")
    sub.add_parser("list", help="list registered scenarios")
    c = sub.add_parser("config", help="print a scenario's default configuration")
    c.add_argument("scenario")
    return p


# run settings a configuration file may carry in a [run] section
_RUN_DEFAULTS = dict(seed=1, transitions=100000, burn_in=2000, scan="random", thin=1, bins=50, chains=1)


def _run_config(args) -> RunConfig:
    values = dict(_RUN_DEFAULTS)
    if args.config:
        try:
            cp = read_config(Path(args.config).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        if cp.has_section("run"):
            for k, v in cp["run"].items():
                key = k.replace("-", "_")
                if key not in values and key != "out":
                    raise UsageError(f"unknown [run] key {k!r}")
                values[key] = v if key in ("scan", "out") else int(v)
    elif not args.scenario:
        raise UsageError("give a scenario name or --config")
    for key in ("seed", "transitions", "burn_in", "scan", "thin", "bins", "chains", "out"):
        v = getattr(args, key)
        if v is not None:
            values[key] = v
    out = values.get("out") or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT
    return RunConfig(
        args.scenario, args.config, values["seed"], values["transitions"], values["burn_in"], values["scan"],
        out, values["thin"], values["bins"], values["chains"],
    )


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
        if args.command == "list":
            print("\n".join(SCENARIOS))
            return 0
        if args.command == "config":
            if args.scenario not in SCENARIOS:
                raise UsageError(f"unknown scenario {args.scenario!r}")
            print(to_config(build_scenario(args.scenario)), end="")
            return 0
        return run(_run_config(args))
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - single-line report for any module failure
        msg = " ".join(str(exc).split()) or type(exc).__name__
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
