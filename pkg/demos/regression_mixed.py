"""Regression with three kinds of pre-data knowledge.

beta1 has a normal prior, beta3 a bispatial conditional around [-0.1, 0.1],
and the remaining parameters have fiducial conditionals.  The all-fiducial
system gives the reference marginals.  The demo prints each parameter's
summary next to its all-fiducial counterpart.

Run: python demos/regression_mixed.py [sweeps]
"""

import sys

from ioi.cli import summarize
from ioi.gibbs import FixedScan, GibbsConfig, run_chain
from ioi.scenarios import build_scenario


def main(n: int = 50_000) -> None:
    spec = build_scenario("regression")
    cfg = GibbsConfig(n, 2_000, 1, FixedScan(spec.params), spec.initial)
    chain = run_chain(spec.conditionals, cfg, spec.data)
    for name, row in summarize(chain).items():
        ref = spec.references[f"{name}_fiducial"]
        extra = f"  acceptance {row['acceptance']:.3f}" if "acceptance" in row else ""
        print(f"{name:6s} mean {row['mean']:8.4f} (se {row['se']:.4f})  all-fiducial mean {ref.expectation():8.4f}{extra}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 50_000)
