"""Correlation of a bivariate normal with a bispatial conditional.

Pre-data we think tau may be close to zero (|tau| <= 0.02).  The demo
compares the chain's probability of that region with the one the Fisher-z
confidence density assigns.

Run: python demos/bivariate_correlation.py [transitions]
"""

import sys

import numpy as np

from ioi.gibbs import GibbsConfig, UniformRandomScan, run_chain
from ioi.scenarios import build_scenario


def main(n: int = 50_000) -> None:
    spec = build_scenario("bivariate")
    chain = run_chain(spec.conditionals, GibbsConfig(n, 5_000, 1, UniformRandomScan(), spec.initial), spec.data)
    tau = chain.retained("tau")
    conf = spec.references["tau_confidence"]
    print(f"sample correlation r = {spec.data['sums'].r:.4f}")
    print(f"P(|tau| <= 0.02): chain {np.mean(np.abs(tau) <= 0.02):.4f}, confidence density {conf.cdf(0.02) - conf.cdf(-0.02):.4f}")
    for k, v in chain.acceptance.items():
        print(f"acceptance {k}: {v:.3f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 50_000)
