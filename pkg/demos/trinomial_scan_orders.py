"""Do two fixed scan orders disagree?

pi1 gets a beta-shaped prior and pi2 a step-inversion fiducial density.
Nothing guarantees the two conditionals share a joint density, so we run
both systematic scan orders and compare their output.

Run: python demos/trinomial_scan_orders.py [transitions]
"""

import sys

from ioi.diagnostics import scan_order_sensitivity
from ioi.gibbs import GibbsConfig, UniformRandomScan
from ioi.scenarios import build_scenario


def main(n: int = 100_000) -> None:
    spec = build_scenario("trinomial")
    cfg = GibbsConfig(n, 2_000, 5, UniformRandomScan(), spec.initial)
    report = scan_order_sensitivity(spec.conditionals, spec.data, [("pi1", "pi2"), ("pi2", "pi1")], cfg)
    print(report.to_text())
    jeffreys = spec.references["pi1_jeffreys"].expectation()
    print(f"Jeffreys-posterior mean of pi1 for comparison: {jeffreys:.4f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 100_000)
