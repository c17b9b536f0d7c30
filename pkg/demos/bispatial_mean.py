"""A bispatial conditional for a normal mean.

Before seeing data we think the mean may sit inside [-0.2, 0.2].  Each
update of the mean turns the one-sided P value of that hypothesis into a
probability kappa through a PDO curve, and builds a density that gives the
hypothesis exactly that probability.  The variance has an inverse-gamma
prior.  The demo prints the spot values at sigma = 3 and summarizes a
chain.

Run: python demos/bispatial_mean.py [transitions]
"""

import sys

import numpy as np

from ioi.gibbs import GibbsConfig, UniformRandomScan, run_chain
from ioi.scenarios import build_scenario


def main(n: int = 100_000) -> None:
    spec = build_scenario("student_bispatial")
    dens = spec.conditional("mu").builder({"mu": 0.0, "sigma2": 9.0}, spec.data)
    print(f"at sigma = 3: p = {dens.kappa ** (1 / 0.6):.7f}, kappa = {dens.kappa:.7f}, nu = {dens.nu:.4f}")

    chain = run_chain(spec.conditionals, GibbsConfig(n, 2_000, 1, UniformRandomScan(), spec.initial), spec.data)
    mu = chain.retained("mu")
    print(f"mu mean {mu.mean():.4f}, P(|mu| <= 0.2) = {np.mean(np.abs(mu) <= 0.2):.4f}")
    print(f"quantiles 2.5/50/97.5: {np.quantile(mu, [0.025, 0.5, 0.975]).round(4)}")
    print(f"Metropolis acceptance for mu: {chain.acceptance['mu']:.3f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 100_000)
