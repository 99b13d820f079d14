"""
Posterior predictive checks and convergence
===========================================

Simulate networks from the posterior and ask whether the observed density,
degrees and class assortativity look typical. Then compute split-chain PSRF
for every edge probability.
"""
import numpy as np

from ladynet import (ModelConfig, default_regimes, default_schedule, predictive_check,
                     psrf_array, run_gibbs, simulate, split_chains)

rng = np.random.default_rng(5)
schedule, grid = default_schedule()
series, _ = simulate(schedule, default_regimes(), rng, grid)
store = run_gibbs(ModelConfig(H=2, n_iter=800, burn_in=200, seed=2), series)

rows = predictive_check(lambda t: store.pi_draws([t])[:, 0], series.adjacency,
                        {"class": series.labels["class"]}, rng)
for stat in ("density", "degree", "assortativity"):
    inside = [r["inside"] for r in rows if r["statistic"] == stat and r["inside"] is not None]
    print(f"{stat:14s} inside 95% band: {np.mean(inside):.1%} of {len(inside)}")

dens = [r for r in rows if r["statistic"] == "density"]
for r in dens[::10]:
    print(f"t={r['time_index']:2d} observed {r['observed']:.3f} "
          f"band [{r['q025']:.3f}, {r['q975']:.3f}]")

R = np.concatenate([psrf_array(split_chains(store.pi_draws([t])[:, 0], 4)).compressed()
                    for t in range(store.n)])
print(f"PSRF over all pi: median {np.median(R):.3f}, 99th percentile "
      f"{np.quantile(R, 0.99):.3f}")
