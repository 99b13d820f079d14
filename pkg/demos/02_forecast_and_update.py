"""
Forecasting the next network and streaming new snapshots
========================================================

Fit on the first part of the day. Forecast the next snapshot from the
terminal draws. When a snapshot arrives, absorb it with the online updater
instead of refitting, and forecast again.
"""
import numpy as np

from ladynet import (ModelConfig, OnlineState, auc, default_regimes, default_schedule,
                     forecast_one_step, online_update, run_gibbs, simulate)

rng = np.random.default_rng(3)
schedule, grid = default_schedule()
series, _ = simulate(schedule, default_regimes(), rng, grid)

first = 43  # fit on times 0..42
past = series.window(0, first)
store = run_gibbs(ModelConfig(H=2, n_iter=800, burn_in=200, seed=1), past)
online = OnlineState.from_store(store, past)
rows, cols = store.rows, store.cols

for i in range(first, 47):
    # absorb Y[i], re-using a lookback window of five earlier networks
    upd = online_update(online, series.window(i, i + 1), j=5,
                        config=ModelConfig(H=2, n_iter=400, burn_in=100), rng=rng)
    online = upd.state
    fc = forecast_one_step(upd.store, series.times[i + 1] - series.times[i])
    score = auc(fc.mean, series.adjacency[i + 1][rows, cols])
    lo, hi = fc.intervals
    print(f"forecast time index {i + 1}: AUC {score:.3f}, "
          f"mean 95% interval width {np.mean(hi - lo):.3f}")
