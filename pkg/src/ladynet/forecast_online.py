"""One-step forecasts, same-grid prediction and online updating.

Forecasts extrapolate each retained draw of the terminal latent states one
step along its derivative. Online updating re-runs the sampler (without the
variance steps) on a short window made of the last ``j`` processed networks
followed by the new ones, starting the smoother from the Kalman predictive
distribution of the stored block summaries.
"""
from __future__ import annotations

import csv
import json
import os
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .gibbs import (SIM_CLAMP, BlockPrior, ModelConfig, PosteriorStore,
                    VarianceParams, run_chain)
from .netseries import DataError, NetworkSeries, TimeGrid, load_series, save_series
from .netstats import auc, dyad_index, is_undefined
from .statespace import DIFFUSE_KAPPA, build_ngp_transition, predictive_state

__all__ = [
    "ForecastResult",
    "PredictResult",
    "OnlineState",
    "OnlineUpdate",
    "forecast_one_step",
    "predict_replicate",
    "online_update",
    "write_forecast_csv",
    "write_predict_csv",
    "forecast_protocol",
]

DEFAULT_LOOKBACK = 5


@dataclass(frozen=True)
class ForecastResult:
    """Draws ``(S, D)`` of the forecast edge probabilities and their summaries."""

    draws: np.ndarray
    V: int
    probs: tuple = (0.025, 0.975)

    @property
    def mean(self) -> np.ndarray:
        return self.draws.mean(axis=0)

    @property
    def intervals(self) -> np.ndarray:
        """Equal-tailed quantiles ``(2, D)``."""
        return np.quantile(self.draws, self.probs, axis=0)

    @property
    def n_draws(self) -> int:
        return self.draws.shape[0]

    def mean_matrix(self) -> np.ndarray:
        rows, cols = dyad_index(self.V)
        out = np.zeros((self.V, self.V))
        out[rows, cols] = out[cols, rows] = self.mean
        return out


def forecast_one_step(store: PosteriorStore, delta: float) -> ForecastResult:
    """Forecast ``pi(t_{n+1})`` with ``t_{n+1} = t_n + delta``.

    Each retained draw is extrapolated deterministically:
    level + delta * derivative for the baseline and every coordinate.
    """
    delta = float(delta)
    if not np.isfinite(delta) or delta < 0:
        raise ValueError(f"forecast step must be finite and >= 0, got {delta}")
    if store.n_draws == 0:
        raise ValueError("store holds no retained draws")
    b = store.baseline_last
    c = store.coords_last
    mu = b[:, 0] + delta * b[:, 1]
    X = c[..., 0] + delta * c[..., 1]  # (S, V, H)
    rows, cols = dyad_index(store.V)
    s = mu[:, None] + np.einsum("sdh,sdh->sd", X[:, rows], X[:, cols])
    return ForecastResult(expit(np.clip(s, -SIM_CLAMP, SIM_CLAMP)), store.V)


@dataclass(frozen=True)
class PredictResult:
    aucs: list  # one value (or Undefined) per time
    means: np.ndarray  # (n_test, D)


def predict_replicate(store: PosteriorStore, test: NetworkSeries) -> PredictResult:
    """Score a replicate series on the training grid with the posterior-mean ``pi``.

    ``test`` may cover a prefix of the training times.
    """
    if test.V != store.V:
        raise DataError(f"test series has V={test.V}, model has V={store.V}")
    if test.n > store.n or not np.allclose(test.times, store.times[:test.n]):
        raise DataError("test grid is not a prefix of the training grid")
    means = store.pi_mean[:test.n]
    y = test.adjacency[:, store.rows, store.cols]
    return PredictResult([auc(means[t], y[t]) for t in range(test.n)], means)


# ---------------------------------------------------------------------------
# online updating

@dataclass
class OnlineState:
    """Everything online updating needs from previous fits.

    Block posterior means/covariances are kept for every processed time so
    that a lookback window can start anywhere in the history; ``history``
    holds the processed networks themselves.
    """

    history: NetworkSeries
    baseline_mean: np.ndarray  # (n, 3)
    baseline_cov: np.ndarray  # (n, 3, 3)
    coords_mean: np.ndarray  # (V, H, n, 3)
    coords_cov: np.ndarray  # (V, H, n, 3, 3)
    variances: VarianceParams
    kappa: float = DIFFUSE_KAPPA

    def __post_init__(self):
        n = self.history.n
        if self.baseline_mean.shape != (n, 3) or self.coords_mean.shape[2] != n:
            raise ValueError("summaries do not match the history length")
        self.baseline_cov = _sym(self.baseline_cov)
        self.coords_cov = _sym(self.coords_cov)

    @property
    def H(self) -> int:
        return self.coords_mean.shape[1]

    @property
    def n(self) -> int:
        return self.history.n

    @property
    def terminal(self):
        """Means and covariances at the last processed time."""
        return (self.baseline_mean[-1], self.baseline_cov[-1],
                self.coords_mean[:, :, -1], self.coords_cov[:, :, -1])

    @classmethod
    def from_store(cls, store: PosteriorStore, series: NetworkSeries) -> "OnlineState":
        if series.n != store.n or not np.allclose(series.times, store.times):
            raise DataError("series does not match the fitted grid")
        b_mean, b_cov, c_mean, c_cov = store.state_moments()
        kappa = store.config.kappa if store.config is not None else DIFFUSE_KAPPA
        return cls(series, b_mean, b_cov, c_mean, c_cov,
                   store.variance_means(), kappa)

    def window_prior(self, start: int) -> BlockPrior:
        """Prior for a window whose first time is history index ``start``.

        For ``start == 0`` there is nothing before the window and the diffuse
        prior is used.
        """
        V, H = self.history.V, self.H
        if start == 0:
            return BlockPrior.diffuse(V, H, self.kappa)
        delta = self.history.times[start] - self.history.times[start - 1]
        vp = self.variances
        k = start - 1
        bm, bc = predictive_state(self.baseline_mean[k], self.baseline_cov[k],
                                  build_ngp_transition(delta, vp.mu, vp.z))
        cm = np.empty((V, H, 3))
        cc = np.empty((V, H, 3, 3))
        for v in range(V):
            for h in range(H):
                cm[v, h], cc[v, h] = predictive_state(
                    self.coords_mean[v, h, k], self.coords_cov[v, h, k],
                    build_ngp_transition(delta, vp.x[v, h], vp.m[v, h]))
        return BlockPrior(bm, bc, cm, cc)

    # -- persistence -----------------------------------------------------------
    def save(self, directory, stem: str = "online_state"):
        """Write ``<stem>.json`` plus the history networks as ``<stem>_history``."""
        os.makedirs(directory, exist_ok=True)
        save_series(self.history, directory, f"{stem}_history")
        vp = self.variances
        obj = {
            "history": f"{stem}_history",
            "kappa": self.kappa,
            "baseline_mean": self.baseline_mean.tolist(),
            "baseline_cov": self.baseline_cov.tolist(),
            "coords_mean": self.coords_mean.tolist(),
            "coords_cov": self.coords_cov.tolist(),
            "variances": {"mu": vp.mu, "z": vp.z, "x": vp.x.tolist(),
                          "m": vp.m.tolist()},
        }
        with open(os.path.join(directory, f"{stem}.json"), "w") as fh:
            json.dump(obj, fh)

    @classmethod
    def load(cls, directory, stem: str = "online_state") -> "OnlineState":
        with open(os.path.join(directory, f"{stem}.json")) as fh:
            obj = json.load(fh)
        history = load_series(directory, obj["history"])
        V = history.V
        var = obj["variances"]
        H = len(var["x"][0]) if var["x"] and len(var["x"][0]) else 0
        shape_vh = (V, H)
        vp = VarianceParams(var["mu"], var["z"],
                            np.asarray(var["x"], dtype=float).reshape(shape_vh),
                            np.asarray(var["m"], dtype=float).reshape(shape_vh))
        n = history.n
        return cls(history,
                   np.asarray(obj["baseline_mean"], dtype=float),
                   np.asarray(obj["baseline_cov"], dtype=float),
                   np.asarray(obj["coords_mean"], dtype=float).reshape(V, H, n, 3),
                   np.asarray(obj["coords_cov"], dtype=float).reshape(V, H, n, 3, 3),
                   vp, float(obj.get("kappa", DIFFUSE_KAPPA)))


def _sym(a):
    a = np.asarray(a, dtype=float)
    return 0.5 * (a + np.swapaxes(a, -1, -2))


@dataclass
class OnlineUpdate:
    """Result of :func:`online_update`.

    ``store`` covers the whole window; ``new_index`` selects the new times
    in it. ``state`` is the refreshed :class:`OnlineState`.
    """

    store: PosteriorStore | None
    new_index: np.ndarray
    state: OnlineState

    @property
    def pi_mean(self) -> np.ndarray:
        return self.store.pi_mean[self.new_index]

    def pi_draws(self) -> np.ndarray:
        return self.store.pi_draws(self.new_index)


def _concat(a: NetworkSeries, b: NetworkSeries) -> NetworkSeries:
    if a.V != b.V:
        raise DataError(f"new networks have V={b.V}, expected {a.V}")
    if b.times[0] <= a.times[-1]:
        raise DataError("new networks must come after the processed times")
    times = np.concatenate([a.times, b.times])
    adj = np.concatenate([a.adjacency, b.adjacency])
    return NetworkSeries(TimeGrid(times), adj, a.labels or b.labels)


def online_update(online: OnlineState, new: NetworkSeries, j: int = DEFAULT_LOOKBACK,
                  config: ModelConfig | None = None, rng=None) -> OnlineUpdate:
    """Extend the posterior to the networks in ``new``.

    The sampler (steps 1-3 and 6, variances fixed at ``online.variances``)
    runs on ``Y_{t_{n-j}}, ..., Y_{t_n}`` followed by the new networks. The
    first window time gets the one-step predictive of the stored summaries at
    the time before it, or the diffuse prior when the window reaches back to
    the first time. ``config`` supplies ``n_iter``/``burn_in``/``thin``; by
    default 5000 sweeps with 500 discarded.

    Summaries of every window time are refreshed in the returned state;
    ``pi`` at times before the new ones is not reported as an update.
    """
    if new is None or new.n == 0:
        return OnlineUpdate(None, np.zeros(0, dtype=int), online)
    j = int(j)
    if j < 0:
        raise ValueError("lookback j must be >= 0")
    n = online.n
    if j > n - 1:
        warnings.warn(f"lookback j={j} exceeds the available history; using {n - 1}")
        j = n - 1
    if config is None:
        config = ModelConfig(H=online.H, burn_in=500, kappa=online.kappa)
    elif config.H != online.H:
        config = ModelConfig(**{**config.to_dict(), "H": online.H})
    if rng is None:
        rng = np.random.default_rng(config.seed)

    start = n - 1 - j
    full = _concat(online.history, new)
    window = full.window(start, full.n)
    prior = online.window_prior(start)
    store = run_chain(window, config, rng=rng, prior=prior,
                      fixed_variances=online.variances)

    b_mean, b_cov, c_mean, c_cov = store.state_moments()
    refreshed = OnlineState(
        full,
        np.concatenate([online.baseline_mean[:start], b_mean]),
        np.concatenate([online.baseline_cov[:start], b_cov]),
        np.concatenate([online.coords_mean[:, :, :start], c_mean], axis=2),
        np.concatenate([online.coords_cov[:, :, :start], c_cov], axis=2),
        online.variances, online.kappa)
    new_index = np.arange(window.n - new.n, window.n)
    return OnlineUpdate(store, new_index, refreshed)


# ---------------------------------------------------------------------------
# reports

def write_forecast_csv(result: ForecastResult, path):
    """Rows ``v,u,mean,q025,q975`` over the ``v > u`` dyads."""
    rows, cols = dyad_index(result.V)
    lo, hi = result.intervals
    mean = result.mean
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["v", "u", "mean", "q025", "q975"])
        for k in range(rows.size):
            w.writerow([int(rows[k]), int(cols[k]), repr(float(mean[k])),
                        repr(float(lo[k])), repr(float(hi[k]))])


def write_predict_csv(aucs, path, time_index=None):
    """Rows ``time_index,auc``; undefined values are written as ``NA``."""
    idx = range(len(aucs)) if time_index is None else time_index
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_index", "auc"])
        for t, a in zip(idx, aucs):
            w.writerow([int(t), "NA" if is_undefined(a) else repr(float(a))])


def forecast_protocol(series: NetworkSeries, first: int, last: int,
                      config: ModelConfig, j: int = DEFAULT_LOOKBACK,
                      online_config: ModelConfig | None = None, rng=None):
    """Chained update-then-forecast evaluation over time indices ``first..last``.

    The model is fitted on indices ``0 .. first-1``. Then for each
    ``i = first, ..., last`` the posterior is updated online with ``Y[i]``
    (lookback ``j``) and ``Y[i+1]`` is forecast from the updated terminal
    draws. Returns rows ``(i + 1, auc)`` with 0-based target indices.
    """
    if not 1 <= first <= last < series.n - 1:
        raise ValueError("need 1 <= first <= last < n - 1")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    from .gibbs import run_gibbs

    store = run_gibbs(config, series.window(0, first), rng)
    online = OnlineState.from_store(store, series.window(0, first))
    rows, cols = dyad_index(series.V)
    out = []
    for i in range(first, last + 1):
        upd = online_update(online, series.window(i, i + 1), j, online_config, rng)
        online = upd.state
        fc = forecast_one_step(upd.store, series.times[i + 1] - series.times[i])
        out.append((i + 1, auc(fc.mean, series.adjacency[i + 1][rows, cols])))
    return out
