import warnings

import numpy as np
import pytest

from ladynet.forecast_online import (OnlineState, forecast_one_step,
                                     online_update, predict_replicate,
                                     write_forecast_csv, write_predict_csv)
from ladynet.gibbs import (ModelConfig, PosteriorStore, VarianceParams,
                           in_sample_auc, run_gibbs)
from ladynet.netseries import DataError, NetworkSeries, TimeGrid
from ladynet.netstats import Undefined
from ladynet.simgen import simulate_from_pi


def series(seed=0, V=6, n=8, t0=0.0):
    rng = np.random.default_rng(seed)
    g = np.arange(V) % 2
    pi = np.where(g[:, None] == g[None, :], 0.7, 0.15) * np.ones((n, 1, 1))
    pi[:, np.arange(V), np.arange(V)] = 0
    return simulate_from_pi(pi, rng, TimeGrid(t0 + 0.25 * np.arange(n)))


@pytest.fixture(scope="module")
def fitted():
    s = series()
    return s, run_gibbs(ModelConfig(H=2, n_iter=300, burn_in=100, seed=3), s)


def one_draw_store(mu, dmu, X, dX):
    V, H = np.shape(X)
    st = PosteriorStore([0.0], V, H, 1)
    st.baseline_last[0] = [mu, dmu, 0.0]
    st.coords_last[0, :, :, 0] = X
    st.coords_last[0, :, :, 1] = dX
    st._k = 1
    return st


class TestForecast:
    def test_zero_step_is_terminal_pi(self, fitted):
        _, store = fitted
        fc = forecast_one_step(store, 0.0)
        assert np.allclose(fc.draws, store.pi_draws([store.n - 1])[:, 0], atol=1e-14)

    def test_hand_case(self):
        st = one_draw_store(0.0, 1.0, np.zeros((2, 1)), np.zeros((2, 1)))
        fc = forecast_one_step(st, 1.0)
        assert fc.mean[0] == pytest.approx(1 / (1 + np.exp(-1)))
        assert fc.mean[0] == pytest.approx(0.7311, abs=1e-4)

    def test_extrapolates_coordinates(self):
        X = np.array([[1.0], [2.0]])
        dX = np.array([[0.5], [-1.0]])
        fc = forecast_one_step(one_draw_store(0.2, 0.0, X, dX), 0.4)
        s = 0.2 + (1.0 + 0.2) * (2.0 - 0.4)
        assert fc.mean[0] == pytest.approx(1 / (1 + np.exp(-s)))

    def test_pure_and_shapes(self, fitted):
        _, store = fitted
        a, b = forecast_one_step(store, 0.3), forecast_one_step(store, 0.3)
        assert np.array_equal(a.draws, b.draws)
        assert a.n_draws == store.n_draws
        assert np.all((a.mean > 0) & (a.mean < 1))
        lo, hi = a.intervals
        assert np.all(lo <= a.mean) and np.all(a.mean <= hi)
        M = a.mean_matrix()
        assert np.allclose(M, M.T) and not np.diag(M).any()

    def test_sign_flip_invariance(self, fitted):
        _, store = fitted
        base = forecast_one_step(store, 0.25).draws
        store.coords_last[..., :2] *= -1
        try:
            flipped = forecast_one_step(store, 0.25).draws
        finally:
            store.coords_last[..., :2] *= -1
        assert np.allclose(base, flipped, atol=1e-14)

    @pytest.mark.parametrize("delta", [-0.1, np.nan])
    def test_bad_delta(self, fitted, delta):
        with pytest.raises(ValueError):
            forecast_one_step(fitted[1], delta)

    def test_csv(self, fitted, tmp_path):
        _, store = fitted
        write_forecast_csv(forecast_one_step(store, 0.25), tmp_path / "f.csv")
        lines = (tmp_path / "f.csv").read_text().splitlines()
        assert lines[0] == "v,u,mean,q025,q975"
        assert len(lines) == 1 + 15
        v, u = map(int, lines[1].split(",")[:2])
        assert v > u


class TestPredict:
    def test_same_series_equals_in_sample(self, fitted):
        s, store = fitted
        res = predict_replicate(store, s)
        assert res.aucs == in_sample_auc(store, s, per_time=True)

    def test_prefix(self, fitted):
        s, store = fitted
        res = predict_replicate(store, s.window(0, 3))
        assert len(res.aucs) == 3

    def test_grid_mismatch(self, fitted):
        _, store = fitted
        with pytest.raises(DataError):
            predict_replicate(store, series(t0=0.1))
        with pytest.raises(DataError):
            predict_replicate(store, series(n=9))

    def test_constant_scores(self, fitted):
        s, store = fitted
        saved = store._pi_sum.copy()
        store._pi_sum[:] = 0.5 * store.n_retained
        try:
            res = predict_replicate(store, s)
        finally:
            store._pi_sum[:] = saved
        assert all(a == 0.5 or isinstance(a, Undefined) for a in res.aucs)

    def test_csv(self, tmp_path):
        write_predict_csv([0.9, Undefined("x")], tmp_path / "p.csv", [44, 45])
        assert (tmp_path / "p.csv").read_text().splitlines() == [
            "time_index,auc", "44,0.9", "45,NA"]


class TestOnline:
    def test_empty_segment_noop(self, fitted):
        s, store = fitted
        on = OnlineState.from_store(store, s)
        empty = NetworkSeries(TimeGrid([]), np.zeros((0, 6, 6)))
        out = online_update(on, empty)
        assert out.store is None and out.state is on

    def test_single_new_network(self, fitted):
        s, store = fitted
        on = OnlineState.from_store(store, s)
        new = series(seed=9, n=1, t0=s.times[-1] + 0.25)
        cfg = ModelConfig(H=2, n_iter=100, burn_in=50)
        out = online_update(on, new, 0, cfg, np.random.default_rng(0))
        draws = out.pi_draws()
        assert draws.shape == (50, 1, 15)
        # (0, 1] up to float64 rounding of very large logits
        assert np.all(np.isfinite(draws) & (draws > 0) & (draws <= 1))
        assert out.state.n == s.n + 1
        assert out.store.n == 2  # t_n plus the new time
        # earlier summaries untouched
        assert np.array_equal(out.state.baseline_mean[:s.n - 1], on.baseline_mean[:s.n - 1])

    def test_lookback_clamped(self, fitted):
        s, store = fitted
        on = OnlineState.from_store(store, s)
        new = series(seed=9, n=1, t0=s.times[-1] + 0.25)
        with pytest.warns(UserWarning, match="lookback"):
            out = online_update(on, new, 50, ModelConfig(H=2, n_iter=20, burn_in=10),
                                np.random.default_rng(0))
        assert out.store.n == s.n + 1

    def test_rejects_past_times(self, fitted):
        s, store = fitted
        on = OnlineState.from_store(store, s)
        with pytest.raises(DataError):
            online_update(on, series(n=1), 0, ModelConfig(H=2, n_iter=4, burn_in=2))

    def test_frozen_dynamics(self):
        """Tiny variances, tiny step and tight summaries: means stay put."""
        V, H, n = 4, 1, 3
        hist = NetworkSeries(TimeGrid([0.0, 1e-6, 2e-6]),
                             np.zeros((n, V, V), dtype=np.int8))
        m_b = np.array([0.3, 0.0, 0.0])
        m_c = np.random.default_rng(1).normal(size=(V, H, 3)) * [1, 0, 0]
        tight = 1e-6 * np.eye(3)
        vp = VarianceParams(1e-10, 1e-10, np.full((V, H), 1e-10), np.full((V, H), 1e-10))
        on = OnlineState(hist, np.tile(m_b, (n, 1)), np.tile(tight, (n, 1, 1)),
                         np.repeat(m_c[:, :, None], n, 2),
                         np.broadcast_to(tight, (V, H, n, 3, 3)).copy(), vp)
        new = simulate_from_pi(np.full((1, V, V), 0.5), np.random.default_rng(2),
                               TimeGrid([3e-6]))
        out = online_update(on, new, 0, ModelConfig(H=H, n_iter=1500, burn_in=500),
                            np.random.default_rng(3))
        st = out.store
        b = st.mu[:, -1]
        assert abs(b.mean() - m_b[0]) < 4 * b.std() / np.sqrt(b.size) + 1e-5
        X = st.X[:, -1, :, 0]
        se = X.std(0) / np.sqrt(X.shape[0])
        assert np.all(np.abs(X.mean(0) - m_c[:, 0, 0]) < 4 * se + 1e-5)

    def test_persistence(self, fitted, tmp_path):
        s, store = fitted
        on = OnlineState.from_store(store, s)
        on.save(tmp_path)
        back = OnlineState.load(tmp_path)
        assert back.history == on.history
        assert np.allclose(back.coords_cov, on.coords_cov)
        assert np.allclose(back.variances.x, on.variances.x)
        prior_a, prior_b = on.window_prior(3), back.window_prior(3)
        assert np.allclose(prior_a.coords_cov, prior_b.coords_cov)

    def test_summaries_psd(self, fitted):
        s, store = fitted
        on = OnlineState.from_store(store, s)
        for cov in (on.baseline_cov, on.coords_cov):
            assert np.allclose(cov, np.swapaxes(cov, -1, -2))
            assert np.linalg.eigvalsh(cov).min() > -1e-10

    def test_window_prior(self, fitted):
        s, store = fitted
        on = OnlineState.from_store(store, s)
        diffuse = on.window_prior(0)
        assert np.allclose(diffuse.baseline_cov, 100 * np.eye(3))
        p = on.window_prior(4)
        dt = s.times[4] - s.times[3]
        T = np.array([[1, dt, 0], [0, 1, dt], [0, 0, 1]])
        assert np.allclose(p.baseline_mean, T @ on.baseline_mean[3])
