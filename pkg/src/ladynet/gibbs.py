"""Polya-gamma Gibbs sampler for locally adaptive dynamic networks.

Edges are Bernoulli with logit ``mu(t) + x_v(t)'x_u(t)``. The baseline
``mu`` and every coordinate ``x_vh`` follow a nested-GP state equation with
states (level, derivative, local mean). One sweep:

1. Polya-gamma weights for every dyad and time;
2. joint draw of the baseline block by simulation smoothing;
3. for each actor in turn, joint draw of its H coordinate blocks;
4-5. inverse-gamma draws of the state noise variances;
6. edge probabilities.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field

import numba
import numpy as np
from scipy.special import expit

from .netseries import NetworkSeries
from .netstats import auc, dyad_index, is_undefined
from .polyagamma import sample_pg1_array
from .statespace import DIFFUSE_KAPPA, _info_simsmooth, info_simulation_smoother

__all__ = [
    "ModelConfig",
    "VarianceParams",
    "LatentState",
    "BlockPrior",
    "PosteriorStore",
    "edge_probability",
    "similarity",
    "step1_pg",
    "step2_baseline",
    "baseline_observation",
    "step3_actor",
    "step45_variances",
    "step6_probs",
    "initial_state",
    "run_gibbs",
    "run_chain",
    "in_sample_auc",
    "select_H",
    "save_store",
    "load_store",
]

log = logging.getLogger(__name__)

SIM_CLAMP = 700.0


@dataclass
class ModelConfig:
    H: int = 2
    a_mu: float = 0.01
    b_mu: float = 0.01
    a_z: float = 0.01
    b_z: float = 0.01
    a_x: float = 0.01
    b_x: float = 0.01
    a_m: float = 0.01
    b_m: float = 0.01
    kappa: float = DIFFUSE_KAPPA
    n_iter: int = 5000
    burn_in: int = 1000
    thin: int = 1
    seed: int | None = None

    def __post_init__(self):
        if self.H < 0:
            raise ValueError("H must be >= 0")
        if not self.n_iter > self.burn_in >= 0:
            raise ValueError("need n_iter > burn_in >= 0")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        for name in ("a_mu", "b_mu", "a_z", "b_z", "a_x", "b_x", "a_m", "b_m",
                     "kappa"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class VarianceParams:
    mu: float
    z: float
    x: np.ndarray  # (V, H)
    m: np.ndarray  # (V, H)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.m = np.asarray(self.m, dtype=float)
        if not (self.mu > 0 and self.z > 0 and np.all(self.x > 0)
                and np.all(self.m > 0)):
            raise ValueError("state noise variances must be positive")

    def copy(self) -> "VarianceParams":
        return VarianceParams(self.mu, self.z, self.x.copy(), self.m.copy())


@dataclass
class LatentState:
    """Full Gibbs state.

    ``baseline`` is ``(n, 3)`` holding ``(mu, mu', z)``; ``coords`` is
    ``(V, H, n, 3)`` holding ``(x, x', m)``; ``omega`` is ``(n, D)`` over
    the ``v > u`` dyads.
    """

    baseline: np.ndarray
    coords: np.ndarray
    omega: np.ndarray
    variances: VarianceParams

    @property
    def mu(self) -> np.ndarray:
        return self.baseline[:, 0]

    @property
    def X(self) -> np.ndarray:
        """Latent coordinates as ``(n, V, H)``."""
        return np.ascontiguousarray(self.coords[..., 0].transpose(2, 0, 1))

    def copy(self) -> "LatentState":
        return LatentState(self.baseline.copy(), self.coords.copy(),
                           self.omega.copy(), self.variances.copy())


@dataclass
class BlockPrior:
    """Normal distribution of every 3-state block at the first grid time."""

    baseline_mean: np.ndarray  # (3,)
    baseline_cov: np.ndarray  # (3, 3)
    coords_mean: np.ndarray  # (V, H, 3)
    coords_cov: np.ndarray  # (V, H, 3, 3)

    @classmethod
    def diffuse(cls, V, H, kappa=DIFFUSE_KAPPA) -> "BlockPrior":
        eye = kappa * np.eye(3)
        return cls(np.zeros(3), eye.copy(), np.zeros((V, H, 3)),
                   np.broadcast_to(eye, (V, H, 3, 3)).copy())


def edge_probability(mu_t, x_v, x_u):
    """``1 / (1 + exp(-mu_t - x_v'x_u))``."""
    s = np.asarray(mu_t, dtype=float) + np.sum(
        np.asarray(x_v, dtype=float) * np.asarray(x_u, dtype=float), axis=-1)
    return expit(np.clip(s, -SIM_CLAMP, SIM_CLAMP))


def similarity(mu, X) -> np.ndarray:
    """``mu(t_i) + x_v(t_i)'x_u(t_i)`` for all dyads, shape ``(n, D)``."""
    V = X.shape[1]
    rows, cols = dyad_index(V)
    s = np.asarray(mu)[:, None] + np.einsum("tdh,tdh->td", X[:, rows], X[:, cols])
    return np.clip(s, -SIM_CLAMP, SIM_CLAMP)


# ---------------------------------------------------------------------------
# model structure helpers

def _ngp_system(deltas, var_level, var_mean):
    """Block-diagonal nGP system for K blocks over the n-1 steps.

    ``var_level`` / ``var_mean`` have length K. Returns ``T``, ``RQR`` and
    a factor of ``RQR``, each ``(n-1, 3K, 3K)``.
    """
    var_level = np.atleast_1d(np.asarray(var_level, dtype=float))
    var_mean = np.atleast_1d(np.asarray(var_mean, dtype=float))
    K = var_level.size
    m = deltas.size
    d = 3 * K
    T = np.zeros((m, d, d))
    diag = np.zeros((m, d))
    for k in range(K):
        j = 3 * k
        T[:, j, j] = T[:, j + 1, j + 1] = T[:, j + 2, j + 2] = 1.0
        T[:, j, j + 1] = deltas
        T[:, j + 1, j + 2] = deltas
        diag[:, j + 1] = var_level[k] * deltas
        diag[:, j + 2] = var_mean[k] * deltas
    RQR = np.zeros((m, d, d))
    factor = np.zeros((m, d, d))
    idx = np.arange(d)
    RQR[:, idx, idx] = diag
    factor[:, idx, idx] = np.sqrt(diag)
    return T, RQR, factor


def _psd_factor(S):
    w, U = np.linalg.eigh(0.5 * (S + S.T))
    return U * np.sqrt(np.clip(w, 0.0, None))


class _Data:
    """Precomputed views of the observed networks used in every sweep."""

    def __init__(self, series: NetworkSeries):
        self.V = series.V
        self.n = series.n
        self.rows, self.cols = dyad_index(self.V)
        self.Y = series.adjacency.astype(float)
        self.y_dyad = self.Y[:, self.rows, self.cols]
        self.deltas = series.grid.deltas.astype(float)


def _omega_matrix(omega, data):
    W = np.zeros((data.n, data.V, data.V))
    W[:, data.rows, data.cols] = omega
    W[:, data.cols, data.rows] = omega
    return W


# ---------------------------------------------------------------------------
# the six steps

def step1_pg(state: LatentState, series, rng) -> np.ndarray:
    """Redraw every dyad-time Polya-gamma weight given the current similarity."""
    s = similarity(state.mu, state.X)
    state.omega = sample_pg1_array(s, rng)
    return state.omega


def _baseline_info(state, data):
    """Collapsed data ``(A, b)`` of the transformed baseline observations."""
    X = state.X
    dot = np.einsum("tdh,tdh->td", X[:, data.rows], X[:, data.cols])
    w = state.omega
    r = data.y_dyad - 0.5 - w * dot
    A = w.sum(axis=1)
    assert np.all(A > 0), "Polya-gamma weights must be positive"
    return A, r.sum(axis=1)


def baseline_observation(state: LatentState, series) -> tuple:
    """Transformed baseline data ``(Y_mu, 1 / sum(omega))`` per time.

    ``Y_mu(t_i) = sum_vu r_vu(t_i) / sum_vu omega_vu(t_i)`` with
    ``r_vu = Y_vu - 0.5 - omega_vu x_v'x_u``.
    """
    A, b = _baseline_info(state, _Data(series))
    return b / A, 1.0 / A


def step2_baseline(state: LatentState, series, rng, prior: BlockPrior | None = None,
                   _data=None, _system=None) -> np.ndarray:
    """Joint draw of ``(mu, mu', z)`` over all times.

    Given the weights, the baseline sees one Gaussian observation per time,
    ``sum(r) / sum(omega)`` with variance ``1 / sum(omega)``.
    """
    data = _data or _Data(series)
    if prior is None:
        prior = BlockPrior.diffuse(data.V, 0)
    A, b = _baseline_info(state, data)
    if _system is None:
        vp = state.variances
        _system = _ngp_system(data.deltas, [vp.mu], [vp.z])
    T, RQR, factor = _system
    b_noise = np.sqrt(A) * rng.standard_normal(A.size)
    draw = info_simulation_smoother(
        T, RQR, A[:, None, None], b[:, None], b_noise[:, None], [0],
        prior.baseline_mean, prior.baseline_cov, rng,
        RQR_factor=factor, init_factor=_psd_factor(prior.baseline_cov))
    state.baseline = draw
    return draw


@numba.njit(cache=True)
def _update_actor(v, Y, W, mu, coords, X, var_x, var_m, deltas, prior_mean,
                  prior_cov, prior_factor, rng):
    n, V, H = X.shape
    d = 3 * H
    A = np.zeros((n, H, H))
    b = np.zeros((n, H))
    b_noise = np.zeros((n, H))
    for t in range(n):
        for u in range(V):
            if u == v:
                continue
            w = W[t, v, u]
            r = Y[t, v, u] - 0.5 - w * mu[t]
            sw = math.sqrt(w) * rng.standard_normal()
            for h in range(H):
                xh = X[t, u, h]
                b[t, h] += r * xh
                b_noise[t, h] += sw * xh
                for g in range(H):
                    A[t, h, g] += w * xh * X[t, u, g]
    m = max(n - 1, 0)
    T = np.zeros((m, d, d))
    RQR = np.zeros((m, d, d))
    factor = np.zeros((m, d, d))
    for i in range(m):
        dt = deltas[i]
        for h in range(H):
            j = 3 * h
            T[i, j, j] = 1.0
            T[i, j + 1, j + 1] = 1.0
            T[i, j + 2, j + 2] = 1.0
            T[i, j, j + 1] = dt
            T[i, j + 1, j + 2] = dt
            RQR[i, j + 1, j + 1] = var_x[v, h] * dt
            RQR[i, j + 2, j + 2] = var_m[v, h] * dt
            factor[i, j + 1, j + 1] = math.sqrt(var_x[v, h] * dt)
            factor[i, j + 2, j + 2] = math.sqrt(var_m[v, h] * dt)
    a1 = np.zeros(d)
    P1 = np.zeros((d, d))
    F1 = np.zeros((d, d))
    for h in range(H):
        for r in range(3):
            a1[3 * h + r] = prior_mean[v, h, r]
            for c in range(3):
                P1[3 * h + r, 3 * h + c] = prior_cov[v, h, r, c]
                F1[3 * h + r, 3 * h + c] = prior_factor[v, h, r, c]
    sel = np.arange(0, d, 3)
    z0 = np.empty(d)
    for r in range(d):
        z0[r] = rng.standard_normal()
    eta = np.empty((m, d))
    for i in range(m):
        for r in range(d):
            eta[i, r] = rng.standard_normal()
    draw = _info_simsmooth(T, factor, RQR, A, b, b_noise, sel, a1, F1, P1,
                           z0, eta)
    for t in range(n):
        for h in range(H):
            for r in range(3):
                coords[v, h, t, r] = draw[t, 3 * h + r]
            X[t, v, h] = draw[t, 3 * h]


@numba.njit(cache=True)
def _actor_sweep(Y, W, mu, coords, X, var_x, var_m, deltas, prior_mean,
                 prior_cov, prior_factor, rng):
    for v in range(X.shape[1]):
        _update_actor(v, Y, W, mu, coords, X, var_x, var_m, deltas,
                      prior_mean, prior_cov, prior_factor, rng)


def _prior_factors(prior: BlockPrior) -> np.ndarray:
    cov = prior.coords_cov
    out = np.zeros_like(cov)
    for idx in np.ndindex(cov.shape[:2]):
        out[idx] = _psd_factor(cov[idx])
    return out


def step3_actor(v: int, state: LatentState, series, rng,
                prior: BlockPrior | None = None, _data=None, _W=None,
                _X=None, _factors=None) -> np.ndarray:
    """Joint draw of actor ``v``'s H coordinate blocks over all times.

    The other actors' current coordinates act as the observation matrix:
    with weights ``omega_vu`` the transformed responses are
    ``(Y_vu - 0.5) / omega_vu - mu`` with variance ``1 / omega_vu``.
    Returns the new ``(H, n, 3)`` block for ``v`` (and writes it into
    ``state``); a no-op when ``H == 0``.
    """
    H = state.coords.shape[1]
    if H == 0:
        return state.coords[v]
    data = _data or _Data(series)
    if prior is None:
        prior = BlockPrior.diffuse(data.V, H)
    W = _omega_matrix(state.omega, data) if _W is None else _W
    X = state.X if _X is None else _X
    factors = _prior_factors(prior) if _factors is None else _factors
    vp = state.variances
    _update_actor(int(v), data.Y, W, np.ascontiguousarray(state.baseline[:, 0]),
                  state.coords, X, vp.x, vp.m, data.deltas,
                  np.ascontiguousarray(prior.coords_mean, dtype=float),
                  np.ascontiguousarray(prior.coords_cov, dtype=float),
                  factors, rng)
    return state.coords[v]


def _ig_draw(shape, rate, rng):
    return rate / rng.gamma(shape, 1.0, size=np.shape(rate))


def variance_posterior_params(state: LatentState, deltas, config: ModelConfig):
    """Inverse-gamma ``(shape, rate)`` of each noise variance's full conditional.

    Returns a dict with keys ``mu``, ``z``, ``x``, ``m``.
    """
    n = state.baseline.shape[0]
    deltas = np.asarray(deltas, dtype=float)
    half = 0.5 * (n - 1)

    def sums(level_deriv, mean):
        # level_deriv, mean: (..., n) derivative and local-mean trajectories
        d1 = level_deriv[..., 1:] - level_deriv[..., :-1] - mean[..., :-1] * deltas
        d2 = mean[..., 1:] - mean[..., :-1]
        return (d1 ** 2 / deltas).sum(-1), (d2 ** 2 / deltas).sum(-1)

    s_mu, s_z = sums(state.baseline[:, 1], state.baseline[:, 2])
    s_x, s_m = sums(state.coords[..., 1], state.coords[..., 2])
    return {
        "mu": (config.a_mu + half, config.b_mu + 0.5 * s_mu),
        "z": (config.a_z + half, config.b_z + 0.5 * s_z),
        "x": (config.a_x + half, config.b_x + 0.5 * s_x),
        "m": (config.a_m + half, config.b_m + 0.5 * s_m),
    }


def step45_variances(state: LatentState, grid, config: ModelConfig, rng):
    """Draw every state noise variance from its inverse-gamma full conditional."""
    deltas = grid.deltas if hasattr(grid, "deltas") else np.diff(grid)
    p = variance_posterior_params(state, deltas, config)
    state.variances = VarianceParams(
        float(_ig_draw(*p["mu"], rng)), float(_ig_draw(*p["z"], rng)),
        _ig_draw(*p["x"], rng), _ig_draw(*p["m"], rng))
    return state.variances


def step6_probs(state: LatentState) -> np.ndarray:
    """Edge probabilities ``(n, D)`` over the ``v > u`` dyads."""
    return expit(similarity(state.mu, state.X))


# ---------------------------------------------------------------------------
# driver

def initial_state(series: NetworkSeries, H: int, rng, prior: BlockPrior | None = None,
                  variances: VarianceParams | None = None) -> LatentState:
    """Starting point: logit of the observed density and small random coordinates."""
    n, V = series.n, series.V
    rows, cols = dyad_index(V)
    D = rows.size
    baseline = np.zeros((n, 3))
    if D:
        dens = series.adjacency[:, rows, cols].mean(axis=1)
        dens = np.clip(dens, 0.5 / D, 1 - 0.5 / D)
        baseline[:, 0] = np.log(dens / (1 - dens))
    coords = np.zeros((V, H, n, 3))
    coords[..., 0] = 0.1 * rng.standard_normal((V, H, 1))
    # an informative prior (online windows) is a better start than the data
    if prior is not None and np.any(prior.baseline_mean):
        baseline[:] = prior.baseline_mean
    if prior is not None and H and np.any(prior.coords_mean):
        coords[:] = prior.coords_mean[:, :, None, :]
    if variances is None:
        variances = VarianceParams(1.0, 1.0, np.ones((V, H)), np.ones((V, H)))
    omega = np.full((n, D), 0.25)
    return LatentState(baseline, coords, omega, variances)


class PosteriorStore:
    """Retained draws of a Gibbs run and the summaries derived from them.

    Edge probabilities are reconstructed on demand from the stored baseline
    and coordinate draws, which keeps memory at ``S * n * (1 + V*H)``.
    """

    def __init__(self, times, V, H, n_draws, config=None, labels=None):
        self.times = np.asarray(times, dtype=float)
        self.V, self.H = V, H
        n = self.times.size
        self.rows, self.cols = dyad_index(V)
        self.config = config
        self.labels = dict(labels or {})
        self.mu = np.empty((n_draws, n))
        self.X = np.empty((n_draws, n, V, H))
        self.baseline_last = np.empty((n_draws, 3))
        self.coords_last = np.empty((n_draws, V, H, 3))
        self.var_mu = np.empty(n_draws)
        self.var_z = np.empty(n_draws)
        self.var_x = np.empty((n_draws, V, H))
        self.var_m = np.empty((n_draws, V, H))
        self._k = 0
        self.n_retained = 0
        self._pi_sum = np.zeros((n, self.rows.size))
        self._b_sum = np.zeros((n, 3))
        self._b_outer = np.zeros((n, 3, 3))
        self._c_sum = np.zeros((V, H, n, 3))
        self._c_outer = np.zeros((V, H, n, 3, 3))
        self.trace = []

    @property
    def n(self) -> int:
        return self.times.size

    @property
    def n_draws(self) -> int:
        return self._k

    def record(self, state: LatentState, pi, keep: bool):
        self.n_retained += 1
        self._pi_sum += pi
        self._b_sum += state.baseline
        self._b_outer += np.einsum("ti,tj->tij", state.baseline, state.baseline)
        self._c_sum += state.coords
        self._c_outer += np.einsum("vhti,vhtj->vhtij", state.coords, state.coords)
        if not keep:
            return
        k = self._k
        self.mu[k] = state.baseline[:, 0]
        self.X[k] = state.X
        self.baseline_last[k] = state.baseline[-1]
        self.coords_last[k] = state.coords[:, :, -1, :]
        vp = state.variances
        self.var_mu[k], self.var_z[k] = vp.mu, vp.z
        self.var_x[k], self.var_m[k] = vp.x, vp.m
        self._k += 1

    # -- derived quantities -------------------------------------------------
    @property
    def pi_mean(self) -> np.ndarray:
        """Posterior mean edge probabilities ``(n, D)`` over all retained sweeps."""
        return self._pi_sum / max(self.n_retained, 1)

    def pi_draws(self, times=None) -> np.ndarray:
        """Edge-probability draws ``(S, n_sel, D)`` at the given time indices."""
        idx = np.arange(self.n) if times is None else np.atleast_1d(times)
        mu = self.mu[: self._k][:, idx]
        X = self.X[: self._k][:, idx]
        dot = np.einsum("stdh,stdh->std", X[:, :, self.rows], X[:, :, self.cols])
        return expit(np.clip(mu[..., None] + dot, -SIM_CLAMP, SIM_CLAMP))

    def state_moments(self):
        """Posterior means and covariances of every 3-state block at every time.

        Returns ``(b_mean (n,3), b_cov (n,3,3), c_mean (V,H,n,3),
        c_cov (V,H,n,3,3))``.
        """
        S = max(self.n_retained, 1)
        b_mean = self._b_sum / S
        b_cov = self._b_outer / S - np.einsum("ti,tj->tij", b_mean, b_mean)
        c_mean = self._c_sum / S
        c_cov = self._c_outer / S - np.einsum("vhti,vhtj->vhtij", c_mean, c_mean)
        return b_mean, b_cov, c_mean, c_cov

    def variance_means(self) -> VarianceParams:
        k = self._k
        return VarianceParams(float(self.var_mu[:k].mean()),
                              float(self.var_z[:k].mean()),
                              self.var_x[:k].mean(axis=0),
                              self.var_m[:k].mean(axis=0))

    def in_sample_auc(self, series: NetworkSeries, per_time: bool = False):
        return in_sample_auc(self, series, per_time)

    def truncate(self):
        """Drop unused preallocated draw slots."""
        k = self._k
        for name in ("mu", "X", "baseline_last", "coords_last", "var_mu",
                     "var_z", "var_x", "var_m"):
            setattr(self, name, getattr(self, name)[:k])


def in_sample_auc(store: PosteriorStore, series: NetworkSeries, per_time=False):
    """AUC of the posterior-mean edge probabilities against the data.

    Pools all dyad-times by default; ``per_time`` gives one value per time
    (``Undefined`` where a time has a single class).
    """
    y = series.adjacency[:, store.rows, store.cols]
    scores = store.pi_mean
    if per_time:
        return [auc(scores[t], y[t]) for t in range(y.shape[0])]
    return auc(scores, y)


def run_chain(series: NetworkSeries, config: ModelConfig, rng=None,
              prior: BlockPrior | None = None,
              fixed_variances: VarianceParams | None = None,
              init: LatentState | None = None, progress=None) -> PosteriorStore:
    """Run the sampler and collect post-burn-in draws.

    With ``fixed_variances`` the noise variances are held at the given values
    and steps 4-5 are skipped (the online-updating mode).
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    if series.n < 1:
        raise ValueError("series has no time points")
    H, V = config.H, series.V
    data = _Data(series)
    if prior is None:
        prior = BlockPrior.diffuse(V, H, config.kappa)
    state = init.copy() if init is not None else initial_state(
        series, H, rng, prior, fixed_variances)
    if fixed_variances is not None:
        state.variances = fixed_variances.copy()
    prior_mean = np.ascontiguousarray(prior.coords_mean, dtype=float)
    prior_cov = np.ascontiguousarray(prior.coords_cov, dtype=float)
    prior_factors = _prior_factors(prior)
    n_keep = len(range(config.burn_in, config.n_iter, config.thin))
    store = PosteriorStore(series.times, V, H, n_keep, config, series.labels)
    fixed_system = None
    if fixed_variances is not None:
        fixed_system = _ngp_system(data.deltas, [fixed_variances.mu],
                                   [fixed_variances.z])
    for it in range(config.n_iter):
        step1_pg(state, series, rng)
        system = fixed_system or _ngp_system(data.deltas, [state.variances.mu],
                                             [state.variances.z])
        step2_baseline(state, series, rng, prior, _data=data, _system=system)
        if H > 0:
            W = _omega_matrix(state.omega, data)
            vp = state.variances
            _actor_sweep(data.Y, W, np.ascontiguousarray(state.baseline[:, 0]),
                         state.coords, state.X, vp.x, vp.m, data.deltas,
                         prior_mean, prior_cov, prior_factors, rng)
        if fixed_variances is None:
            step45_variances(state, series.grid, config, rng)
        pi = step6_probs(state)
        if it >= config.burn_in:
            keep = (it - config.burn_in) % config.thin == 0
            store.record(state, pi, keep)
        store.trace.append((it, state.variances.mu, state.variances.z,
                            float(pi.mean())))
        if progress is not None:
            progress(it)
    store.truncate()
    store.last_state = state
    return store


def run_gibbs(config: ModelConfig, series: NetworkSeries, rng=None,
              progress=None) -> PosteriorStore:
    """Fit the model to ``series`` from a diffuse start."""
    if series.n < 2:
        raise ValueError("inference needs at least two time points")
    return run_chain(series, config, rng=rng, progress=progress)


def select_H(series: NetworkSeries, config: ModelConfig, threshold: float = 0.01,
             max_H: int = 8, return_fits: bool = False):
    """Increase H from 0 until the in-sample AUC gain drops below ``threshold``.

    Returns ``(H_star, aucs)`` where ``aucs[H]`` is the pooled in-sample AUC;
    with ``return_fits`` the fitted stores are returned as a third element.
    """
    aucs, fits = {}, {}
    H = 0
    while True:
        cfg = ModelConfig(**{**config.to_dict(), "H": H})
        rng = np.random.default_rng(None if config.seed is None else [config.seed, H])
        store = run_gibbs(cfg, series, rng)
        value = in_sample_auc(store, series)
        if is_undefined(value):
            raise ValueError("in-sample AUC undefined: data has a single class")
        aucs[H] = value
        if return_fits:
            fits[H] = store
        log.info("H=%d in-sample AUC %.4f", H, value)
        if H > 0 and aucs[H] - aucs[H - 1] < threshold:
            H_star = H - 1
            break
        if H >= max_H:
            warnings.warn(f"select_H reached max_H={max_H} without stopping")
            H_star = H
            break
        H += 1
    if return_fits:
        return H_star, aucs, fits
    return H_star, aucs


# ---------------------------------------------------------------------------
# persistence

_STORE_ARRAYS = ("times", "mu", "X", "baseline_last", "coords_last", "var_mu",
                 "var_z", "var_x", "var_m", "_pi_sum", "_b_sum", "_b_outer",
                 "_c_sum", "_c_outer")


def save_store(store: PosteriorStore, directory, pi_thin: int = 1,
               write_pi: bool = True, chunk: int = 64):
    """Write a fit's run directory.

    Files: ``config.json``, ``posterior_pi.bin`` (float64, C order, shape
    draws x dyads x times, described by ``posterior_pi.json``),
    ``terminal_state.json``, ``variances.json``, ``trace_summaries.csv`` and
    ``store.npz`` (everything needed by :func:`load_store`).
    """
    import csv
    import json
    import os

    os.makedirs(directory, exist_ok=True)
    cfg = store.config.to_dict() if store.config is not None else {}
    with open(os.path.join(directory, "config.json"), "w") as fh:
        json.dump(cfg, fh, indent=1)

    if write_pi:
        keep = np.arange(0, store.n_draws, max(int(pi_thin), 1))
        D = store.rows.size
        with open(os.path.join(directory, "posterior_pi.bin"), "wb") as fh:
            for lo in range(0, keep.size, chunk):
                idx = keep[lo:lo + chunk]
                mu = store.mu[idx]
                X = store.X[idx]
                dot = np.einsum("stdh,stdh->std", X[:, :, store.rows],
                                X[:, :, store.cols])
                pi = expit(np.clip(mu[..., None] + dot, -SIM_CLAMP, SIM_CLAMP))
                np.ascontiguousarray(pi.transpose(0, 2, 1)).tofile(fh)
        with open(os.path.join(directory, "posterior_pi.json"), "w") as fh:
            json.dump({"shape": [int(keep.size), int(D), store.n],
                       "dims": ["draw", "dyad", "time"], "dtype": "float64",
                       "order": "C", "thin": int(pi_thin),
                       "dyad_order": "lower triangle, row-major (v > u)",
                       "V": store.V}, fh, indent=1)

    b_mean, b_cov, c_mean, c_cov = store.state_moments()
    with open(os.path.join(directory, "terminal_state.json"), "w") as fh:
        json.dump({"time": float(store.times[-1]),
                   "baseline_mean": b_mean[-1].tolist(),
                   "baseline_cov": b_cov[-1].tolist(),
                   "coords_mean": c_mean[:, :, -1].tolist(),
                   "coords_cov": c_cov[:, :, -1].tolist()}, fh)
    vp = store.variance_means()
    with open(os.path.join(directory, "variances.json"), "w") as fh:
        json.dump({"mu": vp.mu, "z": vp.z, "x": vp.x.tolist(),
                   "m": vp.m.tolist()}, fh, indent=1)
    with open(os.path.join(directory, "trace_summaries.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "var_mu", "var_z", "mean_pi"])
        for row in store.trace:
            w.writerow([int(row[0])] + [repr(float(x)) for x in row[1:]])

    arrays = {name.lstrip("_"): getattr(store, name) for name in _STORE_ARRAYS}
    np.savez(os.path.join(directory, "store.npz"), n_retained=store.n_retained,
             trace=np.asarray(store.trace, dtype=float).reshape(-1, 4), **arrays)
    with open(os.path.join(directory, "labels.json"), "w") as fh:
        json.dump({k: list(v) for k, v in store.labels.items()}, fh)


def load_store(directory) -> PosteriorStore:
    """Rebuild a :class:`PosteriorStore` written by :func:`save_store`."""
    import json
    import os

    with open(os.path.join(directory, "config.json")) as fh:
        cfg = json.load(fh)
    labels = {}
    path = os.path.join(directory, "labels.json")
    if os.path.exists(path):
        with open(path) as fh:
            labels = json.load(fh)
    with np.load(os.path.join(directory, "store.npz")) as z:
        S, n, V, H = z["X"].shape
        store = PosteriorStore(z["times"], V, H, S,
                               ModelConfig(**cfg) if cfg else None, labels)
        for name in _STORE_ARRAYS:
            setattr(store, name, z[name.lstrip("_")].copy())
        store._k = S
        store.n_retained = int(z["n_retained"])
        store.trace = [(int(r[0]), *map(float, r[1:])) for r in z["trace"]]
    return store
