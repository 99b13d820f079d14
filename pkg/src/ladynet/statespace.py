"""Linear-Gaussian state-space machinery for nested-GP latent trajectories.

Each latent trajectory is a 3-state block (level, derivative, local mean)
evolving as a first-order stochastic Taylor expansion over a time grid.
Several blocks stack into a block-diagonal state. Two code paths live here:

* a generic engine on :class:`SSMProblem` (explicit observation matrices,
  time-varying observation dimension) used as the reference, and
* a collapsed "information" path used inside the Gibbs sampler, where all
  observations at a time enter only through ``A_i = Z_i' W_i Z_i`` and
  ``b_i = Z_i' W_i y_i`` restricted to the level coordinates. Both are
  O(n) in the number of time points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy.linalg import block_diag

__all__ = [
    "NumericalError",
    "NGPTransition",
    "build_ngp_transition",
    "block_transition",
    "SSMProblem",
    "ngp_problem",
    "FilterResult",
    "kalman_filter",
    "smoother",
    "simulation_smoother",
    "predictive_state",
    "simulate_prior",
    "info_simulation_smoother",
    "info_smoothed_mean",
    "DIFFUSE_KAPPA",
]

DIFFUSE_KAPPA = 100.0


class NumericalError(ArithmeticError):
    """Raised when a recursion produces a non-positive innovation variance."""


@dataclass(frozen=True)
class NGPTransition:
    T: np.ndarray
    R: np.ndarray
    Q: np.ndarray

    @property
    def state_cov(self) -> np.ndarray:
        """``R Q R'``, the 3x3 covariance of the state disturbance."""
        return self.R @ self.Q @ self.R.T


def build_ngp_transition(delta, var_level, var_mean) -> NGPTransition:
    """Transition of one (level, derivative, mean) block over a step ``delta``.

    ``var_level`` drives the derivative innovation and ``var_mean`` the
    local-mean innovation, both scaled by ``delta``.
    """
    delta, var_level, var_mean = float(delta), float(var_level), float(var_mean)
    if not delta > 0:
        raise ValueError(f"time step must be positive, got {delta}")
    if not (var_level > 0 and var_mean > 0):
        raise ValueError("noise variances must be positive")
    T = np.array([[1.0, delta, 0.0], [0.0, 1.0, delta], [0.0, 0.0, 1.0]])
    R = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    Q = np.diag([var_level * delta, var_mean * delta])
    return NGPTransition(T, R, Q)


def block_transition(delta, variances):
    """Block-diagonal ``(T, RQR')`` for several nGP blocks sharing ``delta``.

    ``variances`` is a sequence of ``(var_level, var_mean)`` pairs.
    """
    blocks = [build_ngp_transition(delta, a, b) for a, b in variances]
    return (block_diag(*[b.T for b in blocks]),
            block_diag(*[b.state_cov for b in blocks]))


@dataclass
class SSMProblem:
    """A linear-Gaussian state-space model with diagonal observation noise.

    ``transitions[i]`` and ``state_covs[i]`` map time ``i`` to ``i+1``
    (length n-1). ``Z[i]`` is ``(p_i, d)``, ``obs_var[i]`` and ``y[i]``
    have length ``p_i``; ``p_i`` may be zero.
    """

    transitions: list
    state_covs: list
    Z: list
    obs_var: list
    y: list
    init_mean: np.ndarray
    init_cov: np.ndarray

    def __post_init__(self):
        n = len(self.Z)
        if len(self.transitions) != n - 1 or len(self.state_covs) != n - 1:
            raise ValueError("need n-1 transitions for n observation times")
        if len(self.obs_var) != n or len(self.y) != n:
            raise ValueError("Z, obs_var and y must have one entry per time")
        d = self.dim
        self.Z = [np.asarray(z, dtype=float).reshape(-1, d) for z in self.Z]
        self.obs_var = [np.asarray(h, dtype=float).ravel() for h in self.obs_var]
        self.y = [np.asarray(v, dtype=float).ravel() for v in self.y]
        for i, (z, h, v) in enumerate(zip(self.Z, self.obs_var, self.y)):
            if not (z.shape[0] == h.size == v.size):
                raise ValueError(f"observation sizes disagree at time {i}")
            if np.any(h <= 0):
                raise ValueError(f"observation variances must be positive (time {i})")
        self.init_mean = np.asarray(self.init_mean, dtype=float)
        self.init_cov = np.asarray(self.init_cov, dtype=float)

    @property
    def n(self) -> int:
        return len(self.Z)

    @property
    def dim(self) -> int:
        return np.asarray(self.init_mean).size

    def with_observations(self, y) -> "SSMProblem":
        return SSMProblem(self.transitions, self.state_covs, self.Z,
                          self.obs_var, y, self.init_mean, self.init_cov)


def ngp_problem(times, variances, Z, obs_var, y, kappa=DIFFUSE_KAPPA,
                init_mean=None, init_cov=None) -> SSMProblem:
    """Stack ``len(variances)`` nGP blocks on the grid ``times``."""
    times = np.asarray(times, dtype=float)
    d = 3 * len(variances)
    pairs = [block_transition(dt, variances) for dt in np.diff(times)]
    if init_mean is None:
        init_mean = np.zeros(d)
    if init_cov is None:
        init_cov = kappa * np.eye(d)
    return SSMProblem([p[0] for p in pairs], [p[1] for p in pairs],
                      list(Z), list(obs_var), list(y), init_mean, init_cov)


@dataclass
class FilterResult:
    pred_means: np.ndarray  # (n, d) state mean at i given data up to i-1
    pred_covs: np.ndarray
    means: np.ndarray  # (n, d) filtered
    covs: np.ndarray
    loglik: float


def kalman_filter(problem: SSMProblem) -> FilterResult:
    """Forward filter with observations processed one at a time.

    The observation noise is diagonal, so updating with the entries of
    ``y_i`` sequentially is exact. Each scalar update uses the Joseph form.
    """
    n, d = problem.n, problem.dim
    pred_m = np.empty((n, d))
    pred_P = np.empty((n, d, d))
    filt_m = np.empty((n, d))
    filt_P = np.empty((n, d, d))
    eye = np.eye(d)
    m, P = problem.init_mean.copy(), problem.init_cov.copy()
    loglik = 0.0
    for i in range(n):
        if i > 0:
            T = problem.transitions[i - 1]
            m = T @ m
            P = T @ P @ T.T + problem.state_covs[i - 1]
            P = 0.5 * (P + P.T)
        pred_m[i], pred_P[i] = m, P
        for z, h, yv in zip(problem.Z[i], problem.obs_var[i], problem.y[i]):
            Pz = P @ z
            F = z @ Pz + h
            if not F > 0:
                raise NumericalError(f"non-positive innovation variance at time {i}")
            K = Pz / F
            v = yv - z @ m
            m = m + K * v
            IKz = eye - np.outer(K, z)
            P = IKz @ P @ IKz.T + h * np.outer(K, K)
            P = 0.5 * (P + P.T)
            loglik -= 0.5 * (np.log(2.0 * np.pi * F) + v * v / F)
        filt_m[i], filt_P[i] = m, P
    return FilterResult(pred_m, pred_P, filt_m, filt_P, float(loglik))


def smoother(problem: SSMProblem, filtered: FilterResult | None = None):
    """Fixed-interval (Rauch-Tung-Striebel) smoother.

    Returns ``(means, covs)`` of the states given all observations.
    """
    f = kalman_filter(problem) if filtered is None else filtered
    n = problem.n
    means, covs = f.means.copy(), f.covs.copy()
    for i in range(n - 2, -1, -1):
        T = problem.transitions[i]
        # J = C_i T' P_{i+1}^{-1}
        J = np.linalg.solve(f.pred_covs[i + 1], T @ f.covs[i]).T
        means[i] = f.means[i] + J @ (means[i + 1] - f.pred_means[i + 1])
        C = f.covs[i] + J @ (covs[i + 1] - f.pred_covs[i + 1]) @ J.T
        covs[i] = 0.5 * (C + C.T)
    return means, covs


def _psd_factor(S):
    """A matrix L with L L' = S for symmetric PSD (possibly singular) S."""
    w, U = np.linalg.eigh(0.5 * (S + S.T))
    return U * np.sqrt(np.clip(w, 0.0, None))


def simulate_prior(problem: SSMProblem, rng):
    """Draw ``(states, observations)`` jointly from the model."""
    n, d = problem.n, problem.dim
    states = np.empty((n, d))
    states[0] = problem.init_mean + _psd_factor(problem.init_cov) @ rng.standard_normal(d)
    for i in range(1, n):
        L = _psd_factor(problem.state_covs[i - 1])
        states[i] = problem.transitions[i - 1] @ states[i - 1] + L @ rng.standard_normal(d)
    obs = [z @ s + np.sqrt(h) * rng.standard_normal(h.size)
           for z, h, s in zip(problem.Z, problem.obs_var, states)]
    return states, obs


def simulation_smoother(problem: SSMProblem, rng) -> np.ndarray:
    """One joint draw of all states given all observations.

    Mean-correction scheme: simulate ``(a+, y+)`` from the model and return
    ``a+ + E[a | y - y+]`` where the expectation uses a zero prior mean.
    The smoothed mean is affine in the data, which makes this exact.
    """
    plus_states, plus_obs = simulate_prior(problem, rng)
    resid = [y - yp for y, yp in zip(problem.y, plus_obs)]
    centred = SSMProblem(problem.transitions, problem.state_covs, problem.Z,
                         problem.obs_var, resid, np.zeros(problem.dim),
                         problem.init_cov)
    means, _ = smoother(centred)
    return plus_states + means


def predictive_state(mean, cov, transition, state_cov=None):
    """One-step predictive ``N(T m, T C T' + RQR')``.

    ``transition`` is either an :class:`NGPTransition` or a matrix ``T``
    (then ``state_cov`` must be given).
    """
    if isinstance(transition, NGPTransition):
        T, state_cov = transition.T, transition.state_cov
    else:
        T = np.asarray(transition, dtype=float)
    mean, cov = np.asarray(mean, dtype=float), np.asarray(cov, dtype=float)
    P = T @ cov @ T.T + state_cov
    return T @ mean, 0.5 * (P + P.T)


# ---------------------------------------------------------------------------
# collapsed path used by the Gibbs sampler

@numba.njit(cache=True)
def _chol_solve_inplace(S, B, L):
    """Solve ``S X = B`` for SPD ``S`` (d x d); ``B`` (d x r) is overwritten."""
    d = S.shape[0]
    for i in range(d):
        for j in range(i + 1):
            acc = S[i, j]
            for q in range(j):
                acc -= L[i, q] * L[j, q]
            if i == j:
                if acc <= 0.0:
                    acc = 1e-300
                L[i, i] = math.sqrt(acc)
            else:
                L[i, j] = acc / L[j, j]
    r = B.shape[1]
    for c in range(r):
        for i in range(d):
            acc = B[i, c]
            for q in range(i):
                acc -= L[i, q] * B[q, c]
            B[i, c] = acc / L[i, i]
        for i in range(d - 1, -1, -1):
            acc = B[i, c]
            for q in range(i + 1, d):
                acc -= L[q, i] * B[q, c]
            B[i, c] = acc / L[i, i]


@numba.njit(cache=True)
def _lu_solve_inplace(G, B):
    """Solve ``G X = B`` by Gaussian elimination with partial pivoting.

    ``G`` (k x k) and ``B`` (k x r) are overwritten.
    """
    k = G.shape[0]
    r = B.shape[1]
    for col in range(k):
        piv = col
        best = abs(G[col, col])
        for i in range(col + 1, k):
            if abs(G[i, col]) > best:
                best = abs(G[i, col])
                piv = i
        if piv != col:
            for j in range(k):
                tmp = G[col, j]
                G[col, j] = G[piv, j]
                G[piv, j] = tmp
            for j in range(r):
                tmp = B[col, j]
                B[col, j] = B[piv, j]
                B[piv, j] = tmp
        for i in range(col + 1, k):
            f = G[i, col] / G[col, col]
            if f != 0.0:
                for j in range(col, k):
                    G[i, j] -= f * G[col, j]
                for j in range(r):
                    B[i, j] -= f * B[col, j]
    for i in range(k - 1, -1, -1):
        for j in range(r):
            acc = B[i, j]
            for q in range(i + 1, k):
                acc -= G[i, q] * B[q, j]
            B[i, j] = acc / G[i, i]


@numba.njit(cache=True)
def _info_filter(T, RQR, A, b, sel, a1, P1, pred_m, pred_P, filt_m, filt_P):
    n, d = filt_m.shape
    k = sel.size
    m = a1.copy()
    P = P1.copy()
    tmp = np.empty((d, d))
    Ps = np.empty((k, d))
    APs = np.empty((k, d))
    G = np.empty((k, k))
    v = np.empty(k)
    m2 = np.empty(d)
    for i in range(n):
        if i > 0:
            Ti = T[i - 1]
            for r in range(d):
                acc = 0.0
                for c in range(d):
                    acc += Ti[r, c] * m[c]
                m2[r] = acc
            m[:] = m2
            # tmp = T P
            for r in range(d):
                for c in range(d):
                    acc = 0.0
                    for q in range(d):
                        acc += Ti[r, q] * P[q, c]
                    tmp[r, c] = acc
            # P = tmp T' + RQR
            for r in range(d):
                for c in range(r + 1):
                    acc = RQR[i - 1, r, c]
                    for q in range(d):
                        acc += tmp[r, q] * Ti[c, q]
                    P[r, c] = acc
                    P[c, r] = acc
        pred_m[i] = m
        pred_P[i] = P
        Ai = A[i]
        for r in range(k):
            for c in range(d):
                Ps[r, c] = P[sel[r], c]
        # G = I + A M with M = P[sel, sel]
        for r in range(k):
            for c in range(k):
                acc = 1.0 if r == c else 0.0
                for q in range(k):
                    acc += Ai[r, q] * Ps[q, sel[c]]
                G[r, c] = acc
            acc = b[i, r]
            for q in range(k):
                acc -= Ai[r, q] * m[sel[q]]
            v[r] = acc
        for r in range(k):
            for c in range(d):
                acc = 0.0
                for q in range(k):
                    acc += Ai[r, q] * Ps[q, c]
                APs[r, c] = acc
        # Kt = G'^{-1} Ps  (k x d), K = Kt'
        Gt = G.T.copy()
        Kt = Ps.copy()
        _lu_solve_inplace(Gt, Kt)
        for c in range(d):
            acc = 0.0
            for q in range(k):
                acc += Kt[q, c] * v[q]
            m[c] += acc
        for r in range(d):
            for c in range(r + 1):
                acc = 0.0
                for q in range(k):
                    acc += Kt[q, r] * APs[q, c] + Kt[q, c] * APs[q, r]
                val = P[r, c] - 0.5 * acc
                P[r, c] = val
                P[c, r] = val
        filt_m[i] = m
        filt_P[i] = P


@numba.njit(cache=True)
def _rts_means(T, pred_m, pred_P, filt_m, filt_P, out):
    n, d = filt_m.shape
    out[n - 1] = filt_m[n - 1]
    B = np.empty((d, d))
    L = np.zeros((d, d))
    S = np.empty((d, d))
    diff = np.empty(d)
    for i in range(n - 2, -1, -1):
        # J' = P_{i+1}^{-1} T C_i
        Ti = T[i]
        for r in range(d):
            for c in range(d):
                acc = 0.0
                for q in range(d):
                    acc += Ti[r, q] * filt_P[i, q, c]
                B[r, c] = acc
        S[:, :] = pred_P[i + 1]
        _chol_solve_inplace(S, B, L)
        for r in range(d):
            diff[r] = out[i + 1, r] - pred_m[i + 1, r]
        for c in range(d):
            acc = filt_m[i, c]
            for q in range(d):
                acc += B[q, c] * diff[q]
            out[i, c] = acc


@numba.njit(cache=True)
def _info_simsmooth(T, RQR_factor, RQR, A, b, b_noise, sel, a1, P1_factor, P1,
                    z0, eta):
    n = A.shape[0]
    d = a1.size
    k = sel.size
    plus = np.empty((n, d))
    for r in range(d):
        acc = a1[r]
        for c in range(d):
            acc += P1_factor[r, c] * z0[c]
        plus[0, r] = acc
    for i in range(1, n):
        for r in range(d):
            acc = 0.0
            for c in range(d):
                acc += T[i - 1, r, c] * plus[i - 1, c] + RQR_factor[i - 1, r, c] * eta[i - 1, c]
            plus[i, r] = acc
    resid = np.empty((n, k))
    for i in range(n):
        for r in range(k):
            acc = b[i, r] - b_noise[i, r]
            for q in range(k):
                acc -= A[i, r, q] * plus[i, sel[q]]
            resid[i, r] = acc
    pred_m = np.empty((n, d))
    pred_P = np.empty((n, d, d))
    filt_m = np.empty((n, d))
    filt_P = np.empty((n, d, d))
    _info_filter(T, RQR, A, resid, sel, np.zeros(d), P1, pred_m, pred_P,
                 filt_m, filt_P)
    sm = np.empty((n, d))
    _rts_means(T, pred_m, pred_P, filt_m, filt_P, sm)
    return plus + sm


def info_smoothed_mean(T, RQR, A, b, sel, init_mean, init_cov):
    """Smoothed state means for the collapsed observation model.

    ``A`` is ``(n, k, k)`` and ``b`` is ``(n, k)``; the log-likelihood
    contribution at time ``i`` is ``-0.5 s'A_i s + b_i's`` with ``s`` the
    state entries at positions ``sel``.
    """
    T, RQR, A, b = (np.ascontiguousarray(x, dtype=float) for x in (T, RQR, A, b))
    n, d = b.shape[0], len(init_mean)
    pred_m, filt_m = np.empty((n, d)), np.empty((n, d))
    pred_P, filt_P = np.empty((n, d, d)), np.empty((n, d, d))
    _info_filter(T, RQR, A, b, np.asarray(sel, dtype=np.int64),
                 np.asarray(init_mean, dtype=float),
                 np.asarray(init_cov, dtype=float),
                 pred_m, pred_P, filt_m, filt_P)
    out = np.empty((n, d))
    _rts_means(T, pred_m, pred_P, filt_m, filt_P, out)
    return out


def info_simulation_smoother(T, RQR, A, b, b_noise, sel, init_mean, init_cov,
                             rng, RQR_factor=None, init_factor=None):
    """Joint posterior draw of the states for the collapsed observation model.

    ``b_noise`` is one draw of ``Z_i' W_i e_i`` with ``e_i ~ N(0, W_i^{-1})``,
    i.e. a ``N(0, A_i)`` vector per time; callers build it from the raw
    observation weights so that singular ``A_i`` needs no factorisation.
    """
    n, d = b.shape[0], len(init_mean)
    if RQR_factor is None:
        RQR_factor = np.stack([_psd_factor(S) for S in RQR]) if n > 1 \
            else np.zeros((0, d, d))
    if init_factor is None:
        init_factor = _psd_factor(np.asarray(init_cov, dtype=float))
    z0 = rng.standard_normal(d)
    eta = rng.standard_normal((max(n - 1, 0), d))
    return _info_simsmooth(
        np.ascontiguousarray(T, dtype=float),
        np.ascontiguousarray(RQR_factor, dtype=float),
        np.ascontiguousarray(RQR, dtype=float),
        np.ascontiguousarray(A, dtype=float),
        np.ascontiguousarray(b, dtype=float),
        np.ascontiguousarray(b_noise, dtype=float),
        np.asarray(sel, dtype=np.int64),
        np.asarray(init_mean, dtype=float),
        np.ascontiguousarray(init_factor, dtype=float),
        np.asarray(init_cov, dtype=float), z0, eta)
