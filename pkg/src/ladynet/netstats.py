"""Network summaries, posterior predictive checks, AUC and PSRF."""
from __future__ import annotations

import warnings

import numpy as np
from scipy.stats import rankdata

__all__ = [
    "Undefined",
    "is_undefined",
    "density",
    "degree",
    "degrees",
    "mixing_matrix",
    "assortativity",
    "assortativity_batch",
    "expected_assortativity_mc",
    "posterior_predictive",
    "auc",
    "split_chains",
    "psrf",
    "psrf_array",
    "dyad_index",
    "dyads_to_matrix",
    "summarize_draws",
    "predictive_check",
    "write_check_csv",
]


class Undefined:
    """A statistic that does not exist for its input (e.g. no edges).

    Falsy, and skipped by the summary helpers rather than turned into NaN.
    """

    __slots__ = ("reason",)

    def __init__(self, reason: str = ""):
        self.reason = reason

    def __bool__(self):
        return False

    def __repr__(self):
        return f"Undefined({self.reason!r})"

    def __eq__(self, other):
        return isinstance(other, Undefined)

    def __hash__(self):
        return hash(Undefined)


def is_undefined(x) -> bool:
    return isinstance(x, Undefined)


def dyad_index(V: int):
    """``(rows, cols)`` of the ``v > u`` dyads in the package-wide order."""
    return np.tril_indices(V, k=-1)


def dyads_to_matrix(values, V: int) -> np.ndarray:
    """Expand ``(..., V(V-1)/2)`` dyad values to symmetric ``(..., V, V)``."""
    values = np.asarray(values)
    rows, cols = dyad_index(V)
    out = np.zeros(values.shape[:-1] + (V, V), dtype=values.dtype)
    out[..., rows, cols] = values
    out[..., cols, rows] = values
    return out


def density(adj) -> float:
    """Edge count over ``V(V-1)/2``; batched over leading axes."""
    adj = np.asarray(adj)
    V = adj.shape[-1]
    rows, cols = dyad_index(V)
    dens = adj[..., rows, cols].sum(axis=-1) / (V * (V - 1) / 2)
    return float(dens) if np.ndim(dens) == 0 else dens


def degree(adj, v: int) -> int:
    adj = np.asarray(adj)
    return int(adj[v].sum() - adj[v, v])


def degrees(adj) -> np.ndarray:
    """Degrees of every actor; batched over leading axes."""
    adj = np.asarray(adj)
    diag = np.diagonal(adj, axis1=-2, axis2=-1)
    return adj.sum(axis=-1) - diag


def _encode_labels(labels):
    """One-hot matrix over actors with a label; ``None`` labels are dropped."""
    labels = list(labels)
    keep = np.array([lab is not None for lab in labels])
    classes = sorted({lab for lab in labels if lab is not None}, key=str)
    onehot = np.zeros((len(labels), len(classes)))
    for i, lab in enumerate(labels):
        if lab is not None:
            onehot[i, classes.index(lab)] = 1.0
    return onehot, keep, classes


def mixing_matrix(adj, labels):
    """Symmetrized fraction of edge ends joining class k to class l.

    Returns ``(e, classes)``; ``e`` sums to one when there is at least one
    edge between labelled actors, else it is all zeros.
    """
    onehot, keep, classes = _encode_labels(labels)
    A = np.asarray(adj, dtype=float) * keep[:, None] * keep[None, :]
    np.fill_diagonal(A, 0.0)
    E = onehot.T @ A @ onehot
    total = E.sum()
    return (E / total if total > 0 else E), classes


def assortativity(adj, labels):
    """Discrete-attribute assortativity coefficient.

    ``r = (sum_k e_kk - sum_k a_k^2) / (1 - sum_k a_k^2)``. Actors with label
    ``None`` are excluded. Returns :class:`Undefined` when there are no
    edges, fewer than two classes, or the denominator vanishes.
    """
    e, classes = mixing_matrix(adj, labels)
    if len(classes) < 2:
        return Undefined("fewer than two label classes")
    if e.sum() == 0:
        return Undefined("no edges")
    a = e.sum(axis=1)
    sa = float(a @ a)
    if np.isclose(sa, 1.0):
        return Undefined("all edges touch a single class")
    return float((np.trace(e) - sa) / (1.0 - sa))


def assortativity_batch(adj, labels) -> np.ndarray:
    """Assortativity of every network in ``(B, V, V)``; NaN marks undefined."""
    onehot, keep, classes = _encode_labels(labels)
    adj = np.asarray(adj, dtype=float)
    mask = keep[:, None] & keep[None, :]
    np.fill_diagonal(mask, False)
    E = np.einsum("vk,bvu,ul->bkl", onehot, adj * mask, onehot)
    total = E.sum(axis=(1, 2))
    out = np.full(adj.shape[0], np.nan)
    if len(classes) < 2:
        return out
    ok = total > 0
    e = E[ok] / total[ok, None, None]
    a = e.sum(axis=2)
    sa = (a * a).sum(axis=1)
    tr = np.trace(e, axis1=1, axis2=2)
    good = ~np.isclose(sa, 1.0)
    vals = np.full(sa.shape, np.nan)
    vals[good] = (tr[good] - sa[good]) / (1.0 - sa[good])
    out[ok] = vals
    return out


def expected_assortativity_mc(pi_draws, labels, n_sim: int = 100, rng=None):
    """Monte Carlo expected assortativity for each posterior draw of ``pi``.

    ``pi_draws`` is ``(S, V, V)`` or ``(S, V(V-1)/2)`` at one time. For each
    draw, ``n_sim`` networks are simulated and their defined coefficients
    averaged. Returns ``(values, n_undefined)``; a draw whose simulated
    networks are all undefined yields NaN in ``values``.
    """
    rng = np.random.default_rng(rng)
    pi_draws = np.asarray(pi_draws, dtype=float)
    if pi_draws.ndim == 2:
        V = int(round((1 + np.sqrt(1 + 8 * pi_draws.shape[1])) / 2))
        pi_draws = dyads_to_matrix(pi_draws, V)
    V = pi_draws.shape[-1]
    rows, cols = dyad_index(V)
    out = np.full(pi_draws.shape[0], np.nan)
    n_undef = 0
    for s, pi in enumerate(pi_draws):
        edges = rng.random((n_sim, rows.size)) < pi[rows, cols]
        nets = dyads_to_matrix(edges.astype(np.int8), V)
        r = assortativity_batch(nets, labels)
        defined = ~np.isnan(r)
        n_undef += int((~defined).sum())
        if defined.any():
            out[s] = r[defined].mean()
    return out, n_undef


def posterior_predictive(pi_draws, rng=None) -> np.ndarray:
    """One Bernoulli network per posterior draw of ``pi`` (any shape)."""
    rng = np.random.default_rng(rng)
    pi_draws = np.asarray(pi_draws, dtype=float)
    return (rng.random(pi_draws.shape) < pi_draws).astype(np.int8)


def auc(scores, labels):
    """Area under the ROC curve, tie-corrected Mann-Whitney form.

    Equals P(score+ > score-) + 0.5 P(score+ == score-). Returns
    :class:`Undefined` when only one class is present.
    """
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels).ravel().astype(bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return Undefined("single-class labels")
    ranks = rankdata(scores)
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def split_chains(draws, m: int = 4) -> np.ndarray:
    """Split ``(N, ...)`` draws into ``m`` consecutive sub-chains ``(m, L, ...)``.

    Trailing draws that do not fill a sub-chain are discarded from the front.
    """
    draws = np.asarray(draws)
    L = draws.shape[0] // m
    start = draws.shape[0] - m * L
    return draws[start:].reshape((m, L) + draws.shape[1:])


def psrf_array(chains) -> np.ma.MaskedArray:
    """Potential scale reduction for ``(m, L, ...)`` sub-chains, elementwise.

    ``R = sqrt(((L-1)/L W + B/L) / W)`` with ``W`` the mean within-chain
    variance and ``B = L * var(chain means)``. Entries with ``W = 0`` are
    masked.
    """
    chains = np.asarray(chains, dtype=float)
    m, L = chains.shape[:2]
    if m < 2 or L < 2:
        raise ValueError("need at least two sub-chains of length >= 2")
    means = chains.mean(axis=1)
    B = L * means.var(axis=0, ddof=1)
    W = chains.var(axis=1, ddof=1).mean(axis=0)
    zero = W <= 0
    Wsafe = np.where(zero, 1.0, W)
    R = np.sqrt(((L - 1) / L * Wsafe + B / L) / Wsafe)
    return np.ma.masked_array(R, mask=zero)


def psrf(chains):
    """Scalar PSRF of ``(m, L)`` sub-chains, or :class:`Undefined` if W = 0."""
    chains = np.asarray(chains, dtype=float)
    if chains.ndim != 2:
        raise ValueError("psrf expects (m, L) sub-chains; use psrf_array")
    R = psrf_array(chains)
    if np.ma.is_masked(R):
        return Undefined("zero within-chain variance")
    return float(R)


def summarize_draws(values, probs=(0.025, 0.975)):
    """Mean and quantiles over axis 0, ignoring NaN (undefined) entries.

    Columns that are entirely undefined come back as NaN.
    """
    values = np.asarray(values, dtype=float)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mean = np.nanmean(values, axis=0)
        qs = np.nanquantile(values, probs, axis=0)
    return mean, qs


def predictive_check(pi_draws, observed, labels=None, rng=None,
                     probs=(0.025, 0.975)):
    """Posterior-predictive bands for density, degree and assortativity.

    ``pi_draws`` is ``(S, n, D)`` or a callable ``t -> (S, D)`` (which
    avoids materialising every time at once); ``observed`` is ``(n, V, V)``.
    One network is simulated per draw and time. ``labels`` maps an attribute
    name to per-actor values (``None`` entries are left out).

    Returns a list of dict rows with keys ``statistic, label, actor,
    time_index, observed, mean, q025, q975, inside``; undefined observed
    assortativity gives ``observed=None`` and ``inside=None``.
    """
    rng = np.random.default_rng(rng)
    observed = np.asarray(observed)
    n, V = observed.shape[0], observed.shape[-1]
    get = pi_draws if callable(pi_draws) else (lambda t: np.asarray(pi_draws)[:, t])
    labels = dict(labels or {})
    rows_out = []

    def add(stat, label, actor, t, obs, sims):
        mean, (lo, hi) = summarize_draws(sims, probs)
        inside = None if obs is None or np.isnan(lo) else bool(lo <= obs <= hi)
        rows_out.append({"statistic": stat, "label": label, "actor": actor,
                         "time_index": t, "observed": obs,
                         "mean": float(mean), "q025": float(lo),
                         "q975": float(hi), "inside": inside})

    for t in range(n):
        nets = dyads_to_matrix(posterior_predictive(get(t), rng), V)
        obs = observed[t]
        add("density", "", "", t, density(obs), density(nets))
        deg_sim = degrees(nets)
        deg_obs = degrees(obs)
        for v in range(V):
            add("degree", "", v, t, int(deg_obs[v]), deg_sim[:, v])
        for name, lab in labels.items():
            r = assortativity(obs, lab)
            add("assortativity", name, "", t,
                None if is_undefined(r) else r, assortativity_batch(nets, lab))
    return rows_out


def write_check_csv(rows, path):
    """``check.csv``: one row per statistic, label, actor and time."""
    import csv

    keys = ["statistic", "label", "actor", "time_index", "observed", "mean",
            "q025", "q975", "inside"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for row in rows:
            w.writerow(["NA" if row[k] is None else
                        (repr(row[k]) if isinstance(row[k], float) else row[k])
                        for k in keys])
