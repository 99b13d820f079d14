"""Five-regime synthetic school-day networks and Bernoulli network simulation.

Thirty actors form three classes of ten (0-9, 10-19, 20-29). Actors
0-4 and 15-24 are male, the others female. Regimes:

1. school hours: contacts mostly within class;
2. break: gender homophily across the whole school;
3. shared room: classes 1 and 2 share a room, so they also mix with each
   other at a moderate rate;
4. lunch: class 2 splits in halves that join class 1 and class 3
   respectively, while the last five actors of class 3 leave (no contacts);
5. end of day: class 1 stays alone, classes 2 and 3 gather in one room.

Regime probability levels are free parameters.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .netseries import NetworkSeries, TimeGrid

__all__ = [
    "RegimeSpec",
    "Schedule",
    "default_regimes",
    "default_schedule",
    "truth_pi",
    "simulate",
    "simulate_from_pi",
    "DEFAULT_LEVELS",
    "DEFAULT_REGIME_SEQUENCE",
]

# Chosen to put the benchmark's achievable AUCs near the reported ones.
DEFAULT_LEVELS = (0.85, 0.4, 0.03)

# 1-based regime id for t_1..t_50
DEFAULT_REGIME_SEQUENCE = (
    [1] * 7 + [2] * 4 + [3] * 7 + [4] * 7 + [2] * 4 + [1] * 6
    + [4] * 6 + [5] * 4 + [2] * 5
)

DEFAULT_DEPARTURES = {42: (1, 4, 10, 12), 46: (16, 20, 26, 28)}


@dataclass(frozen=True)
class RegimeSpec:
    """Edge-probability matrices ``probs[r]`` (0-based regime ``r``)."""

    probs: np.ndarray
    classes: np.ndarray
    genders: np.ndarray

    @property
    def V(self) -> int:
        return self.probs.shape[1]

    def labels(self) -> dict:
        return {"class": tuple(int(c) for c in self.classes),
                "gender": tuple(str(g) for g in self.genders)}


@dataclass(frozen=True)
class Schedule:
    """Regime per time (1-based ids) and departures.

    ``departures`` maps a 1-based time index to 1-based actor ids that have
    left from that time on.
    """

    regimes: tuple
    departures: dict = field(default_factory=dict)

    def __post_init__(self):
        regimes = tuple(int(r) for r in self.regimes)
        if any(not 1 <= r <= 5 for r in regimes):
            raise ValueError("regime ids must be in 1..5")
        deps = {int(k): tuple(int(a) for a in v)
                for k, v in dict(self.departures).items()}
        if any(not 1 <= k <= len(regimes) for k in deps):
            raise ValueError("departure time outside the grid")
        object.__setattr__(self, "regimes", regimes)
        object.__setattr__(self, "departures", deps)

    @property
    def n(self) -> int:
        return len(self.regimes)

    def present(self, V: int) -> np.ndarray:
        """Boolean ``(n, V)`` mask of actors still present at each time."""
        mask = np.ones((self.n, V), dtype=bool)
        for t, actors in self.departures.items():
            mask[t - 1:, [a - 1 for a in actors]] = False
        return mask

    def to_json(self) -> dict:
        return {"regimes": list(self.regimes),
                "departures": {str(k): list(v) for k, v in self.departures.items()}}

    @classmethod
    def from_json(cls, obj) -> "Schedule":
        return cls(obj["regimes"],
                   {int(k): v for k, v in obj.get("departures", {}).items()})


def _block(V, groups, p_in, p_out):
    P = np.full((V, V), p_out)
    for g in groups:
        g = np.asarray(g)
        P[np.ix_(g, g)] = p_in
    return P


def default_regimes(p_high=DEFAULT_LEVELS[0], p_med=DEFAULT_LEVELS[1],
                    p_low=DEFAULT_LEVELS[2]) -> RegimeSpec:
    if not 0 <= p_low < p_med < p_high <= 1:
        raise ValueError("need 0 <= p_low < p_med < p_high <= 1")
    V = 30
    c1, c2, c3 = np.arange(10), np.arange(10, 20), np.arange(20, 30)
    classes = np.repeat([1, 2, 3], 10)
    male = np.r_[0:5, 15:25]
    genders = np.array(["f"] * V, dtype=object)
    genders[male] = "m"
    female = np.setdiff1d(np.arange(V), male)

    r1 = _block(V, [c1, c2, c3], p_high, p_low)
    r2 = _block(V, [male, female], p_high, p_low)
    r3 = r1.copy()
    r3[np.ix_(c1, c2)] = p_med
    r3[np.ix_(c2, c1)] = p_med
    away = np.arange(25, 30)
    r4 = _block(V, [np.r_[c1, 10:15], np.r_[15:20, 20:25]], p_high, p_low)
    r4[away, :] = 0.0
    r4[:, away] = 0.0
    r5 = r1.copy()
    r5[np.ix_(c2, c3)] = p_med
    r5[np.ix_(c3, c2)] = p_med
    probs = np.stack([r1, r2, r3, r4, r5])
    idx = np.arange(V)
    probs[:, idx, idx] = 0.0
    return RegimeSpec(probs, classes, genders)


def default_schedule(n: int = 50, t_end: float = 15.0, regimes=None,
                     departures=None):
    """Schedule and equally spaced grid ``0 .. t_end`` with ``n`` points.

    For ``n`` other than 50 the default regime sequence is stretched onto
    the new grid by nearest relative position.
    """
    if regimes is None:
        base = np.asarray(DEFAULT_REGIME_SEQUENCE)
        pos = np.round(np.linspace(0, len(base) - 1, n)).astype(int)
        regimes = base[pos]
    if departures is None:
        departures = {k: v for k, v in DEFAULT_DEPARTURES.items() if k <= n} \
            if n == 50 else {}
    return Schedule(regimes, departures), TimeGrid(np.linspace(0.0, t_end, n))


def truth_pi(schedule: Schedule, regimes: RegimeSpec) -> np.ndarray:
    """Ground-truth ``(n, V, V)`` edge probabilities with departures applied."""
    pi = regimes.probs[np.asarray(schedule.regimes) - 1].copy()
    present = schedule.present(regimes.V)
    pi *= present[:, :, None] & present[:, None, :]
    return pi


def simulate_from_pi(pi, rng, grid=None, labels=None) -> NetworkSeries:
    """Independent Bernoulli edges for a symmetric ``(n, V, V)`` schedule."""
    pi = np.asarray(pi, dtype=float)
    n, V, _ = pi.shape
    rows, cols = np.tril_indices(V, k=-1)
    draws = rng.random((n, rows.size)) < pi[:, rows, cols]
    adj = np.zeros((n, V, V), dtype=np.int8)
    adj[:, rows, cols] = draws
    adj[:, cols, rows] = draws
    if grid is None:
        grid = TimeGrid.regular(n)
    return NetworkSeries(grid, adj, labels or {})


def simulate(schedule: Schedule, regimes: RegimeSpec, rng, grid=None):
    """Simulate one series; returns ``(series, truth_pi)``."""
    if grid is None:
        grid = TimeGrid.regular(schedule.n)
    pi = truth_pi(schedule, regimes)
    return simulate_from_pi(pi, rng, grid, regimes.labels()), pi


def write_simulation(directory, series, pi, schedule, levels=None):
    """Emit the series files, ``truth_pi.bin`` (+ json header) and ``schedule.json``."""
    from .netseries import save_series

    save_series(series, directory)
    arr = np.ascontiguousarray(pi, dtype=np.float64)
    arr.tofile(os.path.join(directory, "truth_pi.bin"))
    with open(os.path.join(directory, "truth_pi.json"), "w") as fh:
        json.dump({"shape": list(arr.shape), "dtype": "float64",
                   "order": "C"}, fh)
    meta = schedule.to_json()
    if levels is not None:
        meta["levels"] = list(levels)
    with open(os.path.join(directory, "schedule.json"), "w") as fh:
        json.dump(meta, fh, indent=1)
