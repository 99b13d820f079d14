"""Dynamic binary undirected networks: containers, ingestion and windowing."""
from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "DataError",
    "TimeGrid",
    "NetworkSeries",
    "ContactEvent",
    "load_contacts",
    "aggregate_windows",
    "subset_actors",
    "validate",
    "save_series",
    "load_series",
]


class DataError(ValueError):
    """Raised on malformed network data."""


@dataclass(frozen=True)
class TimeGrid:
    times: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).ravel()
        if times.size and not np.all(np.isfinite(times)):
            raise DataError("time grid contains non-finite values")
        if np.any(np.diff(times) <= 0):
            raise DataError("time grid must be strictly increasing")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)

    @property
    def deltas(self) -> np.ndarray:
        return np.diff(self.times)

    @property
    def n(self) -> int:
        return self.times.size

    def __len__(self):
        return self.times.size

    def __getitem__(self, idx):
        return TimeGrid(self.times[idx])

    @classmethod
    def regular(cls, n: int, start: float = 0.0, stop: float | None = None):
        if stop is None:
            stop = start + n - 1
        return cls(np.linspace(start, stop, n))


@dataclass(frozen=True)
class NetworkSeries:
    """A sequence of symmetric binary adjacency matrices on a time grid.

    ``adjacency`` has shape ``(n, V, V)``. ``labels`` maps an attribute
    name (e.g. ``"class"``) to a length-V sequence of values.
    """

    grid: TimeGrid
    adjacency: np.ndarray
    labels: Mapping[str, tuple] = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.grid, TimeGrid):
            object.__setattr__(self, "grid", TimeGrid(self.grid))
        adj = np.array(self.adjacency, dtype=np.int8)
        if adj.ndim != 3 or adj.shape[1] != adj.shape[2]:
            raise DataError(f"adjacency must be (n, V, V), got {adj.shape}")
        if adj.shape[0] != len(self.grid):
            raise DataError(
                f"{adj.shape[0]} matrices but {len(self.grid)} grid times")
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)
        labels = {}
        for name, values in dict(self.labels).items():
            values = tuple(values)
            if len(values) != adj.shape[1]:
                raise DataError(
                    f"label {name!r} has {len(values)} entries, V={adj.shape[1]}")
            labels[name] = values
        object.__setattr__(self, "labels", labels)

    @property
    def V(self) -> int:
        return self.adjacency.shape[1]

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def window(self, start: int, stop: int) -> "NetworkSeries":
        """Sub-series over time indices ``start:stop``."""
        return NetworkSeries(self.grid[start:stop],
                             self.adjacency[start:stop], self.labels)

    def edge_list(self) -> np.ndarray:
        """Rows ``(time_index, u, v)`` with ``u < v`` for every present edge."""
        t, u, v = np.nonzero(np.triu(self.adjacency, k=1))
        return np.column_stack([t, u, v])

    def dyads(self) -> np.ndarray:
        """Lower-triangular dyad values, shape ``(n, V*(V-1)/2)``."""
        rows, cols = np.tril_indices(self.V, k=-1)
        return self.adjacency[:, rows, cols]

    def __eq__(self, other):
        if not isinstance(other, NetworkSeries):
            return NotImplemented
        return (np.array_equal(self.times, other.times)
                and np.array_equal(self.adjacency, other.adjacency)
                and dict(self.labels) == dict(other.labels))

    __hash__ = None


@dataclass(frozen=True)
class ContactEvent:
    timestamp: float
    u: int
    v: int

    def __post_init__(self):
        if self.u == self.v:
            raise DataError(f"self-contact for actor {self.u}")


def load_contacts(source, id_map: dict | None = None):
    """Parse a ``timestamp,u,v`` edge list.

    ``source`` is a path, a text/bytes stream or a string. A non-numeric
    first line is treated as a header. Actor ids are remapped to dense
    indices ``0..V-1`` in order of first appearance (after any entries
    already in ``id_map``).

    Returns ``(events, id_map)`` where ``id_map`` maps original id to index.
    """
    text = _read_text(source)
    id_map = dict(id_map or {})
    events = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise DataError(f"line {lineno}: expected 3 fields, got {len(row)}")
        try:
            ts = float(row[0])
            u, v = int(row[1]), int(row[2])
        except ValueError:
            if lineno == 1:
                continue
            raise DataError(f"line {lineno}: cannot parse {row!r}") from None
        if u == v:
            raise DataError(f"line {lineno}: self-contact for actor {u}")
        for a in (u, v):
            if a not in id_map:
                id_map[a] = len(id_map)
        events.append(ContactEvent(ts, id_map[u], id_map[v]))
    return events, id_map


def _read_text(source) -> str:
    if isinstance(source, (bytes, bytearray)):
        return source.decode("utf-8")
    if isinstance(source, str):
        if "\n" not in source and "," not in source and os.path.exists(source):
            with open(source, encoding="utf-8") as fh:
                return fh.read()
        return source
    if isinstance(source, os.PathLike):
        with open(source, encoding="utf-8") as fh:
            return fh.read()
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def aggregate_windows(events: Iterable[ContactEvent], window: float, span,
                      V: int | None = None, labels=None,
                      times: str = "midpoint") -> NetworkSeries:
    """Bin contact events into consecutive windows of length ``window``.

    An edge is present in a window iff at least one contact between the
    pair falls in it. Windows are ``[start + k*window, start + (k+1)*window)``
    with the last one closed at ``span[1]`` and possibly shorter.
    """
    if not window > 0:
        raise DataError("window must be positive")
    t0, t1 = map(float, span)
    if not t1 > t0:
        raise DataError("span end must exceed span start")
    events = list(events)
    outside = sorted({e.timestamp for e in events
                      if not t0 <= e.timestamp <= t1})
    if outside:
        raise DataError(f"events outside span [{t0}, {t1}]: {outside}")
    if V is None:
        V = 1 + max((max(e.u, e.v) for e in events), default=-1)
    n = max(1, int(np.ceil((t1 - t0) / window - 1e-12)))
    starts = t0 + window * np.arange(n)
    stops = np.minimum(starts + window, t1)
    adj = np.zeros((n, V, V), dtype=np.int8)
    for e in events:
        k = min(int((e.timestamp - t0) // window), n - 1)
        adj[k, e.u, e.v] = adj[k, e.v, e.u] = 1
    if times == "midpoint":
        grid = 0.5 * (starts + stops)
    elif times == "start":
        grid = starts
    else:
        raise ValueError(f"unknown times mode {times!r}")
    return NetworkSeries(TimeGrid(grid), adj, labels or {})


def subset_actors(series: NetworkSeries, keep) -> NetworkSeries:
    """Induced sub-series on the actors in ``keep`` (kept in ascending order)."""
    keep = sorted(set(int(k) for k in keep))
    bad = [k for k in keep if not 0 <= k < series.V]
    if bad:
        raise DataError(f"unknown actor ids {bad}")
    idx = np.asarray(keep, dtype=int)
    adj = series.adjacency[:, idx[:, None], idx[None, :]]
    labels = {name: tuple(vals[i] for i in idx)
              for name, vals in series.labels.items()}
    return NetworkSeries(series.grid, adj, labels)


def validate(series) -> list[str]:
    """List every symmetry, diagonal and binary violation; empty iff valid.

    Accepts a NetworkSeries or a raw ``(n, V, V)`` array, since a
    NetworkSeries only coerces dtype and does not reject bad entries.
    """
    adj = np.asarray(getattr(series, "adjacency", series))
    report = []
    for t, v, u in zip(*np.nonzero((adj != 0) & (adj != 1))):
        report.append(f"non-binary value {adj[t, v, u]} at t={t} ({v},{u})")
    t_idx, v_idx, u_idx = np.nonzero(adj != np.swapaxes(adj, 1, 2))
    for t, v, u in zip(t_idx, v_idx, u_idx):
        if v < u:
            report.append(f"asymmetry at t={t} ({v},{u})")
    diag = np.diagonal(adj, axis1=1, axis2=2)
    for t, v in zip(*np.nonzero(diag)):
        report.append(f"nonzero diagonal at t={t} ({v},{v})")
    return report


def save_series(series: NetworkSeries, directory, stem: str = "series"):
    """Write ``<stem>.csv`` (time_index,u,v edges) and ``<stem>.json`` header."""
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, f"{stem}.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_index", "u", "v"])
        w.writerows(series.edge_list().tolist())
    header = {"V": series.V, "times": series.times.tolist(),
              "labels": {k: list(v) for k, v in series.labels.items()}}
    with open(os.path.join(directory, f"{stem}.json"), "w") as fh:
        json.dump(header, fh, indent=1)


def load_series(directory, stem: str = "series") -> NetworkSeries:
    with open(os.path.join(directory, f"{stem}.json")) as fh:
        header = json.load(fh)
    V, times = int(header["V"]), header["times"]
    adj = np.zeros((len(times), V, V), dtype=np.int8)
    with open(os.path.join(directory, f"{stem}.csv"), newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if lineno == 1 and not row[0].strip().lstrip("-").isdigit():
                continue
            t, u, v = map(int, row)
            adj[t, u, v] = adj[t, v, u] = 1
    return NetworkSeries(TimeGrid(times), adj, header.get("labels", {}))
