import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ladynet.netseries import (ContactEvent, DataError, NetworkSeries, TimeGrid,
                               aggregate_windows, load_contacts, load_series,
                               save_series, subset_actors, validate)


def random_series(rng, n=4, V=5, p=0.4):
    rows, cols = np.tril_indices(V, -1)
    adj = np.zeros((n, V, V), dtype=np.int8)
    adj[:, rows, cols] = rng.random((n, rows.size)) < p
    adj = adj | np.swapaxes(adj, 1, 2)
    return NetworkSeries(TimeGrid(np.arange(n) * 0.5), adj,
                         {"g": tuple("ab"[i % 2] for i in range(V))})


class TestTimeGrid:
    def test_deltas(self):
        g = TimeGrid([0.0, 0.5, 2.0])
        assert np.allclose(g.deltas, [0.5, 1.5])
        assert g.n == 3

    @pytest.mark.parametrize("times", [[0, 0], [1, 0.5], [0, 1, 1]])
    def test_rejects_non_increasing(self, times):
        with pytest.raises(DataError):
            TimeGrid(times)

    def test_regular_grid_spacing(self):
        g = TimeGrid.regular(50, 0.0, 15.0)
        assert np.allclose(g.deltas, 15 / 49)


class TestLoadContacts:
    def test_two_events_three_actors(self):
        events, ids = load_contacts("0,1,2\n0,2,3")
        assert len(events) == 2
        assert len(ids) == 3
        assert {e.u for e in events} | {e.v for e in events} == {0, 1, 2}

    def test_empty(self):
        events, ids = load_contacts(io.StringIO(""))
        assert events == [] and ids == {}

    def test_self_contact(self):
        with pytest.raises(DataError, match="self-contact"):
            load_contacts("0,5,5")

    def test_malformed_line_number(self):
        with pytest.raises(DataError, match="line 3"):
            load_contacts("timestamp,u,v\n0,1,2\n1,x,2\n")

    def test_header_and_bytes(self):
        events, _ = load_contacts(b"timestamp,u,v\n20,7,9\n")
        assert events == [ContactEvent(20.0, 0, 1)]

    def test_contact_event_invariant(self):
        with pytest.raises(DataError):
            ContactEvent(0.0, 1, 1)


class TestAggregate:
    def test_duplicate_events_collapse(self):
        ev = [ContactEvent(1.0, 1, 2), ContactEvent(3.0, 1, 2)]
        s = aggregate_windows(ev, 10.0, (0.0, 10.0))
        assert s.n == 1
        assert s.adjacency[0, 1, 2] == 1 and s.adjacency[0, 2, 1] == 1
        assert s.adjacency.max() == 1

    def test_empty_window(self):
        ev = [ContactEvent(1.0, 0, 1)]
        s = aggregate_windows(ev, 10.0, (0.0, 30.0))
        assert s.n == 3
        assert not s.adjacency[1].any() and not s.adjacency[2].any()

    def test_school_day_windows(self):
        ev = [ContactEvent(0.0, 0, 1), ContactEvent(509.0, 1, 2)]
        s = aggregate_windows(ev, 10.0, (0.0, 510.0))
        assert s.n == 51
        assert np.allclose(s.times[:2], [5.0, 15.0])

    def test_outside_span_lists_timestamps(self):
        ev = [ContactEvent(-1.0, 0, 1), ContactEvent(99.0, 0, 1)]
        with pytest.raises(DataError, match="-1.0.*99.0"):
            aggregate_windows(ev, 10.0, (0.0, 50.0))

    def test_bad_window(self):
        with pytest.raises(DataError):
            aggregate_windows([], 0.0, (0.0, 1.0))

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.floats(0, 99.9), st.integers(0, 5),
                              st.integers(0, 5)).filter(lambda r: r[1] != r[2]),
                    max_size=40))
    def test_valid_and_idempotent(self, rows):
        ev = [ContactEvent(*r) for r in rows]
        s = aggregate_windows(ev, 10.0, (0.0, 100.0), V=6)
        assert validate(s) == []
        # re-aggregating the series' own edges at window granularity
        edges = [ContactEvent(10.0 * t + 1.0, u, v) for t, u, v in s.edge_list()]
        again = aggregate_windows(edges, 10.0, (0.0, 100.0), V=6)
        assert again == s


class TestSubset:
    def test_identity(self):
        s = random_series(np.random.default_rng(0))
        assert subset_actors(s, range(s.V)) == s

    def test_single_actor(self):
        s = random_series(np.random.default_rng(0))
        sub = subset_actors(s, {0})
        assert sub.adjacency.shape == (s.n, 1, 1)
        assert not sub.adjacency.any()

    def test_unknown_id(self):
        s = random_series(np.random.default_rng(0))
        with pytest.raises(DataError):
            subset_actors(s, {0, 99})

    def test_labels_carried(self):
        s = random_series(np.random.default_rng(0))
        assert subset_actors(s, [1, 2]).labels == {"g": ("b", "a")}

    @settings(max_examples=40, deadline=None)
    @given(st.sets(st.integers(0, 6)), st.sets(st.integers(0, 6)))
    def test_composition(self, A, B):
        s = random_series(np.random.default_rng(1), V=7)
        direct = subset_actors(s, A & B)
        first = subset_actors(s, A)
        order = sorted(A)
        relabeled = {order.index(b) for b in B & A}
        assert subset_actors(first, relabeled) == direct


class TestValidate:
    def test_valid(self):
        assert validate(random_series(np.random.default_rng(2))) == []

    def test_asymmetry(self):
        adj = np.zeros((1, 4, 4), dtype=np.int8)
        adj[0, 1, 2] = 1
        report = validate(adj)
        assert len(report) == 1 and "asymmetry" in report[0]

    def test_diagonal(self):
        adj = np.zeros((1, 4, 4), dtype=np.int8)
        adj[0, 3, 3] = 1
        report = validate(adj)
        assert len(report) == 1 and "diagonal" in report[0]

    def test_non_binary(self):
        adj = np.zeros((1, 3, 3), dtype=np.int8)
        adj[0, 0, 1] = adj[0, 1, 0] = 2
        assert any("non-binary" in r for r in validate(adj))


def test_shape_errors():
    with pytest.raises(DataError):
        NetworkSeries(TimeGrid([0.0, 1.0]), np.zeros((3, 2, 2)))
    with pytest.raises(DataError):
        NetworkSeries(TimeGrid([0.0]), np.zeros((1, 2, 2)), {"g": ("a",)})


def test_disk_round_trip(tmp_path):
    s = random_series(np.random.default_rng(3))
    save_series(s, tmp_path, "x")
    assert load_series(tmp_path, "x") == s
    header = (tmp_path / "x.csv").read_text().splitlines()[0]
    assert header == "time_index,u,v"
