import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import brute_auc

from ladynet.netstats import (Undefined, assortativity, assortativity_batch, auc,
                              degree, degrees, density, dyads_to_matrix,
                              expected_assortativity_mc, is_undefined,
                              mixing_matrix, posterior_predictive,
                              predictive_check, psrf, psrf_array, split_chains,
                              summarize_draws, write_check_csv)


def graph(V, edges):
    A = np.zeros((V, V), dtype=np.int8)
    for u, v in edges:
        A[u, v] = A[v, u] = 1
    return A


def per_edge_assortativity(A, labels):
    """Independent tally: walk every edge end, then apply the coefficient."""
    classes = sorted(set(labels))
    e = np.zeros((len(classes), len(classes)))
    V = A.shape[0]
    for u in range(V):
        for v in range(V):
            if u != v and A[u, v]:
                e[classes.index(labels[u]), classes.index(labels[v])] += 1
    e /= e.sum()
    a = e.sum(1)
    return (np.trace(e) - a @ a) / (1 - a @ a)


class TestBasics:
    def test_density(self):
        assert density(np.zeros((5, 5))) == 0
        assert density(1 - np.eye(5)) == 1
        assert density(graph(4, [(0, 1), (1, 2), (2, 3)])) == 0.5

    def test_degree_star(self):
        star = graph(5, [(0, k) for k in range(1, 5)])
        assert degree(star, 0) == 4
        assert degree(star, 3) == 1
        assert degree(graph(3, [(0, 1)]), 2) == 0

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 9), st.integers(0, 2 ** 31 - 1))
    def test_density_is_mean_degree(self, V, seed):
        rng = np.random.default_rng(seed)
        A = dyads_to_matrix(rng.integers(0, 2, V * (V - 1) // 2), V)
        assert density(A) == pytest.approx(degrees(A).mean() / (V - 1))


class TestAssortativity:
    def test_disjoint_cliques(self):
        A = graph(6, [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)])
        assert assortativity(A, "aaabbb") == pytest.approx(1.0)

    def test_complete_bipartite(self):
        A = graph(4, [(0, 2), (0, 3), (1, 2), (1, 3)])
        assert assortativity(A, "aabb") == pytest.approx(-1.0)

    def test_path_hand_case(self):
        A = graph(4, [(0, 1), (1, 2), (2, 3)])
        r = assortativity(A, "AABB")
        assert r == pytest.approx(1 / 3, abs=1e-12)
        assert per_edge_assortativity(A, "AABB") == pytest.approx(1 / 3, abs=1e-12)
        e, classes = mixing_matrix(A, "AABB")
        assert np.allclose(e, e.T) and e.sum() == pytest.approx(1.0)

    def test_undefined_cases(self):
        assert is_undefined(assortativity(np.zeros((4, 4)), "aabb"))
        assert is_undefined(assortativity(graph(3, [(0, 1)]), "aaa"))
        assert not Undefined("x")

    def test_none_labels_excluded(self):
        A = graph(5, [(0, 1), (2, 3), (0, 4), (1, 4)])
        assert assortativity(A, ["a", "a", "b", "b", None]) == pytest.approx(1.0)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2 ** 31 - 1))
    def test_matches_tally_and_permutation(self, seed):
        rng = np.random.default_rng(seed)
        V = 8
        A = dyads_to_matrix((rng.random(28) < 0.4).astype(np.int8), V)
        labels = list(rng.choice(["x", "y", "z"], V))
        r = assortativity(A, labels)
        if is_undefined(r):
            return
        assert r == pytest.approx(per_edge_assortativity(A, labels))
        perm = rng.permutation(V)
        r2 = assortativity(A[np.ix_(perm, perm)], [labels[p] for p in perm])
        assert r2 == pytest.approx(r)
        batch = assortativity_batch(A[None], labels)
        assert batch[0] == pytest.approx(r)

    def test_expected_assortativity_perfect(self):
        labels = "aaabbb"
        pi = np.zeros((6, 6))
        pi[:3, :3] = pi[3:, 3:] = 1
        np.fill_diagonal(pi, 0)
        vals, n_undef = expected_assortativity_mc(pi[None].repeat(3, 0), labels, 20, 0)
        assert np.allclose(vals, 1.0) and n_undef == 0

    def test_expected_assortativity_uninformative(self):
        V = 20
        labels = ["a"] * 10 + ["b"] * 10
        pi = np.full((1, V, V), 0.5)
        vals, _ = expected_assortativity_mc(pi, labels, 2000, 1)
        sims = dyads_to_matrix(
            (np.random.default_rng(2).random((2000, 190)) < 0.5).astype(np.int8), V)
        sd = np.nanstd(assortativity_batch(sims, labels))
        # without self-loops, same-label dyads are 90 of 190, so the
        # label-blind value is (90/190 - 1/2) / (1/2) = -1/19, not exactly 0
        assert abs(vals[0] - (-1 / 19)) < 4 * sd / np.sqrt(2000)
        assert abs(vals[0]) < 0.06

    def test_expected_assortativity_counts_undefined(self):
        vals, n_undef = expected_assortativity_mc(np.zeros((2, 3)), "aab", 5, 0)
        assert np.all(np.isnan(vals)) and n_undef == 10


class TestAUC:
    def test_hand_case(self):
        assert auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75
        assert brute_auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75

    def test_trivial(self):
        assert auc([0, 0, 1, 1], [0, 0, 1, 1]) == 1.0
        assert auc([0.3] * 6, [0, 1, 0, 1, 1, 0]) == 0.5
        assert is_undefined(auc([0.1, 0.2], [1, 1]))

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 5), st.booleans()), min_size=2, max_size=30))
    def test_brute_force_and_monotone_invariance(self, pairs):
        scores = np.array([p[0] for p in pairs], dtype=float)
        labels = np.array([p[1] for p in pairs])
        if labels.all() or not labels.any():
            assert is_undefined(auc(scores, labels))
            return
        a = auc(scores, labels)
        assert a == pytest.approx(brute_auc(scores, labels))
        assert auc(np.exp(3 * scores) - 7, labels) == pytest.approx(a)


class TestPSRF:
    def test_constant_chains_undefined(self):
        assert is_undefined(psrf(np.ones((4, 100))))

    def test_iid_chains_near_one(self):
        chains = np.random.default_rng(0).normal(size=(4, 1000))
        assert abs(psrf(chains) - 1) < 0.05

    def test_disjoint_supports(self):
        rng = np.random.default_rng(1)
        chains = np.stack([rng.normal(-10, 1, 1000), rng.normal(10, 1, 1000)])
        assert psrf(chains) > 3

    def test_formula_hand_case(self):
        chains = np.array([[0.0, 2.0], [4.0, 6.0]])
        # W = 2, chain means 1 and 5, B = L * var = 2 * 8 = 16
        expected = np.sqrt((0.5 * 2 + 16 / 2) / 2)
        assert psrf(chains) == pytest.approx(expected)

    def test_split_and_array(self):
        draws = np.arange(4003.0)
        ch = split_chains(draws, 4)
        assert ch.shape == (4, 1000) and ch[0, 0] == 3.0
        R = psrf_array(np.zeros((4, 10, 3)))
        assert R.mask.all()
        with pytest.raises(ValueError):
            psrf_array(np.zeros((1, 10)))


class TestPredictive:
    def test_zero_pi_empty(self):
        assert not posterior_predictive(np.zeros((5, 10)), 0).any()

    def test_shape_preserved(self):
        assert posterior_predictive(np.full((7, 3, 4), 0.5), 0).shape == (7, 3, 4)

    def test_frequency_converges(self):
        rng = np.random.default_rng(3)
        pi = rng.uniform(0.05, 0.95, 6)
        sims = posterior_predictive(np.broadcast_to(pi, (10_000, 6)), rng)
        se = np.sqrt(pi * (1 - pi) / 10_000)
        assert np.all(np.abs(sims.mean(0) - pi) < 4 * se)

    def test_check_rows(self, tmp_path):
        rng = np.random.default_rng(4)
        V, n, S = 6, 3, 200
        pi = np.full((S, n, 15), 0.3)
        obs = dyads_to_matrix((rng.random((n, 15)) < 0.3).astype(np.int8), V)
        rows = predictive_check(pi, obs, {"g": "aaabbb"}, rng)
        kinds = [r["statistic"] for r in rows]
        assert kinds.count("density") == n
        assert kinds.count("degree") == n * V
        assert kinds.count("assortativity") == n
        dens = [r for r in rows if r["statistic"] == "density"]
        assert all(r["q025"] <= r["mean"] <= r["q975"] for r in dens)
        assert all(r["mean"] == pytest.approx(0.3, abs=0.03) for r in dens)
        write_check_csv(rows, tmp_path / "check.csv")
        lines = (tmp_path / "check.csv").read_text().splitlines()
        assert lines[0].startswith("statistic,label,actor,time_index,observed")
        assert len(lines) == len(rows) + 1

    def test_summaries_skip_undefined(self):
        mean, qs = summarize_draws(np.array([[1.0, np.nan], [3.0, np.nan]]))
        assert mean[0] == 2.0 and np.isnan(mean[1])
