import json

import numpy as np
import pytest
from oracles import best_permutation_precision, nmi_oracle

from hypcomm.graph import Graph
from hypcomm.metrics import (
    MatchingError,
    MetricsReport,
    conductance,
    kfold,
    match_clusters,
    mean_std,
    nmi,
    precision_at_n,
)


def triangles(bridge):
    edges = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]
    return Graph.from_edges(6, edges + ([(2, 3)] if bridge else []))


class TestConductance:
    def test_disjoint_triangles(self):
        assert conductance(triangles(False), [0, 0, 0, 1, 1, 1]).value == 0.0

    def test_bridged_triangles(self):
        c = conductance(triangles(True), [0, 0, 0, 1, 1, 1])
        assert c.value == pytest.approx(1 / 7, abs=1e-15)
        np.testing.assert_allclose(c.per_cluster, [1 / 7, 1 / 7])
        assert c.degenerate == ()

    def test_single_cluster_flagged(self):
        c = conductance(triangles(True), np.zeros(6, dtype=int))
        assert c.value == 0.0 and c.degenerate == (0,)

    def test_empty_cluster_flagged(self):
        c = conductance(triangles(True), [0, 0, 0, 2, 2, 2], K=3)
        assert c.degenerate == (1,)

    def test_relabel_invariant(self):
        g = triangles(True)
        a = conductance(g, [0, 1, 0, 1, 1, 0]).value
        assert conductance(g, [1, 0, 1, 0, 0, 1]).value == pytest.approx(a)

    def test_assignment_length(self):
        with pytest.raises(ValueError):
            conductance(triangles(True), [0, 1])


class TestNMI:
    def test_identical(self):
        assert nmi([0, 0, 1, 1, 2], [0, 0, 1, 1, 2]) == pytest.approx(1.0)

    def test_permuted(self):
        assert nmi([2, 2, 0, 0, 1], [0, 0, 1, 1, 2]) == pytest.approx(1.0)

    def test_independent(self):
        assert nmi([0, 1, 0, 1], [0, 0, 1, 1]) == pytest.approx(0.0, abs=1e-15)

    def test_degenerate_flag(self):
        value, flagged = nmi([0, 0, 0], [1, 1, 1], with_flag=True)
        assert value == 0.0 and flagged

    def test_random_against_oracle(self):
        rng = np.random.default_rng(0)
        pred, truth = rng.integers(0, 3, 20), rng.integers(0, 3, 20)
        assert nmi(pred, truth) == pytest.approx(nmi_oracle(pred.tolist(), truth.tolist()), abs=1e-12)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(1)
        pred, truth = rng.integers(0, 4, 50), rng.integers(0, 3, 50)
        perm = rng.permutation(4)
        assert nmi(perm[pred], truth) == pytest.approx(nmi(pred, truth), abs=1e-14)


class TestPrecision:
    def test_swapped_ids(self):
        truth = np.array([0, 0, 1, 1, 2])
        pred = np.array([1, 1, 2, 2, 0])
        assert precision_at_n(pred, truth, matching="exhaustive") == 1.0
        assert precision_at_n(pred, truth) == 0.0

    def test_multi_label_hit(self):
        truth = np.zeros((1, 6), dtype=int)
        truth[0, [2, 5]] = 1
        assert precision_at_n(np.array([5]), truth) == 1.0

    def test_top_n_fraction(self):
        truth = np.array([[1, 0, 1, 0], [0, 1, 0, 0]])
        pred = np.array([[0, 1, 2], [1, 3, 2]])
        assert precision_at_n(pred, truth) == pytest.approx((2 / 3 + 1 / 3) / 2)

    def test_k3_against_brute_force(self):
        rng = np.random.default_rng(2)
        truth = rng.integers(0, 3, 30)
        pred = rng.integers(0, 3, 30)
        sets = [{t} for t in truth]
        exh = precision_at_n(pred, truth, matching="exhaustive")
        assert exh == pytest.approx(best_permutation_precision(pred.tolist(), sets, 3))
        assert precision_at_n(pred, truth, matching="greedy") <= exh + 1e-15

    def test_greedy_never_beats_exhaustive(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            kp, kt = rng.integers(2, 9, 2)
            pred, truth = rng.integers(0, kp, 40), rng.integers(0, kt, 40)
            assert precision_at_n(pred, truth, "greedy") <= precision_at_n(pred, truth, "exhaustive") + 1e-15

    def test_more_clusters_than_labels(self):
        truth = np.array([0, 0, 1, 1])
        pred = np.array([0, 1, 2, 2])
        assert precision_at_n(pred, truth, "exhaustive") == pytest.approx(0.75)

    def test_greedy_size_order_and_ties(self):
        truth = np.array([0, 0, 0, 1, 1, 2])
        pred = np.array([1, 1, 1, 0, 2, 2])
        # cluster 1 is largest -> class 0; clusters 0 and 2 tie, smaller id 0 is matched first
        mapping = match_clusters(pred, truth, "greedy")
        np.testing.assert_array_equal(mapping, [2, 0, 1])

    def test_exhaustive_limit(self):
        pred = np.arange(9)
        with pytest.raises(MatchingError, match="greedy"):
            precision_at_n(pred, pred, "exhaustive")
        assert precision_at_n(pred, pred, "greedy") == 1.0


class TestFolds:
    def test_ten_nodes_five_folds(self):
        splits = kfold(10, 5, seed=0)
        vals = [v for _, v in splits]
        assert all(len(v) == 2 for v in vals)
        np.testing.assert_array_equal(np.sort(np.concatenate(vals)), np.arange(10))
        for train, val in splits:
            assert not set(train) & set(val) and len(train) + len(val) == 10

    def test_deterministic(self):
        a, b = kfold(50, 5, seed=4), kfold(50, 5, seed=4)
        for (ta, va), (tb, vb) in zip(a, b):
            np.testing.assert_array_equal(ta, tb)
            np.testing.assert_array_equal(va, vb)

    def test_lost_community_warns(self, caplog):
        labels = np.array([0] * 9 + [1])
        kfold(10, 5, seed=0, labels=labels)
        assert "no training members" in caplog.text

    def test_folds_at_least_two(self):
        with pytest.raises(ValueError):
            kfold(10, 1)


class TestReport:
    def test_mean_std(self):
        mean, std = mean_std([80, 90, 100, 90, 80])
        assert mean == 88
        assert std == pytest.approx(8.3666, abs=1e-4)

    def test_json_layout(self):
        r = MetricsReport()
        for v in (0.8, 0.9):
            r.add("Precision@1", v)
        doc = json.loads(r.to_json())
        assert doc["Precision@1"]["per_fold"] == [0.8, 0.9]
        assert doc["Precision@1"]["mean"] == pytest.approx(0.85)
        assert "Precision@1" in r.table()
