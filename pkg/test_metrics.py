"""Tests for ranking and recall metrics, checked against brute-force enumeration."""

import itertools
import json

import numpy as np
import pandas as pd
import pytest

from conftest import random_graph
from sgglab.core import SceneGraph, all_pairs
from sgglab.freq import TripletCounts, fit_freq, freq_predict, triplet_counts
from sgglab.metrics import (
    REPORT_COLUMNS,
    MetricReport,
    Prediction,
    Task,
    freq_predictions,
    image_recall,
    image_recall_at_k,
    mean_recall,
    n_shot_filter,
    rank_triplets,
    recall_by_graph_size,
    recall_suite,
    triplet_ranks,
    triplet_recall,
    triplet_weights,
    weighted_triplet_recall,
)
from sgglab.utils.exceptions import ConfigurationError, DegenerateInputError, PredictionMismatchError


def random_prediction(rng, g, c_obj, c_pred, coarse=False):
    n = g.num_nodes
    if coarse:
        # tenths force score ties
        node_probs = rng.multinomial(10, np.full(c_obj, 1 / c_obj), size=n) / 10
        pair_probs = rng.multinomial(10, np.full(1 + c_pred, 1 / (1 + c_pred)), size=n * (n - 1)) / 10
    else:
        node_probs = rng.dirichlet(np.ones(c_obj), size=n)
        pair_probs = rng.dirichlet(np.ones(1 + c_pred), size=n * (n - 1))
    return Prediction(g.graph_id, node_probs, tuple(all_pairs(n)), pair_probs.reshape(n * (n - 1), 1 + c_pred))


def random_instances(rng, count):
    for k in range(count):
        c_obj, c_pred = int(rng.integers(1, 5)), int(rng.integers(1, 4))
        g = random_graph(rng, f"r{k}", n_min=1, n_max=4, c_obj=c_obj, c_pred=c_pred, max_density=1.0)
        yield g, random_prediction(rng, g, c_obj, c_pred, coarse=bool(k % 2)), c_obj, c_pred


def brute_force_ranking(pred, g, constrained, task):
    """Every candidate with its score, sorted by score desc, pair index, predicate."""
    n = g.num_nodes
    if task is Task.PREDCLS:
        classes, node_scores = list(g.nodes), [1.0] * n
    else:
        classes = [int(np.argmax(row)) for row in pred.node_probs]
        node_scores = [float(pred.node_probs[i, c]) for i, c in enumerate(classes)]
    candidates = []
    for idx, (i, j) in enumerate(all_pairs(n)):
        probs = pred.probs_for(i, j)[1:]
        predicates = [int(np.argmax(probs))] if constrained else range(len(probs))
        for q in predicates:
            score = (node_scores[i] * probs[q]) * node_scores[j]
            candidates.append((score, idx, q, (i, j, classes[i], q + 1, classes[j])))
    candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
    return [c[3] for c in candidates]


def brute_force_recall(pred, g, k, constrained, task):
    gt = set(g.gt_triplets())
    if not gt:
        return None
    return len(gt & set(brute_force_ranking(pred, g, constrained, task)[:k])) / len(gt)


def brute_force_rank(pred, g, edge, task):
    s, o, p = edge
    probs = pred.probs_for(s, o)[1:]
    if task is Task.PREDCLS:
        return 1 + sum(1 for q in probs if q > probs[p - 1])
    ps, po = pred.node_probs[s], pred.node_probs[o]
    gt_score = (ps[g.nodes[s]] * probs[p - 1]) * po[g.nodes[o]]
    higher = sum(
        1
        for a, q, b in itertools.product(range(len(ps)), range(len(probs)), range(len(po)))
        if (ps[a] * probs[q]) * po[b] > gt_score
    )
    return 1 + higher


def one_hot_prediction(g, c_obj, c_pred):
    """Perfect predictor: GT predicate with prob 1 on FG pairs, BG elsewhere."""
    pairs = all_pairs(g.num_nodes)
    probs = np.zeros((len(pairs), 1 + c_pred))
    probs[:, 0] = 1.0
    for row, (i, j) in enumerate(pairs):
        p = g.edge_map.get((i, j))
        if p is not None:
            probs[row] = 0.0
            probs[row, p] = 1.0
    return Prediction(g.graph_id, np.eye(c_obj)[list(g.nodes)], tuple(pairs), probs)


@pytest.fixture
def long_tail_case():
    """Three GT triplets seen 0, 1 and 9 times; only the first is ranked top-1 in its pair."""
    g = SceneGraph("w", (0, 1, 2), ((0, 1, 1), (1, 2, 1), (2, 0, 1)))
    counts = TripletCounts({(1, 1, 2): 1, (2, 1, 0): 9})
    pair_probs = []
    for i, j in all_pairs(3):
        if (i, j) == (0, 1):
            pair_probs.append([0.0, 0.9, 0.1])
        elif (i, j) in ((1, 2), (2, 0)):
            pair_probs.append([0.0, 0.1, 0.9])
        else:
            pair_probs.append([0.0, 0.5, 0.5])
    pred = Prediction("w", np.eye(3), tuple(all_pairs(3)), np.asarray(pair_probs))
    return g, pred, counts


class TestPrediction:

    def test_record_round_trip(self, rng, toy_graph):
        pred = random_prediction(rng, toy_graph, 3, 2)
        restored = Prediction.from_record(json.loads(json.dumps(pred.to_record())))
        np.testing.assert_array_equal(restored.pair_probs, pred.pair_probs)
        assert restored.pairs == pred.pairs

    def test_rounded_record(self, rng, toy_graph):
        record = random_prediction(rng, toy_graph, 3, 2).to_record(decimals=2)
        assert all(round(v, 2) == v for e in record["pair_probs"] for v in e["probs"])

    def test_shape_mismatch(self):
        with pytest.raises(PredictionMismatchError):
            Prediction("x", np.eye(2), ((0, 1), (1, 0)), np.zeros((1, 3)))

    def test_out_of_range_probabilities(self):
        with pytest.raises(PredictionMismatchError, match=r"'x'.*outside \[0, 1\]"):
            Prediction("x", np.eye(2), ((0, 1), (1, 0)), [[0.0, 7.0, -3.0], [0.0, 5.0, 9.0]])
        with pytest.raises(PredictionMismatchError, match="outside"):
            Prediction("x", [[np.nan, 1.0], [0.0, 1.0]], ((0, 1), (1, 0)), np.tile([1.0, 0.0, 0.0], (2, 1)))

    def test_rows_must_sum_to_one(self):
        with pytest.raises(PredictionMismatchError, match="pair_probs"):
            Prediction("x", np.eye(2), ((0, 1),), [[0.1, 0.4, 0.4]])
        with pytest.raises(PredictionMismatchError, match="node_probs"):
            Prediction("x", [[0.5, 0.4], [0.0, 1.0]], ((0, 1),), [[1.0, 0.0, 0.0]])
        Prediction("x", np.eye(2), ((0, 1),), [[0.2, 0.3, 0.5 + 5e-7]])

    def test_rounded_record_keeps_distributions(self, rng):
        g = random_graph(rng, "big", n_min=6, n_max=6)
        pred = random_prediction(rng, g, 40, 50)
        for decimals in (1, 2, 6):
            record = pred.to_record(decimals=decimals)
            rows = [e["probs"] for e in record["pair_probs"]] + record["node_probs"]
            assert all(round(v, decimals) == v for row in rows for v in row)
            assert all(abs(sum(row) - 1.0) <= 1e-9 for row in rows)
            Prediction.from_record(record)

    def test_missing_pair(self):
        pred = Prediction("x", np.eye(2), ((0, 1),), [[1.0, 0.0, 0.0]])
        with pytest.raises(PredictionMismatchError, match=r"\(1, 0\)"):
            pred.probs_for(1, 0)

    def test_pair_order_is_free(self, rng, toy_graph):
        pred = random_prediction(rng, toy_graph, 3, 2)
        shuffled = Prediction("toy", pred.node_probs, pred.pairs[::-1], pred.pair_probs[::-1])
        np.testing.assert_array_equal(shuffled.canonical_pair_probs(3), pred.pair_probs)
        assert rank_triplets(shuffled, toy_graph) == rank_triplets(pred, toy_graph)


class TestRanking:

    def test_bg_is_never_a_candidate(self, rng, toy_graph):
        ranked = rank_triplets(random_prediction(rng, toy_graph, 3, 2), toy_graph)
        assert len(ranked) == 6 * 2
        assert all(r.predicate >= 1 for r in ranked)

    def test_constrained_keeps_one_per_pair(self, rng, toy_graph):
        ranked = rank_triplets(random_prediction(rng, toy_graph, 3, 2), toy_graph, constrained=True)
        assert len({(r.subject_node, r.object_node) for r in ranked}) == len(ranked) == 6

    def test_ties_break_by_pair_then_predicate(self, toy_graph):
        pred = Prediction("toy", np.eye(3), tuple(all_pairs(3)), np.tile([0.0, 0.5, 0.5], (6, 1)))
        ranked = rank_triplets(pred, toy_graph)
        assert [(r.subject_node, r.object_node, r.predicate) for r in ranked[:3]] == [(0, 1, 1), (0, 1, 2), (0, 2, 1)]

    @pytest.mark.parametrize("task", [Task.PREDCLS, Task.SGCLS])
    @pytest.mark.parametrize("constrained", [False, True])
    def test_matches_brute_force(self, rng, task, constrained):
        for g, pred, _, _ in random_instances(rng, 200):
            expected = brute_force_ranking(pred, g, constrained, task)
            assert [r.key() for r in rank_triplets(pred, g, constrained, task)] == expected
            for k in (1, 3, 20):
                assert image_recall([pred], [g], k, constrained, task) == brute_force_recall(pred, g, k, constrained, task)

    def test_sgcls_needs_node_rows(self, toy_graph):
        pred = Prediction("toy", np.eye(3)[:2], tuple(all_pairs(3)), np.tile([0.0, 0.5, 0.5], (6, 1)))
        with pytest.raises(PredictionMismatchError):
            rank_triplets(pred, toy_graph, task="sgcls")


class TestImageRecall:

    def test_per_image_recall(self):
        ranked = rank_triplets(
            Prediction("a", np.eye(2), ((0, 1), (1, 0)), [[0.0, 0.9, 0.1], [0.0, 0.2, 0.8]]),
            SceneGraph("a", (0, 1), ((0, 1, 2),)),
        )
        # candidate order: (0,1,p1) .9, (1,0,p2) .8, (1,0,p1) .2, (0,1,p2) .1
        gt = [(0, 1, 0, 2, 1)]
        assert image_recall_at_k(ranked, gt, 3) == 0.0
        assert image_recall_at_k(ranked, gt, 4) == 1.0
        assert image_recall_at_k(ranked, [], 3) is None
        with pytest.raises(ConfigurationError):
            image_recall_at_k(ranked, gt, 0)

    def test_perfect_predictor(self, rng, make_graphs):
        graphs = make_graphs(rng, 20, n_min=2)
        preds = [one_hot_prediction(g, 4, 3) for g in graphs]
        max_fg = max(g.m_fg for g in graphs)
        assert image_recall(preds, graphs, max_fg) == 1.0
        assert triplet_recall(preds, graphs, 1) == 1.0

    def test_monotone_in_k(self, rng, make_graphs):
        graphs = make_graphs(rng, 30, n_min=2)
        preds = [random_prediction(rng, g, 4, 3) for g in graphs]
        values = [image_recall(preds, graphs, k) for k in (1, 2, 5, 10, 50)]
        assert values == sorted(values)

    def test_images_without_gt_are_skipped(self, toy_graph):
        empty = SceneGraph("e", (0, 1), ())
        preds = [one_hot_prediction(toy_graph, 3, 2), one_hot_prediction(empty, 3, 2)]
        assert image_recall(preds, [toy_graph, empty], 2) == 1.0
        assert image_recall(preds[1:], [empty], 2) is None

    def test_alignment_errors(self, toy_graph):
        pred = one_hot_prediction(toy_graph, 3, 2)
        with pytest.raises(PredictionMismatchError, match="no prediction"):
            image_recall([], [toy_graph], 5)
        with pytest.raises(PredictionMismatchError, match="Duplicate"):
            image_recall([pred, pred], [toy_graph], 5)
        with pytest.raises(PredictionMismatchError, match="match no graph"):
            recall_suite([pred, one_hot_prediction(SceneGraph("other", (0, 1), ()), 3, 2)], [toy_graph], None, [5])


class TestMeanRecall:

    def test_matches_pooled_per_class_recall(self, rng, make_graphs):
        graphs = make_graphs(rng, 40, n_min=2, c_pred=3)
        preds = {g.graph_id: random_prediction(rng, g, 4, 3) for g in graphs}
        for k in (1, 5):
            hits, totals = {}, {}
            for g in graphs:
                top = set(brute_force_ranking(preds[g.graph_id], g, False, Task.PREDCLS)[:k])
                for t in set(g.gt_triplets()):
                    totals[t[3]] = totals.get(t[3], 0) + 1
                    hits[t[3]] = hits.get(t[3], 0) + (t in top)
            expected = np.mean([hits[c] / totals[c] for c in sorted(totals)])
            assert mean_recall(preds, graphs, k) == pytest.approx(expected)

    def test_rare_class_counts_equally(self):
        # predicate 1 has three instances, predicate 2 one; only predicate 1 is found
        g = SceneGraph("a", (0, 1, 2), ((0, 1, 1), (1, 2, 1), (2, 0, 1), (0, 2, 2)))
        probs = np.tile([0.0, 1.0, 0.0], (6, 1))
        pred = Prediction("a", np.eye(3), tuple(all_pairs(3)), probs)
        assert image_recall([pred], [g], 6) == pytest.approx(0.75)
        assert mean_recall([pred], [g], 6) == pytest.approx(0.5)

    def test_no_gt(self):
        empty = SceneGraph("e", (0, 1), ())
        assert mean_recall([one_hot_prediction(empty, 2, 2)], [empty], 5) is None


class TestTripletRecall:

    @pytest.mark.parametrize("task", [Task.PREDCLS, Task.SGCLS])
    def test_ranks_match_brute_force(self, rng, task):
        for g, pred, _, _ in random_instances(rng, 200):
            expected = [brute_force_rank(pred, g, e, task) for e in g.fg_edges]
            assert [r for _, r in triplet_ranks([pred], [g], task)] == expected

    def test_weights(self):
        np.testing.assert_allclose(triplet_weights([0, 1, 9]), [0.625, 0.3125, 0.0625])
        with pytest.raises(DegenerateInputError):
            triplet_weights([])

    def test_long_tail_weighting(self, long_tail_case):
        g, pred, counts = long_tail_case
        assert triplet_recall([pred], [g], 1) == pytest.approx(1 / 3)
        assert weighted_triplet_recall([pred], [g], counts, 1) == pytest.approx(0.625)
        assert weighted_triplet_recall([pred], [g], counts, 2) == pytest.approx(1.0)

    def test_uniform_counts_give_plain_recall(self, rng, make_graphs):
        graphs = make_graphs(rng, 20, n_min=2)
        preds = [random_prediction(rng, g, 4, 3) for g in graphs]
        # every test triplet seen exactly once
        counts = TripletCounts({t: 1 for g in graphs for t in g.triplets()})
        for k in (1, 2):
            assert weighted_triplet_recall(preds, graphs, counts, k) == pytest.approx(triplet_recall(preds, graphs, k))

    def test_no_gt(self):
        empty = SceneGraph("e", (0, 1), ())
        with pytest.raises(DegenerateInputError):
            triplet_recall([one_hot_prediction(empty, 2, 2)], [empty], 5)


class TestNShotFilter:

    def test_keeps_rare_triplets(self, long_tail_case):
        g, _, counts = long_tail_case
        assert [h.fg_edges for h in n_shot_filter([g], counts, 0)] == [((0, 1, 1),)]
        assert len(n_shot_filter([g], counts, 1)[0].fg_edges) == 2
        assert n_shot_filter([g], TripletCounts({t: 5 for t in g.triplets()}), 1) == []

    def test_negative_threshold(self, toy_graph):
        with pytest.raises(ConfigurationError):
            n_shot_filter([toy_graph], TripletCounts({}), -1)


def brute_force_zero_shot_recall(pred, g, counts, k, task):
    zs = {t for t in g.gt_triplets() if counts.get((t[2], t[3], t[4])) == 0}
    if not zs:
        return None
    return len(zs & set(brute_force_ranking(pred, g, False, task)[:k])) / len(zs)


def brute_force_weighted_recall(pred, g, counts, k, task):
    if not g.fg_edges:
        return None
    inv = [1.0 / (counts.get((g.nodes[s], p, g.nodes[o])) + 1) for s, o, p in g.fg_edges]
    hits = [brute_force_rank(pred, g, e, task) <= k for e in g.fg_edges]
    return sum(w for w, h in zip(inv, hits) if h) / sum(inv)


class TestRecallSuite:

    @pytest.mark.parametrize("task", [Task.PREDCLS, Task.SGCLS])
    def test_zero_shot_and_weighted_match_brute_force(self, rng, task):
        for g, pred, _, _ in random_instances(rng, 200):
            # a random half of the test triplets was seen in training, 1 to 3 times
            counts = TripletCounts({t: int(rng.integers(1, 4)) for t in g.triplets() if rng.random() < 0.5})
            report = recall_suite([pred], [g], counts, [1, 3, 20], task)
            oracles = (
                ("R_ZS", "unconstrained", brute_force_zero_shot_recall),
                ("wR_tr", "triplet", brute_force_weighted_recall),
            )
            for k in (1, 3, 20):
                for metric, variant, oracle in oracles:
                    expected = oracle(pred, g, counts, k, task)
                    if expected is None:
                        with pytest.raises(KeyError):
                            report.get(metric, k, variant)
                    else:
                        assert report.get(metric, k, variant) == pytest.approx(expected)

    def test_rows_agree_with_standalone_metrics(self, rng, make_graphs):
        graphs = make_graphs(rng, 15, n_min=2)
        preds = {g.graph_id: random_prediction(rng, g, 4, 3) for g in graphs}
        counts = TripletCounts({t: int(rng.integers(0, 5)) for g in graphs for t in g.triplets()})
        report = recall_suite(preds, graphs, counts, [1, 5], constrained=True)
        for k in (1, 5):
            assert report.get("mR", k) == mean_recall(preds, graphs, k)
            assert report.get("mR", k, "constrained") == mean_recall(preds, graphs, k, constrained=True)
            assert report.get("R_tr", k, "triplet") == triplet_recall(preds, graphs, k)
            assert report.get("wR_tr", k, "triplet") == weighted_triplet_recall(preds, graphs, counts, k)

    def test_rows(self, long_tail_case):
        g, pred, counts = long_tail_case
        report = recall_suite([pred], [g], counts, [2, 1], nshots=[1], constrained=True)
        frame = report.to_frame()
        assert list(frame.columns) == REPORT_COLUMNS
        keys = set(zip(frame["metric"], frame["K"], frame["variant"]))
        for variant in ("unconstrained", "constrained"):
            for metric in ("R", "R_ZS", "R_1shot", "mR"):
                assert {(metric, 1, variant), (metric, 2, variant)} <= keys
        assert report.get("wR_tr", 1, "triplet") == pytest.approx(0.625)
        assert report.get("R_ZS", 1) == 1.0
        assert report.get("R", 1) == pytest.approx(1 / 3)
        assert list(frame["K"][:2]) == [1, 2]

    def test_missing_zero_shot_rows_are_omitted(self, toy_graph):
        counts = triplet_counts([toy_graph])
        report = recall_suite([one_hot_prediction(toy_graph, 3, 2)], [toy_graph], counts, [5])
        metrics = {r.metric for r in report.rows}
        assert "R_ZS" not in metrics
        assert {"R", "mR", "R_tr", "wR_tr"} <= metrics
        with pytest.raises(KeyError):
            report.get("R_ZS", 5)

    def test_without_counts(self, toy_graph):
        report = recall_suite([one_hot_prediction(toy_graph, 3, 2)], [toy_graph], None, [5], triplet_level=False)
        assert {r.metric for r in report.rows} == {"R", "mR"}

    def test_invalid_k(self, toy_graph):
        with pytest.raises(ConfigurationError):
            recall_suite([one_hot_prediction(toy_graph, 3, 2)], [toy_graph], None, [0])

    def test_csv_and_json(self, tmp_path, long_tail_case):
        g, pred, counts = long_tail_case
        report = recall_suite([pred], [g], counts, [1])
        report.to_csv(tmp_path / "out" / "metrics.csv")
        report.to_json(tmp_path / "metrics.json")
        frame = pd.read_csv(tmp_path / "out" / "metrics.csv")
        assert list(frame.columns) == REPORT_COLUMNS
        payload = json.loads((tmp_path / "metrics.json").read_text())
        assert len(payload["rows"]) == len(report.rows)

    def test_empty_report_frame(self):
        assert list(MetricReport().to_frame().columns) == REPORT_COLUMNS


class TestRecallByGraphSize:

    def test_bins(self, rng, make_graphs):
        graphs = make_graphs(rng, 10, n_min=2, n_max=9)
        preds = [one_hot_prediction(g, 4, 3) for g in graphs]
        frame = recall_by_graph_size(preds, graphs, k=100, n_bins=3)
        assert list(frame.columns) == ["bin", "n_min", "n_max", "images", "recall"]
        assert len(frame) == 3
        assert (frame["n_min"].diff().dropna() >= 0).all()
        assert frame["recall"].dropna().eq(1.0).all()

    def test_invalid_bins(self, toy_graph):
        with pytest.raises(ConfigurationError):
            recall_by_graph_size([], [toy_graph], 5, n_bins=0)


class TestFreqPredictions:

    def test_pairs_use_class_statistics(self, small_dataset):
        model = fit_freq(small_dataset.train, num_predicates=4)
        preds = freq_predictions(model, small_dataset.test, num_object_classes=6)
        for g in small_dataset.test[:5]:
            pred = preds[g.graph_id]
            np.testing.assert_array_equal(pred.node_probs.argmax(axis=1), g.nodes)
            np.testing.assert_array_equal(pred.pair_probs[:, 0], 0.0)
            for (i, j), row in zip(pred.pairs, pred.pair_probs):
                key = (g.nodes[i], g.nodes[j])
                if key in model:
                    np.testing.assert_allclose(row, freq_predict(model, *key))
                else:
                    np.testing.assert_allclose(row[1:], 0.25)

    def test_recovers_dominant_predicate(self):
        train = [SceneGraph(f"t{k}", (0, 1), ((0, 1, 2),)) for k in range(3)]
        test = [SceneGraph("x", (0, 1), ((0, 1, 2),))]
        preds = freq_predictions(fit_freq(train, num_predicates=3), test)
        assert image_recall(preds, test, 1) == 1.0
