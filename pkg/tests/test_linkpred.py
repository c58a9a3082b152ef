import csv
import math

import numpy as np
import pytest

from attrwalk.embedder import EmbeddingMatrix
from attrwalk.errors import CoverageError, InputError, ShapeError, StageError, TrainingError
from attrwalk.graph import EdgeSplit, Graph, load_train_graph, save_split, split_edges
from attrwalk.linkpred import (EDGE_OPS, compute_auc, edge_features, embed_graph, heuristic_scores, logistic_gradient,
                               logistic_loss, node_pair_features, run_pipeline, train_logistic)
from attrwalk.synthetic import _decode_upper, block_labels, planted_partition, preferential_attachment

from conftest import quick_config, random_graph
from oracles import auc_pairwise, central_difference, logistic_loss_reference, relative_error


# -- edge operators ---------------------------------------------------------


@pytest.mark.parametrize("op, expected", [("mean", [2, 3]), ("hadamard", [3, 8]), ("l1", [2, 2]), ("l2", [4, 4])])
def test_operator_examples(op, expected):
    assert edge_features([1, 2], [3, 4], op).tolist() == expected
    assert edge_features(np.zeros(3), np.zeros(3), op).tolist() == [0, 0, 0]


def test_operators_symmetric():
    rng = np.random.default_rng(0)
    for _ in range(50):
        a, b = rng.normal(size=(2, int(rng.integers(1, 20))))
        for op in EDGE_OPS:
            assert np.array_equal(edge_features(a, b, op), edge_features(b, a, op))
            assert edge_features(a, b, op).shape == a.shape


def test_operator_dimension_mismatch():
    with pytest.raises(ShapeError):
        edge_features([1, 2], [1, 2, 3])


# -- pair features ----------------------------------------------------------


def _toy_split():
    g = Graph.from_edges(8, [(i, (i + 1) % 8) for i in range(8)])
    return EdgeSplit(g, np.array([[0, 2], [1, 3]]), np.array([[0, 3], [1, 4]]), 0)


def test_pair_feature_counts():
    e = EmbeddingMatrix(np.random.default_rng(0).normal(size=(8, 4)), None, np.arange(8))
    pairs = node_pair_features(_toy_split(), e, lambda v: v)
    assert pairs.x_test.shape == (4, 4)
    assert pairs.y_test.tolist() == [1, 1, 0, 0]
    assert pairs.x_train.shape == (16, 4) and pairs.y_train.sum() == 8
    # training non-edges avoid train edges and every test pair
    test = {tuple(sorted(p)) for p in pairs.test_pairs.tolist()}
    for (u, v), y in zip(pairs.train_pairs.tolist(), pairs.y_train):
        if y == 0:
            assert not _toy_split().train_graph.has_edge(u, v) and tuple(sorted((u, v))) not in test


def test_identical_type_pairs_give_identical_features():
    types = np.array([0, 1] * 4)
    e = EmbeddingMatrix(np.random.default_rng(1).normal(size=(2, 3)), None, np.arange(2))
    pairs = node_pair_features(_toy_split(), e, lambda v: types[v])
    # test positives (0,2) and (1,3) have type pairs (0,0) and (1,1); (0,3) and (1,4) are both (0,1)
    assert np.array_equal(pairs.x_test[2], pairs.x_test[3])


def test_isolated_endpoint_is_a_coverage_error():
    g = Graph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 0)])  # node 4 has no training edges
    split = EdgeSplit(g, np.array([[3, 4]]), np.array([[0, 2]]), 0)
    result = embed_graph(g, quick_config(mode="baseline_node2vec"))
    with pytest.raises(CoverageError) as info:
        node_pair_features(split, result.embedding, lambda v: v)
    assert info.value.missing == [4]


# -- logistic regression ----------------------------------------------------


def test_separable_data():
    x = np.array([[-1.0], [1.0]] * 50)
    y = np.array([0, 1] * 50)
    m = train_logistic(x, y, epochs=20, seed=0)
    s = m.decision_function(x)
    assert compute_auc(s[y == 1], s[y == 0]) == 1.0 == auc_pairwise(s[y == 1], s[y == 0])


def check_logistic_gradient(rng):
    n, d = int(rng.integers(2, 30)), int(rng.integers(1, 11))
    x = rng.normal(size=(n, d))
    y = rng.integers(0, 2, n).astype(float)
    w, b, l2 = rng.normal(size=d), float(rng.normal()), float(rng.uniform(0, 0.1))
    gw, gb = logistic_gradient(w, b, x, y, l2)
    theta = np.append(w, b)
    num = central_difference(lambda t: logistic_loss_reference(t[:-1], t[-1], x, y, l2), theta)
    assert logistic_loss(w, b, x, y, l2) == pytest.approx(logistic_loss_reference(w, b, x, y, l2), rel=1e-10)
    return relative_error(np.append(gw, gb), num)


def test_logistic_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    assert max(check_logistic_gradient(rng) for _ in range(100)) <= 1e-4


def test_intercept_only_optimum():
    y = np.array([1] * 30 + [0] * 10)
    m = train_logistic(np.zeros((40, 3)), y, epochs=300, lr=0.5, l2_penalty=0.0, seed=0)
    assert np.allclose(m.weights, 0)
    assert abs(m.bias - math.log(3)) < 0.05


def test_single_class_rejected():
    with pytest.raises(TrainingError):
        train_logistic(np.ones((5, 2)), np.ones(5))


def test_logistic_deterministic():
    rng = np.random.default_rng(4)
    x, y = rng.normal(size=(60, 3)), rng.integers(0, 2, 60)
    a, b = train_logistic(x, y, seed=3), train_logistic(x, y, seed=3)
    assert np.array_equal(a.weights, b.weights) and a.bias == b.bias


# -- AUC ----------------------------------------------------------------------


def test_auc_examples():
    assert compute_auc([0.9, 0.8], [0.1, 0.2]) == 1.0
    assert compute_auc([0.5, 0.5], [0.5]) == 0.5
    assert compute_auc([0.8, 0.3], [0.5, 0.1]) == 0.75


def test_auc_requires_both_lists():
    with pytest.raises(InputError):
        compute_auc([], [1.0])


def test_auc_matches_pairwise_on_random_instances():
    rng = np.random.default_rng(0)
    for _ in range(300):
        pos = rng.integers(0, 8, int(rng.integers(1, 60))) / 2.0
        neg = rng.integers(0, 8, int(rng.integers(1, 60))) / 2.0
        assert compute_auc(pos, neg) == auc_pairwise(pos, neg)


def test_auc_invariant_under_monotone_transforms():
    rng = np.random.default_rng(1)
    pos, neg = rng.normal(size=40), rng.normal(size=50) - 0.5
    base = compute_auc(pos, neg)
    assert compute_auc(np.exp(pos), np.exp(neg)) == base
    assert compute_auc(3 * pos + 7, 3 * neg + 7) == base


def test_heuristics():
    g = Graph.from_edges(4, [(0, 1), (0, 2), (1, 2), (2, 3)])
    assert heuristic_scores(g, [[0, 3], [1, 3]], "degree_product").tolist() == [2, 2]
    assert heuristic_scores(g, [[0, 3], [0, 1]], "common_neighbors").tolist() == [1, 1]


# -- generators -------------------------------------------------------------


@pytest.mark.parametrize("n", [2, 3, 7, 60])
def test_upper_triangle_decode(n):
    expected = [(i, j) for i in range(n) for j in range(i + 1, n)]
    i, j = _decode_upper(np.arange(len(expected)), n)
    assert list(zip(i.tolist(), j.tolist())) == expected


def test_upper_triangle_decode_large():
    n = 10_000
    total = n * (n - 1) // 2
    idx = np.array([0, 1, n - 2, n - 1, total // 2, total - 2, total - 1])
    i, j = _decode_upper(idx, n)
    # invert: row-major position of (i, j)
    back = i * n - i * (i + 1) // 2 + (j - i - 1)
    assert np.array_equal(back, idx) and np.all(i < j) and np.all(j < n)


def test_planted_partition_densities():
    g = planted_partition([150, 150], 0.10, 0.01, seed=1)
    blocks = block_labels([150, 150])
    e = g.edges()
    inside = blocks[e[:, 0]] == blocks[e[:, 1]]
    assert abs(inside.sum() / (2 * 150 * 149 / 2) - 0.10) < 0.01
    assert abs((~inside).sum() / (150 * 150) - 0.01) < 0.003
    assert planted_partition([150, 150], 0.10, 0.01, seed=1).edges().tolist() == e.tolist()


def test_preferential_attachment():
    g = preferential_attachment(200, 3, seed=0)
    assert g.num_nodes == 200
    assert g.degrees()[3:].min() >= 3


# -- pipeline -----------------------------------------------------------------


@pytest.fixture(scope="module")
def small_graph():
    return planted_partition([40, 40], 0.25, 0.03, seed=3)


def test_pipeline_deterministic(small_graph):
    cfg = quick_config(seed=5)
    a, b = run_pipeline(small_graph, cfg), run_pipeline(small_graph, cfg)
    assert a.report.to_text() == b.report.to_text()
    assert 0.0 <= a.report.auc <= 1.0
    assert a.report.embedding_rows == a.report.num_types


def test_identity_typing_matches_baseline(small_graph):
    base = run_pipeline(small_graph, quick_config(mode="baseline_node2vec", seed=2))
    ident = run_pipeline(small_graph, quick_config(phi="identity", seed=2))
    assert base.report.auc == ident.report.auc
    assert np.array_equal(base.result.embedding.input_vectors, ident.result.embedding.input_vectors)


@pytest.mark.parametrize("mode", ["attributed", "baseline_node2vec"])
def test_leakage_guard(tmp_path, small_graph, mode):
    cfg = quick_config(mode=mode, seed=4)
    split = split_edges(small_graph, cfg.test_fraction, cfg.stage_seed("split"))
    save_split(split, tmp_path)
    (tmp_path / "test_pos.txt").unlink()
    from_disk = embed_graph(load_train_graph(tmp_path), cfg)
    in_memory = embed_graph(split.train_graph, cfg)
    assert from_disk.embedding.input_vectors.tobytes() == in_memory.embedding.input_vectors.tobytes()


def test_repeats_report_mean(small_graph):
    run = run_pipeline(small_graph, quick_config(repeats=3))
    assert len(run.report.fold_aucs) == 3
    assert run.report.auc == pytest.approx(np.mean(run.report.fold_aucs))


@pytest.mark.parametrize("phi", ["log", "kmeans"])
def test_type_rows_independent_of_node_count(small_graph, phi):
    run = run_pipeline(small_graph, quick_config(phi=phi, types=6))
    assert run.report.embedding_rows == run.result.phi.num_types < small_graph.num_nodes


def test_report_outputs(tmp_path, small_graph):
    run = run_pipeline(small_graph, quick_config(), graph_name="pp")
    run.report.write(tmp_path / "r.txt")
    fields = dict(line.split("=", 1) for line in (tmp_path / "r.txt").read_text().splitlines())
    assert float(fields["auc"]) == run.report.auc
    assert fields["operator"] == "mean" and fields["config_digest"] == quick_config().digest()
    run.report.append_csv(tmp_path / "res.csv")
    run.report.append_csv(tmp_path / "res.csv")
    rows = list(csv.reader(open(tmp_path / "res.csv")))
    assert rows[0] == ["graph", "mode", "operator", "auc", "seed", "digest"]
    assert len(rows) == 3 and rows[1][0] == "pp"


def test_digest_ignores_threads():
    assert quick_config(threads=4).digest() == quick_config().digest()
    assert quick_config(seed=1).digest() != quick_config().digest()


def test_stage_errors_are_tagged():
    tiny = Graph.from_edges(4, [(0, 1), (2, 3)])
    with pytest.raises(StageError) as info:
        run_pipeline(tiny, quick_config())
    assert info.value.stage == "split"


def test_heuristic_baseline_recorded(small_graph):
    run = run_pipeline(small_graph, quick_config())
    s = run.split
    pairs = np.concatenate([s.test_positives, s.test_negatives])
    scores = heuristic_scores(s.train_graph, pairs, "degree_product")
    npos = len(s.test_positives)
    assert run.report.baseline_auc_degree_product == auc_pairwise(scores[:npos], scores[npos:])


def test_random_graph_pipeline_runs():
    run = run_pipeline(random_graph(60, 0.15, seed=0), quick_config(operator="hadamard"))
    assert run.report.num_test_pos == run.report.num_test_neg
