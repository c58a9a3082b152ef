"""Link-prediction evaluation: edge operators, logistic regression, AUC and the full pipeline."""

from __future__ import annotations

import contextlib
import csv
import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .embedder import EmbeddingMatrix, SgnsConfig, train_sgns
from .errors import AttrWalkError, ConfigError, InputError, ShapeError, StageError, TrainingError
from .features import DEFAULT_FEATURES, compute_structural_features
from .graph import EdgeSplit, Graph, load_edge_list, sample_non_edges, split_edges
from .rng import derive_seed
from .typemap import TypeMap, assign_types, fit_identity, fit_kmeans, fit_log_binning
from .walker import WalkConfig, generate_attributed_walks, generate_walks

log = logging.getLogger(__name__)

EDGE_OPS = ("mean", "hadamard", "l1", "l2")
MODES = ("baseline_node2vec", "attributed")
PHI_KINDS = ("log", "kmeans", "identity")


def edge_features(z_i, z_j, op: str = "mean") -> np.ndarray:
    """Combine endpoint vectors (or row-aligned batches of them) into edge features."""
    z_i = np.asarray(z_i, dtype=np.float64)
    z_j = np.asarray(z_j, dtype=np.float64)
    if z_i.shape != z_j.shape:
        raise ShapeError(f"dimension mismatch: {z_i.shape} vs {z_j.shape}")
    if op == "mean":
        return (z_i + z_j) / 2
    if op == "hadamard":
        return z_i * z_j
    if op == "l1":
        return np.abs(z_i - z_j)
    if op == "l2":
        return (z_i - z_j) ** 2
    raise ConfigError(f"unknown edge operator {op!r}; choose from {EDGE_OPS}")


@dataclass(eq=False)
class LabeledPairs:
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    train_pairs: np.ndarray
    test_pairs: np.ndarray


def training_pairs(split: EdgeSplit, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Train-graph edges plus as many train-graph non-edges, disjoint from all test pairs."""
    g = split.train_graph
    n = g.num_nodes
    pos = g.edges()
    test = np.concatenate([split.test_positives, split.test_negatives]).reshape(-1, 2)
    test_keys = np.minimum(test[:, 0], test[:, 1]) * n + np.maximum(test[:, 0], test[:, 1])
    neg = sample_non_edges(n, len(pos), np.random.default_rng(seed),
                           exclude=np.concatenate([g.edge_keys(), test_keys]))
    pairs = np.concatenate([pos, neg])
    labels = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
    return pairs, labels


def node_pair_features(split: EdgeSplit, e: EmbeddingMatrix, assignment_fn, op: str = "mean",
                       seed: int = 0) -> LabeledPairs:
    """Edge features for the training pairs and the held-out test pairs.

    ``assignment_fn`` maps an array of node ids to embedding tokens (identity
    for node embeddings, the type assignment for type embeddings).
    """
    train_pairs, y_train = training_pairs(split, seed)
    test_pairs = np.concatenate([split.test_positives, split.test_negatives]).reshape(-1, 2)
    y_test = np.concatenate([np.ones(len(split.test_positives)), np.zeros(len(split.test_negatives))])

    def feats(pairs):
        zi = e.lookup(assignment_fn(pairs[:, 0]))
        zj = e.lookup(assignment_fn(pairs[:, 1]))
        return edge_features(zi, zj, op)

    return LabeledPairs(feats(train_pairs), y_train, feats(test_pairs), y_test, train_pairs, test_pairs)


# -- classifier -----------------------------------------------------------


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def logistic_loss(w, b, x, y, l2_penalty):
    """Mean cross-entropy plus ``l2_penalty * |w|^2 / 2``."""
    s = x @ w + b
    ce = np.logaddexp(0.0, s) - y * s
    return float(ce.mean() + 0.5 * l2_penalty * w @ w)


def logistic_gradient(w, b, x, y, l2_penalty):
    r = _sigmoid(x @ w + b) - y
    return x.T @ r / len(y) + l2_penalty * w, float(r.mean())


@dataclass(eq=False)
class LogisticModel:
    weights: np.ndarray
    bias: float
    mean: np.ndarray
    scale: np.ndarray
    loss_history: list = field(default_factory=list)

    def decision_function(self, x) -> np.ndarray:
        return ((np.asarray(x) - self.mean) / self.scale) @ self.weights + self.bias

    def predict_proba(self, x) -> np.ndarray:
        return _sigmoid(self.decision_function(x))


def train_logistic(x, y, epochs: int = 100, lr: float = 0.1, l2_penalty: float = 1e-4, seed: int = 0,
                   batch_size: int = 32, standardize: bool = True) -> LogisticModel:
    """Mini-batch SGD on the L2-penalized logistic loss.

    Features are standardized with training statistics (stored in the model).
    The step size decays as ``lr / (1 + epoch / 10)``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(y) < 2 or len(np.unique(y)) < 2:
        raise TrainingError("logistic regression needs at least two examples of both classes")
    if standardize:
        mean = x.mean(axis=0)
        scale = x.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
    else:
        mean, scale = np.zeros(x.shape[1]), np.ones(x.shape[1])
    xs = (x - mean) / scale
    rng = np.random.default_rng(seed)
    w = np.zeros(x.shape[1])
    b = 0.0
    history = []
    for epoch in range(epochs):
        step = lr / (1.0 + epoch / 10.0)
        order = rng.permutation(len(y))
        for start in range(0, len(y), batch_size):
            idx = order[start:start + batch_size]
            gw, gb = logistic_gradient(w, b, xs[idx], y[idx], l2_penalty)
            w -= step * gw
            b -= step * gb
        history.append(logistic_loss(w, b, xs, y, l2_penalty))
    return LogisticModel(w, b, mean, scale, history)


# -- AUC ------------------------------------------------------------------


def compute_auc(scores_pos, scores_neg) -> float:
    """P(score_pos > score_neg) with ties counted half, via the rank-sum statistic."""
    pos = np.asarray(scores_pos, dtype=np.float64).ravel()
    neg = np.asarray(scores_neg, dtype=np.float64).ravel()
    if len(pos) == 0 or len(neg) == 0:
        raise InputError("AUC needs at least one positive and one negative score")
    allv = np.concatenate([pos, neg])
    _, inverse, counts = np.unique(allv, return_inverse=True, return_counts=True)
    # average 1-based rank of each distinct value
    ends = np.cumsum(counts)
    avg_rank = ends - (counts - 1) / 2.0
    rank_sum = avg_rank[inverse[:len(pos)]].sum()
    u = rank_sum - len(pos) * (len(pos) + 1) / 2.0
    return float(u / (len(pos) * len(neg)))


def heuristic_scores(g: Graph, pairs, kind: str) -> np.ndarray:
    """Classic unsupervised link scores on ``g``: ``degree_product`` or ``common_neighbors``."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if kind == "degree_product":
        deg = g.degrees().astype(np.float64)
        return deg[pairs[:, 0]] * deg[pairs[:, 1]]
    if kind == "common_neighbors":
        return np.array([len(np.intersect1d(g.neighbors(u), g.neighbors(v), assume_unique=True))
                         for u, v in pairs], dtype=np.float64)
    raise ConfigError(f"unknown heuristic {kind!r}")


# -- pipeline -------------------------------------------------------------


@dataclass
class PipelineConfig:
    mode: str = "attributed"
    test_fraction: float = 0.5
    features: tuple[str, ...] = DEFAULT_FEATURES
    phi: str = "log"
    bins: int = 8
    alpha: float = 2.0
    types: int = 32
    kmeans_iters: int = 100
    kmeans_tol: float = 1e-6
    walks_per_node: int = 10
    walk_length: int = 80
    p: float = 1.0
    q: float = 1.0
    dim: int = 128
    window: int = 10
    negatives: int = 5
    epochs: int = 5
    initial_lr: float = 0.025
    min_lr: float = 0.0001
    unigram_power: float = 0.75
    operator: str = "mean"
    clf_epochs: int = 100
    clf_lr: float = 0.1
    l2_penalty: float = 1e-4
    repeats: int = 1
    seed: int = 0
    threads: int = 1
    deterministic: bool = True

    def __post_init__(self):
        self.features = tuple(self.features)
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.phi not in PHI_KINDS:
            raise ConfigError(f"phi must be one of {PHI_KINDS}")
        if self.operator not in EDGE_OPS:
            raise ConfigError(f"operator must be one of {EDGE_OPS}")
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")

    def digest(self) -> str:
        payload = {k: v for k, v in asdict(self).items() if k != "threads"}
        blob = json.dumps(payload, sort_keys=True, default=list).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def stage_seed(self, stage: str, repeat: int = 0) -> int:
        """Seeds for every stage derive from ``seed``; repeat 0 of each stage is its base stream."""
        return derive_seed(self.seed, stage if repeat == 0 else f"{stage}/{repeat}")

    def walk_config(self, repeat: int = 0) -> WalkConfig:
        return WalkConfig(self.walks_per_node, self.walk_length, self.p, self.q, self.stage_seed("walks", repeat))

    def sgns_config(self, repeat: int = 0) -> SgnsConfig:
        workers = 1 if self.deterministic else self.threads
        return SgnsConfig(self.dim, self.window, self.negatives, self.epochs, self.initial_lr, self.min_lr,
                          self.unigram_power, self.stage_seed("sgns", repeat), workers)


@dataclass
class EvalReport:
    auc: float
    operator: str
    num_test_pos: int
    num_test_neg: int
    config_digest: str
    mode: str = ""
    graph: str = ""
    seed: int = 0
    num_nodes: int = 0
    embedding_rows: int = 0
    num_types: int = 0
    baseline_auc_degree_product: float = float("nan")
    fold_aucs: list = field(default_factory=list)

    def to_text(self) -> str:
        lines = []
        for key, value in asdict(self).items():
            if isinstance(value, list):
                value = ",".join(repr(v) for v in value)
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.to_text())

    def append_csv(self, path) -> None:
        path = Path(path)
        new = not path.exists()
        with open(path, "a", newline="") as fh:
            w = csv.writer(fh)
            if new:
                w.writerow(["graph", "mode", "operator", "auc", "seed", "digest"])
            w.writerow([self.graph, self.mode, self.operator, repr(self.auc), self.seed, self.config_digest])


@contextlib.contextmanager
def stage(name: str):
    try:
        yield
    except StageError:
        raise
    except AttrWalkError as exc:
        raise StageError(name, exc) from exc


@dataclass(eq=False)
class EmbeddingResult:
    embedding: EmbeddingMatrix
    phi: TypeMap | None
    node_tokens: np.ndarray  # embedding token of every node of the graph it was trained on


def fit_phi(x, cfg: PipelineConfig, repeat: int = 0) -> TypeMap:
    """Fit the configured type map on attribute matrix ``x``."""
    if cfg.phi == "log":
        return fit_log_binning(x, cfg.bins, cfg.alpha)
    if cfg.phi == "kmeans":
        return fit_kmeans(x, min(cfg.types, x.num_rows), cfg.stage_seed("phi", repeat),
                          cfg.kmeans_iters, cfg.kmeans_tol)
    return fit_identity(x)


def embed_graph(g: Graph, cfg: PipelineConfig, repeat: int = 0, attributes=None) -> EmbeddingResult:
    """Walks + Skip-Gram on ``g`` alone; in attributed mode the type map is fit on ``g`` too.

    ``attributes`` (an AttributeMatrix of ``g``) replaces the structural features when given.
    """
    wcfg = cfg.walk_config(repeat)
    walk_threads = cfg.threads
    if cfg.mode == "baseline_node2vec":
        with stage("walks"):
            corpus = generate_walks(g, wcfg, threads=walk_threads)
        phi = None
        tokens = np.arange(g.num_nodes, dtype=np.int64)
    else:
        with stage("typing"):
            x = attributes if attributes is not None else compute_structural_features(g, cfg.features)
            phi = fit_phi(x, cfg, repeat)
            assignment = assign_types(phi, x)
        with stage("walks"):
            corpus = generate_attributed_walks(g, assignment, wcfg, threads=walk_threads)
        tokens = assignment.types
    with stage("embed"):
        emb = train_sgns(corpus, cfg.sgns_config(repeat))
    return EmbeddingResult(emb, phi, tokens)


def score_split(split: EdgeSplit, result: EmbeddingResult, cfg: PipelineConfig, repeat: int = 0):
    """Train the classifier on training pairs, return (auc, model, pairs)."""
    tokens = result.node_tokens
    with stage("features"):
        pairs = node_pair_features(split, result.embedding, lambda nodes: tokens[nodes], cfg.operator,
                                   cfg.stage_seed("train-negatives", repeat))
    with stage("classifier"):
        model = train_logistic(pairs.x_train, pairs.y_train, cfg.clf_epochs, cfg.clf_lr, cfg.l2_penalty,
                               cfg.stage_seed("classifier", repeat))
        scores = model.decision_function(pairs.x_test)
        pos = pairs.y_test == 1
        auc = compute_auc(scores[pos], scores[~pos])
    return auc, model, pairs


@dataclass(eq=False)
class PipelineRun:
    report: EvalReport
    split: EdgeSplit
    result: EmbeddingResult


def run_pipeline(graph, cfg: PipelineConfig, graph_name: str | None = None) -> PipelineRun:
    """split -> (features -> type map) -> walks -> Skip-Gram -> classifier -> AUC.

    Everything before scoring sees only the training graph. With ``repeats > 1``
    the reported AUC is the mean over independent splits.
    """
    if isinstance(graph, (str, os.PathLike)):
        graph_name = graph_name or Path(graph).name
        with stage("load"):
            graph = load_edge_list(graph)
    graph_name = graph_name or "graph"
    log.info("pipeline config: %s", json.dumps(asdict(cfg), sort_keys=True, default=list))

    aucs, first = [], None
    for rep in range(cfg.repeats):
        with stage("split"):
            split = split_edges(graph, cfg.test_fraction, cfg.stage_seed("split", rep))
        result = embed_graph(split.train_graph, cfg, rep)
        auc, _, _ = score_split(split, result, cfg, rep)
        log.info("repeat %d: auc=%.4f", rep, auc)
        aucs.append(auc)
        if first is None:
            first = (split, result)

    split, result = first
    test_pairs = np.concatenate([split.test_positives, split.test_negatives])
    deg_scores = heuristic_scores(split.train_graph, test_pairs, "degree_product")
    npos = len(split.test_positives)
    report = EvalReport(
        auc=float(np.mean(aucs)),
        operator=cfg.operator,
        num_test_pos=npos,
        num_test_neg=len(split.test_negatives),
        config_digest=cfg.digest(),
        mode=cfg.mode,
        graph=graph_name,
        seed=cfg.seed,
        num_nodes=graph.num_nodes,
        embedding_rows=result.embedding.num_rows,
        num_types=result.phi.num_types if result.phi is not None else graph.num_nodes,
        baseline_auc_degree_product=compute_auc(deg_scores[:npos], deg_scores[npos:]),
        fold_aucs=aucs if cfg.repeats > 1 else [],
    )
    return PipelineRun(report, split, result)
