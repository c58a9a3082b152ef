"""Embedding nodes of graphs never seen in training, via a saved type map and type embeddings."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .embedder import EmbeddingMatrix
from .errors import ConfigError, CoverageError
from .features import FEATURES, AttributeMatrix, compute_structural_features
from .graph import EdgeSplit, Graph, split_edges
from .linkpred import PipelineConfig, compute_auc, node_pair_features, train_logistic
from .typemap import TypeMap, assign_types

log = logging.getLogger(__name__)

UNSEEN_POLICIES = ("mean", "error")


@dataclass(eq=False)
class TransferResult:
    vectors: np.ndarray  # (N, d), row i for node i of the target graph
    types: np.ndarray
    unseen_nodes: np.ndarray  # nodes that received the fallback vector
    missing_types: list  # type ids (or raw bin ids) absent from the embedding


def attributes_for(phi: TypeMap, g: Graph, attributes: AttributeMatrix | None = None) -> AttributeMatrix:
    """The attribute matrix ``phi`` expects: given attributes, or structural features by column name."""
    if attributes is not None:
        return attributes
    unknown = [c for c in phi.column_names if c not in FEATURES]
    if unknown:
        raise ConfigError(f"type map uses non-structural columns {unknown}; supply an attribute file")
    return compute_structural_features(g, phi.column_names)


def transfer(phi: TypeMap, emb: EmbeddingMatrix, g: Graph, attributes: AttributeMatrix | None = None,
             unseen: str = "mean") -> TransferResult:
    """features -> type -> embedding row for every node of ``g``.

    Nodes whose type has no trained vector (or whose bin combination was never
    observed when ``phi`` was fit) get the mean trained vector under
    ``unseen="mean"``; ``unseen="error"`` raises :class:`CoverageError` instead.
    """
    if unseen not in UNSEEN_POLICIES:
        raise ConfigError(f"unseen policy must be one of {UNSEEN_POLICIES}")
    x = attributes_for(phi, g, attributes)
    assignment = assign_types(phi, x)
    types = assignment.types
    known = np.isin(types, emb.tokens)
    flagged = ~known
    missing = sorted(set(types[~known].tolist()))
    if assignment.unseen is not None and assignment.unseen.any():
        flagged |= assignment.unseen
        missing += sorted({f"raw:{assignment.raw_ids[i]}" for i in np.flatnonzero(assignment.unseen)})
    if flagged.any():
        if unseen == "error":
            raise CoverageError(f"{int(flagged.sum())} node(s) have types without a trained vector", missing)
        log.warning("%d node(s) have types absent from the embedding (%s); using the mean vector",
                    int(flagged.sum()), ", ".join(map(str, missing[:20])))
    vectors = np.empty((g.num_nodes, emb.dim))
    vectors[known] = emb.lookup(types[known])
    vectors[flagged] = emb.input_vectors.mean(axis=0)
    return TransferResult(vectors, types, np.flatnonzero(flagged), missing)


def evaluate_transfer(phi: TypeMap, emb: EmbeddingMatrix, g: Graph, cfg: PipelineConfig,
                      unseen: str = "mean") -> tuple[float, EdgeSplit, TransferResult]:
    """Link-prediction AUC on ``g`` using transferred embeddings (no retraining of embeddings).

    ``g`` is split; types are assigned from the training side's features only,
    and the edge classifier is fit on the training pairs.
    """
    split = split_edges(g, cfg.test_fraction, cfg.stage_seed("split"))
    res = transfer(phi, emb, split.train_graph, unseen=unseen)
    # rows of `vectors` act as a node-indexed embedding table
    table = EmbeddingMatrix(res.vectors, None, np.arange(g.num_nodes, dtype=np.int64), "node_ids")
    pairs = node_pair_features(split, table, lambda nodes: nodes, cfg.operator,
                               cfg.stage_seed("train-negatives"))
    model = train_logistic(pairs.x_train, pairs.y_train, cfg.clf_epochs, cfg.clf_lr, cfg.l2_penalty,
                           cfg.stage_seed("classifier"))
    scores = model.decision_function(pairs.x_test)
    pos = pairs.y_test == 1
    return compute_auc(scores[pos], scores[~pos]), split, res


def save_node_vectors(vectors: np.ndarray, labels, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{vectors.shape[0]} {vectors.shape[1]}\n")
        for label, row in zip(labels, vectors):
            fh.write(str(label) + " " + " ".join(f"{x:.9g}" for x in row) + "\n")
