"""Inductive graph embeddings from attributed random walks.

Nodes are mapped to types by a fitted function of their attribute vectors;
random walks emit types instead of node ids and Skip-Gram learns one vector
per type. Setting every node to its own type recovers DeepWalk/node2vec.
"""

__version__ = "0.1.0"

from .embedder import EmbeddingMatrix, SgnsConfig, load_embeddings, save_embeddings, train_sgns
from .features import AttributeMatrix, compute_structural_features, concat_attributes, load_attributes
from .graph import EdgeSplit, Graph, load_edge_list, split_edges
from .inductive import transfer
from .linkpred import PipelineConfig, compute_auc, edge_features, run_pipeline
from .typemap import (TypeAssignment, TypeMap, assign_types, fit_kmeans, fit_log_binning, load_typemap,
                      save_typemap)
from .walker import WalkConfig, WalkCorpus, generate_attributed_walks, generate_walks

__all__ = [
    "AttributeMatrix", "EdgeSplit", "EmbeddingMatrix", "Graph", "PipelineConfig", "SgnsConfig",
    "TypeAssignment", "TypeMap", "WalkConfig", "WalkCorpus", "assign_types", "compute_auc",
    "compute_structural_features", "concat_attributes", "edge_features", "fit_kmeans", "fit_log_binning",
    "generate_attributed_walks", "generate_walks", "load_attributes", "load_edge_list", "load_embeddings",
    "load_typemap", "run_pipeline", "save_embeddings", "save_typemap", "split_edges", "train_sgns", "transfer",
]
