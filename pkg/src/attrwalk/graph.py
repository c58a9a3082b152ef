"""Simple graphs in CSR form, edge-list I/O and train/test edge splitting."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError, ParseError, SplitError

log = logging.getLogger(__name__)

COMMENT_PREFIXES = ("#", "%")


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable simple graph.

    ``indptr``/``indices`` hold sorted, duplicate-free neighbor lists. Undirected
    graphs store every edge in both endpoint lists.
    """

    indptr: np.ndarray
    indices: np.ndarray
    directed: bool = False
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        self.indptr.setflags(write=False)
        self.indices.setflags(write=False)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(str(i) for i in range(self.num_nodes)))

    @classmethod
    def from_edges(cls, num_nodes: int, edges, directed: bool = False, labels=()) -> "Graph":
        """Build a graph from integer pairs, dropping self-loops and duplicates."""
        arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
        arr = arr.reshape(-1, 2)
        if arr.size and (arr.min() < 0 or arr.max() >= num_nodes):
            raise InputError("edge endpoint out of range")
        arr = arr[arr[:, 0] != arr[:, 1]]
        if not directed:
            arr = np.concatenate([arr, arr[:, ::-1]])
        # encode pairs so that a single unique() both sorts and dedups
        keys = np.unique(arr[:, 0] * num_nodes + arr[:, 1])
        src, dst = np.divmod(keys, num_nodes)
        indptr = np.zeros(num_nodes + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=num_nodes), out=indptr[1:])
        return cls(indptr, dst.astype(np.int64), directed, tuple(labels))

    @property
    def num_nodes(self) -> int:
        return len(self.indptr) - 1

    @property
    def num_edges(self) -> int:
        n = len(self.indices)
        return n if self.directed else n // 2

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def has_edge(self, u: int, v: int) -> bool:
        nbrs = self.neighbors(u)
        i = np.searchsorted(nbrs, v)
        return bool(i < len(nbrs) and nbrs[i] == v)

    def edges(self) -> np.ndarray:
        """(M, 2) array of edges; undirected edges listed once with u < v."""
        src = np.repeat(np.arange(self.num_nodes), self.degrees())
        pairs = np.column_stack([src, self.indices])
        if not self.directed:
            pairs = pairs[pairs[:, 0] < pairs[:, 1]]
        return pairs

    def edge_keys(self) -> np.ndarray:
        """Sorted integer keys ``u * N + v`` of the edges returned by :meth:`edges`."""
        e = self.edges()
        return e[:, 0] * self.num_nodes + e[:, 1]

    def to_undirected(self) -> "Graph":
        if not self.directed:
            return self
        return Graph.from_edges(self.num_nodes, self.edges(), directed=False, labels=self.labels)

    def label_index(self) -> dict[str, int]:
        return {lab: i for i, lab in enumerate(self.labels)}


def load_edge_list(path, directed: bool = False) -> Graph:
    """Read a whitespace-separated edge list; a third column (weight) is ignored.

    Node tokens receive dense ids in first-seen order. Self-loops are dropped
    and duplicate edges collapsed. MatrixMarket coordinate files are accepted:
    the size line after the ``%%MatrixMarket`` banner is skipped.
    """
    ids: dict[str, int] = {}
    pairs = []
    with open(path) as fh:
        size_line_pending = False
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if lineno == 1 and line.startswith("%%MatrixMarket"):
                size_line_pending = True
            if not line or line.startswith(COMMENT_PREFIXES):
                continue
            if size_line_pending:
                size_line_pending = False
                continue
            tokens = line.split()
            if len(tokens) not in (2, 3):
                raise ParseError(f"expected 2 or 3 fields, got {len(tokens)}", line=lineno)
            u = ids.setdefault(tokens[0], len(ids))
            v = ids.setdefault(tokens[1], len(ids))
            pairs.append((u, v))
    g = Graph.from_edges(len(ids), pairs, directed=directed, labels=tuple(ids))
    if g.num_edges == 0:
        raise InputError(f"{path}: graph has no edges")
    return g


def write_edge_list(g: Graph, path) -> None:
    labels = g.labels
    with open(path, "w") as fh:
        for u, v in g.edges():
            fh.write(f"{labels[u]} {labels[v]}\n")


def _pairs_from_keys(keys, n):
    u, v = np.divmod(np.asarray(keys, dtype=np.int64), n)
    return np.column_stack([u, v])


@dataclass(eq=False)
class EdgeSplit:
    train_graph: Graph
    test_positives: np.ndarray
    test_negatives: np.ndarray
    split_seed: int
    test_fraction: float = 0.0
    meta: dict = field(default_factory=dict)


def split_edges(g: Graph, test_fraction: float = 0.5, seed: int = 0) -> EdgeSplit:
    """Hold out ``round(M * test_fraction)`` edges, keeping every node's degree >= 1.

    Edges are visited in a seeded random order; an edge is removed only if both
    endpoints still have another edge. Negatives are drawn uniformly from the
    non-edges of ``g`` without replacement.
    """
    if g.directed:
        raise SplitError("edge splitting requires an undirected graph")
    if not 0.0 < test_fraction < 1.0:
        raise SplitError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    m = g.num_edges
    if m < 10:
        raise SplitError(f"need at least 10 edges to split, graph has {m}", achievable_fraction=0.0)
    n = g.num_nodes
    target = int(round(m * test_fraction))
    rng = np.random.default_rng(seed)

    edges = g.edges()
    order = rng.permutation(m)
    deg = g.degrees().copy()
    removed = np.zeros(m, dtype=bool)
    count = 0
    for idx in order:
        if count == target:
            break
        u, v = edges[idx]
        if deg[u] > 1 and deg[v] > 1:
            deg[u] -= 1
            deg[v] -= 1
            removed[idx] = True
            count += 1
    if count < target:
        frac = count / m
        raise SplitError(
            f"only {count} of {target} requested test edges can be removed without "
            f"isolating a node (achievable fraction {frac:.4f})",
            achievable_fraction=frac,
        )

    positives = edges[order[removed[order]]]
    train = Graph.from_edges(n, edges[~removed], directed=False, labels=g.labels)
    negatives = sample_non_edges(n, target, rng, exclude=g.edge_keys())
    return EdgeSplit(train, positives, negatives, seed, test_fraction)


def sample_non_edges(n: int, count: int, rng: np.random.Generator, exclude=()) -> np.ndarray:
    """Uniformly sample ``count`` distinct unordered pairs ``u < v`` whose key is not excluded."""
    total = n * (n - 1) // 2
    forbidden = set(int(k) for k in exclude)
    if total - len(forbidden) < count:
        raise SplitError(f"graph too dense: cannot draw {count} non-edges")
    chosen: dict[int, None] = {}
    while len(chosen) < count:
        need = count - len(chosen)
        u = rng.integers(0, n, size=2 * need + 8)
        v = rng.integers(0, n, size=2 * need + 8)
        for a, b in zip(u.tolist(), v.tolist()):
            if a == b:
                continue
            if a > b:
                a, b = b, a
            key = a * n + b
            if key in forbidden or key in chosen:
                continue
            chosen[key] = None
            if len(chosen) == count:
                break
    return _pairs_from_keys(list(chosen), n)


SPLIT_FILES = ("train.txt", "test_pos.txt", "test_neg.txt", "meta.txt")


def save_split(split: EdgeSplit, directory) -> None:
    """Persist a split as train/positive/negative edge lists plus ``meta.txt``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    g = split.train_graph
    write_edge_list(g, d / "train.txt")
    for name, pairs in (("test_pos.txt", split.test_positives), ("test_neg.txt", split.test_negatives)):
        with open(d / name, "w") as fh:
            for u, v in pairs:
                fh.write(f"{g.labels[u]} {g.labels[v]}\n")
    with open(d / "meta.txt", "w") as fh:
        fh.write(f"split_seed={split.split_seed}\n")
        fh.write(f"test_fraction={split.test_fraction!r}\n")
        fh.write(f"num_nodes={g.num_nodes}\n")
        # the node order pins dense ids when the train edge list is read back
        fh.write("nodes=" + " ".join(g.labels) + "\n")


def _read_meta(path) -> dict:
    meta = {}
    with open(path) as fh:
        for line in fh:
            key, _, value = line.rstrip("\n").partition("=")
            meta[key] = value
    return meta


def load_train_graph(directory) -> Graph:
    """Read only the training side of a saved split (never touches test files)."""
    d = Path(directory)
    meta = _read_meta(d / "meta.txt")
    labels = tuple(meta["nodes"].split())
    index = {lab: i for i, lab in enumerate(labels)}
    pairs = []
    with open(d / "train.txt") as fh:
        for line in fh:
            a, b = line.split()[:2]
            pairs.append((index[a], index[b]))
    return Graph.from_edges(len(labels), pairs, directed=False, labels=labels)


def load_split(directory) -> EdgeSplit:
    d = Path(directory)
    meta = _read_meta(d / "meta.txt")
    train = load_train_graph(d)
    index = train.label_index()

    def read_pairs(name):
        rows = []
        with open(d / name) as fh:
            for lineno, line in enumerate(fh, start=1):
                tokens = line.split()
                if len(tokens) != 2:
                    raise ParseError(f"{name}: expected 2 fields", line=lineno)
                rows.append((index[tokens[0]], index[tokens[1]]))
        return np.asarray(rows, dtype=np.int64).reshape(-1, 2)

    return EdgeSplit(
        train,
        read_pairs("test_pos.txt"),
        read_pairs("test_neg.txt"),
        int(meta["split_seed"]),
        float(meta["test_fraction"]),
    )
