"""Node attribute matrices: structural features computed from a graph, or read from file."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .errors import ConfigError, DataError, ParseError, ShapeError
from .graph import Graph

FEATURES = ("degree", "triangle_count", "wedge_count", "avg_neighbor_degree", "core_number")
DEFAULT_FEATURES = ("degree", "triangle_count", "wedge_count")


@dataclass(frozen=True, eq=False)
class AttributeMatrix:
    values: np.ndarray
    column_names: tuple[str, ...]
    source: str = "given"  # given | structural | concatenated

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != len(self.column_names):
            raise ShapeError(
                f"values shape {self.values.shape} does not match {len(self.column_names)} column names"
            )
        if not np.all(np.isfinite(self.values)):
            raise DataError("attribute matrix contains non-finite values")

    @property
    def num_rows(self) -> int:
        return self.values.shape[0]

    @property
    def num_cols(self) -> int:
        return self.values.shape[1]


@numba.njit(cache=True)
def _triangles(indptr, indices):
    n = len(indptr) - 1
    tri = np.zeros(n, dtype=np.int64)
    for u in range(n):
        for a in range(indptr[u], indptr[u + 1]):
            v = indices[a]
            if v <= u:
                continue
            # merge join of the two sorted lists, counting only w > v
            i, j = indptr[u], indptr[v]
            iend, jend = indptr[u + 1], indptr[v + 1]
            while i < iend and j < jend:
                x, y = indices[i], indices[j]
                if x < y:
                    i += 1
                elif y < x:
                    j += 1
                else:
                    if x > v:
                        tri[u] += 1
                        tri[v] += 1
                        tri[x] += 1
                    i += 1
                    j += 1
    return tri


def triangle_counts(g: Graph) -> np.ndarray:
    """Triangles containing each node (undirected view)."""
    g = g.to_undirected()
    return _triangles(g.indptr, g.indices)


def core_numbers(g: Graph) -> np.ndarray:
    """k-core index of every node by bucket peeling (Batagelj-Zaversnik)."""
    g = g.to_undirected()
    n = g.num_nodes
    deg = g.degrees().astype(np.int64)
    if n == 0:
        return deg
    max_deg = int(deg.max())
    bin_start = np.zeros(max_deg + 1, dtype=np.int64)
    np.cumsum(np.bincount(deg, minlength=max_deg + 1)[:-1], out=bin_start[1:])
    order = np.argsort(deg, kind="stable")
    pos = np.empty(n, dtype=np.int64)
    pos[order] = np.arange(n)
    deg = deg.tolist()
    order = order.tolist()
    pos = pos.tolist()
    bin_start = bin_start.tolist()
    indptr, indices = g.indptr, g.indices.tolist()
    for i in range(n):
        v = order[i]
        for k in range(indptr[v], indptr[v + 1]):
            u = indices[k]
            if deg[u] > deg[v]:
                du = deg[u]
                pu = pos[u]
                pw = bin_start[du]
                w = order[pw]
                if u != w:
                    order[pu], order[pw] = w, u
                    pos[u], pos[w] = pw, pu
                bin_start[du] += 1
                deg[u] -= 1
    return np.asarray(deg, dtype=np.int64)


def compute_structural_features(g: Graph, feature_set=DEFAULT_FEATURES) -> AttributeMatrix:
    """Per-node structural features, one column per name in ``feature_set``.

    Directed graphs are treated through their undirected view.
    """
    unknown = [f for f in feature_set if f not in FEATURES]
    if unknown:
        raise ConfigError(f"unknown feature(s) {unknown}; choose from {list(FEATURES)}")
    ug = g.to_undirected()
    deg = ug.degrees().astype(np.float64)
    cache = {}

    def column(name):
        if name == "degree":
            return deg
        if name == "triangle_count":
            return triangle_counts(ug).astype(np.float64)
        if name == "wedge_count":
            return deg * (deg - 1) / 2
        if name == "avg_neighbor_degree":
            src = np.repeat(np.arange(ug.num_nodes), ug.degrees())
            sums = np.bincount(src, weights=deg[ug.indices], minlength=ug.num_nodes)
            return np.divide(sums, deg, out=np.zeros_like(deg), where=deg > 0)
        return core_numbers(ug).astype(np.float64)

    cols = []
    for name in feature_set:
        if name not in cache:
            cache[name] = column(name)
        cols.append(cache[name])
    values = np.column_stack(cols) if cols else np.zeros((ug.num_nodes, 0))
    return AttributeMatrix(values, tuple(feature_set), "structural")


def _split_fields(line):
    return line.split("\t") if "\t" in line else line.split(",")


def load_attributes(path, g: Graph) -> AttributeMatrix:
    """Read ``node,f1,...,fK`` rows (comma or tab separated) aligned to ``g``'s node order.

    A first line whose value fields are not all numeric is taken as a header.
    """
    index = g.label_index()
    rows: dict[int, list[float]] = {}
    names = None
    width = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = [f.strip() for f in _split_fields(line)]
            try:
                vals = [float(x) for x in fields[1:]]
            except ValueError:
                if names is None and not rows and width is None:
                    names = tuple(fields[1:])
                    width = len(names)
                    continue
                raise ParseError("non-numeric attribute value", line=lineno) from None
            if width is None:
                width = len(vals)
            if len(vals) != width:
                raise ParseError(f"expected {width} values, got {len(vals)}", line=lineno)
            node = fields[0]
            if node not in index:
                raise ParseError(f"node {node!r} is not in the graph", line=lineno)
            rows[index[node]] = vals
    missing = [g.labels[i] for i in range(g.num_nodes) if i not in rows]
    if missing:
        shown = ", ".join(missing[:10])
        raise ParseError(f"attributes missing for node(s) {shown}" + (" ..." if len(missing) > 10 else ""))
    width = width or 0
    values = np.array([rows[i] for i in range(g.num_nodes)], dtype=np.float64).reshape(g.num_nodes, width)
    if not np.all(np.isfinite(values)):
        raise ParseError("non-finite attribute value")
    if names is None:
        names = tuple(f"f{k}" for k in range(width))
    return AttributeMatrix(values, names, "given")


def save_attributes(x: AttributeMatrix, g: Graph, path) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(("id",) + x.column_names) + "\n")
        for label, row in zip(g.labels, x.values):
            fh.write(label + "," + ",".join(repr(float(v)) for v in row) + "\n")


def concat_attributes(a: AttributeMatrix, b: AttributeMatrix) -> AttributeMatrix:
    if a.num_rows != b.num_rows:
        raise ShapeError(f"row count mismatch: {a.num_rows} vs {b.num_rows}")
    return AttributeMatrix(
        np.hstack([a.values, b.values]), a.column_names + b.column_names, "concatenated"
    )
