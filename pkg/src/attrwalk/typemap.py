"""Type maps: fitted functions sending an attribute vector to a discrete type id.

Three kinds are supported:

* ``log_binning`` - each column is binned as ``min(floor(log_alpha(1 + v)), B - 1)``
  and the bin tuple is a type. Observed tuples are densely indexed in
  lexicographic (= mixed-radix) order.
* ``kmeans`` - ``log1p`` + z-score transform frozen at fit time, then nearest
  centroid.
* ``identity`` - every row is its own type (node-identity walks).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, FormatError, SchemaError
from .features import AttributeMatrix

log = logging.getLogger(__name__)

FORMAT_NAME = "attrwalk-typemap"
FORMAT_VERSION = "1"
KINDS = ("log_binning", "kmeans", "identity")


@dataclass(eq=False)
class TypeAssignment:
    types: np.ndarray
    num_types: int
    # rows whose bin tuple was never seen at fit time; their type is the nearest observed tuple
    unseen: np.ndarray | None = None
    raw_ids: list | None = None

    def __len__(self):
        return len(self.types)


@dataclass(eq=False)
class TypeMap:
    kind: str
    num_types: int
    column_names: tuple[str, ...]
    seed: int = 0
    # log_binning
    alpha: float = 2.0
    bins: int = 8
    shift: np.ndarray | None = None
    observed: np.ndarray | None = None  # (T, K) sorted unique bin tuples
    # kmeans
    centroids: np.ndarray | None = None
    mean: np.ndarray | None = None
    std: np.ndarray | None = None
    log_transform: np.ndarray | None = None
    fit_assignment: TypeAssignment | None = field(default=None, repr=False)
    objective_history: list | None = field(default=None, repr=False)

    @property
    def num_cols(self) -> int:
        return len(self.column_names)

    def assign(self, x: AttributeMatrix) -> TypeAssignment:
        return assign_types(self, x)

    def transform(self, values: np.ndarray) -> np.ndarray:
        """k-means input transform (log1p on flagged columns, then z-score)."""
        v = np.where(self.log_transform, np.log1p(np.maximum(values, 0.0)), values)
        return (v - self.mean) / self.std


# -- log binning ----------------------------------------------------------


def log_bin(values: np.ndarray, alpha: float, bins: int) -> np.ndarray:
    """``min(floor(log_alpha(1 + v)), bins - 1)`` for nonnegative ``v``, exact at bin edges."""
    v1 = 1.0 + np.asarray(values, dtype=np.float64)
    b = np.floor(np.log(v1) / np.log(alpha))
    # correct floating error right at powers of alpha
    b += alpha ** (b + 1) <= v1
    b -= alpha ** b > v1
    return np.clip(b, 0, bins - 1).astype(np.int64)


def _bin_matrix(phi: TypeMap, values: np.ndarray) -> np.ndarray:
    shifted = np.maximum(values + phi.shift, 0.0)
    return log_bin(shifted, phi.alpha, phi.bins)


def raw_type_id(bin_row, bins: int) -> int:
    """Mixed-radix id of a bin tuple, first column most significant."""
    rid = 0
    for b in bin_row:
        rid = rid * bins + int(b)
    return rid


def fit_log_binning(x: AttributeMatrix, bins_per_column: int = 8, alpha: float = 2.0) -> TypeMap:
    if bins_per_column < 1:
        raise ConfigError("bins_per_column must be >= 1")
    if alpha <= 1:
        raise ConfigError("alpha must be > 1")
    values = x.values
    if not np.all(np.isfinite(values)):
        raise DataError("non-finite attribute value")
    col_min = values.min(axis=0) if len(values) else np.zeros(x.num_cols)
    shift = np.where(col_min < 0, -col_min, 0.0)
    if np.any(shift > 0):
        log.info("shifting columns %s to be nonnegative", [n for n, s in zip(x.column_names, shift) if s > 0])
    phi = TypeMap("log_binning", 0, x.column_names, alpha=float(alpha), bins=int(bins_per_column), shift=shift)
    binned = _bin_matrix(phi, values)
    observed, inverse = np.unique(binned, axis=0, return_inverse=True)
    phi.observed = observed
    phi.num_types = len(observed)
    phi.fit_assignment = TypeAssignment(
        inverse.reshape(-1).astype(np.int64), phi.num_types, np.zeros(len(values), dtype=bool),
        [raw_type_id(r, phi.bins) for r in binned],
    )
    return phi


def _assign_log_binning(phi: TypeMap, values: np.ndarray) -> TypeAssignment:
    binned = _bin_matrix(phi, values)
    lookup = {tuple(r): i for i, r in enumerate(phi.observed.tolist())}
    types = np.empty(len(binned), dtype=np.int64)
    unseen = np.zeros(len(binned), dtype=bool)
    for i, row in enumerate(binned.tolist()):
        t = lookup.get(tuple(row))
        if t is None:
            # nearest observed tuple in bin space (L1); argmin breaks ties toward the lowest id
            t = int(np.argmin(np.abs(phi.observed - binned[i]).sum(axis=1)))
            unseen[i] = True
        types[i] = t
    return TypeAssignment(types, phi.num_types, unseen, [raw_type_id(r, phi.bins) for r in binned])


# -- k-means --------------------------------------------------------------


def _nearest(points: np.ndarray, centroids: np.ndarray):
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)
    return labels, d2[np.arange(len(points)), labels]


def _kmeans_pp(points, t, rng):
    n = len(points)
    centers = [points[rng.integers(n)]]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, t):
        total = d2.sum()
        idx = rng.choice(n, p=d2 / total) if total > 0 else rng.integers(n)
        centers.append(points[idx])
        d2 = np.minimum(d2, ((points - points[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def lloyd(points, t, seed, max_iters=100, tol=1e-6):
    """k-means++ seeded Lloyd iterations.

    Returns ``(centroids, labels, objective_history)``; the history holds the
    objective after every assignment step.
    """
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp(points, t, rng)
    history = []
    labels, d2 = _nearest(points, centroids)
    for _ in range(max_iters):
        history.append(float(d2.sum()))
        new = centroids.copy()
        for k in range(t):
            members = labels == k
            if members.any():
                new[k] = points[members].mean(axis=0)
        empty = [k for k in range(t) if not np.any(labels == k)]
        if empty:
            # reseed each empty cluster at the point farthest from its own centroid
            far = ((points - new[labels]) ** 2).sum(axis=1)
            for k in empty:
                idx = int(np.argmax(far))
                new[k] = points[idx]
                far[idx] = -1.0
        shift = np.sqrt(((new - centroids) ** 2).sum(axis=1)).max()
        centroids = new
        labels, d2 = _nearest(points, centroids)
        if shift < tol:
            break
    history.append(float(d2.sum()))
    return centroids, labels, history


def fit_kmeans(x: AttributeMatrix, t: int, seed: int = 0, max_iters: int = 100, tol: float = 1e-6) -> TypeMap:
    n = x.num_rows
    if not 1 <= t <= n:
        raise ConfigError(f"type count t={t} must lie in [1, {n}]")
    if max_iters < 1:
        raise ConfigError("max_iters must be >= 1")
    values = x.values
    log_flag = values.min(axis=0) >= 0
    v = np.where(log_flag, np.log1p(np.maximum(values, 0.0)), values)
    mean = v.mean(axis=0)
    std = v.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    phi = TypeMap("kmeans", 0, x.column_names, seed=seed, mean=mean, std=std, log_transform=log_flag)
    points = phi.transform(values)
    distinct = len(np.unique(points, axis=0))
    if t > distinct:
        log.warning("t=%d exceeds %d distinct rows; using %d types", t, distinct, distinct)
        t = distinct
    centroids, labels, history = lloyd(points, t, seed, max_iters, tol)
    used = np.unique(labels)
    if len(used) < t:
        centroids = centroids[used]
        labels = np.searchsorted(used, labels)
    phi.centroids = centroids
    phi.num_types = len(centroids)
    phi.fit_assignment = TypeAssignment(labels.astype(np.int64), phi.num_types)
    phi.objective_history = history
    return phi


# -- identity -------------------------------------------------------------


def fit_identity(x: AttributeMatrix) -> TypeMap:
    phi = TypeMap("identity", x.num_rows, x.column_names)
    phi.fit_assignment = TypeAssignment(np.arange(x.num_rows, dtype=np.int64), x.num_rows)
    return phi


def identity_assignment(n: int) -> TypeAssignment:
    return TypeAssignment(np.arange(n, dtype=np.int64), n)


# -- application ----------------------------------------------------------


def assign_types(phi: TypeMap, x: AttributeMatrix) -> TypeAssignment:
    """Map every row of ``x`` to a type id in ``[0, phi.num_types)``.

    Works on attribute matrices of graphs never seen at fit time.
    """
    if tuple(x.column_names) != tuple(phi.column_names):
        raise SchemaError(f"columns {list(x.column_names)} do not match fitted {list(phi.column_names)}")
    if phi.kind == "log_binning":
        return _assign_log_binning(phi, x.values)
    if phi.kind == "kmeans":
        labels, _ = _nearest(phi.transform(x.values), phi.centroids)
        return TypeAssignment(labels.astype(np.int64), phi.num_types)
    if phi.kind == "identity":
        if x.num_rows != phi.num_types:
            raise SchemaError("identity type map only applies to the graph it was built for")
        return identity_assignment(x.num_rows)
    raise ConfigError(f"unknown type map kind {phi.kind!r}")


# -- persistence ----------------------------------------------------------


def _fmt_row(row) -> str:
    return " ".join(repr(float(v)) for v in row)


def save_typemap(phi: TypeMap, path) -> None:
    """Versioned text format: ``key=value`` header, named matrix blocks, ``end`` trailer."""
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "kind": phi.kind,
        "num_types": phi.num_types,
        "num_cols": phi.num_cols,
        "column_names": json.dumps(list(phi.column_names)),
        "seed": phi.seed,
    }
    blocks = {}
    if phi.kind == "log_binning":
        header["alpha"] = repr(float(phi.alpha))
        header["bins"] = phi.bins
        blocks["shift"] = phi.shift.reshape(1, -1)
        blocks["observed"] = phi.observed.reshape(phi.num_types, phi.num_cols)
    elif phi.kind == "kmeans":
        blocks["centroids"] = phi.centroids
        blocks["mean"] = phi.mean.reshape(1, -1)
        blocks["std"] = phi.std.reshape(1, -1)
        blocks["log_transform"] = phi.log_transform.astype(np.float64).reshape(1, -1)
    with open(path, "w") as fh:
        for key, value in header.items():
            fh.write(f"{key}={value}\n")
        for name, mat in blocks.items():
            fh.write(f"matrix {name} {mat.shape[0]} {mat.shape[1]}\n")
            for row in mat:
                fh.write(_fmt_row(row) + "\n")
        fh.write("end\n")


def load_typemap(path) -> TypeMap:
    with open(path) as fh:
        lines = fh.read().split("\n")
    if not lines or lines[0] != f"format={FORMAT_NAME}":
        raise FormatError(f"{path}: not a type map file")
    if "end" not in lines:
        raise FormatError(f"{path}: truncated type map (missing end marker)")
    header: dict[str, str] = {}
    blocks: dict[str, np.ndarray] = {}
    i = 0
    try:
        while lines[i] != "end":
            line = lines[i]
            if line.startswith("matrix "):
                _, name, r, c = line.split()
                r, c = int(r), int(c)
                rows = [[float(v) for v in lines[i + 1 + k].split()] for k in range(r)]
                mat = np.array(rows, dtype=np.float64).reshape(r, c)
                if any(len(row) != c for row in rows):
                    raise FormatError(f"{path}: ragged matrix block {name}")
                blocks[name] = mat
                i += r + 1
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise FormatError(f"{path}: malformed header line {line!r}")
            header[key] = value
            i += 1
    except (IndexError, ValueError) as exc:
        raise FormatError(f"{path}: corrupt type map ({exc})") from None

    version = header.get("version")
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported type map version {version!r} (expected {FORMAT_VERSION})")
    try:
        kind = header["kind"]
        phi = TypeMap(kind, int(header["num_types"]), tuple(json.loads(header["column_names"])), int(header["seed"]))
        if kind == "log_binning":
            phi.alpha = float(header["alpha"])
            phi.bins = int(header["bins"])
            phi.shift = blocks["shift"][0]
            phi.observed = blocks["observed"].astype(np.int64).reshape(phi.num_types, phi.num_cols)
        elif kind == "kmeans":
            phi.centroids = blocks["centroids"]
            phi.mean = blocks["mean"][0]
            phi.std = blocks["std"][0]
            phi.log_transform = blocks["log_transform"][0].astype(bool)
        elif kind != "identity":
            raise FormatError(f"{path}: unknown kind {kind!r}")
    except KeyError as exc:
        raise FormatError(f"{path}: missing field {exc}") from None
    return phi


def save_assignment(a: TypeAssignment, labels, path) -> None:
    with open(path, "w") as fh:
        for label, t in zip(labels, a.types.tolist()):
            fh.write(f"{label}\t{t}\n")
