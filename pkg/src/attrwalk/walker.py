"""Node-identity and attributed random walks with node2vec (p, q) bias.

Each walk draws from its own splitmix64 stream keyed by ``(seed, start node,
walk index)``, so the corpus does not depend on how many threads generate it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .errors import ConfigError, FormatError, InputError, ShapeError
from .graph import Graph
from .rng import next_below, next_float, stream_state
from .typemap import TypeAssignment


@dataclass(frozen=True)
class WalkConfig:
    walks_per_node: int = 10
    walk_length: int = 80
    p: float = 1.0
    q: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.walks_per_node < 1 or self.walk_length < 1:
            raise ConfigError("walks_per_node and walk_length must be >= 1")
        if self.p <= 0 or self.q <= 0:
            raise ConfigError("p and q must be > 0")


@dataclass(eq=False)
class WalkCorpus:
    """Walks stored row-wise in ``tokens``; row ``i`` is valid up to ``lengths[i]``."""

    tokens: np.ndarray
    lengths: np.ndarray
    token_space: str  # node_ids | type_ids
    vocab_size: int
    nodes: np.ndarray | None = None  # underlying node sequences, when known

    def __len__(self):
        return len(self.lengths)

    def __iter__(self):
        for row, n in zip(self.tokens, self.lengths):
            yield row[:n]

    @property
    def walks(self) -> list[list[int]]:
        return [row[:n].tolist() for row, n in zip(self.tokens, self.lengths)]

    def num_tokens(self) -> int:
        return int(self.lengths.sum())


@numba.njit(inline="always")
def _adjacent(indptr, indices, u, v):
    lo, hi = indptr[u], indptr[u + 1]
    while lo < hi:
        mid = (lo + hi) >> 1
        if indices[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo < indptr[u + 1] and indices[lo] == v


@numba.njit(inline="always")
def _bias(indptr, indices, prev, x, inv_p, inv_q):
    if x == prev:
        return inv_p
    if _adjacent(indptr, indices, prev, x):
        return 1.0
    return inv_q


@numba.njit
def _walk_one(indptr, indices, start, widx, length, p, q, seed, out):
    state = stream_state(seed, start, widx)
    inv_p = 1.0 / p
    inv_q = 1.0 / q
    uniform = p == 1.0 and q == 1.0
    out[0] = start
    prev = -1
    cur = start
    n = 1
    for _ in range(length):
        lo = indptr[cur]
        hi = indptr[cur + 1]
        deg = hi - lo
        if deg == 0:
            break
        if prev < 0 or uniform:
            state, k = next_below(state, deg)
            nxt = indices[lo + k]
        else:
            total = 0.0
            for a in range(lo, hi):
                total += _bias(indptr, indices, prev, indices[a], inv_p, inv_q)
            state, u = next_float(state)
            target = u * total
            acc = 0.0
            nxt = indices[hi - 1]
            for a in range(lo, hi):
                acc += _bias(indptr, indices, prev, indices[a], inv_p, inv_q)
                if target < acc:
                    nxt = indices[a]
                    break
        out[n] = nxt
        n += 1
        prev = cur
        cur = nxt
    return n


@numba.njit(cache=True)
def _walk_serial(indptr, indices, starts, widx, length, p, q, seed, out, lens):
    for i in range(len(starts)):
        lens[i] = _walk_one(indptr, indices, starts[i], widx[i], length, p, q, seed, out[i])


_walk_parallel = None


def _get_parallel_kernel():
    global _walk_parallel
    if _walk_parallel is None:
        @numba.njit(parallel=True)
        def kernel(indptr, indices, starts, widx, length, p, q, seed, out, lens):
            for i in numba.prange(len(starts)):
                lens[i] = _walk_one(indptr, indices, starts[i], widx[i], length, p, q, seed, out[i])

        _walk_parallel = kernel
    return _walk_parallel


def walk_schedule(g: Graph, cfg: WalkConfig):
    """Start nodes and walk indices: one seeded node shuffle per pass.

    Nodes without out-neighbors start no walks.
    """
    rng = np.random.default_rng(cfg.seed)
    active = g.degrees() > 0
    perms = []
    for _ in range(cfg.walks_per_node):
        perm = rng.permutation(g.num_nodes)
        perms.append(perm[active[perm]])
    starts = np.concatenate(perms)
    widx = np.repeat(np.arange(cfg.walks_per_node), [len(p) for p in perms])
    return starts.astype(np.int64), widx.astype(np.int64)


def _node_walks(g: Graph, cfg: WalkConfig, threads: int = 1):
    if g.num_nodes == 0:
        raise InputError("cannot walk an empty graph")
    starts, widx = walk_schedule(g, cfg)
    out = np.full((len(starts), cfg.walk_length + 1), -1, dtype=np.int64)
    lens = np.zeros(len(starts), dtype=np.int64)
    args = (g.indptr, g.indices, starts, widx, cfg.walk_length, float(cfg.p), float(cfg.q),
            np.uint64(cfg.seed & 0xFFFFFFFFFFFFFFFF), out, lens)
    if threads > 1:
        prev = numba.get_num_threads()
        numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))
        try:
            _get_parallel_kernel()(*args)
        finally:
            numba.set_num_threads(prev)
    else:
        _walk_serial(*args)
    return out, lens


def generate_walks(g: Graph, cfg: WalkConfig, threads: int = 1) -> WalkCorpus:
    """``walks_per_node`` second-order walks from every node; tokens are node ids.

    With ``p == q == 1`` every step is uniform over the current node's neighbors.
    Walks stop early only at a node without out-neighbors.
    """
    out, lens = _node_walks(g, cfg, threads)
    return WalkCorpus(out, lens, "node_ids", g.num_nodes, nodes=out)


def generate_attributed_walks(g: Graph, assignment: TypeAssignment, cfg: WalkConfig,
                              threads: int = 1) -> WalkCorpus:
    """Same traversal as :func:`generate_walks`, emitting each visited node's type."""
    types = np.asarray(assignment.types, dtype=np.int64)
    if len(types) != g.num_nodes:
        raise ShapeError(f"assignment covers {len(types)} nodes, graph has {g.num_nodes}")
    out, lens = _node_walks(g, cfg, threads)
    tokens = np.where(out >= 0, types[np.maximum(out, 0)], -1)
    return WalkCorpus(tokens, lens, "type_ids", int(assignment.num_types), nodes=out)


def save_corpus(corpus: WalkCorpus, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# token_space={corpus.token_space} vocab_size={corpus.vocab_size}\n")
        for walk in corpus:
            fh.write(" ".join(map(str, walk.tolist())) + "\n")


def load_corpus(path) -> WalkCorpus:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3 or header[0] != "#":
            raise FormatError(f"{path}: missing corpus header")
        meta = dict(item.split("=", 1) for item in header[1:])
        walks = [list(map(int, line.split())) for line in fh if line.strip()]
    width = max((len(w) for w in walks), default=1)
    tokens = np.full((len(walks), width), -1, dtype=np.int64)
    for i, w in enumerate(walks):
        tokens[i, :len(w)] = w
    lens = np.array([len(w) for w in walks], dtype=np.int64)
    return WalkCorpus(tokens, lens, meta["token_space"], int(meta["vocab_size"]))
