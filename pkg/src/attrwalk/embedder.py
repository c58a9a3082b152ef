"""Skip-Gram with negative sampling over walk corpora.

In attributed mode the tokens are type ids, so the learned table has one row
per type instead of one per node.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import ConfigError, CoverageError, FormatError, InputError
from .rng import next_float, stream_state
from .walker import WalkCorpus

log = logging.getLogger(__name__)

SIGMOID_CLAMP = 30.0


@dataclass(frozen=True)
class SgnsConfig:
    dim: int = 128
    window: int = 10
    negatives: int = 5
    epochs: int = 5
    initial_lr: float = 0.025
    min_lr: float = 0.0001
    unigram_power: float = 0.75
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.dim < 1 or self.window < 1 or self.negatives < 1 or self.epochs < 1:
            raise ConfigError("dim, window, negatives and epochs must all be >= 1")
        if not 0 < self.min_lr <= self.initial_lr:
            raise ConfigError("need 0 < min_lr <= initial_lr")


@dataclass(eq=False)
class Vocab:
    tokens: np.ndarray  # sorted distinct tokens; row i <-> tokens[i]
    counts: np.ndarray
    probs: np.ndarray  # negative-sampling distribution

    def __len__(self):
        return len(self.tokens)

    def rows(self, tokens) -> np.ndarray:
        tokens = np.asarray(tokens, dtype=np.int64)
        idx = np.searchsorted(self.tokens, tokens)
        idx = np.minimum(idx, len(self.tokens) - 1)
        missing = self.tokens[idx] != tokens
        if np.any(missing):
            raise CoverageError("tokens missing from vocabulary", sorted(set(tokens[missing].tolist())))
        return idx


def build_vocab(corpus: WalkCorpus, unigram_power: float = 0.75) -> Vocab:
    """Every distinct token gets a row; negatives are drawn proportionally to ``count ** power``."""
    flat = np.concatenate([w for w in corpus]) if len(corpus) else np.empty(0, dtype=np.int64)
    if flat.size == 0:
        raise InputError("cannot build a vocabulary from an empty corpus")
    tokens, counts = np.unique(flat, return_counts=True)
    weights = counts.astype(np.float64) ** unigram_power
    return Vocab(tokens, counts, weights / weights.sum())


@dataclass(eq=False)
class EmbeddingMatrix:
    input_vectors: np.ndarray
    output_vectors: np.ndarray | None
    tokens: np.ndarray
    token_space: str = "node_ids"
    loss_history: list = field(default_factory=list)

    @property
    def num_rows(self) -> int:
        return self.input_vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.input_vectors.shape[1]

    @property
    def vocab(self) -> dict[int, int]:
        return {int(t): i for i, t in enumerate(self.tokens.tolist())}

    def __contains__(self, token) -> bool:
        i = np.searchsorted(self.tokens, token)
        return bool(i < len(self.tokens) and self.tokens[i] == token)

    def lookup(self, tokens) -> np.ndarray:
        """Input vectors for ``tokens``; raises :class:`CoverageError` on unknown tokens."""
        tokens = np.asarray(tokens, dtype=np.int64)
        if len(self.tokens) == 0:
            raise CoverageError("empty embedding", sorted(set(tokens.tolist())))
        idx = np.minimum(np.searchsorted(self.tokens, tokens), len(self.tokens) - 1)
        missing = self.tokens[idx] != tokens
        if np.any(missing):
            raise CoverageError("tokens missing from embedding vocabulary", sorted(set(tokens[missing].tolist())))
        return self.input_vectors[idx]


# -- kernels --------------------------------------------------------------


@numba.njit(inline="always")
def _clamp(x):
    if x > SIGMOID_CLAMP:
        return SIGMOID_CLAMP
    if x < -SIGMOID_CLAMP:
        return -SIGMOID_CLAMP
    return x


@numba.njit(cache=True, fastmath=True)
def _pair_update(w_in, w_out, c, targets, labels, n, lr, gbuf, grad_c):
    """One SGD step on ``-log s(z_c.z'_o) - sum log s(-z_c.z'_neg)``.

    ``targets[:n]`` holds the context row followed by the negative rows and
    ``labels`` their 1/0 labels. All gradients are taken at the pre-step values.
    Returns the loss before the step.
    """
    d = w_in.shape[1]
    loss = 0.0
    for k in range(n):
        s = 0.0
        for j in range(d):
            s += w_in[c, j] * w_out[targets[k], j]
        s = _clamp(s)
        sig = 1.0 / (1.0 + np.exp(-s))
        if labels[k] == 1:
            gbuf[k] = sig - 1.0
            loss += np.log1p(np.exp(-s))
        else:
            gbuf[k] = sig
            loss += np.log1p(np.exp(s))
    for j in range(d):
        grad_c[j] = 0.0
    for k in range(n):
        o = targets[k]
        g = gbuf[k]
        for j in range(d):
            grad_c[j] += g * w_out[o, j]
    for k in range(n):
        o = targets[k]
        g = lr * gbuf[k]
        for j in range(d):
            w_out[o, j] -= g * w_in[c, j]
    for j in range(d):
        w_in[c, j] -= lr * grad_c[j]
    return loss


@numba.njit(inline="always")
def _draw(cum, state):
    state, u = next_float(state)
    lo, hi = 0, len(cum) - 1
    while lo < hi:
        mid = (lo + hi) >> 1
        if cum[mid] <= u:
            lo = mid + 1
        else:
            hi = mid
    return state, lo


@numba.njit(cache=True)
def _train_walks(rows, lens, radii, w_in, w_out, probs, cum, k, lr0, lr_min, done, total, state):
    state = np.uint64(state)
    targets = np.empty(k + 1, dtype=np.int64)
    labels = np.zeros(k + 1, dtype=np.int64)
    labels[0] = 1
    gbuf = np.empty(k + 1)
    grad_c = np.empty(w_in.shape[1])
    loss = 0.0
    pairs = 0
    for w in range(len(lens)):
        n = lens[w]
        for t in range(n):
            c = rows[w, t]
            b = radii[w, t]
            lo = t - b if t - b > 0 else 0
            hi = t + b if t + b < n - 1 else n - 1
            for j in range(lo, hi + 1):
                if j == t:
                    continue
                o = rows[w, j]
                targets[0] = o
                m = 1
                # resampling cannot avoid a context that carries all the mass
                if probs[o] < 1.0 - 1e-12:
                    for _ in range(k):
                        state, neg = _draw(cum, state)
                        while neg == o:
                            state, neg = _draw(cum, state)
                        targets[m] = neg
                        m += 1
                lr = lr0 - (lr0 - lr_min) * (done + pairs) / total
                if lr < lr_min:
                    lr = lr_min
                loss += _pair_update(w_in, w_out, c, targets, labels, m, lr, gbuf, grad_c)
                pairs += 1
    return loss, pairs, state


def sgns_step(center: int, context: int, negatives, lr: float, emb: EmbeddingMatrix) -> float:
    """Apply one update for a (center, context) pair with the given negatives; returns the loss."""
    rows = np.searchsorted(emb.tokens, np.asarray([center, context, *negatives], dtype=np.int64))
    targets = rows[1:].astype(np.int64)
    labels = np.zeros(len(targets), dtype=np.int64)
    labels[0] = 1
    return float(_pair_update(emb.input_vectors, emb.output_vectors, int(rows[0]), targets, labels,
                              len(targets), float(lr), np.empty(len(targets)), np.empty(emb.dim)))


def _window_radii(rng, epochs, shape, window):
    return rng.integers(1, window + 1, size=(epochs,) + shape, dtype=np.int16)


def count_pairs(lens: np.ndarray, radii: np.ndarray) -> int:
    """Exact number of (center, context) pairs for the given per-position radii."""
    width = radii.shape[-1]
    t = np.arange(width)[None, :]
    left = np.minimum(t, radii)
    right = np.minimum(lens[:, None] - 1 - t, radii)
    valid = t < lens[:, None]
    return int(((left + right) * valid).sum())


_parallel_kernel = None


def _get_parallel_kernel():
    global _parallel_kernel
    if _parallel_kernel is None:
        @numba.njit(parallel=True)
        def kernel(rows, lens, radii, w_in, w_out, probs, cum, k, lr0, lr_min, done, total,
                   seed, epoch, bounds):
            nshard = len(bounds) - 1
            losses = np.zeros(nshard)
            counts = np.zeros(nshard, dtype=np.int64)
            for s in numba.prange(nshard):
                a, b = bounds[s], bounds[s + 1]
                state = stream_state(seed, epoch, s + 1)
                # shards advance the shared schedule in lockstep, approximated by scaling
                l, p, _ = _train_walks(rows[a:b], lens[a:b], radii[a:b], w_in, w_out, probs, cum, k,
                                       lr0, lr_min, done, total / nshard, state)
                losses[s] = l
                counts[s] = p
            return losses.sum(), counts.sum()

        _parallel_kernel = kernel
    return _parallel_kernel


def train_sgns(corpus: WalkCorpus, cfg: SgnsConfig) -> EmbeddingMatrix:
    """Train Skip-Gram with negative sampling; deterministic when ``cfg.workers == 1``.

    Contexts lie within a radius drawn uniformly from ``[1, window]`` at every
    position. The learning rate decays linearly from ``initial_lr`` to
    ``min_lr`` over all center-context pairs of the run.
    """
    vocab = build_vocab(corpus, cfg.unigram_power)
    v, d = len(vocab), cfg.dim
    rng = np.random.default_rng(cfg.seed)
    w_in = (rng.random((v, d)) - 0.5) / d
    w_out = np.zeros((v, d))

    rows = np.where(corpus.tokens >= 0, np.searchsorted(vocab.tokens, corpus.tokens), -1).astype(np.int64)
    lens = corpus.lengths.astype(np.int64)
    radii = _window_radii(rng, cfg.epochs, rows.shape, cfg.window)
    total = max(sum(count_pairs(lens, radii[e]) for e in range(cfg.epochs)), 1)
    cum = np.cumsum(vocab.probs)
    cum[-1] = 1.0
    seed = np.uint64(cfg.seed & 0xFFFFFFFFFFFFFFFF)

    history = []
    done = 0
    for epoch in range(cfg.epochs):
        if cfg.workers > 1:
            bounds = np.linspace(0, len(lens), cfg.workers + 1).astype(np.int64)
            loss, pairs = _get_parallel_kernel()(rows, lens, radii[epoch], w_in, w_out, vocab.probs, cum,
                                                 cfg.negatives, cfg.initial_lr, cfg.min_lr, done, float(total),
                                                 seed, epoch, bounds)
        else:
            state = np.uint64(stream_state(seed, epoch, 0))
            loss, pairs, _ = _train_walks(rows, lens, radii[epoch], w_in, w_out, vocab.probs, cum,
                                          cfg.negatives, cfg.initial_lr, cfg.min_lr, done, float(total), state)
        done += pairs
        history.append(loss / max(pairs, 1))
        log.debug("epoch %d: %d pairs, mean loss %.5f", epoch, pairs, history[-1])
    return EmbeddingMatrix(w_in, w_out, vocab.tokens, corpus.token_space, history)


def save_embeddings(e: EmbeddingMatrix, path) -> None:
    """word2vec text layout: ``V d`` header, then ``token v1 ... vd`` per row."""
    with open(path, "w") as fh:
        fh.write(f"{e.num_rows} {e.dim}\n")
        for tok, row in zip(e.tokens.tolist(), e.input_vectors):
            fh.write(str(tok) + " " + " ".join(f"{x:.9g}" for x in row) + "\n")


def load_embeddings(path, token_space: str = "type_ids") -> EmbeddingMatrix:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise FormatError(f"{path}: header must be 'V d'")
        try:
            v, d = int(header[0]), int(header[1])
        except ValueError:
            raise FormatError(f"{path}: non-integer header") from None
        tokens, rows = [], []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != d + 1:
                raise FormatError(f"{path}: line {lineno} has {len(parts) - 1} values, expected {d}")
            try:
                tokens.append(int(parts[0]))
                rows.append([float(x) for x in parts[1:]])
            except ValueError:
                raise FormatError(f"{path}: line {lineno} is not numeric") from None
    if len(rows) != v:
        raise FormatError(f"{path}: header declares {v} rows, found {len(rows)}")
    tokens = np.asarray(tokens, dtype=np.int64)
    mat = np.asarray(rows, dtype=np.float64).reshape(v, d)
    order = np.argsort(tokens, kind="stable")
    return EmbeddingMatrix(mat[order], None, tokens[order], token_space)
