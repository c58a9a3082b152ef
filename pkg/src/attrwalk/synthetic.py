"""Seeded random graph generators used by tests, examples and the CLI."""

import numpy as np

from .graph import Graph


def _decode_upper(idx, n):
    # k-th pair (i < j) in row-major order of the strict upper triangle
    i = (n - 2 - np.floor(np.sqrt(-8 * idx + 4 * n * (n - 1) - 7) / 2.0 - 0.5)).astype(np.int64)
    j = idx + i + 1 - n * (n - 1) // 2 + (n - i) * ((n - i) - 1) // 2
    return i, j.astype(np.int64)


def planted_partition(sizes, p_in: float, p_out: float, seed: int = 0) -> Graph:
    """Stochastic block model with edge probability ``p_in`` inside blocks and ``p_out`` across."""
    rng = np.random.default_rng(seed)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    n = int(offsets[-1])
    parts = []
    for a, na in enumerate(sizes):
        for b in range(a, len(sizes)):
            nb = sizes[b]
            if a == b:
                total, p = na * (na - 1) // 2, p_in
            else:
                total, p = na * nb, p_out
            if total == 0 or p <= 0:
                continue
            m = rng.binomial(total, p)
            idx = rng.choice(total, size=m, replace=False)
            if a == b:
                i, j = _decode_upper(idx, na)
            else:
                i, j = np.divmod(idx, nb)
            parts.append(np.column_stack([i + offsets[a], j + offsets[b]]))
    edges = np.concatenate(parts) if parts else np.zeros((0, 2), dtype=np.int64)
    return Graph.from_edges(n, edges)


def block_labels(sizes) -> np.ndarray:
    return np.repeat(np.arange(len(sizes)), sizes)


def preferential_attachment(n: int, m: int, seed: int = 0) -> Graph:
    """Barabasi-Albert style growth: each new node links to ``m`` degree-weighted targets."""
    rng = np.random.default_rng(seed)
    targets = list(range(m))
    repeated: list[int] = []
    edges = []
    for v in range(m, n):
        for t in set(targets):
            edges.append((v, t))
        repeated.extend(targets)
        repeated.extend([v] * m)
        chosen: set[int] = set()
        while len(chosen) < m:
            chosen.add(repeated[rng.integers(len(repeated))])
        targets = list(chosen)
    return Graph.from_edges(n, edges)
