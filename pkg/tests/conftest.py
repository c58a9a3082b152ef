import numpy as np
import pytest

from attrwalk.graph import Graph
from attrwalk.linkpred import PipelineConfig


def write_edges(path, text):
    path.write_text(text)
    return path


@pytest.fixture
def edge_file(tmp_path):
    def make(text, name="g.txt"):
        return write_edges(tmp_path / name, text)
    return make


@pytest.fixture
def triangle():
    return Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def path3():
    return Graph.from_edges(3, [(0, 1), (1, 2)])


@pytest.fixture
def k4():
    return Graph.from_edges(4, [(i, j) for i in range(4) for j in range(i + 1, 4)])


def star(leaves):
    return Graph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def random_graph(n, p, seed):
    rng = np.random.default_rng(seed)
    a = np.triu(rng.random((n, n)) < p, 1)
    return Graph.from_edges(n, np.argwhere(a))


# fixed 5-node graph for walk-law checks: a 4-cycle with one chord plus a pendant
FIVE_NODE_EDGES = [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (3, 4)]


def transition_counts(corpus):
    """``{(prev, cur): {next: count}}`` over all second-order steps of a node corpus."""
    w = corpus.nodes
    trip = np.stack([w[:, :-2], w[:, 1:-1], w[:, 2:]], axis=-1).reshape(-1, 3)
    trip = trip[trip[:, 2] >= 0]
    keys, num = np.unique(trip, axis=0, return_counts=True)
    counts = {}
    for (a, b, c), k in zip(keys.tolist(), num.tolist()):
        counts.setdefault((a, b), {})[c] = k
    return counts


def quick_config(**overrides):
    base = dict(walks_per_node=2, walk_length=20, dim=16, window=5, epochs=1, clf_epochs=20)
    base.update(overrides)
    return PipelineConfig(**base)


# -- acceptance summary ---------------------------------------------------

ACCEPTANCE_RESULTS: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS, key=lambda k: int(k.split()[0])):
        terminalreporter.write_line(ACCEPTANCE_RESULTS[key])
