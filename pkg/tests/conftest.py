import numpy as np
import pytest

from monomer_dimer.graph_core import Graph, ImitativeModel, MDModel


def random_graph(rng, n, p=None):
    p = rng.uniform(0.2, 0.9) if p is None else p
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return Graph.from_edges(n, edges)


def random_model(rng, n, p=None, wmax=2.0):
    g = random_graph(rng, n, p)
    w = {e: rng.uniform(0.0, wmax) for e in g.edges}
    return MDModel(g, w, tuple(rng.uniform(0.1, 3.0, n)))


def random_imitative(rng, n, p=None):
    m = random_model(rng, n, p)
    return ImitativeModel(m, {e: rng.uniform(-1.0, 1.0) for e in m.graph.edges})


def random_tree(rng, n):
    return Graph.from_edges(n, [(int(rng.integers(0, v)), v) for v in range(1, n)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
