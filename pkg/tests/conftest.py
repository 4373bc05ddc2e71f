import networkx as nx
import numpy as np
import pytest

from centrograph.graph import Graph, from_networkx


def make_graph(n, edges):
    return Graph.from_edges([str(i) for i in range(n)], edges)


def random_connected(rng, n_max=8, n_min=3):
    """Random connected graph: spanning tree plus extra random edges."""
    n = int(rng.integers(n_min, n_max + 1))
    edges = [(i, int(rng.integers(0, i))) for i in range(1, n)]
    extra = rng.random((n, n)) < rng.uniform(0.0, 0.6)
    edges += [(i, j) for i in range(n) for j in range(i + 1, n) if extra[i, j]]
    return make_graph(n, edges)


@pytest.fixture
def star():
    return make_graph(5, [(0, i) for i in range(1, 5)])


@pytest.fixture
def path3():
    return make_graph(3, [(0, 1), (1, 2)])


@pytest.fixture
def karate():
    return from_networkx(nx.karate_club_graph())


@pytest.fixture
def two_cliques():
    edges = [(i, j) for i in range(5) for j in range(i + 1, 5)]
    edges += [(i + 5, j + 5) for i, j in edges]
    edges.append((4, 5))
    return make_graph(10, edges)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
