"""Undirected graph storage and citation-file loading.

The graph is kept in CSR form (``indptr``/``indices``) with each neighbor
row sorted, which is what the samplers and the centrality kernels index
into directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class GraphFormatError(ValueError):
    """Raised for malformed edge or label files."""


@dataclass(frozen=True, eq=False)
class Graph:
    indptr: np.ndarray
    indices: np.ndarray
    ids: tuple[str, ...]
    _index: dict[str, int] = field(repr=False, compare=False)
    _dist2: dict[int, np.ndarray] = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_edges(cls, ids: Sequence[str], edges: Iterable[tuple[int, int]]) -> "Graph":
        """Build from dense-index pairs; symmetrizes, drops self-loops and duplicates."""
        n = len(ids)
        pairs = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if pairs.size and (pairs.min() < 0 or pairs.max() >= n):
            raise IndexError("edge endpoint outside [0, n)")
        pairs = pairs[pairs[:, 0] != pairs[:, 1]]
        both = np.concatenate([pairs, pairs[:, ::-1]])
        keys = np.unique(both[:, 0] * n + both[:, 1]) if both.size else np.empty(0, np.int64)
        src, dst = np.divmod(keys, n) if n else (keys, keys)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        np.cumsum(indptr, out=indptr)
        indptr.setflags(write=False)
        indices = dst.astype(np.int64)
        indices.setflags(write=False)
        ids = tuple(ids)
        index = {s: i for i, s in enumerate(ids)}
        if len(index) != n:
            raise ValueError("node ids must be unique")
        return cls(indptr, indices, ids, index)

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def m(self) -> int:
        return int(self.indices.size // 2)

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def degree(self, v: int) -> int:
        self._check(v)
        return int(self.indptr[v + 1] - self.indptr[v])

    def index_of(self, node_id: str) -> int:
        return self._index[node_id]

    def _check(self, v: int) -> None:
        if not 0 <= v < self.n:
            raise IndexError(f"node index {v} out of range [0, {self.n})")

    def neighbors(self, v: int) -> np.ndarray:
        self._check(v)
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        row = self.neighbors(u)
        i = np.searchsorted(row, v)
        return bool(i < row.size and row[i] == v)

    def nodes_at_distance_two(self, v: int) -> np.ndarray:
        """Sorted nodes whose shortest-path distance from ``v`` is exactly 2.

        Results are cached per node; the cache is the only mutable part of
        the object and holds read-only arrays.
        """
        cached = self._dist2.get(v)
        if cached is not None:
            return cached
        nbrs = self.neighbors(v)
        if nbrs.size == 0:
            out = np.empty(0, dtype=np.int64)
        else:
            second = np.concatenate([self.neighbors(u) for u in nbrs])
            out = np.setdiff1d(second, nbrs)
            out = out[out != v]
        out.setflags(write=False)
        self._dist2[v] = out
        return out

    def edge_keys(self) -> np.ndarray:
        """Sorted ``u * n + v`` codes of every directed adjacency entry."""
        src = np.repeat(np.arange(self.n, dtype=np.int64), self.degrees)
        return src * self.n + self.indices

    def to_scipy(self):
        from scipy.sparse import csr_matrix

        data = np.ones(self.indices.size)
        return csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))


@dataclass(frozen=True)
class LabeledNodes:
    """Class labels for the labeled subset of a graph's nodes."""

    labels: dict[int, int]
    class_names: tuple[str, ...]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Node indices (ascending) and their integer labels."""
        nodes = np.array(sorted(self.labels), dtype=np.int64)
        return nodes, np.array([self.labels[v] for v in nodes], dtype=np.int64)


def _tokens(path: Path):
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise GraphFormatError(f"cannot read {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            yield lineno, line.split()


def load_edge_list(edge_path, label_path=None) -> tuple[Graph, LabeledNodes]:
    """Read a ``.cites``-style edge file and optional ``.content``-style label file.

    Dense indices follow first appearance: edge file first, then the label
    file. Nodes seen only in the label file become isolated nodes.
    """
    index: dict[str, int] = {}
    edges = []

    def intern(node_id: str) -> int:
        i = index.get(node_id)
        if i is None:
            i = index[node_id] = len(index)
        return i

    for lineno, toks in _tokens(Path(edge_path)):
        if len(toks) != 2:
            raise GraphFormatError(f"{edge_path}:{lineno}: expected 2 tokens, got {len(toks)}")
        edges.append((intern(toks[0]), intern(toks[1])))

    raw_labels: dict[int, str] = {}
    if label_path is not None:
        for lineno, toks in _tokens(Path(label_path)):
            if len(toks) < 2:
                raise GraphFormatError(f"{label_path}:{lineno}: expected node id and label")
            v = intern(toks[0])
            if v in raw_labels and raw_labels[v] != toks[-1]:
                raise GraphFormatError(f"{label_path}:{lineno}: node {toks[0]} has two labels")
            raw_labels[v] = toks[-1]

    ids = sorted(index, key=index.__getitem__)
    graph = Graph.from_edges(ids, edges)
    class_names = tuple(sorted(set(raw_labels.values())))
    code = {name: c for c, name in enumerate(class_names)}
    labels = LabeledNodes({v: code[s] for v, s in raw_labels.items()}, class_names)
    return graph, labels


def neighbors(g: Graph, v: int) -> np.ndarray:
    return g.neighbors(v)


def nodes_at_distance_two(g: Graph, v: int) -> np.ndarray:
    return g.nodes_at_distance_two(v)


def from_networkx(nxg) -> Graph:
    """Convenience adapter for tests and examples (node ids become ``str``)."""
    nodes = list(nxg.nodes())
    pos = {u: i for i, u in enumerate(nodes)}
    return Graph.from_edges([str(u) for u in nodes], [(pos[a], pos[b]) for a, b in nxg.edges()])
