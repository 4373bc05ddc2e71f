"""Positive/negative training-pair generation for the four embedding methods.

Every positive example is drawn independently: a source node from the
(centrality) sampling distribution, then a context node according to the
method. Work is vectorized over chunks of pairs; the chunk size is fixed
so a stream is reproducible from (seed, config, mode) alone.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .centrality import SamplingDistribution
from .graph import Graph

CHUNK = 8192


class Method(str, enum.Enum):
    DEEPWALK = "deepwalk"
    NODE2VEC = "node2vec"
    NBNE = "nbne"
    LINE1 = "line1"
    LINE2 = "line2"


class Mode(str, enum.Enum):
    SAMPLE = "sample"
    WEIGHT = "weight"


class SamplingError(RuntimeError):
    pass


@dataclass(frozen=True)
class MethodConfig:
    method: Method = Method.DEEPWALK
    context: int = 30
    walk_length: int = 40
    p: float = 1.0
    q: float = 1.0
    negatives: str = "uniform"  # or "unigram": degree**0.75, not the default

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.context < 1 or self.walk_length < 2:
            raise ValueError("need context >= 1 and walk_length >= 2")
        if self.p <= 0 or self.q <= 0:
            raise ValueError("p and q must be positive")
        if self.method in (Method.DEEPWALK, Method.NODE2VEC) and self.context >= self.walk_length:
            raise ValueError("context must be smaller than walk_length")
        if self.negatives not in ("uniform", "unigram"):
            raise ValueError(f"unknown negative distribution {self.negatives!r}")


class TrainingPair(NamedTuple):
    source: int
    context: int
    negative: int
    weight: float


@dataclass(frozen=True)
class PairBatch:
    source: np.ndarray
    context: np.ndarray
    negative: np.ndarray
    weight: np.ndarray

    def __len__(self):
        return self.source.size

    def pairs(self) -> Iterator[TrainingPair]:
        for s, c, q, w in zip(self.source.tolist(), self.context.tolist(), self.negative.tolist(), self.weight.tolist()):
            yield TrainingPair(s, c, q, w)


def node2vec_transition(g: Graph, prev: int, cur: int, p: float = 1.0, q: float = 1.0) -> np.ndarray:
    """Next-step probabilities over ``g.neighbors(cur)`` after arriving from ``prev``."""
    nbrs = g.neighbors(cur)
    if nbrs.size == 0:
        raise ValueError(f"node {cur} has no neighbors")
    if not g.has_edge(prev, cur):
        raise ValueError(f"({prev}, {cur}) is not an edge")
    back = g.neighbors(prev)
    w = np.where(nbrs == prev, 1.0 / p, np.where(np.isin(nbrs, back), 1.0, 1.0 / q))
    return w / w.sum()


def uniform_transition(g: Graph, cur: int) -> np.ndarray:
    deg = g.degree(cur)
    if deg == 0:
        raise ValueError(f"node {cur} has no neighbors")
    return np.full(deg, 1.0 / deg)


def sample_negative(n: int, rng: np.random.Generator, size: int | None = None):
    if n < 1:
        raise ValueError("need at least one node")
    return rng.integers(0, n, size=size)


class PositiveSampler:
    """Draws (source, context) arrays for one method on one graph."""

    def __init__(self, g: Graph, dist: SamplingDistribution, cfg: MethodConfig):
        if dist.n != g.n:
            raise ValueError("distribution size does not match the graph")
        if g.m == 0:
            raise SamplingError("graph has no edges")
        self.g = g
        self.cfg = cfg
        self.deg = g.degrees
        self.dist = dist.restricted(self.deg > 0)
        if cfg.method is Method.NODE2VEC:
            self._edge_keys = g.edge_keys()
            self._w_max = max(1.0 / cfg.p, 1.0, 1.0 / cfg.q)

    def draw(self, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
        method = self.cfg.method
        if method is Method.LINE2:
            return self._draw_distance_two(rng, size)
        src = self.dist.draw(rng, size)
        if method in (Method.NBNE, Method.LINE1):
            return src, self._step(src, rng.random(size))
        ctx = self._walk(src, rng)
        # a walk that ends where it began is redrawn (fresh offset, same source)
        back = np.flatnonzero(ctx == src)
        while back.size:
            ctx[back] = self._walk(src[back], rng)
            back = back[ctx[back] == src[back]]
        return src, ctx

    def _step(self, cur: np.ndarray, u: np.ndarray) -> np.ndarray:
        g = self.g
        return g.indices[g.indptr[cur] + (u * self.deg[cur]).astype(np.int64)]

    def _walk(self, src: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        size = src.size
        hops = rng.integers(1, self.cfg.context + 1, size=size)
        prev = src.copy()
        cur = self._step(src, rng.random(size))
        for step in range(1, int(hops.max(initial=0))):
            live = np.flatnonzero(hops > step)
            if self.cfg.method is Method.NODE2VEC:
                nxt = self._biased_step(prev[live], cur[live], rng)
            else:
                nxt = self._step(cur[live], rng.random(live.size))
            prev[live] = cur[live]
            cur[live] = nxt
        return cur

    def _biased_step(self, prev: np.ndarray, cur: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        # rejection sampling against the flat proposal over neighbors(cur)
        n = self.g.n
        out = np.empty_like(cur)
        todo = np.arange(cur.size)
        while todo.size:
            x = self._step(cur[todo], rng.random(todo.size))
            keys = prev[todo] * n + x
            pos = np.minimum(np.searchsorted(self._edge_keys, keys), self._edge_keys.size - 1)
            adjacent = self._edge_keys[pos] == keys
            weight = np.where(x == prev[todo], 1.0 / self.cfg.p, np.where(adjacent, 1.0, 1.0 / self.cfg.q))
            ok = rng.random(todo.size) * self._w_max < weight
            out[todo[ok]] = x[ok]
            todo = todo[~ok]
        return out

    def _draw_distance_two(self, rng: np.random.Generator, size: int):
        g = self.g
        src = self.dist.draw(rng, size)
        sizes = np.array([g.nodes_at_distance_two(v).size for v in src.tolist()], dtype=np.int64)
        empty = np.flatnonzero(sizes == 0)
        for _ in range(g.n):
            if not empty.size:
                break
            src[empty] = self.dist.draw(rng, empty.size)
            sizes[empty] = [g.nodes_at_distance_two(v).size for v in src[empty].tolist()]
            empty = empty[sizes[empty] == 0]
        else:
            if empty.size:
                raise SamplingError(f"no source with a distance-2 node after {g.n} resamples")
        pick = (rng.random(size) * sizes).astype(np.int64)
        ctx = np.fromiter(
            (g.nodes_at_distance_two(v)[k] for v, k in zip(src.tolist(), pick.tolist())),
            dtype=np.int64,
            count=size,
        )
        return src, ctx


def sample_positive(g: Graph, dist: SamplingDistribution, cfg: MethodConfig, rng: np.random.Generator) -> tuple[int, int]:
    src, ctx = PositiveSampler(g, dist, cfg).draw(rng, 1)
    return int(src[0]), int(ctx[0])


def pair_batches(
    g: Graph,
    dist: SamplingDistribution,
    cfg: MethodConfig,
    total: int,
    rng: np.random.Generator,
    mode: Mode = Mode.SAMPLE,
    loss_weights: np.ndarray | None = None,
    chunk: int = CHUNK,
) -> Iterator[PairBatch]:
    """Yield ``total`` training pairs as array chunks.

    In weight mode the source distribution must be uniform and each pair
    carries ``loss_weights[source]``; in sample mode every weight is 1.
    """
    mode = Mode(mode)
    if mode is Mode.WEIGHT:
        if loss_weights is None or len(loss_weights) != g.n:
            raise ValueError("weight mode needs one loss weight per node")
        if np.ptp(dist.probs) > 1e-15:
            raise ValueError("weight mode expects a uniform source distribution")
        lam = np.asarray(loss_weights, dtype=np.float64)
        if np.any(lam[g.degrees > 0] <= 0):
            raise ValueError("loss weights must be positive on every possible source")
    sampler = PositiveSampler(g, dist, cfg)
    if cfg.negatives == "unigram":
        noise = SamplingDistribution((g.degrees ** 0.75) / (g.degrees ** 0.75).sum())
    done = 0
    while done < total:
        size = min(chunk, total - done)
        src, ctx = sampler.draw(rng, size)
        if cfg.negatives == "uniform":
            neg = sample_negative(g.n, rng, size)
        else:
            neg = noise.draw(rng, size)
        weight = lam[src] if mode is Mode.WEIGHT else np.ones(size)
        done += size
        yield PairBatch(src, ctx, neg, weight)


def pair_stream(g, dist, cfg, total, rng, mode=Mode.SAMPLE, loss_weights=None) -> Iterator[TrainingPair]:
    for batch in pair_batches(g, dist, cfg, total, rng, mode, loss_weights):
        yield from batch.pairs()
