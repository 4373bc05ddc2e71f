"""Node centrality measures and their conversion into sampling weights.

Betweenness, load and closeness share one level-synchronous BFS that runs
a block of sources at a time as dense rows against the sparse adjacency
matrix. Blocks are reduced in source order, so results do not depend on
how the work is chunked beyond the fixed block size.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .graph import Graph


class Measure(str, enum.Enum):
    DEGREE = "degree"
    BETWEENNESS = "bc"
    CLOSENESS = "clos"
    PAGERANK = "pr"
    LOAD = "load"
    UNIFORM = "uniform"


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class CentralityWeights:
    measure: Measure
    scores: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        if s.ndim != 1 or not np.all(np.isfinite(s)) or np.any(s < 0):
            raise ValueError("centrality scores must be a finite nonnegative vector")
        s.setflags(write=False)
        object.__setattr__(self, "scores", s)


@dataclass(frozen=True)
class SamplingDistribution:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 1 or p.size == 0 or np.any(p < 0) or not np.isclose(p.sum(), 1.0, atol=1e-12, rtol=0):
            raise ValueError("probabilities must be nonnegative and sum to 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        cdf = np.cumsum(p)
        cdf.setflags(write=False)
        object.__setattr__(self, "_cdf", cdf)
        object.__setattr__(self, "_last", int(np.flatnonzero(p)[-1]))

    @property
    def n(self) -> int:
        return self.probs.size

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random(size) * self._cdf[-1]
        idx = np.searchsorted(self._cdf, u, side="right")
        return np.minimum(idx, self._last)

    def restricted(self, mask: np.ndarray) -> "SamplingDistribution":
        """Zero out nodes outside ``mask`` and renormalize."""
        p = np.where(mask, self.probs, 0.0)
        total = p.sum()
        if total <= 0:
            raise ValueError("restriction leaves no probability mass")
        return SamplingDistribution(p / total)

    @classmethod
    def uniform(cls, n: int) -> "SamplingDistribution":
        return cls(np.full(n, 1.0 / n))


def _block_rows(n: int) -> int:
    return max(1, min(n, (1 << 21) // max(n, 1)))


def _bfs_block(A, sources: np.ndarray, n: int):
    """Distances and shortest-path counts from each source in the block."""
    b = sources.size
    rows = np.arange(b)
    dist = np.full((b, n), -1, dtype=np.int64)
    sigma = np.zeros((b, n))
    dist[rows, sources] = 0
    sigma[rows, sources] = 1.0
    frontier = sigma.copy()
    depth = 0
    while True:
        reach = np.asarray((A @ frontier.T).T)
        fresh = (dist < 0) & (reach > 0)
        if not fresh.any():
            break
        depth += 1
        dist[fresh] = depth
        sigma[fresh] = reach[fresh]
        frontier = np.where(fresh, reach, 0.0)
    return dist, sigma, depth


def _blocks(n: int):
    step = _block_rows(n)
    for start in range(0, n, step):
        yield np.arange(start, min(n, start + step))


def degree_centrality(g: Graph) -> CentralityWeights:
    if g.n < 2:
        raise ValueError("degree centrality needs at least 2 nodes")
    return CentralityWeights(Measure.DEGREE, g.degrees / (g.n - 1))


def betweenness_centrality(g: Graph) -> CentralityWeights:
    """Exact shortest-path betweenness (Brandes accumulation), endpoints excluded."""
    n = g.n
    A = g.to_scipy()
    total = np.zeros(n)
    for sources in _blocks(n):
        dist, sigma, depth = _bfs_block(A, sources, n)
        delta = np.zeros_like(sigma)
        safe_sigma = np.where(sigma > 0, sigma, 1.0)
        for level in range(depth, 0, -1):
            x = np.where(dist == level, (1.0 + delta) / safe_sigma, 0.0)
            pulled = np.asarray((A @ x.T).T)
            delta += np.where(dist == level - 1, sigma * pulled, 0.0)
        total += np.where(dist > 0, delta, 0.0).sum(axis=0)
    # each unordered pair was visited from both ends
    return CentralityWeights(Measure.BETWEENNESS, _pair_normalize(total, n))


def _pair_normalize(ordered_sum: np.ndarray, n: int) -> np.ndarray:
    if n <= 2:
        return np.zeros(n)
    return ordered_sum / ((n - 1) * (n - 2))


def load_centrality(g: Graph) -> CentralityWeights:
    """Exact load centrality.

    Every ordered pair (s, t) sends a unit packet from s; a node holding
    packets bound for t splits them evenly over its neighbors one hop
    closer to t. The load of v is the traffic it relays, summed over all
    pairs where v is not an endpoint.
    """
    n = g.n
    A = g.to_scipy()
    total = np.zeros(n)
    for targets in _blocks(n):
        dist, _, depth = _bfs_block(A, targets, n)
        load = np.where(dist > 0, 1.0, 0.0)
        for level in range(depth, 0, -1):
            closer = (dist == level - 1).astype(np.float64)
            n_closer = np.asarray((A @ closer.T).T)
            share = np.where(dist == level, load / np.where(n_closer > 0, n_closer, 1.0), 0.0)
            load += closer * np.asarray((A @ share.T).T)
        total += np.where(dist > 0, load - 1.0, 0.0).sum(axis=0)
    return CentralityWeights(Measure.LOAD, _pair_normalize(total, n))


def closeness_centrality(g: Graph) -> CentralityWeights:
    """Closeness scaled by component size (Wasserman-Faust); isolated nodes get 0."""
    n = g.n
    A = g.to_scipy()
    out = np.zeros(n)
    if n < 2:
        return CentralityWeights(Measure.CLOSENESS, out)
    for sources in _blocks(n):
        dist, _, _ = _bfs_block(A, sources, n)
        reached = (dist > 0).sum(axis=1).astype(np.float64)
        dsum = np.where(dist > 0, dist, 0).sum(axis=1).astype(np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            score = np.where(dsum > 0, (reached / (n - 1)) * (reached / dsum), 0.0)
        out[sources] = score
    return CentralityWeights(Measure.CLOSENESS, out)


def pagerank(g: Graph, damping: float = 0.85, tol: float = 1e-10, max_iter: int = 200) -> CentralityWeights:
    if not 0 < damping < 1:
        raise ValueError("damping must lie in (0, 1)")
    n = g.n
    A = g.to_scipy()
    deg = g.degrees.astype(np.float64)
    dangling = deg == 0
    inv_deg = np.where(dangling, 0.0, 1.0 / np.where(dangling, 1.0, deg))
    x = np.full(n, 1.0 / n)
    residual = np.inf
    for _ in range(max_iter):
        spread = A @ (x * inv_deg)
        nxt = damping * (spread + x[dangling].sum() / n) + (1.0 - damping) / n
        residual = np.abs(nxt - x).sum()
        x = nxt
        if residual < tol:
            return CentralityWeights(Measure.PAGERANK, x)
    raise ConvergenceError(f"PageRank did not converge in {max_iter} iterations", residual)


def uniform_centrality(g: Graph) -> CentralityWeights:
    return CentralityWeights(Measure.UNIFORM, np.ones(g.n))


_MEASURES = {
    Measure.DEGREE: degree_centrality,
    Measure.BETWEENNESS: betweenness_centrality,
    Measure.CLOSENESS: closeness_centrality,
    Measure.PAGERANK: pagerank,
    Measure.LOAD: load_centrality,
    Measure.UNIFORM: uniform_centrality,
}


def compute(g: Graph, measure: Measure | str) -> CentralityWeights:
    return _MEASURES[Measure(measure)](g)


def to_sampling_distribution(w: CentralityWeights, smoothing: float = 0.01) -> SamplingDistribution:
    """Centrality-proportional distribution with additive smoothing.

    ``smoothing`` is the smoothing mass expressed as a fraction of the total
    score mass, spread evenly over nodes, so the result is invariant to
    rescaling the scores.
    """
    if smoothing < 0:
        raise ValueError("smoothing must be nonnegative")
    s = w.scores
    n = s.size
    if n and np.ptp(s) == 0 and (s[0] > 0 or smoothing > 0):
        # exact for constant scores; keeps uniform runs bit-identical across modes
        return SamplingDistribution.uniform(n)
    total = s.sum()
    if total > 0:
        eps = smoothing * total / n
    elif smoothing > 0:
        eps = smoothing / n
    else:
        raise ValueError("all scores are zero and smoothing is 0")
    p = s + eps
    return SamplingDistribution(p / p.sum())


def to_loss_weights(w: CentralityWeights) -> np.ndarray:
    """Per-node weights with mean exactly scaled to 1."""
    total = w.scores.sum()
    if total <= 0:
        raise ValueError("loss weights need at least one positive score")
    if np.ptp(w.scores) == 0:
        return np.ones(w.scores.size)
    return w.scores * w.scores.size / total
