"""Skip-Gram negative-sampling SGD over streams of training pairs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable

import numba
import numpy as np

from .centrality import SamplingDistribution
from .sampler import Method, MethodConfig, Mode, PairBatch, TrainingPair, pair_batches


class TrainingError(FloatingPointError):
    def __init__(self, step: int):
        super().__init__(f"non-finite embedding value at step {step}")
        self.step = step


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 200
    total: int = 1_000_000
    batch: int = 100_000
    lr: float = 0.001
    negatives: int = 1
    seed: int = 0
    update: str = "per_example"  # or "minibatch": average gradients over each batch
    dtype: str = "float64"

    def __post_init__(self):
        if self.dim < 1 or self.lr <= 0:
            raise ValueError("dim must be >= 1 and lr > 0")
        if self.batch < 1 or self.total < 0 or self.total % self.batch:
            raise ValueError("batch must divide total")
        if self.negatives != 1:
            raise ValueError("only one negative per positive is supported")
        if self.update not in ("per_example", "minibatch"):
            raise ValueError(f"unknown update rule {self.update!r}")
        if self.dtype not in ("float64", "float32"):
            raise ValueError(f"unsupported dtype {self.dtype!r}")


@dataclass
class EmbeddingState:
    input: np.ndarray
    output: np.ndarray
    seed: int
    step: int = 0

    @property
    def dim(self) -> int:
        return self.input.shape[1]

    def copy(self) -> "EmbeddingState":
        return EmbeddingState(self.input.copy(), self.output.copy(), self.seed, self.step)


@dataclass
class Checkpoint:
    index: int
    examples: int
    embedding: np.ndarray
    mean_objective: float


@dataclass
class TrainResult:
    state: EmbeddingState
    checkpoints: list[Checkpoint] = field(default_factory=list)


def init_embeddings(n: int, cfg: TrainConfig) -> EmbeddingState:
    if n < 1:
        raise ValueError("need at least one node")
    rng = np.random.default_rng(cfg.seed)
    half = 0.5 / cfg.dim
    psi = rng.uniform(-half, half, size=(n, cfg.dim)).astype(cfg.dtype, copy=False)
    return EmbeddingState(psi, np.zeros((n, cfg.dim), dtype=cfg.dtype), cfg.seed)


def log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def pair_objective(state: EmbeddingState, pair: TrainingPair) -> float:
    """weight * log s(pos score) + log s(-neg score) for one pair."""
    src = state.input[pair.source]
    pos = state.output[pair.context] @ src
    neg = state.output[pair.negative] @ src
    if not (np.isfinite(pos) and np.isfinite(neg)):
        raise TrainingError(state.step)
    return float(pair.weight * log_sigmoid(pos) + log_sigmoid(-neg))


@numba.njit(cache=True)
def _sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


@numba.njit(cache=True)
def _log_sigmoid(x):
    if x >= 0:
        return -math.log1p(math.exp(-x))
    return x - math.log1p(math.exp(x))


@numba.njit(cache=True)
def _sgd_run(w_in, w_out, src, ctx, neg, weight, lr):
    """In-place per-pair updates. Returns (objective sum, index of first bad pair or -1)."""
    d = w_in.shape[1]
    total = 0.0
    for k in range(src.shape[0]):
        s = src[k]
        c = ctx[k]
        q = neg[k]
        pos = 0.0
        ng = 0.0
        for i in range(d):
            pos += w_out[c, i] * w_in[s, i]
            ng += w_out[q, i] * w_in[s, i]
        if not (math.isfinite(pos) and math.isfinite(ng)):
            return total, k
        total += weight[k] * _log_sigmoid(pos) + _log_sigmoid(-ng)
        g_pos = weight[k] * (1.0 - _sigmoid(pos))
        g_neg = -_sigmoid(ng)
        for i in range(d):
            x = w_in[s, i]
            oc = w_out[c, i]
            oq = w_out[q, i]
            w_in[s, i] = x + lr * (g_pos * oc + g_neg * oq)
            w_out[c, i] = oc + lr * g_pos * x
            # context first; reads the fresh value when q == c
            w_out[q, i] = w_out[q, i] + lr * g_neg * x
    return total, -1


def sgd_step(state: EmbeddingState, pair: TrainingPair, lr: float) -> EmbeddingState:
    """Apply one gradient-ascent update in place and return the state."""
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    arr = lambda v: np.array([v], dtype=np.int64)
    _, bad = _sgd_run(state.input, state.output, arr(pair.source), arr(pair.context),
                      arr(pair.negative), np.array([pair.weight], dtype=np.float64), lr)
    if bad >= 0:
        raise TrainingError(state.step)
    state.step += 1
    return state


def _chunk_gradients(state: EmbeddingState, batch: PairBatch):
    """Summed gradients of a chunk against the (unchanged) state, plus its objective sum."""
    w_in, w_out = state.input, state.output
    s_rows = w_in[batch.source]
    c_rows = w_out[batch.context]
    q_rows = w_out[batch.negative]
    pos = np.einsum("ij,ij->i", c_rows, s_rows)
    neg = np.einsum("ij,ij->i", q_rows, s_rows)
    if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(neg))):
        raise TrainingError(state.step + int(np.flatnonzero(~np.isfinite(pos + neg))[0]))
    g_pos = batch.weight * np.exp(log_sigmoid(-pos))
    g_neg = -np.exp(log_sigmoid(neg))
    grad_in = np.zeros_like(w_in)
    grad_out = np.zeros_like(w_out)
    np.add.at(grad_in, batch.source, g_pos[:, None] * c_rows + g_neg[:, None] * q_rows)
    np.add.at(grad_out, batch.context, g_pos[:, None] * s_rows)
    np.add.at(grad_out, batch.negative, g_neg[:, None] * s_rows)
    return grad_in, grad_out, float(np.sum(batch.weight * log_sigmoid(pos) + log_sigmoid(-neg)))


def train(n: int, batches: Iterable[PairBatch], cfg: TrainConfig, state: EmbeddingState | None = None) -> TrainResult:
    """Run SGD over ``cfg.total`` pairs, snapshotting the input matrix every ``cfg.batch`` pairs.

    ``batches`` may chunk the stream arbitrarily; chunks are re-cut at
    checkpoint boundaries.
    """
    if state is None:
        state = init_embeddings(n, cfg)
    result = TrainResult(state)
    objective = 0.0
    grads = None
    seen = 0
    for chunk in _recut(batches, cfg.batch):
        if seen >= cfg.total:
            break
        if cfg.update == "per_example":
            obj, bad = _sgd_run(state.input, state.output, chunk.source, chunk.context,
                                chunk.negative, chunk.weight, cfg.lr)
            if bad >= 0:
                raise TrainingError(state.step + bad)
        else:
            g_in, g_out, obj = _chunk_gradients(state, chunk)
            grads = (g_in, g_out) if grads is None else (grads[0] + g_in, grads[1] + g_out)
        objective += obj
        state.step += len(chunk)
        seen += len(chunk)
        if seen % cfg.batch == 0:
            if grads is not None:
                state.input += (cfg.lr / cfg.batch) * grads[0]
                state.output += (cfg.lr / cfg.batch) * grads[1]
                grads = None
            if not (np.all(np.isfinite(state.input)) and np.all(np.isfinite(state.output))):
                raise TrainingError(state.step)
            result.checkpoints.append(Checkpoint(
                index=len(result.checkpoints) + 1,
                examples=seen,
                embedding=state.input.copy(),
                mean_objective=objective / cfg.batch,
            ))
            objective = 0.0
    if seen < cfg.total:
        raise ValueError(f"pair stream ended after {seen} of {cfg.total} pairs")
    return result


def _recut(batches: Iterable[PairBatch], boundary: int):
    """Split chunks so that no chunk straddles a multiple of ``boundary``."""
    seen = 0
    for b in batches:
        start = 0
        while start < len(b):
            room = boundary - seen % boundary
            stop = min(len(b), start + room)
            yield PairBatch(b.source[start:stop], b.context[start:stop], b.negative[start:stop], b.weight[start:stop])
            seen += stop - start
            start = stop


def method_parts(method: str) -> list[Method]:
    """LINE trains first- and second-order halves separately; other methods are single."""
    if method == "line":
        return [Method.LINE1, Method.LINE2]
    return [Method(method)]


def train_embedding(
    g,
    dist: SamplingDistribution,
    method: str,
    cfg: TrainConfig,
    sampler_seed: int,
    mode: Mode = Mode.SAMPLE,
    loss_weights: np.ndarray | None = None,
    **method_options,
) -> list[Checkpoint]:
    """Train one method end to end and return its checkpoints.

    For LINE the two halves get ``dim / 2`` each and seeds offset by 0 and
    1; their checkpoints are concatenated column-wise.
    """
    parts = method_parts(method)
    if cfg.dim % len(parts):
        raise ValueError(f"dim {cfg.dim} is not divisible into {len(parts)} halves")
    runs = []
    for offset, part in enumerate(parts):
        part_cfg = replace(cfg, dim=cfg.dim // len(parts), seed=cfg.seed + offset)
        mcfg = MethodConfig(part, **method_options)
        rng = np.random.default_rng(sampler_seed + offset)
        batches = pair_batches(g, dist, mcfg, cfg.total, rng, mode, loss_weights)
        runs.append(train(g.n, batches, part_cfg).checkpoints)
    if len(runs) == 1:
        return runs[0]
    return [
        Checkpoint(c[0].index, c[0].examples, np.hstack([x.embedding for x in c]),
                   sum(x.mean_objective for x in c) / len(c))
        for c in zip(*runs)
    ]
