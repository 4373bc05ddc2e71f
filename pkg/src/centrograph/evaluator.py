"""Node-classification evaluation of embedding checkpoints."""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .graph import LabeledNodes


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.5
    split_seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie in (0, 1)")


def stratified_split(labels: LabeledNodes, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Split labeled nodes into sorted (train, test) index arrays.

    Stratified splits take ``floor(fraction * size)`` of every class
    (at least 1, at most size - 1) after a seeded shuffle.
    """
    nodes, y = labels.arrays()
    rng = np.random.default_rng(spec.split_seed)
    if not spec.stratified:
        order = rng.permutation(nodes.size)
        k = int(np.floor(spec.train_fraction * nodes.size))
        return np.sort(nodes[order[:k]]), np.sort(nodes[order[k:]])
    train, test = [], []
    for c in range(labels.n_classes):
        members = nodes[y == c]
        if members.size < 2:
            raise ValueError(f"class {labels.class_names[c]!r} has fewer than 2 labeled nodes")
        members = members[rng.permutation(members.size)]
        k = min(max(int(np.floor(spec.train_fraction * members.size)), 1), members.size - 1)
        train.append(members[:k])
        test.append(members[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


@dataclass
class Classifier:
    weights: np.ndarray  # (features, classes)
    bias: np.ndarray
    classes: np.ndarray
    loss: float
    iterations: int
    converged: bool

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        return X @ self.weights + self.bias

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.classes[np.argmax(self.decision_function(X), axis=1)]


def softmax_loss_grad(W, b, X, Y, reg):
    """Summed cross-entropy plus ||W||^2 / (2 reg), with gradients in W and b."""
    Z = X @ W + b
    lse = logsumexp(Z, axis=1, keepdims=True)
    loss = float(np.sum(lse) - np.sum(Z * Y) + 0.5 / reg * np.sum(W * W))
    R = np.exp(Z - lse) - Y
    return loss, X.T @ R + W / reg, R.sum(axis=0)


def train_classifier(
    X: np.ndarray,
    y: np.ndarray,
    reg: float = 1.0,
    tol: float = 1e-6,
    max_iter: int = 1000,
) -> Classifier:
    """Multinomial logistic regression by gradient descent with backtracking.

    The bias is not penalized. Stops when the largest gradient entry drops
    below ``tol`` or after ``max_iter`` iterations; either way the best
    iterate is returned.
    """
    X = np.asarray(X, dtype=np.float64)
    classes, yi = np.unique(y, return_inverse=True)
    if classes.size < 2:
        raise ValueError("need at least two classes in the training labels")
    Y = np.eye(classes.size)[yi]
    W = np.zeros((X.shape[1], classes.size))
    b = np.zeros(classes.size)
    loss, gW, gb = softmax_loss_grad(W, b, X, Y, reg)
    step = 1.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        gnorm = max(np.abs(gW).max(initial=0.0), np.abs(gb).max())
        if gnorm < tol:
            converged = True
            break
        sq = np.sum(gW * gW) + np.sum(gb * gb)
        step *= 2.0
        while True:
            W_new, b_new = W - step * gW, b - step * gb
            new = softmax_loss_grad(W_new, b_new, X, Y, reg)
            if new[0] <= loss - 0.5 * step * sq or step < 1e-20:
                break
            step *= 0.5
        if new[0] > loss:
            break
        W, b = W_new, b_new
        loss, gW, gb = new
    else:
        gnorm = max(np.abs(gW).max(initial=0.0), np.abs(gb).max())
        converged = gnorm < tol
    return Classifier(W, b, classes, loss, it, converged)


def micro_f1(predicted: Sequence, actual: Sequence) -> float:
    predicted = np.asarray(predicted)
    actual = np.asarray(actual)
    if predicted.shape != actual.shape or predicted.ndim != 1:
        raise ValueError("predicted and actual must be 1-D and of equal length")
    if predicted.size == 0:
        raise ValueError("need at least one prediction")
    tp = fp = fn = 0
    for c in np.union1d(predicted, actual):
        p, a = predicted == c, actual == c
        tp += int(np.sum(p & a))
        fp += int(np.sum(p & ~a))
        fn += int(np.sum(~p & a))
    return 2 * tp / (2 * tp + fp + fn)


@dataclass(frozen=True)
class EvalRecord:
    checkpoint: int
    examples: int
    seed: int
    micro_f1: float


@dataclass
class EvalReport:
    records: list[EvalRecord] = field(default_factory=list)

    def aggregate(self) -> list[tuple[int, int, float, float]]:
        rows = []
        for ck in sorted({r.checkpoint for r in self.records}):
            group = [r for r in self.records if r.checkpoint == ck]
            vals = np.array([r.micro_f1 for r in group])
            std = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
            rows.append((ck, group[0].examples, float(vals.mean()), std))
        return rows

    def final_mean(self) -> float:
        return self.aggregate()[-1][2]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["checkpoint", "examples", "seed", "micro_f1"])
            for r in self.records:
                w.writerow([r.checkpoint, r.examples, r.seed, repr(r.micro_f1)])
            w.writerow(["checkpoint", "examples", "mean", "std"])
            for ck, ex, mean, std in self.aggregate():
                w.writerow([ck, ex, repr(mean), repr(std)])

    @classmethod
    def read_csv(cls, path) -> "EvalReport":
        report = cls()
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0] != ["checkpoint", "examples", "seed", "micro_f1"]:
            raise ValueError(f"{path}: not a metrics file")
        for row in rows[1:]:
            if row == ["checkpoint", "examples", "mean", "std"]:
                break
            report.records.append(EvalRecord(int(row[0]), int(row[1]), int(row[2]), float(row[3])))
        return report


def _threads() -> int:
    return max(1, int(os.environ.get("CENTROGRAPH_THREADS", os.cpu_count() or 1)))


def learning_curve(
    checkpoints: Sequence[tuple[int, np.ndarray]],
    labels: LabeledNodes,
    spec: SplitSpec = SplitSpec(),
    n_seeds: int = 4,
    reg: float = 1.0,
) -> EvalReport:
    """Micro-F1 of a classifier fit on each checkpoint, for ``n_seeds`` splits.

    ``checkpoints`` holds (examples consumed, embedding matrix) pairs in
    training order. Split ``i`` uses seed ``spec.split_seed + i`` for every
    checkpoint, so curves are comparable across checkpoints and runs.
    """
    if not checkpoints:
        raise ValueError("need at least one checkpoint")
    examples = [ex for ex, _ in checkpoints]
    if any(b <= a for a, b in zip(examples, examples[1:])):
        raise ValueError("examples consumed must increase across checkpoints")
    nodes, y = labels.arrays()
    label_of = dict(zip(nodes.tolist(), y.tolist()))
    splits = []
    for i in range(n_seeds):
        seed = spec.split_seed + i
        tr, te = stratified_split(labels, SplitSpec(spec.train_fraction, seed, spec.stratified))
        splits.append((seed, tr, te, np.array([label_of[v] for v in tr]), np.array([label_of[v] for v in te])))

    def score(job):
        k, s = job
        emb = checkpoints[k][1]
        seed, tr, te, ytr, yte = splits[s]
        clf = train_classifier(emb[tr], ytr, reg=reg)
        return EvalRecord(k + 1, examples[k], seed, micro_f1(clf.predict(emb[te]), yte))

    jobs = [(k, s) for k in range(len(checkpoints)) for s in range(n_seeds)]
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        records = list(pool.map(score, jobs))
    return EvalReport(records)
