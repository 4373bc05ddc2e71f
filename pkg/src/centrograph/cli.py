"""Command-line entry point: ``centrograph {train,centrality,evaluate,compare}``.

Every random stream in a run comes from the master seed:
embedding init uses ``seed``, the pair sampler ``seed + 1``, and
evaluation split ``i`` uses ``seed + 100 + i``. LINE's second half shifts
its init and sampler seeds by one more.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import centrality as cent
from .evaluator import EvalReport, SplitSpec, learning_curve
from .graph import load_edge_list
from .sampler import MethodConfig, Mode, pair_batches
from .trainer import TrainConfig, init_embeddings, method_parts, train_embedding

METHODS = ("deepwalk", "node2vec", "line", "nbne")
CENTRALITIES = ("none", "uniform", "degree", "bc", "clos", "pr", "load")
BASELINES = ("none", "uniform")


@dataclass(frozen=True)
class RunConfig:
    edges: str
    labels: str | None = None
    method: str = "deepwalk"
    centrality: str = "none"
    mode: str = "sample"
    dim: int = 200
    examples: int = 1_000_000
    batch: int = 100_000
    lr: float = 0.001
    context: int = 30
    walk_length: int = 40
    p: float = 1.0
    q: float = 1.0
    smoothing: float = 0.01
    train_frac: float = 0.5
    stratified: bool = True
    seeds: int = 4
    reg: float = 1.0
    seed: int = 0
    update: str = "per_example"
    negatives: str = "uniform"
    dtype: str = "float64"
    out: str = "run"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.centrality not in CENTRALITIES:
            raise ValueError(f"unknown centrality {self.centrality!r}")
        Mode(self.mode)

    def resolved(self) -> "RunConfig":
        """Canonical form: the ``none`` baseline is uniform sampling."""
        if self.centrality == "none":
            return RunConfig(**{**asdict(self), "centrality": "uniform"})
        return self

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        data = json.loads(text)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def train_config(self) -> TrainConfig:
        return TrainConfig(dim=self.dim, total=self.examples, batch=self.batch, lr=self.lr,
                           seed=self.seed, update=self.update, dtype=self.dtype)

    def method_options(self) -> dict:
        return dict(context=self.context, walk_length=self.walk_length, p=self.p, q=self.q,
                    negatives=self.negatives)


def write_embeddings(path, ids, emb) -> None:
    with open(path, "w") as fh:
        fh.write(f"{emb.shape[0]} {emb.shape[1]}\n")
        for node_id, row in zip(ids, emb.tolist()):
            fh.write(node_id + "\t" + "\t".join(map(repr, row)) + "\n")


def read_embeddings(path) -> tuple[list[str], np.ndarray]:
    with open(path) as fh:
        n, d = map(int, fh.readline().split())
        ids, rows = [], []
        for line in fh:
            toks = line.split()
            if len(toks) != d + 1:
                raise ValueError(f"{path}: expected {d + 1} fields, got {len(toks)}")
            ids.append(toks[0])
            rows.append([float(t) for t in toks[1:]])
    if len(ids) != n:
        raise ValueError(f"{path}: header says {n} rows, found {len(ids)}")
    return ids, np.array(rows, dtype=np.float64).reshape(n, d)


def write_centrality(path_or_fh, ids, weights: cent.CentralityWeights) -> None:
    own = isinstance(path_or_fh, (str, Path))
    fh = open(path_or_fh, "w") if own else path_or_fh
    try:
        for node_id, score in zip(ids, weights.scores.tolist()):
            fh.write(f"{node_id}\t{weights.measure.value}\t{score!r}\n")
    finally:
        if own:
            fh.close()


def sampling_setup(g, weights: cent.CentralityWeights, mode: Mode, smoothing: float):
    """Source distribution and per-node loss weights for a run."""
    smoothed = cent.to_sampling_distribution(weights, smoothing)
    if mode is Mode.SAMPLE:
        return smoothed, None
    # weight mode: uniform sources, lambda proportional to the same smoothed scores
    lam = cent.to_loss_weights(cent.CentralityWeights(weights.measure, smoothed.probs))
    return cent.SamplingDistribution.uniform(g.n), lam


class _Outputs:
    """Write files under a ``.partial`` name; rename them all only on success."""

    def __init__(self, root: Path):
        self.root = root
        self.pending: list[Path] = []

    def path(self, name: str) -> Path:
        p = self.root / (name + ".partial")
        self.pending.append(p)
        return p

    def commit(self) -> None:
        for p in self.pending:
            p.replace(p.with_suffix(""))
        self.pending.clear()


def run_experiment(cfg: RunConfig, dump_pairs: bool = False) -> EvalReport:
    cfg = cfg.resolved()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    files = _Outputs(out)
    g, labels = load_edge_list(cfg.edges, cfg.labels)
    with open(files.path("config.json"), "w") as fh:
        fh.write(cfg.to_json())

    weights = cent.compute(g, cfg.centrality)
    write_centrality(files.path("centrality.tsv"), g.ids, weights)
    mode = Mode(cfg.mode)
    dist, lam = sampling_setup(g, weights, mode, cfg.smoothing)
    tcfg = cfg.train_config()
    if dump_pairs:
        _dump_pairs(files.path("pairs.tsv"), g, dist, cfg, mode, lam)

    checkpoints = train_embedding(g, dist, cfg.method, tcfg, sampler_seed=cfg.seed + 1, mode=mode,
                                  loss_weights=lam, **cfg.method_options())
    for ck in checkpoints:
        write_embeddings(files.path(f"embeddings_ckpt_{ck.index}.tsv"), g.ids, ck.embedding)
    if checkpoints:
        final = checkpoints[-1].embedding
    else:
        parts = method_parts(cfg.method)
        final = np.hstack([init_embeddings(g.n, TrainConfig(dim=tcfg.dim // len(parts), total=0, batch=1,
                                                            seed=tcfg.seed + k, dtype=tcfg.dtype)).input
                           for k in range(len(parts))])
    write_embeddings(files.path("embeddings_final.tsv"), g.ids, final)

    report = EvalReport()
    if labels.labels:
        curve = [(ck.examples, ck.embedding) for ck in checkpoints] or [(0, final)]
        spec = SplitSpec(cfg.train_frac, cfg.seed + 100, cfg.stratified)
        report = learning_curve(curve, labels, spec, n_seeds=cfg.seeds, reg=cfg.reg)
        report.write_csv(files.path("metrics.csv"))
    files.commit()
    return report


def _dump_pairs(path, g, dist, cfg: RunConfig, mode, lam) -> None:
    with open(path, "w") as fh:
        for offset, part in enumerate(method_parts(cfg.method)):
            rng = np.random.default_rng(cfg.seed + 1 + offset)
            mcfg = MethodConfig(part, **cfg.method_options())
            for b in pair_batches(g, dist, mcfg, cfg.examples, rng, mode, lam):
                for s, c, q, w in zip(b.source.tolist(), b.context.tolist(), b.negative.tolist(), b.weight.tolist()):
                    fh.write(f"{s}\t{c}\t{q}\t{w!r}\n")


def _run_label(metrics_path: Path) -> tuple[str, str]:
    config = metrics_path.parent / "config.json"
    if config.exists():
        cfg = RunConfig.from_json(config.read_text())
        return cfg.method, cfg.centrality
    return "?", metrics_path.stem


def compare_runs(paths) -> list[dict]:
    """Final-checkpoint table plus per-checkpoint deltas against each method's baseline.

    ``speedup`` is the fraction of the baseline's examples at which a run
    first reaches the baseline's final mean micro-F1.
    """
    paths = [Path(p) for p in paths]
    if len(paths) < 2:
        raise ValueError("compare needs at least two metrics files")
    runs = []
    for p in paths:
        agg = EvalReport.read_csv(p).aggregate()
        method, measure = _run_label(p)
        runs.append(dict(path=p, method=method, centrality=measure, agg=agg))
    grid = [(ck, ex) for ck, ex, _, _ in runs[0]["agg"]]
    bad = [str(r["path"]) for r in runs if [(ck, ex) for ck, ex, _, _ in r["agg"]] != grid]
    if bad:
        raise ValueError("checkpoint grids differ from " + str(paths[0]) + ": " + ", ".join(bad))
    rows = []
    for r in runs:
        base = next((b for b in runs if b["method"] == r["method"] and b["centrality"] in BASELINES), runs[0])
        base_final = base["agg"][-1][2]
        reached = next((ex for _, ex, mean, _ in r["agg"] if mean >= base_final), None)
        row = dict(method=r["method"], centrality=r["centrality"], final_mean=r["agg"][-1][2],
                   final_std=r["agg"][-1][3], speedup=None if reached is None else reached / grid[-1][1])
        for (_, ex, mean, _), (_, _, bmean, _) in zip(r["agg"], base["agg"]):
            row[f"delta_{ex}"] = mean - bmean
        row["path"] = str(r["path"])
        rows.append(row)
    return rows


def _write_table(rows, fh) -> None:
    w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: ("" if v is None else f"{v:.6f}" if isinstance(v, float) else v) for k, v in row.items()})


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    d = RunConfig(edges="")
    p.add_argument("--config", help="rerun from a config.json (other run flags are ignored, except --out)")
    p.add_argument("--edges")
    p.add_argument("--labels")
    p.add_argument("--method", choices=METHODS, default=d.method)
    p.add_argument("--centrality", choices=CENTRALITIES, default=d.centrality)
    p.add_argument("--mode", choices=[m.value for m in Mode], default=d.mode)
    p.add_argument("--dim", type=int, default=d.dim)
    p.add_argument("--examples", type=int, default=d.examples)
    p.add_argument("--batch", type=int, default=d.batch)
    p.add_argument("--lr", type=float, default=d.lr)
    p.add_argument("--context", type=int, default=d.context)
    p.add_argument("--walk-length", type=int, default=d.walk_length)
    p.add_argument("--p", type=float, default=d.p)
    p.add_argument("--q", type=float, default=d.q)
    p.add_argument("--smoothing", type=float, default=d.smoothing)
    p.add_argument("--train-frac", type=float, default=d.train_frac)
    p.add_argument("--seeds", type=int, default=d.seeds, help="number of evaluation splits")
    p.add_argument("--seed", type=int, default=d.seed, help="master seed")
    p.add_argument("--reg", type=float, default=d.reg, help="inverse L2 strength of the classifier")
    p.add_argument("--update", choices=["per_example", "minibatch"], default=d.update)
    p.add_argument("--negatives", choices=["uniform", "unigram"], default=d.negatives)
    p.add_argument("--dtype", choices=["float64", "float32"], default=d.dtype)
    p.add_argument("--out", default=None)
    p.add_argument("--dump-pairs", action="store_true", help="also write pairs.tsv")


def _config_from_args(args) -> RunConfig:
    if args.config:
        cfg = RunConfig.from_json(Path(args.config).read_text())
        return RunConfig(**{**asdict(cfg), "out": args.out}) if args.out else cfg
    if not args.edges:
        raise ValueError("--edges is required (or --config)")
    return RunConfig(
        edges=args.edges, labels=args.labels, method=args.method, centrality=args.centrality,
        mode=args.mode, dim=args.dim, examples=args.examples, batch=args.batch, lr=args.lr,
        context=args.context, walk_length=args.walk_length, p=args.p, q=args.q,
        smoothing=args.smoothing, train_frac=args.train_frac, seeds=args.seeds, reg=args.reg,
        seed=args.seed, update=args.update, negatives=args.negatives, dtype=args.dtype,
        out=args.out or "run",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="centrograph", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    _add_run_flags(sub.add_parser("train", help="train embeddings and evaluate every checkpoint"))

    c = sub.add_parser("centrality", help="write node centralities as TSV")
    c.add_argument("--edges", required=True)
    c.add_argument("--centrality", choices=CENTRALITIES[1:], nargs="+", default=["degree", "bc", "clos", "pr", "load"])
    c.add_argument("--out", help="output file (default: stdout)")

    e = sub.add_parser("evaluate", help="micro-F1 learning curve for existing embedding files")
    e.add_argument("embeddings", nargs="+", help="checkpoint files in training order")
    e.add_argument("--labels", required=True)
    e.add_argument("--batch", type=int, default=100_000, help="examples per checkpoint")
    e.add_argument("--train-frac", type=float, default=0.5)
    e.add_argument("--seeds", type=int, default=4)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--reg", type=float, default=1.0)
    e.add_argument("--out", default="metrics.csv")

    k = sub.add_parser("compare", help="tabulate several metrics.csv files")
    k.add_argument("metrics", nargs="+")
    k.add_argument("--out", help="also write the table here")
    return parser


def _evaluate(args) -> None:
    from .graph import LabeledNodes

    curve, ids = [], None
    for k, path in enumerate(args.embeddings, 1):
        file_ids, emb = read_embeddings(path)
        if ids is not None and file_ids != ids:
            raise ValueError(f"{path}: node ids differ from {args.embeddings[0]}")
        ids = file_ids
        curve.append((k * args.batch, emb))
    index = {node_id: i for i, node_id in enumerate(ids)}
    raw = {}
    with open(args.labels) as fh:
        for lineno, line in enumerate(fh, 1):
            toks = line.split()
            if not toks or toks[0].startswith("#"):
                continue
            if toks[0] not in index:
                raise ValueError(f"{args.labels}:{lineno}: node {toks[0]} has no embedding")
            raw[index[toks[0]]] = toks[-1]
    names = tuple(sorted(set(raw.values())))
    labels = LabeledNodes({v: names.index(s) for v, s in raw.items()}, names)
    spec = SplitSpec(args.train_frac, args.seed + 100)
    learning_curve(curve, labels, spec, n_seeds=args.seeds, reg=args.reg).write_csv(args.out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            report = run_experiment(_config_from_args(args), dump_pairs=args.dump_pairs)
            for ck, ex, mean, std in report.aggregate():
                print(f"checkpoint {ck}\texamples {ex}\tmicro-F1 {mean:.4f} +- {std:.4f}")
        elif args.command == "centrality":
            g, _ = load_edge_list(args.edges)
            fh = open(args.out, "w") if args.out else sys.stdout
            try:
                for name in args.centrality:
                    write_centrality(fh, g.ids, cent.compute(g, name))
            finally:
                if args.out:
                    fh.close()
        elif args.command == "evaluate":
            _evaluate(args)
        elif args.command == "compare":
            rows = compare_runs(args.metrics)
            _write_table(rows, sys.stdout)
            if args.out:
                with open(args.out, "w") as fh:
                    _write_table(rows, fh)
    except (OSError, ValueError, RuntimeError, FloatingPointError) as exc:
        print(f"centrograph: error: {exc}".replace("\n", " "), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
