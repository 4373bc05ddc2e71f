import json
from pathlib import Path

import numpy as np
import pytest

from centrograph.cli import RunConfig, compare_runs, main, read_embeddings, run_experiment, write_embeddings


@pytest.fixture
def dataset(tmp_path):
    """Three planted communities in the .cites / .content file layout."""
    rng = np.random.default_rng(0)
    n, k = 60, 3
    y = np.arange(n) % k
    lines = set()
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < (0.3 if y[a] == y[b] else 0.01):
                lines.add(f"p{a} p{b}")
    edges = tmp_path / "toy.cites"
    edges.write_text("\n".join(sorted(lines)) + "\n")
    content = tmp_path / "toy.content"
    content.write_text("".join(f"p{v} 0 1 0 topic{y[v]}\n" for v in range(n)) + "p999 1 1 1 topic0\n")
    return edges, content


def args(edges, content, out, *extra):
    return ["train", "--edges", str(edges), "--labels", str(content), "--out", str(out),
            "--dim", "8", "--examples", "4000", "--batch", "1000", "--lr", "0.05",
            "--context", "3", "--walk-length", "5", "--seeds", "2", *extra]


def read_all(out):
    """Every output file's bytes; config.json minus its own output-directory field."""
    files = {p.name: p.read_bytes() for p in sorted(Path(out).iterdir())}
    if "config.json" in files:
        cfg = json.loads(files["config.json"])
        cfg.pop("out")
        files["config.json"] = cfg
    return files


def test_train_outputs(dataset, tmp_path, capsys):
    edges, content = dataset
    out = tmp_path / "run"
    assert main(args(edges, content, out, "--centrality", "bc")) == 0
    names = set(read_all(out))
    assert names == {"config.json", "centrality.tsv", "embeddings_final.tsv", "metrics.csv"} | {
        f"embeddings_ckpt_{k}.tsv" for k in range(1, 5)}
    ids, emb = read_embeddings(out / "embeddings_final.tsv")
    assert emb.shape == (61, 8) and ids[-1] == "p999"
    _, last = read_embeddings(out / "embeddings_ckpt_4.tsv")
    np.testing.assert_array_equal(emb, last)
    cent_lines = (out / "centrality.tsv").read_text().splitlines()
    assert len(cent_lines) == 61 and cent_lines[0].split("\t")[1] == "bc"
    metrics = (out / "metrics.csv").read_text().splitlines()
    assert metrics[0] == "checkpoint,examples,seed,micro_f1"
    assert "checkpoint,examples,mean,std" in metrics
    assert "checkpoint 4" in capsys.readouterr().out


def test_determinism_and_rerun_from_config(dataset, tmp_path):
    edges, content = dataset
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert main(args(edges, content, a, "--method", "node2vec", "--p", "0.5", "--q", "2")) == 0
    assert main(args(edges, content, b, "--method", "node2vec", "--p", "0.5", "--q", "2")) == 0
    assert read_all(a) == read_all(b)
    assert main(["train", "--config", str(a / "config.json"), "--out", str(c)]) == 0
    ra, rc = read_all(a), read_all(c)
    assert ra["metrics.csv"] == rc["metrics.csv"]
    assert ra["embeddings_final.tsv"] == rc["embeddings_final.tsv"]


def test_none_equals_uniform_sample_equals_uniform_weight(dataset, tmp_path):
    edges, content = dataset
    runs = {
        "none": ["--centrality", "none"],
        "uniform": ["--centrality", "uniform", "--mode", "sample"],
        "weight": ["--centrality", "uniform", "--mode", "weight"],
    }
    outs = {}
    for name, extra in runs.items():
        assert main(args(edges, content, tmp_path / name, *extra)) == 0
        outs[name] = read_all(tmp_path / name)
    assert outs["none"] == outs["uniform"]
    weight = dict(outs["weight"])
    sample = dict(outs["uniform"])
    assert weight.pop("config.json")["mode"] == "weight"
    sample.pop("config.json")
    assert weight == sample


def test_weight_mode_runs(dataset, tmp_path):
    edges, content = dataset
    assert main(args(edges, content, tmp_path / "w", "--centrality", "bc", "--mode", "weight")) == 0


@pytest.mark.parametrize("method", ["line", "nbne"])
def test_methods_run(dataset, tmp_path, method):
    edges, content = dataset
    assert main(args(edges, content, tmp_path / method, "--method", method, "--centrality", "degree")) == 0
    _, emb = read_embeddings(tmp_path / method / "embeddings_final.tsv")
    assert emb.shape == (61, 8)


def test_dump_pairs(dataset, tmp_path):
    edges, content = dataset
    out = tmp_path / "d"
    assert main(args(edges, content, out, "--examples", "1000", "--dump-pairs")) == 0
    rows = [l.split("\t") for l in (out / "pairs.tsv").read_text().splitlines()]
    assert len(rows) == 1000
    assert all(len(r) == 4 and r[0] != r[1] and float(r[3]) == 1.0 for r in rows)


def test_error_leaves_partial_files(dataset, tmp_path, capsys):
    edges, _ = dataset
    bad_labels = tmp_path / "bad.content"
    bad_labels.write_text("p0 topicA\np1\n")
    out = tmp_path / "err"
    assert main(args(edges, bad_labels, out)) == 1
    err = capsys.readouterr().err.strip()
    assert "\n" not in err and err.startswith("centrograph: error:")
    assert main(args(edges, dataset[1], out, "--method", "line", "--dim", "7")) == 1
    assert any(p.name.endswith(".partial") for p in out.iterdir())
    assert not (out / "metrics.csv").exists()


def test_zero_examples(dataset, tmp_path):
    edges, content = dataset
    out = tmp_path / "zero"
    assert main(args(edges, content, out, "--examples", "0")) == 0
    assert not list(out.glob("embeddings_ckpt_*"))
    assert (out / "metrics.csv").exists()


def test_config_round_trip():
    cfg = RunConfig(edges="x.cites", labels=None, method="line", centrality="load", mode="weight", p=0.25, seed=9)
    assert RunConfig.from_json(cfg.to_json()) == cfg
    with pytest.raises(ValueError):
        RunConfig.from_json('{"edges": "a", "bogus": 1}')
    with pytest.raises(ValueError):
        RunConfig(edges="a", method="sdne")


def test_centrality_subcommand(dataset, tmp_path):
    edges, _ = dataset
    out = tmp_path / "c.tsv"
    assert main(["centrality", "--edges", str(edges), "--centrality", "bc", "pr", "--out", str(out)]) == 0
    rows = [l.split("\t") for l in out.read_text().splitlines()]
    assert {r[1] for r in rows} == {"bc", "pr"}
    pr = sum(float(r[2]) for r in rows if r[1] == "pr")
    assert abs(pr - 1) < 1e-10


def test_evaluate_subcommand(dataset, tmp_path):
    edges, content = dataset
    run = tmp_path / "r"
    assert main(args(edges, content, run)) == 0
    out = tmp_path / "m.csv"
    ckpts = [str(run / f"embeddings_ckpt_{k}.tsv") for k in range(1, 5)]
    assert main(["evaluate", *ckpts, "--labels", str(content), "--batch", "1000", "--seeds", "2", "--out", str(out)]) == 0
    assert out.read_bytes() == (run / "metrics.csv").read_bytes()


def test_compare(dataset, tmp_path, capsys):
    edges, content = dataset
    for name, measure in [("base", "none"), ("bc", "bc")]:
        assert main(args(edges, content, tmp_path / name, "--centrality", measure)) == 0
    rows = compare_runs([tmp_path / "base" / "metrics.csv", tmp_path / "bc" / "metrics.csv"])
    assert [r["centrality"] for r in rows] == ["uniform", "bc"]
    assert all(v == 0 for k, v in rows[0].items() if k.startswith("delta_"))
    assert rows[0]["speedup"] is not None and rows[0]["speedup"] <= 1.0
    same = compare_runs([tmp_path / "bc" / "metrics.csv"] * 2)
    assert [r["final_mean"] for r in same] == [rows[1]["final_mean"]] * 2
    capsys.readouterr()
    assert main(["compare", str(tmp_path / "base" / "metrics.csv"), str(tmp_path / "bc" / "metrics.csv")]) == 0
    assert capsys.readouterr().out.startswith("method,centrality,final_mean")
    assert main(args(edges, content, tmp_path / "short", "--examples", "2000")) == 0
    with pytest.raises(ValueError, match="short"):
        compare_runs([tmp_path / "base" / "metrics.csv", tmp_path / "short" / "metrics.csv"])


def test_speedup_column(tmp_path):
    def write(path, means):
        path.parent.mkdir()
        lines = ["checkpoint,examples,seed,micro_f1"]
        lines += [f"{k + 1},{(k + 1) * 100},0,{m}" for k, m in enumerate(means)]
        path.write_text("\n".join(lines) + "\n")

    write(tmp_path / "base" / "metrics.csv", [0.2, 0.3, 0.4, 0.5])
    write(tmp_path / "fast" / "metrics.csv", [0.3, 0.5, 0.6, 0.6])
    rows = compare_runs([tmp_path / "base" / "metrics.csv", tmp_path / "fast" / "metrics.csv"])
    assert rows[1]["speedup"] == 0.5
    assert rows[1]["delta_400"] == pytest.approx(0.1)


def test_embedding_round_trip(tmp_path):
    emb = np.random.default_rng(1).normal(size=(3, 4)) * 1e-3
    write_embeddings(tmp_path / "e.tsv", ["a", "b", "c"], emb)
    ids, back = read_embeddings(tmp_path / "e.tsv")
    assert ids == ["a", "b", "c"]
    np.testing.assert_array_equal(back, emb)
