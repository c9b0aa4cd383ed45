import hashlib
import json

import numpy as np
import pytest

from lthkit import cli
from lthkit.adapt import GeneratedQuerySet, read_triplets, write_ce_scores, write_generated
from lthkit.core import EmbeddingMatrix, IndexManifest, RunResult, read_embeddings, read_qrels, write_embeddings
from lthkit.evalbench import ndcg_at_k


def run(argv, capsys=None):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr() if capsys else None
    return code, out


@pytest.fixture
def demo(tmp, monkeypatch):
    monkeypatch.chdir(tmp)
    assert cli.main(["synth", "--out", "d", "--n-docs", "300", "--n-queries", "40", "--dim", "32"]) == 0
    return tmp / "d"


def _error_line(err: str) -> dict:
    lines = [line for line in err.splitlines() if line.strip()]
    assert len(lines) == 1
    return json.loads(lines[0])


def test_help_and_usage_errors(capsys):
    assert run(["--help"])[0] == 0
    capsys.readouterr()
    code, out = run(["frobnicate"], capsys)
    assert code == 2
    assert _error_line(out.err)["error"] == "UsageError"
    code, out = run(["search", "--mode", "pq"], capsys)
    assert code == 2


def test_data_error_exit_3(tmp, capsys):
    (tmp / "bad.emb").write_bytes(b"NOPE....")
    code, out = run(["fit-pq", "--train", tmp / "bad.emb", "--out", tmp / "x.pqx"], capsys)
    assert code == 3
    assert _error_line(out.err)["error"] == "MalformedHeader"


def test_internal_error_exit_4(tmp, capsys, monkeypatch):
    def boom(args):
        raise RuntimeError("boom")

    monkeypatch.setattr(cli, "cmd_eval", boom)
    code, out = run(["eval", "--run", "r", "--qrels", "q"], capsys)
    assert code == 4
    assert _error_line(out.err) == {"error": "RuntimeError", "exit": 4, "message": "boom"}


def test_config_is_echoed(demo, capsys):
    capsys.readouterr()
    code, out = run(["fit-pq", "--train", "d/corpus.emb", "--M", "8", "--K", "16", "--out", "d/cb.pqx"], capsys)
    assert code == 0
    echo = json.loads(out.out.splitlines()[0])
    assert echo["command"] == "fit-pq"
    assert echo["config"]["M"] == 8 and echo["config"]["K"] == 16 and echo["config"]["iters"] == 25


def _pq_pipeline(d="d", tag="run", M=8, K=16):
    assert cli.main(["fit-pq", "--train", f"{d}/corpus.emb", "--M", str(M), "--K", str(K), "--out", f"{d}/cb.pqx"]) == 0
    assert cli.main(["pq-index", "--codebook", f"{d}/cb.pqx", "--input", f"{d}/corpus.emb", "--out", f"{d}/pq.idx"]) == 0
    assert cli.main(["search", "--mode", "pq", "--index", f"{d}/pq.idx", "--queries", f"{d}/queries.emb", "--k", "10",
                     "--out", f"{d}/{tag}.trec"]) == 0
    assert cli.main(["eval", "--run", f"{d}/{tag}.trec", "--qrels", f"{d}/qrels.tsv", "--metric", "ndcg", "--out", f"{d}/{tag}.json"]) == 0


def test_demo_pipeline_beats_random(tmp, monkeypatch):
    monkeypatch.chdir(tmp)
    assert cli.main(["synth", "--out", "full"]) == 0  # default 1,000-passage corpus
    demo = tmp / "full"
    assert len(read_embeddings(demo / "corpus.emb").ids) == 1000
    _pq_pipeline("full", M=16, K=64)
    got = json.loads((demo / "run.json").read_text())["ndcg@10"]
    # random-permutation baseline over the same corpus
    corpus = read_embeddings(demo / "corpus.emb")
    queries = read_embeddings(demo / "queries.emb")
    rng = np.random.default_rng(0)
    rand = RunResult()
    for q in queries.ids:
        perm = rng.permutation(corpus.n)[:10]
        rand.add(q, [(corpus.ids[i], float(10 - r)) for r, i in enumerate(perm)])
    base = ndcg_at_k(rand, read_qrels(demo / "qrels.tsv"), 10)[1]
    assert got >= base
    assert got > 0.5


def _digest(root):
    return {p.relative_to(root).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(root.rglob("*")) if p.is_file()}


def test_identical_invocations_give_identical_artifacts(demo):
    _pq_pipeline()
    assert cli.main(["hash-index", "--input", "d/corpus.emb", "--out", "d/bin.idx"]) == 0
    assert cli.main(["train", "--loss", "jpq", "--queries", "d/queries.emb", "--qrels", "d/qrels.tsv", "--index", "d/pq.idx",
                     "--steps", "5", "--batch-size", "8", "--out", "d/jpq.npz", "--out-index", "d/jpq.idx", "--trace", "d/t.csv"]) == 0
    first = _digest(demo)
    _pq_pipeline()
    assert cli.main(["hash-index", "--input", "d/corpus.emb", "--out", "d/bin.idx"]) == 0
    assert cli.main(["train", "--loss", "jpq", "--queries", "d/queries.emb", "--qrels", "d/qrels.tsv", "--index", "d/pq.idx",
                     "--steps", "5", "--batch-size", "8", "--out", "d/jpq.npz", "--out-index", "d/jpq.idx", "--trace", "d/t.csv"]) == 0
    assert _digest(demo) == first


def test_every_artifact_has_a_manifest(demo):
    _pq_pipeline()
    files = [p for p in demo.iterdir() if not p.name.endswith(".manifest.json")]
    for f in files:
        body = json.loads((demo / (f.name + ".manifest.json")).read_text())
        assert body["command"] and body["config"]


def test_binary_search_and_bench_rows(demo, capsys):
    assert cli.main(["hash-index", "--input", "d/corpus.emb", "--out", "d/bin.idx"]) == 0
    assert cli.main(["quantize", "--input", "d/corpus.emb", "--mode", "f32", "--out", "d/flat.idx"]) == 0
    assert cli.main(["search", "--mode", "binary", "--k", "10", "--k1", "1000", "--index", "d/bin.idx",
                     "--queries", "d/queries.emb", "--out", "d/b.trec"]) == 0
    lines = (demo / "b.trec").read_text().splitlines()
    assert len(lines) == 40 * 10 and lines[0].split()[1] == "Q0"
    capsys.readouterr()
    assert cli.main(["bench", "--index", "d/flat.idx", "--index", "d/bin.idx", "--queries", "d/queries.emb", "--out", "d/bench.json"]) == 0
    rows = json.loads((demo / "bench.json").read_text())
    assert [r["kind"] for r in rows] == ["flat-f32", "binary"]
    assert all(r["mean_ms"] > 0 for r in rows)
    assert IndexManifest.load(demo / "bin.idx").index_kind == "binary"


def test_pca_and_fp_modes(demo):
    assert cli.main(["fit-pca", "--train", "d/corpus.emb", "--target-dim", "8", "--out", "d/m.pca"]) == 0
    assert cli.main(["quantize", "--input", "d/corpus.emb", "--mode", "pca", "--pca", "d/m.pca", "--out", "d/pca.idx"]) == 0
    assert cli.main(["search", "--mode", "pca", "--index", "d/pca.idx", "--queries", "d/queries.emb", "--out", "d/p.trec"]) == 0
    for mode in ("fp16", "fp8"):
        assert cli.main(["quantize", "--input", "d/corpus.emb", "--mode", mode, "--out", f"d/{mode}.idx"]) == 0
        assert cli.main(["search", "--mode", "flat", "--index", f"d/{mode}.idx", "--queries", "d/queries.emb", "--out", f"d/{mode}.trec"]) == 0
    assert cli.main(["search", "--mode", "pq", "--index", "d/fp8.idx", "--queries", "d/queries.emb", "--out", "d/x.trec"]) == 2


def test_train_bpr_and_search_with_head(demo):
    assert cli.main(["train", "--loss", "bpr", "--queries", "d/queries.emb", "--corpus", "d/corpus.emb", "--qrels", "d/qrels.tsv",
                     "--steps", "20", "--out", "d/bpr.npz", "--trace", "d/bpr.csv"]) == 0
    assert (demo / "bpr.csv").read_text().startswith("step,loss,beta,infonce,rank")
    assert cli.main(["quantize", "--input", "d/corpus.emb", "--out", "d/flat.idx"]) == 0
    assert cli.main(["search", "--mode", "flat", "--index", "d/flat.idx", "--head", "d/bpr.npz", "--queries", "d/queries.emb", "--out", "d/h.trec"]) == 0


def test_gpl_flow_end_to_end(demo, capsys):
    assert cli.main(["build-genq", "--corpus", "d/corpus.jsonl", "--q-per-passage", "1", "--out", "d/gen.jsonl"]) == 0
    corpus = read_embeddings(demo / "corpus.emb")
    # stand-in query encoder: each generated query is embedded at its passage plus noise
    rng = np.random.default_rng(0)
    gen = GeneratedQuerySet({p: ["q"] for p in corpus.ids[:60]})
    write_generated(gen, demo / "gen.jsonl")
    qids = list(gen.query_ids())
    qx = np.stack([corpus.row(gen.query_ids()[q][0]) for q in qids]) + 0.1 * rng.standard_normal((60, corpus.d))
    write_embeddings(EmbeddingMatrix(qids, qx.astype(np.float32)), demo / "gq.emb")
    assert cli.main(["fit-pq", "--train", "d/corpus.emb", "--M", "8", "--K", "16", "--out", "d/cb.pqx"]) == 0
    assert cli.main(["pq-index", "--codebook", "d/cb.pqx", "--input", "d/corpus.emb", "--out", "d/pq.idx"]) == 0
    assert cli.main(["mine-negatives", "--index", "d/pq.idx", "--queries", "d/gq.emb", "--generated", "d/gen.jsonl",
                     "--depth", "20", "--samples", "2", "--out", "d/negs.jsonl"]) == 0
    scores = {}
    for q, x in zip(qids, qx):
        for pid in corpus.ids:
            scores[(q, pid)] = float(x @ corpus.row(pid))
    write_ce_scores(scores, demo / "ce.tsv")
    capsys.readouterr()
    assert cli.main(["build-gpl", "--generated", "d/gen.jsonl", "--negatives", "d/negs.jsonl", "--ce-scores", "d/ce.tsv", "--out", "d/t.jsonl"]) == 0
    report = json.loads(capsys.readouterr().out.splitlines()[-1])
    assert report == {"emitted": 120, "missing_score": 0, "invalid": 0}
    trips = read_triplets(demo / "t.jsonl")
    assert all(t.margin == t.ce_pos - t.ce_neg and t.pos_id != t.neg_id for t in trips)
    assert cli.main(["train", "--loss", "margin-mse", "--queries", "d/gq.emb", "--triplets", "d/t.jsonl", "--index", "d/pq.idx",
                     "--steps", "30", "--lr", "0.05", "--batch-size", "20", "--out", "d/mm.npz", "--trace", "d/mm.csv"]) == 0
    losses = [float(line.split(",")[1]) for line in (demo / "mm.csv").read_text().splitlines()[1:]]
    assert np.mean(losses[-6:]) < np.mean(losses[:6])
    # missing teacher scores fail loudly unless --lenient
    write_ce_scores({k: v for i, (k, v) in enumerate(scores.items()) if i % 2}, demo / "ce_half.tsv")
    assert cli.main(["build-gpl", "--generated", "d/gen.jsonl", "--negatives", "d/negs.jsonl", "--ce-scores", "d/ce_half.tsv", "--out", "d/t2.jsonl"]) == 3
    assert cli.main(["build-gpl", "--generated", "d/gen.jsonl", "--negatives", "d/negs.jsonl", "--ce-scores", "d/ce_half.tsv",
                     "--lenient", "--out", "d/t2.jsonl"]) == 0
