"""``lthkit`` command line: build, search, train, mine, label, evaluate and benchmark.

Every command echoes its resolved configuration as one JSON line on stdout
and writes a ``<artifact>.manifest.json`` beside each file it produces.
Failures print a single JSON line on stderr.  Exit codes: 0 ok, 2 usage,
3 data error, 4 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from lthkit import adapt, evalbench
from lthkit.binhash import BinaryIndex, hash_encode, load_binary, save_binary
from lthkit.compress import (
    PcaIndex,
    PqCodebook,
    PqIndex,
    apply_pca,
    fit_pca,
    fit_pq,
    load_flat_index,
    load_pca,
    load_pq,
    pq_encode,
    save_pca,
    save_pq,
    write_flat_index,
)
from lthkit.core import (
    EmbeddingMatrix,
    IndexManifest,
    Qrels,
    RunResult,
    make_rng,
    manifest_path,
    read_embeddings,
    read_jsonl,
    read_corpus,
    read_qrels,
    read_run,
    write_corpus,
    write_embeddings,
    write_jsonl,
    write_qrels,
    write_run,
)
from lthkit.errors import DimensionMismatch, ToolkitError, UnknownPassageId
from lthkit.lthtrain import LossConfig, TrainingBatch, load_params, reconstruct, save_params, train, write_trace
from lthkit.synthetic import demo_corpus

EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 2, 3, 4
DEFAULT_K1 = 1000


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---- helpers --------------------------------------------------------------------


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def _stamp(path, args, kind: str) -> None:
    """Manifest for a non-index artifact."""
    body = {"artifact": kind, "command": args.command, "config": _config(args)}
    manifest_path(path).write_text(json.dumps(body, sort_keys=True, indent=2) + "\n")


def _stamp_index(man: IndexManifest, path, args) -> None:
    man.command = args.command
    man.config = _config(args)
    man.save(path)


def _apply_head(x: np.ndarray, head_path) -> np.ndarray:
    if not head_path:
        return x
    w = load_params(head_path)["head"]
    if w.shape[1] != x.shape[-1]:
        raise DimensionMismatch(f"head expects {w.shape[1]}-d input, queries are {x.shape[-1]}-d")
    return (x @ w.T).astype(np.float32)


def open_index(path, k1: int = DEFAULT_K1):
    """Load any index file by its manifest kind; returns ``(searchable, manifest)``."""
    man = IndexManifest.load(path)
    kind = man.index_kind
    if kind.startswith("flat-"):
        return load_flat_index(path), man
    if kind == "pca":
        model = load_pca(Path(path).parent / man.compression_params["model"])
        return PcaIndex(model, load_flat_index(path)), man
    if kind in ("pq", "jpq"):
        return load_pq(path, kind), man
    if kind == "binary":
        return BinaryIndex(load_binary(path), k1), man
    raise ToolkitError(f"cannot open index kind {kind!r}")


def _search_all(index, queries: EmbeddingMatrix, k: int) -> RunResult:
    run = RunResult()
    for qid, q in zip(queries.ids, queries.data):
        run.add(qid, index.search(q, k))
    return run


def _positives(qrels: Qrels) -> dict[str, list[str]]:
    return {q: sorted(d for d, g in j.items() if g > 0) for q, j in qrels.judgments.items()}


# ---- commands -----------------------------------------------------------------------


def cmd_synth(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    corpus, queries, task = demo_corpus(args.n_docs, args.n_queries, args.dim, args.seed)
    write_corpus(corpus, out / "corpus.jsonl")
    write_corpus(queries, out / "queries.jsonl")
    write_qrels(task.qrels, out / "qrels.tsv")
    _stamp_index(write_embeddings(task.corpus, out / "corpus.emb", args.seed), out / "corpus.emb", args)
    _stamp_index(write_embeddings(task.queries, out / "queries.emb", args.seed), out / "queries.emb", args)
    for name, kind in (("corpus.jsonl", "corpus"), ("queries.jsonl", "queries"), ("qrels.tsv", "qrels")):
        _stamp(out / name, args, kind)


def cmd_fit_pca(args):
    m = read_embeddings(args.train)
    model = fit_pca(m, args.target_dim, whiten=not args.no_whiten)
    save_pca(model, args.out)
    _stamp(args.out, args, "pca-model")


def cmd_fit_pq(args):
    m = read_embeddings(args.train)
    cb = fit_pq(m, args.M, args.K, args.iters, args.seed)
    _stamp_index(save_pq(cb, None, args.out, args.seed), args.out, args)


def cmd_quantize(args):
    m = read_embeddings(args.input)
    if args.mode == "pca":
        if not args.pca:
            raise UsageError("quantize --mode pca needs --pca MODEL")
        if Path(args.pca).resolve().parent != Path(args.out).resolve().parent:
            raise UsageError("the PCA model must sit in the same directory as the index")
        model = load_pca(args.pca)
        man = write_flat_index(apply_pca(model, m), args.out, "f32", args.seed)
        man.index_kind = "pca"
        man.compression_params = {"target_dim": model.target_dim, "whiten": model.whiten, "model": Path(args.pca).name}
    else:
        man = write_flat_index(m, args.out, args.mode, args.seed)
    _stamp_index(man, args.out, args)


def cmd_hash_index(args):
    codes = hash_encode(read_embeddings(args.input))
    _stamp_index(save_binary(codes, args.out, args.seed), args.out, args)


def cmd_pq_index(args):
    cb = load_pq(args.codebook).codebook
    codes = pq_encode(cb, read_embeddings(args.input))
    _stamp_index(save_pq(cb, codes, args.out, args.seed), args.out, args)


_MODE_KINDS = {"flat": ("flat-f32", "flat-fp16", "flat-fp8"), "pca": ("pca",), "pq": ("pq", "jpq"), "binary": ("binary",)}


def cmd_search(args):
    index, man = open_index(args.index, args.k1)
    if man.index_kind not in _MODE_KINDS[args.mode]:
        raise UsageError(f"--mode {args.mode} does not match index kind {man.index_kind}")
    q = read_embeddings(args.queries)
    q = EmbeddingMatrix(q.ids, _apply_head(q.data, args.head))
    write_run(_search_all(index, q, args.k), args.out, tag=f"lthkit-{args.mode}")
    _stamp(args.out, args, "run")


def _bpr_batches(args, q: EmbeddingMatrix, corpus: EmbeddingMatrix, qrels: Qrels):
    pos = _positives(qrels)
    have_q, have_p = set(q.ids), set(corpus.ids)
    qids = [x for x in sorted(pos) if pos[x] and x in have_q and pos[x][0] in have_p]
    if not qids:
        raise ToolkitError("no training query has a positive in the corpus")
    mined = {}
    if args.negatives:
        mined = {r["query_id"]: r["negatives"] for r in read_jsonl(args.negatives)}
    rng = make_rng(args.seed, "bpr-batches")
    order = [qids[i] for i in rng.permutation(len(qids))]
    rows, xs, ps, ns = [], [], [], []
    for qid in order:
        negs = [n for n in mined.get(qid, []) if n not in pos[qid]]
        while len(negs) < args.n_neg:
            cand = corpus.ids[int(rng.integers(corpus.n))]
            if cand not in pos[qid]:
                negs.append(cand)
        xs.append(q.row(qid))
        ps.append(corpus.row(pos[qid][0]))
        ns.append(np.stack([corpus.row(n) for n in negs[: args.n_neg]]))
        rows.append(qid)
    xs, ps, ns = np.array(xs), np.array(ps), np.array(ns)
    bs = args.batch_size
    return [TrainingBatch(xs[i : i + bs], ps[i : i + bs], ns[i : i + bs]) for i in range(0, len(rows), bs)]


def _jpq_source(args, q: EmbeddingMatrix, pq: PqIndex, qrels: Qrels):
    pos = _positives(qrels)
    row = {p: i for i, p in enumerate(pq.codes.ids)}
    have_q = set(q.ids)
    qids = [x for x in sorted(pos) if x in have_q and any(p in row for p in pos[x])]
    if not qids:
        raise ToolkitError("no training query has a positive in the index")
    codes = pq.codes.codes.astype(np.int64)
    x = np.stack([q.row(i) for i in qids]).astype(np.float64)
    prow = np.array([row[next(p for p in pos[i] if p in row)] for i in qids])
    known = [{row[p] for p in pos[i] if p in row} for i in qids]
    rng = make_rng(args.seed, "jpq-negatives")
    bs, depth = min(args.batch_size, len(qids)), min(args.depth, pq.codes.n - 1)
    n_batches = max(1, len(qids) // bs)

    def source(step, params):
        # hard negatives come from the current trainable index
        b = step % n_batches
        idx = np.arange(b * bs, (b + 1) * bs)
        rec = reconstruct(params["centroids"], codes)
        scores = (x[idx] @ params["head"].T) @ rec.T
        negs = []
        for r, i in enumerate(idx):
            scores[r, list(known[i])] = -np.inf
            top = np.argsort(-scores[r], kind="stable")[:depth]
            negs.append(top[rng.choice(depth, args.n_neg, replace=False)])
        return TrainingBatch(x[idx], codes[prow[idx]], codes[np.array(negs)])

    return source


def _triplet_batches(args, q: EmbeddingMatrix, trips, pq: PqIndex | None, corpus: EmbeddingMatrix | None):
    if pq is not None:
        row = {p: i for i, p in enumerate(pq.codes.ids)}
        look = lambda pid: pq.codes.codes[row[pid]].astype(np.int64)  # noqa: E731
        known = row
    else:
        look = corpus.row
        known = set(corpus.ids)
    for t in trips:
        for pid in (t.pos_id, t.neg_id):
            if pid not in known:
                raise UnknownPassageId(f"triplet passage {pid!r} is not in the index")
    xs = np.stack([q.row(t.query) for t in trips]).astype(np.float64)
    ps = np.stack([look(t.pos_id) for t in trips])
    ns = np.stack([look(t.neg_id) for t in trips])[:, None]
    cp = np.array([t.ce_pos for t in trips])
    cn = np.array([[t.ce_neg] for t in trips])
    bs = args.batch_size
    return [TrainingBatch(xs[i : i + bs], ps[i : i + bs], ns[i : i + bs], cp[i : i + bs], cn[i : i + bs]) for i in range(0, len(trips), bs)]


_LOSS = {"bpr": "bpr", "jpq": "jpq_infonce", "margin-mse": "margin_mse"}


def cmd_train(args):
    cfg = LossConfig(
        _LOSS[args.loss],
        alpha=args.alpha,
        beta_schedule=args.beta_schedule,
        beta0=args.beta0,
        learning_rate=args.lr,
        batch_size=args.batch_size,
        steps=args.steps,
        seed=args.seed,
    )
    q = read_embeddings(args.queries)
    pq = None
    if args.loss == "bpr":
        if not (args.corpus and args.qrels):
            raise UsageError("train --loss bpr needs --corpus and --qrels")
        corpus = read_embeddings(args.corpus)
        d_out = args.bits or q.d
        head = np.eye(q.d) if d_out == q.d else make_rng(args.seed, "head").standard_normal((d_out, q.d)) / np.sqrt(q.d)
        params = {"head": head}
        batches = _bpr_batches(args, q, corpus, read_qrels(args.qrels))
    elif args.loss == "jpq":
        if not (args.index and args.qrels):
            raise UsageError("train --loss jpq needs --index and --qrels")
        pq, _ = open_index(args.index)
        if not isinstance(pq, PqIndex):
            raise UsageError("train --loss jpq needs a PQ index")
        params = {"head": np.eye(q.d), "centroids": pq.codebook.centroids}
        batches = _jpq_source(args, q, pq, read_qrels(args.qrels))
    else:
        if not args.triplets or not (args.index or args.corpus):
            raise UsageError("train --loss margin-mse needs --triplets and --index or --corpus")
        trips = adapt.read_triplets(args.triplets)
        if not trips:
            raise ToolkitError("triplet file is empty")
        corpus = None
        if args.index:
            pq, _ = open_index(args.index)
            if not isinstance(pq, PqIndex):
                raise UsageError("train --loss margin-mse --index needs a PQ index")
            params = {"head": np.eye(q.d), "centroids": pq.codebook.centroids}
        else:
            corpus = read_embeddings(args.corpus)
            params = {"head": np.eye(q.d)}
        batches = _triplet_batches(args, q, trips, pq, corpus)
    res = train(cfg, batches, params)
    save_params(res.params, args.out, cfg, command=args.command)
    if args.trace:
        write_trace(res.trace, args.trace)
        _stamp(args.trace, args, "loss-trace")
    if args.out_index and pq is not None:
        cb = PqCodebook(res.params["centroids"].astype(np.float32))
        _stamp_index(save_pq(cb, pq.codes, args.out_index, args.seed, kind="jpq"), args.out_index, args)
    print(json.dumps({"first_loss": res.trace[0].loss, "last_loss": res.trace[-1].loss, "steps": len(res.trace)}))


def cmd_mine_negatives(args):
    indexes = [open_index(p, args.k1)[0] for p in args.index]
    q = read_embeddings(args.queries)
    if args.qrels:
        positives = _positives(read_qrels(args.qrels))
    elif args.generated:
        positives = {qid: [pid] for qid, (pid, _) in adapt.read_generated(args.generated).query_ids().items()}
    else:
        raise UsageError("mine-negatives needs --qrels or --generated")
    x = _apply_head(q.data, args.head)
    vecs = {qid: x[i] for i, qid in enumerate(q.ids)}
    negs = adapt.mine_hard_negatives(indexes, vecs, positives, args.depth, args.samples, args.seed)
    write_jsonl(({"query_id": k, "negatives": v} for k, v in negs.items()), args.out)
    _stamp(args.out, args, "negatives")


def cmd_build_genq(args):
    corpus = read_corpus(args.corpus)
    gen = adapt.synth_query_stub(corpus, args.q_per_passage, args.seed)
    adapt.write_generated(gen, args.out)
    _stamp(args.out, args, "generated-queries")
    if args.queries_out:
        write_corpus({qid: {"title": "", "text": t} for qid, (_, t) in gen.query_ids().items()}, args.queries_out)
        _stamp(args.queries_out, args, "queries")


def cmd_build_gpl(args):
    gen = adapt.read_generated(args.generated)
    positives = {qid: pid for qid, (pid, _) in gen.query_ids().items()}
    negatives = {r["query_id"]: r["negatives"] for r in read_jsonl(args.negatives)}
    scores = adapt.read_ce_scores(args.ce_scores)
    trips, rep = adapt.build_gpl_triplets(positives, negatives, scores, strict=not args.lenient)
    adapt.write_triplets(trips, args.out)
    _stamp(args.out, args, "triplets")
    print(json.dumps({"emitted": rep.emitted, "missing_score": rep.missing_score, "invalid": rep.invalid}))


def cmd_eval(args):
    run, qrels = read_run(args.run), read_qrels(args.qrels)
    out = {}
    for metric in args.metric:
        fn = evalbench.ndcg_at_k if metric == "ndcg" else evalbench.recall_at_k
        _, mean = fn(run, qrels, args.k)
        out[f"{metric}@{args.k}"] = mean
    for name, v in out.items():
        print(f"{name}\t{v:.6f}")
    if args.out:
        Path(args.out).write_text(json.dumps(out, sort_keys=True, indent=2) + "\n")
        _stamp(args.out, args, "metrics")


def cmd_bench(args):
    rows = []
    q = read_embeddings(args.queries) if args.queries else None
    for path in args.index:
        index, man = open_index(path, args.k1)
        size = evalbench.report_index_size(man)
        row = {"index": str(path), "kind": man.index_kind, "size": size.mb, "file_size": size.file_mb}
        if q is not None:
            rep = evalbench.measure_latency(index, q.data, args.k, args.warmup, args.repeats)
            row.update(mean_ms=round(rep.mean_ms, 3), std_ms=round(rep.std_ms, 3), n_samples=rep.n_samples, hardware=rep.hardware_note)
        rows.append(row)
    print("kind\tsize\tlatency")
    for r in rows:
        lat = f"{r['mean_ms']:.2f} +- {r['std_ms']:.2f} ms" if "mean_ms" in r else "-"
        print(f"{r['kind']}\t{r['size']}\t{lat}")
    if args.out:
        Path(args.out).write_text(json.dumps(rows, indent=2) + "\n")
        _stamp(args.out, args, "bench")


# ---- parser ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lthkit", description=__doc__.splitlines()[0],
                formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def cmd(name, func, help):
        s = sub.add_parser(name, help=help, description=help, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        s.set_defaults(func=func)
        s.add_argument("--seed", type=int, default=0, help="random seed")
        return s

    s = cmd("synth", cmd_synth, "write the bundled synthetic demo collection")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--n-docs", type=int, default=1000, help="number of passages")
    s.add_argument("--n-queries", type=int, default=100, help="number of queries")
    s.add_argument("--dim", type=int, default=64, help="embedding dimension")

    s = cmd("fit-pca", cmd_fit_pca, "fit a PCA model on training embeddings")
    s.add_argument("--train", required=True, help="training embeddings (.emb)")
    s.add_argument("--target-dim", type=int, default=128, help="output dimension")
    s.add_argument("--no-whiten", action="store_true", help="keep eigenvalue scaling")
    s.add_argument("--out", required=True, help="model file (.pca)")

    s = cmd("fit-pq", cmd_fit_pq, "fit a product-quantization codebook")
    s.add_argument("--train", required=True, help="training embeddings (.emb)")
    s.add_argument("--M", type=int, default=96, help="number of subspaces")
    s.add_argument("--K", type=int, default=256, help="centroids per subspace (n=8 bits)")
    s.add_argument("--iters", type=int, default=25, help="k-means iterations")
    s.add_argument("--out", required=True, help="codebook file (.pqx)")

    s = cmd("quantize", cmd_quantize, "write a flat index in f32, fp16, fp8 or PCA-reduced form")
    s.add_argument("--input", required=True, help="embeddings (.emb)")
    s.add_argument("--mode", choices=["f32", "fp16", "fp8", "pca"], default="f32", help="storage mode")
    s.add_argument("--pca", help="PCA model for --mode pca (same directory as --out)")
    s.add_argument("--out", required=True, help="index file")

    s = cmd("hash-index", cmd_hash_index, "sign-binarize embeddings into a packed binary index")
    s.add_argument("--input", required=True, help="embeddings (.emb)")
    s.add_argument("--out", required=True, help="index file")

    s = cmd("pq-index", cmd_pq_index, "encode embeddings with a fitted PQ codebook")
    s.add_argument("--codebook", required=True, help="codebook file from fit-pq")
    s.add_argument("--input", required=True, help="embeddings (.emb)")
    s.add_argument("--out", required=True, help="index file")

    s = cmd("search", cmd_search, "retrieve top-k for every query into a TREC run file")
    s.add_argument("--mode", choices=list(_MODE_KINDS), required=True, help="index family")
    s.add_argument("--index", required=True, help="index file")
    s.add_argument("--queries", required=True, help="query embeddings (.emb)")
    s.add_argument("--k", type=int, default=10, help="results per query")
    s.add_argument("--k1", type=int, default=DEFAULT_K1, help="Hamming candidate depth for binary search")
    s.add_argument("--head", help="trained parameters (.npz) whose head encodes the queries")
    s.add_argument("--out", required=True, help="run file")

    s = cmd("train", cmd_train, "train a query head (and PQ centroids) with a ranking loss")
    s.add_argument("--loss", choices=list(_LOSS), required=True, help="objective")
    s.add_argument("--queries", required=True, help="query embeddings (.emb)")
    s.add_argument("--corpus", help="passage embeddings (.emb); bpr, or margin-mse without --index")
    s.add_argument("--index", help="PQ index; jpq and margin-mse")
    s.add_argument("--qrels", help="training positives; bpr and jpq")
    s.add_argument("--negatives", help="mined negatives (JSON lines); bpr")
    s.add_argument("--triplets", help="GPL triplets; margin-mse")
    s.add_argument("--n-neg", type=int, default=4, help="negatives per query")
    s.add_argument("--depth", type=int, default=200, help="hard-negative depth for jpq mining")
    s.add_argument("--bits", type=int, default=0, help="code width for bpr (0 = input dimension)")
    s.add_argument("--alpha", type=float, default=2.0, help="hinge margin")
    s.add_argument("--beta-schedule", choices=["sqrt", "constant"], default="sqrt", help="relaxation sharpness over steps")
    s.add_argument("--beta0", type=float, default=1.0, help="beta scale")
    s.add_argument("--lr", type=float, default=1e-2, help="SGD learning rate")
    s.add_argument("--batch-size", type=int, default=32, help="queries per batch")
    s.add_argument("--steps", type=int, default=500, help="SGD steps")
    s.add_argument("--out", required=True, help="trained parameters (.npz)")
    s.add_argument("--out-index", help="write the trained PQ index here")
    s.add_argument("--trace", help="loss trace (CSV)")

    s = cmd("mine-negatives", cmd_mine_negatives, "sample hard negatives from one or more indexes")
    s.add_argument("--index", action="append", required=True, help="index file; repeat to union pools")
    s.add_argument("--queries", required=True, help="query embeddings (.emb)")
    s.add_argument("--qrels", help="known positives")
    s.add_argument("--generated", help="generated queries; their passages are the positives")
    s.add_argument("--depth", type=int, default=adapt.MINING_DEPTH, help="retrieval depth")
    s.add_argument("--samples", type=int, default=1, help="negatives per query")
    s.add_argument("--k1", type=int, default=DEFAULT_K1, help="Hamming candidate depth for binary indexes")
    s.add_argument("--head", help="trained parameters (.npz) whose head encodes the queries")
    s.add_argument("--out", required=True, help="negatives (JSON lines)")

    s = cmd("build-genq", cmd_build_genq, "generate keyword pseudo-queries for every passage")
    s.add_argument("--corpus", required=True, help="corpus (JSON lines)")
    s.add_argument("--q-per-passage", type=int, default=adapt.Q_PER_PASSAGE, help="queries per passage")
    s.add_argument("--out", required=True, help="generated queries (JSON lines)")
    s.add_argument("--queries-out", help="also write the queries in corpus format")

    s = cmd("build-gpl", cmd_build_gpl, "join generated queries, negatives and teacher scores into triplets")
    s.add_argument("--generated", required=True, help="generated queries (JSON lines)")
    s.add_argument("--negatives", required=True, help="mined negatives (JSON lines)")
    s.add_argument("--ce-scores", required=True, help="teacher scores (TSV)")
    s.add_argument("--lenient", action="store_true", help="skip triplets with missing scores instead of failing")
    s.add_argument("--out", required=True, help="triplets (JSON lines)")

    s = cmd("eval", cmd_eval, "score a run against qrels")
    s.add_argument("--run", required=True, help="TREC run file")
    s.add_argument("--qrels", required=True, help="qrels (TSV or TREC)")
    s.add_argument("--metric", choices=["ndcg", "recall"], action="append", help="metric; repeatable (default ndcg)")
    s.add_argument("--k", type=int, default=10, help="cutoff")
    s.add_argument("--out", help="metrics (JSON)")

    s = cmd("bench", cmd_bench, "index sizes and single-thread query latency")
    s.add_argument("--index", action="append", required=True, help="index file; repeatable")
    s.add_argument("--queries", help="query embeddings (.emb); omit for sizes only")
    s.add_argument("--k", type=int, default=10, help="results per query")
    s.add_argument("--k1", type=int, default=DEFAULT_K1, help="Hamming candidate depth")
    s.add_argument("--warmup", type=int, default=1, help="untimed queries first")
    s.add_argument("--repeats", type=int, default=1, help="timed passes over the queries")
    s.add_argument("--out", help="report (JSON)")
    return p


def _fail(code: int, exc: BaseException) -> int:
    msg = str(exc).replace("\n", " ")
    print(json.dumps({"error": type(exc).__name__, "exit": code, "message": msg}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "eval" and not args.metric:
            args.metric = ["ndcg"]
        print(json.dumps({"command": args.command, "config": _config(args)}, sort_keys=True))
        args.func(args)
    except SystemExit as e:  # --help
        return int(e.code or 0)
    except UsageError as e:
        return _fail(EXIT_USAGE, e)
    except (ToolkitError, OSError) as e:
        return _fail(EXIT_DATA, e)
    except Exception as e:  # noqa: BLE001
        return _fail(EXIT_INTERNAL, e)
    return 0


if __name__ == "__main__":
    sys.exit(main())
