"""Retrieval metrics and the efficiency harness (index size, per-query latency).

nDCG uses linear gains, ``rel / log2(rank + 1)``, as trec_eval does.  Queries
are taken from the qrels; a judged query missing from the run, or one whose
judgments are all zero, scores 0 and still counts in the mean.  Unjudged
documents have grade 0.
"""

from __future__ import annotations

import math
import os
import platform
import time
from dataclasses import asdict, dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from lthkit.core import MB, IndexManifest, Qrels, RunResult
from lthkit.errors import EmptyQrels, EmptyQuerySet


def _dcg(gains) -> float:
    return sum(g / math.log2(i + 2) for i, g in enumerate(gains))


def ndcg_at_k(run: RunResult, qrels: Qrels, k: int = 10) -> tuple[dict[str, float], float]:
    """Per-query nDCG@k and the mean over judged queries."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not qrels.judgments:
        raise EmptyQrels("no judgments")
    per_query = {}
    for qid, judged in qrels.judgments.items():
        ideal = sorted((g for g in judged.values() if g > 0), reverse=True)[:k]
        idcg = _dcg(ideal)
        if idcg == 0:
            per_query[qid] = 0.0
            continue
        ranked = run.rankings.get(qid, [])[:k]
        per_query[qid] = _dcg([judged.get(did, 0) for did, _ in ranked]) / idcg
    return per_query, float(np.mean(list(per_query.values())))


def recall_at_k(run: RunResult, qrels: Qrels, k: int) -> tuple[dict[str, float], float]:
    if k < 1:
        raise ValueError("k must be >= 1")
    if not qrels.judgments:
        raise EmptyQrels("no judgments")
    per_query = {}
    for qid in qrels.judgments:
        rel = qrels.relevant(qid)
        if not rel:
            per_query[qid] = 0.0
            continue
        top = {did for did, _ in run.rankings.get(qid, [])[:k]}
        per_query[qid] = sum(1 for d in rel if d in top) / len(rel)
    return per_query, float(np.mean(list(per_query.values())))


def mrr_at_k(run: RunResult, qrels: Qrels, k: int = 10) -> float:
    scores = []
    for qid in qrels.judgments:
        rel = qrels.relevant(qid)
        rr = 0.0
        for rank, (did, _) in enumerate(run.rankings.get(qid, [])[:k], start=1):
            if did in rel:
                rr = 1.0 / rank
                break
        scores.append(rr)
    if not scores:
        raise EmptyQrels("no judgments")
    return float(np.mean(scores))


# --------------------------------------------------------------------------
# latency


@dataclass
class LatencyReport:
    n_queries: int
    mean_ms: float
    std_ms: float
    hardware_note: str
    search_mode: str = "exhaustive"
    n_samples: int = 0

    def __str__(self) -> str:
        return f"{self.mean_ms:.1f} ± {self.std_ms:.2f} ms"

    def to_dict(self) -> dict:
        return asdict(self)


def hardware_note() -> str:
    return f"{platform.machine()} {platform.processor() or 'cpu'}; {os.cpu_count()} logical cores; 1 thread; numpy {np.__version__}"


def measure_latency(search, queries: np.ndarray, k: int, warmup: int = 1, repeats: int = 1) -> LatencyReport:
    """Wall-clock per search call, single-threaded, warm-up calls excluded.

    ``search`` is an index object with ``.search(q, k)`` or a plain callable.
    Every query is timed ``repeats`` times, giving ``n_queries * repeats``
    samples.
    """
    fn = search.search if hasattr(search, "search") else search
    queries = np.atleast_2d(queries)
    if queries.shape[0] == 0:
        raise EmptyQuerySet("no queries to time")
    if warmup < 1:
        raise ValueError("warmup must be >= 1")
    samples = []
    with threadpool_limits(1):
        for i in range(warmup):
            fn(queries[i % len(queries)], k)
        for q in queries:
            for _ in range(repeats):
                t0 = time.perf_counter()
                fn(q, k)
                samples.append((time.perf_counter() - t0) * 1e3)
    arr = np.asarray(samples)
    return LatencyReport(len(queries), float(arr.mean()), float(arr.std()), hardware_note(), "exhaustive", len(arr))


# --------------------------------------------------------------------------
# sizes


@dataclass
class SizeRow:
    kind: str
    n_bytes: int  # header + vector payload, external ids excluded
    file_bytes: int

    @property
    def mb(self) -> str:
        return f"{self.n_bytes / MB:.2f} MB"

    @property
    def file_mb(self) -> str:
        return f"{self.file_bytes / MB:.2f} MB"


def report_index_size(manifest: IndexManifest) -> SizeRow:
    """Decimal-MB size row; ``mb`` compares to published vector-index sizes, ``file_mb`` is the file."""
    return SizeRow(manifest.index_kind, manifest.index_bytes(), manifest.size_bytes)
