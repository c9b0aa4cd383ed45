import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lthkit.core import IndexManifest, Qrels, RunResult
from lthkit.errors import EmptyQrels, EmptyQuerySet
from lthkit.evalbench import (
    LatencyReport,
    _dcg,
    measure_latency,
    mrr_at_k,
    ndcg_at_k,
    recall_at_k,
    report_index_size,
)


def test_ndcg_hand_example():
    qrels = Qrels({"q": {"dA": 2, "dB": 1}})
    run = RunResult({"q": [("dB", 2.0), ("dA", 1.0)]})
    dcg = 1 / math.log2(2) + 2 / math.log2(3)
    idcg = 2 / math.log2(2) + 1 / math.log2(3)
    assert dcg == pytest.approx(2.26186, abs=1e-5)
    assert idcg == pytest.approx(2.63093, abs=1e-5)
    _, mean = ndcg_at_k(run, qrels, 10)
    assert mean == pytest.approx(0.8597, abs=1e-4)
    assert mean == pytest.approx(dcg / idcg, abs=1e-12)


def test_ndcg_ideal_unjudged_and_missing():
    qrels = Qrels({"q": {"a": 3, "b": 1, "c": 0}, "empty": {"z": 0}, "absent": {"a": 1}})
    run = RunResult({"q": [("a", 3.0), ("b", 2.0), ("c", 1.0)], "empty": [("z", 1.0)], "extra": [("a", 1.0)]})
    per, mean = ndcg_at_k(run, qrels, 10)
    assert per["q"] == 1.0
    assert per["empty"] == 0.0 and per["absent"] == 0.0
    assert "extra" not in per
    assert mean == pytest.approx(1 / 3)
    only_unjudged = RunResult({"q": [("x", 1.0), ("y", 0.5)]})
    assert ndcg_at_k(only_unjudged, Qrels({"q": {"a": 1}}), 10)[1] == 0.0
    with pytest.raises(EmptyQrels):
        ndcg_at_k(run, Qrels(), 10)


def test_recall_examples():
    qrels = Qrels({"q": {"a": 1}})
    assert recall_at_k(RunResult({"q": [("x", 2.0), ("a", 1.0)]}), qrels, 1)[1] == 0.0
    assert recall_at_k(RunResult({"q": [("x", 2.0), ("a", 1.0)]}), qrels, 2)[1] == 1.0


def _random_instance(rng):
    docs = [f"d{i}" for i in range(30)]
    qrels, run = Qrels(), RunResult()
    for q in range(int(rng.integers(1, 6))):
        qid = f"q{q}"
        judged = rng.choice(docs, int(rng.integers(1, 10)), replace=False)
        for d in judged:
            qrels.add(qid, str(d), int(rng.integers(0, 3)))
        ranked = rng.choice(docs, int(rng.integers(0, 25)), replace=False)
        scores = np.sort(rng.standard_normal(len(ranked)))[::-1]
        run.add(qid, list(zip(map(str, ranked), scores.tolist())))
    return qrels, run


def test_recall_matches_set_intersection_oracle():
    rng = np.random.default_rng(0)
    for _ in range(100):
        qrels, run = _random_instance(rng)
        k = int(rng.integers(1, 20))
        vals = []
        for qid, judged in qrels.judgments.items():
            rel = {d for d, g in judged.items() if g > 0}
            top = {d for d, _ in run.rankings.get(qid, [])[:k]}
            vals.append(len(rel & top) / len(rel) if rel else 0.0)
        assert recall_at_k(run, qrels, k)[1] == float(np.mean(vals))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31))
def test_ndcg_invariant_under_monotone_score_transform(seed):
    rng = np.random.default_rng(seed)
    qrels, run = _random_instance(rng)
    warped = RunResult({q: [(d, math.exp(s) * 3 + 1) for d, s in r] for q, r in run.rankings.items()})
    assert ndcg_at_k(run, qrels, 10) == ndcg_at_k(warped, qrels, 10)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31))
def test_metric_bounds_and_dcg_monotone(seed):
    rng = np.random.default_rng(seed)
    qrels, run = _random_instance(rng)
    for k in (1, 3, 10, 30):
        for v in ndcg_at_k(run, qrels, k)[0].values():
            assert 0.0 <= v <= 1.0 + 1e-12
        assert 0.0 <= recall_at_k(run, qrels, k)[1] <= 1.0
    for qid, ranked in run.rankings.items():
        gains = [qrels.judgments.get(qid, {}).get(d, 0) for d, _ in ranked]
        dcgs = [_dcg(gains[:k]) for k in range(1, len(gains) + 1)]
        assert all(a <= b for a, b in zip(dcgs, dcgs[1:]))


def test_ndcg_can_drop_with_depth():
    # normalisation means nDCG@k is not monotone in k in general
    qrels = Qrels({"q": {"a": 1, "b": 1}})
    run = RunResult({"q": [("a", 2.0), ("x", 1.0)]})
    assert ndcg_at_k(run, qrels, 1)[1] == 1.0
    assert ndcg_at_k(run, qrels, 2)[1] == pytest.approx(1 / (1 + 1 / math.log2(3)))


def test_mrr():
    qrels = Qrels({"a": {"x": 1}, "b": {"y": 1}})
    run = RunResult({"a": [("z", 2.0), ("x", 1.0)], "b": [("w", 1.0)]})
    assert mrr_at_k(run, qrels, 10) == 0.25


class _Slow:
    def __init__(self):
        self.calls = 0

    def search(self, q, k):
        self.calls += 1
        return [("d", float(q.sum()))]


def test_latency_sample_count_and_warmup():
    idx = _Slow()
    rep = measure_latency(idx, np.ones((10, 4)), k=1, warmup=2, repeats=1)
    assert isinstance(rep, LatencyReport)
    assert rep.n_queries == 10 and rep.n_samples == 10
    assert idx.calls == 12
    assert rep.mean_ms > 0 and rep.std_ms >= 0
    assert "thread" in rep.hardware_note
    rep3 = measure_latency(idx.search, np.ones((4, 4)), k=1, warmup=1, repeats=3)
    assert rep3.n_samples == 12
    with pytest.raises(EmptyQuerySet):
        measure_latency(idx, np.empty((0, 4)), 1)


def test_size_rows():
    man = IndexManifest("flat-f32", 768, {}, 13 + 10 + 3072, 0, {"header": 13, "ids": 10, "payload": 3072})
    row = report_index_size(man)
    assert row.n_bytes == 3085
    assert row.file_bytes == 3095
    flat = IndexManifest("flat-f32", 768, {}, 3_072_000_013, 0, {"header": 13, "ids": 0, "payload": 3_072_000_000})
    assert report_index_size(flat).mb == "3072.00 MB"


def test_full_corpus_flat_size_near_published():
    from lthkit.benchmarks import size_manifests

    flat = size_manifests(8_841_823, 768)["flat-f32"]
    mb = flat.layout["payload"] / 1e6
    assert abs(mb - 27162.08) / 27162.08 < 0.005
    assert size_manifests(1, 768)["flat-f32"].layout["payload"] == 3072
