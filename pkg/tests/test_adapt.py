import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lthkit.adapt import (
    GeneratedQuerySet,
    GplTriplet,
    build_genq_pairs,
    build_gpl_triplets,
    in_batch_negatives,
    mine_hard_negatives,
    read_ce_scores,
    read_generated,
    read_triplets,
    synth_query_stub,
    write_ce_scores,
    write_generated,
    write_triplets,
)
from lthkit.compress import FlatIndex, fit_pq, pq_encode
from lthkit.compress.pq import PqIndex
from lthkit.errors import EmptyPassage, InvalidTriplet, MissingScore, NotEnoughCandidates, UnknownPassageId
from lthkit.synthetic import clustered_task


def test_genq_pairs_share_positive():
    gen = GeneratedQuerySet({"p1": ["a", "b", "c"]})
    pairs = build_genq_pairs(gen, {"p1": {}})
    assert [p.pos_id for p in pairs] == ["p1"] * 3
    assert [p.qid for p in pairs] == ["p1_q0", "p1_q1", "p1_q2"]
    with pytest.raises(UnknownPassageId):
        build_genq_pairs(GeneratedQuerySet({"zz": ["a"]}), {"p1": {}})


def test_in_batch_negatives():
    gen = GeneratedQuerySet({f"p{i}": [f"q{i}"] for i in range(10)})
    negs = in_batch_negatives(build_genq_pairs(gen), 4)
    assert [len(n) for n in negs] == [3, 3, 3, 3, 3, 3, 3, 3, 1, 1]
    assert negs[0] == ["p1", "p2", "p3"]


def test_synth_query_stub_deterministic():
    corpus = {"d": {"title": "", "text": "binary hashing for retrieval"}}
    a = synth_query_stub(corpus, 1, seed=3)
    assert a == synth_query_stub(corpus, 1, seed=3)
    (q,) = a.queries["d"]
    words = q.split()
    assert 2 <= len(words) <= 4
    # terms keep passage order
    assert words == [w for w in "binary hashing for retrieval".split() if w in words]
    assert len(synth_query_stub(corpus, 0)) == 0
    assert len(synth_query_stub(corpus, 3).queries["d"]) == 3
    with pytest.raises(EmptyPassage):
        synth_query_stub({"e": {"title": "", "text": "  ,, "}}, 1)


def test_generated_file_roundtrip(tmp):
    gen = GeneratedQuerySet({"p1": ["x y", "z"], "p2": []})
    write_generated(gen, tmp / "g.jsonl")
    assert read_generated(tmp / "g.jsonl") == gen


class _ListIndex:
    def __init__(self, ids, scores):
        self.ids, self.scores = ids, np.asarray(scores, float)

    def search(self, q, k):
        order = sorted(range(len(self.ids)), key=lambda i: (-self.scores[i], self.ids[i]))
        return [(self.ids[i], float(self.scores[i])) for i in order[:k]]


def test_mine_excludes_nearest_positive():
    idx = _ListIndex(["a", "b", "c"], [3, 2, 1])
    for seed in range(20):
        neg = mine_hard_negatives(idx, {"q": None}, {"q": ["a"]}, depth=3, samples=2, seed=seed)
        assert sorted(neg["q"]) == ["b", "c"]
    with pytest.raises(NotEnoughCandidates):
        mine_hard_negatives(idx, {"q": None}, {"q": ["a"]}, depth=3, samples=3)
    with pytest.raises(ValueError):
        mine_hard_negatives(idx, {"q": None}, {}, depth=1, samples=2)


def _mining_setup():
    task = clustered_task(1000, 100, 16, 10, seed=1)
    flat = FlatIndex.from_embeddings(task.corpus)
    queries = {q: task.queries.row(q) for q in task.queries.ids}
    positives = {q: [p] for q, p in task.positives.items()}
    return task, flat, queries, positives


def test_mine_subset_of_own_topk_and_deterministic():
    task, flat, queries, positives = _mining_setup()
    a = mine_hard_negatives(flat, queries, positives, depth=50, samples=1, seed=5)
    b = mine_hard_negatives(flat, queries, positives, depth=50, samples=1, seed=5)
    assert a == b
    for q, negs in a.items():
        assert len(negs) == 1
        top = {d for d, _ in flat.search(queries[q], 50)}
        assert set(negs) <= top
        assert not set(negs) & set(positives[q])
    c = mine_hard_negatives(flat, queries, positives, depth=50, samples=1, seed=6)
    assert a != c


def test_mine_unions_several_indexes():
    task, flat, queries, positives = _mining_setup()
    cb = fit_pq(task.corpus, 4, 16, seed=0)
    pq = PqIndex(cb, pq_encode(cb, task.corpus))
    negs = mine_hard_negatives([flat, pq], queries, positives, depth=20, samples=5, seed=0)
    for q, ns in negs.items():
        pool = {d for d, _ in flat.search(queries[q], 20)} | {d for d, _ in pq.search(queries[q], 20)}
        assert set(ns) <= pool and len(set(ns)) == 5


def test_triplet_examples():
    t = GplTriplet.from_scores("q", "p", "n", 8.0, 6.5)
    assert t.margin == 1.5
    assert GplTriplet.from_scores("q", "p", "n", 2.0, 2.0).margin == 0.0
    with pytest.raises(InvalidTriplet):
        GplTriplet.from_scores("q", "p", "p", 1.0, 0.0)
    with pytest.raises(InvalidTriplet):
        GplTriplet("q", "p", "n", 1.0, 0.5, 0.4)


def test_build_triplets_rejects_and_reports():
    scores = {("q1", "p"): 8.0, ("q1", "n1"): 6.5, ("q1", "n2"): 1.0}
    trips, rep = build_gpl_triplets({"q1": "p"}, {"q1": ["n1", "p", "n3", "n2"]}, scores, strict=False)
    assert [(t.neg_id, t.margin) for t in trips] == [("n1", 1.5), ("n2", 7.0)]
    assert (rep.emitted, rep.invalid, rep.missing_score) == (2, 1, 1)
    with pytest.raises(MissingScore):
        build_gpl_triplets({"q1": "p"}, {"q1": ["n3"]}, scores)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=4, max_size=4), st.integers(0, 2**31))
def test_margin_is_bit_exact(vals, seed):
    scores = {("q", "p"): vals[0], ("q", "a"): vals[1], ("q", "b"): vals[2], ("q", "c"): vals[3]}
    trips, _ = build_gpl_triplets({"q": "p"}, {"q": ["a", "b", "c"]}, scores)
    for t in trips:
        assert t.margin == t.ce_pos - t.ce_neg


def test_files_roundtrip(tmp):
    scores = {("q1", "p"): 0.1 + 0.2, ("q1", "n"): -1e-300}
    write_ce_scores(scores, tmp / "ce.tsv")
    assert read_ce_scores(tmp / "ce.tsv") == scores
    trips, _ = build_gpl_triplets({"q1": "p"}, {"q1": ["n"]}, scores)
    write_triplets(trips, tmp / "t.jsonl")
    back = read_triplets(tmp / "t.jsonl")
    assert back == trips
    assert back[0].margin == back[0].ce_pos - back[0].ce_neg
