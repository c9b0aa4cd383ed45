"""Seeded synthetic corpora: clustered unit vectors with matching texts and qrels.

These stand in for encoder output in tests, benchmarks and the bundled demo
corpus; nothing here models a real retriever.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lthkit.core import EmbeddingMatrix, Qrels, make_rng

# small per-topic vocabularies so generated texts (and keyword queries) cluster too
_TOPICS = [
    "binary hashing hamming codes bits popcount retrieval index",
    "product quantization centroids codebook subspace compression",
    "protein enzyme binding structure folding residue",
    "climate ocean warming carbon emission temperature",
    "court appeal statute ruling contract liability",
    "galaxy telescope orbit stellar planet radiation",
    "vaccine infection immune antibody trial dosage",
    "market equity bond inflation dividend portfolio",
]


@dataclass
class SyntheticTask:
    corpus: EmbeddingMatrix
    queries: EmbeddingMatrix
    qrels: Qrels
    positives: dict[str, str]  # query id -> its generating passage id
    clusters: np.ndarray  # cluster of each passage


def _unit(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def clustered_task(
    n_passages: int = 2000,
    n_queries: int = 200,
    d: int = 32,
    n_clusters: int = 32,
    seed: int = 0,
    passage_noise: float = 0.5,
    query_noise: float = 0.5,
    query_pool: list[int] | None = None,
) -> SyntheticTask:
    """Passages are noisy copies of cluster centres; each query is a noisy copy of one passage.

    Noise levels are per-coordinate standard deviations relative to the
    unit-norm centre, scaled by ``1/sqrt(d)``.
    """
    rng = make_rng(seed, "synthetic")
    centres = _unit(rng.standard_normal((n_clusters, d)))
    clusters = rng.integers(0, n_clusters, n_passages)
    scale = 1.0 / np.sqrt(d)
    passages = _unit(centres[clusters] + passage_noise * scale * rng.standard_normal((n_passages, d)))
    pool = np.arange(n_passages) if query_pool is None else np.asarray(query_pool)
    src = rng.choice(pool, n_queries, replace=n_queries > len(pool))
    queries = _unit(passages[src] + query_noise * scale * rng.standard_normal((n_queries, d)))
    pids = [f"p{i}" for i in range(n_passages)]
    qids = [f"q{i}" for i in range(n_queries)]
    positives = {q: pids[s] for q, s in zip(qids, src)}
    qrels = Qrels.from_triples((q, p, 1) for q, p in positives.items())
    return SyntheticTask(
        EmbeddingMatrix(pids, passages.astype(np.float32)),
        EmbeddingMatrix(qids, queries.astype(np.float32)),
        qrels,
        positives,
        clusters,
    )


def clustered_embeddings(n: int, n_queries: int, d: int, n_clusters: int, seed: int = 0):
    task = clustered_task(n, n_queries, d, n_clusters, seed)
    return task.corpus, task.queries


def demo_corpus(n_docs: int = 1000, n_queries: int = 100, d: int = 64, seed: int = 0):
    """Bundled demo collection: texts, embeddings, queries and qrels.

    Returns ``(corpus_texts, queries_texts, task)``; texts follow BEIR's
    ``{"title", "text"}`` shape and share cluster structure with the vectors.
    """
    task = clustered_task(n_docs, n_queries, d, len(_TOPICS), seed, passage_noise=0.8, query_noise=0.6)
    rng = make_rng(seed, "demo-text")
    vocab = [t.split() for t in _TOPICS]
    corpus = {}
    for pid, c in zip(task.corpus.ids, task.clusters):
        words = rng.choice(vocab[c], size=8)
        corpus[pid] = {"title": f"{vocab[c][0]} {vocab[c][1]}", "text": " ".join(words)}
    queries = {}
    for qid, pid in task.positives.items():
        words = corpus[pid]["text"].split()
        queries[qid] = {"title": "", "text": " ".join(words[:3])}
    return corpus, queries, task
