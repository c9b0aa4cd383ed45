"""Desk-scale efficiency runs: index sizes from header layouts and single-threaded latency.

Sizes need no vectors at all: every container's byte layout is a function of
its header fields, so a 1M x 768 table is computed exactly without allocating
it.  The latency run does allocate the float32 corpus (about 3.1 GB for 1M x
768), filling it in chunks so peak memory stays close to that figure.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from lthkit.binhash import BinaryCodeSet, bin_layout, hamming_topk, hash_vector, pack_signs, rerank_dot
from lthkit.compress.pq import PqCodeSet, fit_pq, pq_encode, pq_layout, pq_search
from lthkit.compress.scalar import FlatIndex
from lthkit.core import DTYPE_F32, EmbeddingMatrix, IndexManifest, emb_layout, make_rng
from lthkit.evalbench import LatencyReport, measure_latency


def size_manifests(n: int = 1_000_000, d: int = 768, M: int = 96, K: int = 256) -> dict[str, IndexManifest]:
    """Manifests of flat f32, binary and PQ indexes of ``n`` vectors, ids excluded."""
    layouts = {
        "flat-f32": ("flat-f32", d, {}, emb_layout(n, d, 0, DTYPE_F32)),
        "binary": ("binary", d, {"d_bits": d}, bin_layout(n, d, 0)),
        "pq": ("pq", d, {"M": M, "K": K, "d_sub": d // M, "nbits": max(K - 1, 1).bit_length()}, pq_layout(M, K, d // M, n, 0)),
    }
    return {k: IndexManifest(kind, dim, params, sum(lay.values()), 0, lay) for k, (kind, dim, params, lay) in layouts.items()}


def pq_size_split(n: int = 1_000_000, d: int = 768, M: int = 96, K: int = 256) -> dict[str, int]:
    """Codes and codebook byte counts of a PQ index (4-byte float centroids)."""
    return {"codes": n * M, "codebook": M * K * (d // M) * 4}


@dataclass
class DeskConfig:
    n: int = 1_000_000
    d: int = 768
    M: int = 96
    K: int = 256
    k: int = 10
    k1: int = 1000
    n_queries: int = 20
    pq_train: int = 10_000
    pq_iters: int = 10
    chunk: int = 16_384
    seed: int = 0


@dataclass
class DeskResult:
    config: DeskConfig
    latency: dict[str, LatencyReport] = field(default_factory=dict)
    build_seconds: float = 0.0

    def ratio(self, slow: str, fast: str) -> float:
        return self.latency[slow].mean_ms / self.latency[fast].mean_ms

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.config),
            "build_seconds": self.build_seconds,
            "latency": {k: v.to_dict() for k, v in self.latency.items()},
        }


def desk_latency(cfg: DeskConfig | None = None) -> DeskResult:
    """Build f32, packed binary and PQ indexes over Gaussian vectors and time top-k search.

    Rows are timed as: exhaustive f32 dot product top-``k``; Hamming top-``k1``
    over packed codes; Hamming top-``k1`` then dot-product rerank to top-``k``;
    PQ lookup-table scan top-``k``.  All single-threaded.
    """
    cfg = cfg or DeskConfig()
    t0 = time.perf_counter()
    ids = [f"d{i:07d}" for i in range(cfg.n)]
    data = np.empty((cfg.n, cfg.d), dtype=np.float32)
    bits = np.empty((cfg.n, cfg.d // 8), dtype=np.uint8)
    rng = make_rng(cfg.seed, "desk-corpus")
    for s in range(0, cfg.n, cfg.chunk):
        e = min(s + cfg.chunk, cfg.n)
        rng.standard_normal((e - s, cfg.d), dtype=np.float32, out=data[s:e])
        bits[s:e] = pack_signs(data[s:e])
    flat = FlatIndex(ids, data)
    codes_bin = BinaryCodeSet(ids, bits, cfg.d)

    sample = make_rng(cfg.seed, "desk-pq-sample").choice(cfg.n, min(cfg.pq_train, cfg.n), replace=False)
    sample.sort()
    cb = fit_pq(EmbeddingMatrix([ids[i] for i in sample], data[sample]), cfg.M, cfg.K, cfg.pq_iters, cfg.seed)
    pq_codes = np.empty((cfg.n, cfg.M), dtype=np.uint8)
    for s in range(0, cfg.n, cfg.chunk):
        e = min(s + cfg.chunk, cfg.n)
        pq_codes[s:e] = pq_encode(cb, EmbeddingMatrix(ids[s:e], data[s:e])).codes
    codes_pq = PqCodeSet(ids, pq_codes, cfg.K)
    for obj in (flat, codes_bin, codes_pq):
        obj.tie_ranks  # build the id-rank caches outside the timed region
    build = time.perf_counter() - t0

    queries = make_rng(cfg.seed, "desk-queries").standard_normal((cfg.n_queries, cfg.d)).astype(np.float32)
    res = DeskResult(cfg, build_seconds=build)
    res.latency["flat-f32"] = measure_latency(flat, queries, cfg.k)
    res.latency["hamming"] = measure_latency(lambda q, k: hamming_topk(hash_vector(q), codes_bin, cfg.k1), queries, cfg.k)
    res.latency["hamming+rerank"] = measure_latency(
        lambda q, k: rerank_dot(q, hamming_topk(hash_vector(q), codes_bin, cfg.k1), codes_bin, k), queries, cfg.k
    )
    res.latency["pq"] = measure_latency(lambda q, k: pq_search(cb, codes_pq, q, k), queries, cfg.k)
    for name, rep in res.latency.items():
        rep.search_mode = name
    return res

