"""Product quantization with inner-product asymmetric distance search.

Index file (``PQX1``), little-endian::

    b"PQX1" | u32 M | u32 K | u32 d_sub | f32 centroids[M*K*d_sub]
            | u32 n | n newline-terminated ids | u8 codes[n*M]
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from lthkit import kernels
from lthkit.compress.kmeans import kmeans, nearest
from lthkit.core import (
    EmbeddingMatrix,
    IndexManifest,
    encode_ids,
    id_block_bytes,
    id_ranks,
    make_rng,
    read_ids,
    select_smallest,
)
from lthkit.errors import (
    DimensionMismatch,
    EmptyIndex,
    IoFailure,
    MalformedHeader,
    NotDivisible,
    TooFewTrainingPoints,
)

PQ_MAGIC = b"PQX1"
_HEAD = struct.Struct("<4sIII")
_COUNT = struct.Struct("<I")


@dataclass
class PqCodebook:
    centroids: np.ndarray  # (M, K, d_sub) float32

    def __post_init__(self):
        self.centroids = np.ascontiguousarray(self.centroids, dtype=np.float32)
        if self.centroids.ndim != 3:
            raise DimensionMismatch("centroids must be M x K x d_sub")
        if self.k_centroids > 256:
            raise ValueError("K must be at most 256 so codes fit in one byte")

    @property
    def m_subspaces(self) -> int:
        return self.centroids.shape[0]

    @property
    def k_centroids(self) -> int:
        return self.centroids.shape[1]

    @property
    def d_sub(self) -> int:
        return self.centroids.shape[2]

    @property
    def dim(self) -> int:
        return self.m_subspaces * self.d_sub

    def nbytes(self) -> int:
        return self.centroids.size * 4

    def lookup_table(self, query: np.ndarray) -> np.ndarray:
        """``T[m, j] = <query_m, centroid_{m,j}>`` in float64."""
        q = np.asarray(query, dtype=np.float64).reshape(self.m_subspaces, 1, self.d_sub)
        return (self.centroids.astype(np.float64) * q).sum(-1)


@dataclass
class PqCodeSet:
    ids: list[str]
    codes: np.ndarray  # (n, M) uint8
    k_centroids: int = 256
    _ranks: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.codes = np.ascontiguousarray(self.codes, dtype=np.uint8)
        if self.codes.ndim != 2 or self.codes.shape[0] != len(self.ids):
            raise DimensionMismatch(f"{len(self.ids)} ids for codes of shape {self.codes.shape}")
        if self.codes.size and int(self.codes.max()) >= self.k_centroids:
            raise ValueError("code byte exceeds K - 1")

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def tie_ranks(self) -> np.ndarray:
        if self._ranks is None:
            self._ranks = id_ranks(self.ids)
        return self._ranks

    def nbytes(self) -> int:
        return self.codes.size


def fit_pq(train: EmbeddingMatrix, M: int, K: int = 256, iters: int = 25, seed: int = 0) -> PqCodebook:
    """Independent k-means++ / Lloyd per subspace, one seeded stream per subspace."""
    if train.d % M:
        raise NotDivisible(f"dimension {train.d} not divisible by M={M}")
    if not 1 <= K <= 256:
        raise ValueError("K must be in 1..256")
    if train.n < K:
        raise TooFewTrainingPoints(f"{train.n} training vectors for K={K}")
    d_sub = train.d // M
    x = train.data.astype(np.float64)
    cents = np.empty((M, K, d_sub), dtype=np.float32)
    for m in range(M):
        res = kmeans(x[:, m * d_sub : (m + 1) * d_sub], K, iters, make_rng(seed, "pq", m))
        cents[m] = res.centroids
    return PqCodebook(cents)


def pq_encode(cb: PqCodebook, m: EmbeddingMatrix, chunk: int = 65536) -> PqCodeSet:
    if m.d != cb.dim:
        raise DimensionMismatch(f"embedding dim {m.d} != codebook dim {cb.dim}")
    codes = np.empty((m.n, cb.m_subspaces), dtype=np.uint8)
    c64 = cb.centroids.astype(np.float64)
    for s in range(0, m.n, chunk):
        block = m.data[s : s + chunk].astype(np.float64)
        for j in range(cb.m_subspaces):
            sub = block[:, j * cb.d_sub : (j + 1) * cb.d_sub]
            codes[s : s + chunk, j] = nearest(sub, c64[j])
    return PqCodeSet(m.ids, codes, cb.k_centroids)


def pq_decode(cb: PqCodebook, codes: PqCodeSet) -> EmbeddingMatrix:
    """Concatenate the selected centroids: the reconstruction scored at search time."""
    if codes.codes.shape[1] != cb.m_subspaces:
        raise DimensionMismatch("code width differs from M")
    parts = cb.centroids[np.arange(cb.m_subspaces), codes.codes]  # (n, M, d_sub)
    return EmbeddingMatrix(codes.ids, parts.reshape(codes.n, cb.dim))


def adc_scores(cb: PqCodebook, codes: PqCodeSet, query: np.ndarray) -> np.ndarray:
    query = np.asarray(query)
    if query.shape != (cb.dim,):
        raise DimensionMismatch(f"query of shape {query.shape} against dim {cb.dim}")
    if codes.codes.shape[1] != cb.m_subspaces:
        raise DimensionMismatch("code width differs from M")
    return kernels.adc_scores(codes.codes, cb.lookup_table(query))


def pq_search(cb: PqCodebook, codes: PqCodeSet, query: np.ndarray, k: int) -> list[tuple[str, float]]:
    if k < 1:
        raise ValueError("k must be >= 1")
    if codes.n == 0:
        raise EmptyIndex("PQ index holds no codes")
    s = adc_scores(cb, codes, query)
    top = select_smallest(-s, k, codes.tie_ranks)
    return [(codes.ids[i], float(s[i])) for i in top]


class PqIndex:
    def __init__(self, codebook: PqCodebook, codes: PqCodeSet, kind: str = "pq"):
        self.codebook = codebook
        self.codes = codes
        self.kind = kind

    @property
    def ids(self) -> list[str]:
        return self.codes.ids

    @property
    def dim(self) -> int:
        return self.codebook.dim

    def search(self, query: np.ndarray, k: int) -> list[tuple[str, float]]:
        return pq_search(self.codebook, self.codes, query, k)


def pq_layout(M: int, K: int, d_sub: int, n: int, id_bytes: int) -> dict:
    return {
        "header": _HEAD.size + _COUNT.size,
        "ids": id_bytes,
        "payload": M * K * d_sub * 4 + n * M,
    }


def save_pq(cb: PqCodebook, codes: PqCodeSet | None, path, seed: int = 0, kind: str = "pq") -> IndexManifest:
    """Write codebook (and codes, if any).  ``codes=None`` stores a bare codebook."""
    codes = codes or PqCodeSet([], np.empty((0, cb.m_subspaces), np.uint8), cb.k_centroids)
    M, K, ds = cb.m_subspaces, cb.k_centroids, cb.d_sub
    try:
        with open(path, "wb") as f:
            f.write(_HEAD.pack(PQ_MAGIC, M, K, ds))
            f.write(cb.centroids.astype("<f4").tobytes())
            f.write(_COUNT.pack(codes.n))
            f.write(encode_ids(codes.ids))
            f.write(codes.codes.tobytes())
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e
    layout = pq_layout(M, K, ds, codes.n, id_block_bytes(codes.ids))
    params = {"M": M, "K": K, "d_sub": ds, "nbits": int(np.ceil(np.log2(K))) if K > 1 else 0}
    return IndexManifest(kind, cb.dim, params, sum(layout.values()), seed, layout)


def load_pq(path, kind: str = "pq") -> PqIndex:
    try:
        with open(path, "rb") as f:
            head = f.read(_HEAD.size)
            if len(head) != _HEAD.size:
                raise MalformedHeader(f"{path}: too short")
            magic, M, K, ds = _HEAD.unpack(head)
            if magic != PQ_MAGIC:
                raise MalformedHeader(f"{path}: bad magic {magic!r}")
            nc = M * K * ds
            raw = f.read(nc * 4)
            if len(raw) != nc * 4:
                raise DimensionMismatch(f"{path}: codebook truncated")
            cents = np.frombuffer(raw, "<f4").reshape(M, K, ds).copy()
            (n,) = _COUNT.unpack(f.read(_COUNT.size))
            ids = read_ids(f, n, path)
            raw = f.read()
    except OSError as e:
        raise IoFailure(f"cannot read {path}: {e}") from e
    if len(raw) != n * M:
        raise DimensionMismatch(f"{path}: declared {n} codes of {M} bytes, found {len(raw)} bytes")
    codes = np.frombuffer(raw, np.uint8).reshape(n, M).copy()
    return PqIndex(PqCodebook(cents), PqCodeSet(ids, codes, K), kind)
