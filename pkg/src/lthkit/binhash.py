"""Sign hashing, packed codes, Hamming candidate generation and dot-product rerank.

Bit convention: bit ``i`` of byte ``j`` (LSB first) holds dimension ``8j+i``;
1 means +1 and 0 means -1.  ``sign(0)`` is +1.

Index file (``BIN1``), little-endian::

    b"BIN1" | u32 n | u32 d_bits | n newline-terminated ids | packed codes[n*d_bits/8]
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from lthkit import kernels
from lthkit.core import (
    EmbeddingMatrix,
    IndexManifest,
    encode_ids,
    id_block_bytes,
    id_ranks,
    read_ids,
    select_smallest,
)
from lthkit.errors import (
    DimensionMismatch,
    DimensionNotByteAligned,
    EmptyIndex,
    IoFailure,
    MalformedHeader,
    UnknownCandidateId,
)

BIN_MAGIC = b"BIN1"
_HEAD = struct.Struct("<4sII")
DEFAULT_K1 = 1000


@dataclass
class BinaryCodeSet:
    ids: list[str]
    bits: np.ndarray  # (n, d_bits // 8) uint8
    d_bits: int
    _ranks: np.ndarray | None = field(default=None, repr=False, compare=False)
    _rows: dict | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.d_bits % 8:
            raise DimensionNotByteAligned(f"d_bits={self.d_bits} is not a multiple of 8")
        self.bits = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if self.bits.shape != (len(self.ids), self.d_bits // 8):
            raise DimensionMismatch(f"bits of shape {self.bits.shape} for {len(self.ids)} ids x {self.d_bits} bits")

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def tie_ranks(self) -> np.ndarray:
        if self._ranks is None:
            self._ranks = id_ranks(self.ids)
        return self._ranks

    def row_of(self, doc_id: str) -> int:
        if self._rows is None:
            self._rows = {d: i for i, d in enumerate(self.ids)}
        try:
            return self._rows[doc_id]
        except KeyError:
            raise UnknownCandidateId(f"candidate {doc_id!r} not in the binary index") from None

    def signs(self, rows=None) -> np.ndarray:
        return unpack_signs(self.bits if rows is None else self.bits[rows], self.d_bits)

    def nbytes(self) -> int:
        return self.bits.size


def pack_signs(x: np.ndarray) -> np.ndarray:
    """Pack ``x >= 0`` row-wise, LSB first."""
    x = np.atleast_2d(x)
    if x.shape[1] % 8:
        raise DimensionNotByteAligned(f"dimension {x.shape[1]} is not a multiple of 8")
    return np.packbits(x >= 0, axis=1, bitorder="little")


def unpack_signs(bits: np.ndarray, d_bits: int) -> np.ndarray:
    """Inverse of :func:`pack_signs` into a float64 {-1, +1} matrix."""
    b = np.unpackbits(np.atleast_2d(bits), axis=1, count=d_bits, bitorder="little")
    return b.astype(np.float64) * 2.0 - 1.0


def hash_encode(m: EmbeddingMatrix, chunk: int = 65536) -> BinaryCodeSet:
    if m.d % 8:
        raise DimensionNotByteAligned(f"dimension {m.d} is not a multiple of 8")
    bits = np.empty((m.n, m.d // 8), dtype=np.uint8)
    for s in range(0, m.n, chunk):
        bits[s : s + chunk] = pack_signs(m.data[s : s + chunk])
    return BinaryCodeSet(m.ids, bits, m.d)


def hash_vector(x: np.ndarray) -> np.ndarray:
    return pack_signs(np.asarray(x).reshape(1, -1))[0]


def hamming_topk(query_code: np.ndarray, corpus: BinaryCodeSet, k1: int) -> list[tuple[str, int]]:
    """``min(k1, n)`` nearest codes by Hamming distance; ties by ascending id."""
    if k1 < 1:
        raise ValueError("k1 must be >= 1")
    if corpus.n == 0:
        raise EmptyIndex("binary index is empty")
    query_code = np.asarray(query_code, dtype=np.uint8)
    if query_code.shape != (corpus.d_bits // 8,):
        raise DimensionMismatch(f"query code of {query_code.size} bytes for {corpus.d_bits}-bit index")
    dist = kernels.hamming_distances(corpus.bits, query_code)
    top = select_smallest(dist, k1, corpus.tie_ranks)
    return [(corpus.ids[i], int(dist[i])) for i in top]


def rerank_dot(
    query_embedding: np.ndarray, candidates: list[tuple[str, int]], corpus: BinaryCodeSet, k: int
) -> list[tuple[str, float]]:
    """Order candidates by ``<e(q), h(p)>`` with h(p) the stored ±1 code."""
    q = np.asarray(query_embedding, dtype=np.float64)
    if q.shape != (corpus.d_bits,):
        raise DimensionMismatch(f"query of shape {q.shape} for {corpus.d_bits}-bit index")
    if not candidates:
        return []
    rows = np.array([corpus.row_of(c[0]) for c in candidates], dtype=np.int64)
    scores = corpus.signs(rows) @ q
    top = select_smallest(-scores, k, corpus.tie_ranks[rows])
    return [(corpus.ids[rows[i]], float(scores[i])) for i in top]


def two_stage_search(
    query_embedding: np.ndarray, corpus: BinaryCodeSet, k: int, k1: int = DEFAULT_K1
) -> list[tuple[str, float]]:
    if k > k1:
        raise ValueError(f"k={k} exceeds candidate depth k1={k1}")
    cands = hamming_topk(hash_vector(query_embedding), corpus, k1)
    return rerank_dot(query_embedding, cands, corpus, k)


class BinaryIndex:
    def __init__(self, codes: BinaryCodeSet, k1: int = DEFAULT_K1):
        self.codes = codes
        self.k1 = k1

    @property
    def ids(self) -> list[str]:
        return self.codes.ids

    @property
    def dim(self) -> int:
        return self.codes.d_bits

    def search(self, query: np.ndarray, k: int) -> list[tuple[str, float]]:
        return two_stage_search(query, self.codes, k, max(k, self.k1))


def bin_layout(n: int, d_bits: int, id_bytes: int) -> dict:
    return {"header": _HEAD.size, "ids": id_bytes, "payload": n * (d_bits // 8)}


def save_binary(codes: BinaryCodeSet, path, seed: int = 0) -> IndexManifest:
    try:
        with open(path, "wb") as f:
            f.write(_HEAD.pack(BIN_MAGIC, codes.n, codes.d_bits))
            f.write(encode_ids(codes.ids))
            f.write(codes.bits.tobytes())
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e
    layout = bin_layout(codes.n, codes.d_bits, id_block_bytes(codes.ids))
    return IndexManifest("binary", codes.d_bits, {"d_bits": codes.d_bits}, sum(layout.values()), seed, layout)


def load_binary(path) -> BinaryCodeSet:
    try:
        with open(path, "rb") as f:
            head = f.read(_HEAD.size)
            if len(head) != _HEAD.size:
                raise MalformedHeader(f"{path}: too short")
            magic, n, d_bits = _HEAD.unpack(head)
            if magic != BIN_MAGIC:
                raise MalformedHeader(f"{path}: bad magic {magic!r}")
            if d_bits % 8:
                raise DimensionNotByteAligned(f"{path}: d_bits={d_bits}")
            ids = read_ids(f, n, path)
            raw = f.read()
    except OSError as e:
        raise IoFailure(f"cannot read {path}: {e}") from e
    if len(raw) != n * d_bits // 8:
        raise DimensionMismatch(f"{path}: declared {n}x{d_bits} bits, found {len(raw)} payload bytes")
    return BinaryCodeSet(ids, np.frombuffer(raw, np.uint8).reshape(n, d_bits // 8).copy(), d_bits)
