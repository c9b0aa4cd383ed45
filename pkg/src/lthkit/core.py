"""Data model, file formats and seeded randomness shared by every module.

Embedding container (``EMB1``)::

    b"EMB1" | u32 n | u32 d | u8 dtype | n newline-terminated UTF-8 ids | payload

all integers little-endian.  dtype 0 is float32 (``n*d*4`` payload bytes);
codes 1 (float16) and 2 (per-dimension uint8) are written by
:mod:`lthkit.compress.scalar` through the same container.
"""

from __future__ import annotations

import json
import math
import struct
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from lthkit.errors import (
    DimensionMismatch,
    DuplicateId,
    IoFailure,
    MalformedHeader,
    MalformedLine,
    NonFiniteValue,
)

EMB_MAGIC = b"EMB1"
DTYPE_F32 = 0
DTYPE_F16 = 1
DTYPE_U8 = 2

_EMB_HEADER = struct.Struct("<4sIIB")
MB = 10**6


# --------------------------------------------------------------------------
# randomness


def make_rng(seed: int, *stream) -> np.random.Generator:
    """Generator derived from ``seed`` and an optional stream path.

    Stream components may be ints or strings; strings are hashed with CRC32 so
    that e.g. ``make_rng(7, "pq", 3)`` is stable across processes.
    """
    if seed < 0:
        raise ValueError("seed must be non-negative")
    keys = [seed]
    for part in stream:
        keys.append(zlib.crc32(part.encode()) if isinstance(part, str) else int(part))
    return np.random.default_rng(np.random.SeedSequence(keys))


# --------------------------------------------------------------------------
# ranking helpers


def id_ranks(ids: list[str]) -> np.ndarray:
    """rank[i] = position of ids[i] in ascending (code point) id order."""
    order = np.argsort(np.asarray(ids, dtype=str), kind="stable")
    ranks = np.empty(len(ids), dtype=np.int64)
    ranks[order] = np.arange(len(ids))
    return ranks


def select_smallest(key: np.ndarray, k: int, tie_rank: np.ndarray) -> np.ndarray:
    """Row indices of the ``k`` smallest keys; equal keys ordered by ``tie_rank``.

    Exact under ties at the cut-off: every row tied with the k-th key is
    considered before truncating.
    """
    n = key.shape[0]
    k = min(k, n)
    if k <= 0:
        return np.empty(0, dtype=np.int64)
    if k < n:
        kth = np.partition(key, k - 1)[k - 1]
        cand = np.flatnonzero(key <= kth)
    else:
        cand = np.arange(n)
    order = np.lexsort((tie_rank[cand], key[cand]))
    return cand[order[:k]]


# --------------------------------------------------------------------------
# domain types


@dataclass
class EmbeddingMatrix:
    ids: list[str]
    data: np.ndarray

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 2:
            raise DimensionMismatch(f"expected a 2-D matrix, got shape {self.data.shape}")
        if self.data.shape[1] < 1:
            raise DimensionMismatch("dimension must be positive")
        self.ids = [str(i) for i in self.ids]
        if len(self.ids) != self.data.shape[0]:
            raise DimensionMismatch(f"{len(self.ids)} ids for {self.data.shape[0]} rows")
        if len(set(self.ids)) != len(self.ids):
            raise DuplicateId("embedding ids must be unique")
        if not np.isfinite(self.data).all():
            raise NonFiniteValue("embedding matrix contains NaN or Inf")
        self._index = None

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    def index_of(self, doc_id: str) -> int:
        if self._index is None:
            self._index = {d: i for i, d in enumerate(self.ids)}
        return self._index[doc_id]

    def row(self, doc_id: str) -> np.ndarray:
        return self.data[self.index_of(doc_id)]

    def subset(self, ids: Iterable[str]) -> "EmbeddingMatrix":
        ids = list(ids)
        return EmbeddingMatrix(ids, self.data[[self.index_of(i) for i in ids]])


@dataclass
class Qrels:
    """Graded judgments: ``judgments[query_id][doc_id] = grade``."""

    judgments: dict[str, dict[str, int]] = field(default_factory=dict)

    @classmethod
    def from_triples(cls, triples: Iterable[tuple[str, str, int]]) -> "Qrels":
        q = cls()
        for qid, did, grade in triples:
            q.add(qid, did, grade)
        return q

    def add(self, qid: str, did: str, grade: int) -> None:
        if grade < 0:
            raise ValueError(f"negative relevance grade for ({qid}, {did})")
        docs = self.judgments.setdefault(qid, {})
        if did in docs:
            raise ValueError(f"duplicate judgment for ({qid}, {did})")
        docs[did] = int(grade)

    def relevant(self, qid: str) -> dict[str, int]:
        return {d: g for d, g in self.judgments.get(qid, {}).items() if g > 0}

    def __len__(self) -> int:
        return sum(len(v) for v in self.judgments.values())


@dataclass
class RunResult:
    """Per-query rankings, each a list of ``(doc_id, score)`` best first."""

    rankings: dict[str, list[tuple[str, float]]] = field(default_factory=dict)

    def __post_init__(self):
        for qid, ranked in self.rankings.items():
            self._check(qid, ranked)

    @staticmethod
    def _check(qid, ranked):
        seen = set()
        prev = math.inf
        for did, score in ranked:
            if did in seen:
                raise ValueError(f"duplicate doc {did!r} in ranking for {qid!r}")
            if score > prev:
                raise ValueError(f"scores increase within ranking for {qid!r}")
            seen.add(did)
            prev = score

    def add(self, qid: str, ranked: list[tuple[str, float]]) -> None:
        ranked = [(str(d), float(s)) for d, s in ranked]
        self._check(qid, ranked)
        self.rankings[qid] = ranked


INDEX_KINDS = ("flat-f32", "flat-fp16", "flat-fp8", "pca", "pq", "binary", "jpq")


@dataclass
class IndexManifest:
    """Description of one index file.

    ``layout`` splits ``size_bytes`` into ``header``, ``ids`` and ``payload``
    byte counts; :meth:`index_bytes` excludes the external-id block, which is
    what vector-only index formats (and published index sizes) count.
    """

    index_kind: str
    dim: int
    compression_params: dict
    size_bytes: int
    created_with_seed: int = 0
    layout: dict = field(default_factory=dict)
    command: str | None = None
    config: dict | None = None

    def __post_init__(self):
        if self.index_kind not in INDEX_KINDS:
            raise ValueError(f"unknown index kind {self.index_kind!r}")
        if self.layout and sum(self.layout.values()) != self.size_bytes:
            raise ValueError("layout does not add up to size_bytes")

    def index_bytes(self) -> int:
        return self.size_bytes - self.layout.get("ids", 0)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "IndexManifest":
        return cls(**json.loads(text))

    def save(self, path) -> Path:
        out = manifest_path(path)
        out.write_text(self.to_json())
        return out

    @classmethod
    def load(cls, path) -> "IndexManifest":
        return cls.from_json(manifest_path(path).read_text())


def manifest_path(path) -> Path:
    path = Path(path)
    if path.name.endswith(".manifest.json"):
        return path
    return path.with_name(path.name + ".manifest.json")


# --------------------------------------------------------------------------
# id blocks


def encode_ids(ids: list[str]) -> bytes:
    for i in ids:
        if "\n" in i:
            raise ValueError(f"id {i!r} contains a newline")
    return "".join(f"{i}\n" for i in ids).encode("utf-8")


def id_block_bytes(ids: list[str]) -> int:
    return sum(len(i.encode("utf-8")) + 1 for i in ids)


def read_ids(f, n: int, path) -> list[str]:
    ids = []
    for _ in range(n):
        line = f.readline()
        if not line.endswith(b"\n"):
            raise MalformedHeader(f"{path}: id block truncated after {len(ids)} of {n} ids")
        ids.append(line[:-1].decode("utf-8"))
    if len(set(ids)) != n:
        raise DuplicateId(f"{path}: duplicate ids in id block")
    return ids


# --------------------------------------------------------------------------
# embedding container


def emb_layout(n: int, d: int, id_bytes: int, dtype: int = DTYPE_F32) -> dict:
    """Byte layout of an ``EMB1`` file, computed from header fields alone."""
    if dtype == DTYPE_F32:
        payload = n * d * 4
    elif dtype == DTYPE_F16:
        payload = n * d * 2
    elif dtype == DTYPE_U8:
        payload = 2 * d * 4 + n * d
    else:
        raise ValueError(f"unknown dtype code {dtype}")
    return {"header": _EMB_HEADER.size, "ids": id_bytes, "payload": payload}


def write_emb_container(path, ids: list[str], d: int, dtype: int, payload: bytes) -> dict:
    layout = emb_layout(len(ids), d, id_block_bytes(ids), dtype)
    if len(payload) != layout["payload"]:
        raise DimensionMismatch(f"payload of {len(payload)} bytes, layout wants {layout['payload']}")
    try:
        with open(path, "wb") as f:
            f.write(_EMB_HEADER.pack(EMB_MAGIC, len(ids), d, dtype))
            f.write(encode_ids(ids))
            f.write(payload)
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e
    return layout


def read_emb_container(path) -> tuple[list[str], int, int, bytes]:
    """Return ``(ids, d, dtype, payload)`` after validating sizes."""
    try:
        with open(path, "rb") as f:
            head = f.read(_EMB_HEADER.size)
            if len(head) != _EMB_HEADER.size:
                raise MalformedHeader(f"{path}: file too short for header")
            magic, n, d, dtype = _EMB_HEADER.unpack(head)
            if magic != EMB_MAGIC:
                raise MalformedHeader(f"{path}: bad magic {magic!r}")
            if d == 0:
                raise MalformedHeader(f"{path}: dimension 0")
            ids = read_ids(f, n, path)
            payload = f.read()
    except OSError as e:
        raise IoFailure(f"cannot read {path}: {e}") from e
    try:
        want = emb_layout(n, d, 0, dtype)["payload"]
    except ValueError:
        raise MalformedHeader(f"{path}: unknown dtype code {dtype}") from None
    if len(payload) != want:
        raise DimensionMismatch(f"{path}: declared {n}x{d} needs {want} payload bytes, found {len(payload)}")
    return ids, d, dtype, payload


def read_embeddings(path) -> EmbeddingMatrix:
    ids, d, dtype, payload = read_emb_container(path)
    if dtype != DTYPE_F32:
        raise MalformedHeader(f"{path}: dtype {dtype} is a quantized payload; load it as a flat index")
    data = np.frombuffer(payload, dtype="<f4").reshape(len(ids), d)
    if not np.isfinite(data).all():
        raise NonFiniteValue(f"{path}: payload contains NaN or Inf")
    return EmbeddingMatrix(ids, data.copy())


def write_embeddings(m: EmbeddingMatrix, path, seed: int = 0) -> IndexManifest:
    payload = m.data.astype("<f4", copy=False).tobytes()
    layout = write_emb_container(path, m.ids, m.d, DTYPE_F32, payload)
    return IndexManifest("flat-f32", m.d, {}, sum(layout.values()), seed, layout)


# --------------------------------------------------------------------------
# qrels and runs


def _parse_grade(text: str, path, lineno: int) -> int:
    try:
        grade = int(text)
    except ValueError:
        raise MalformedLine(path, lineno, f"relevance grade {text!r} is not an integer") from None
    if grade < 0:
        raise MalformedLine(path, lineno, f"negative relevance grade {grade}")
    return grade


def read_qrels(path) -> Qrels:
    """Read BEIR TSV (``query-id, corpus-id, score``; header optional) or TREC qrels."""
    qrels = Qrels()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            tab = line.split("\t")
            if len(tab) == 3:
                qid, did, grade = tab
                if lineno == 1 and not grade.strip().lstrip("-").isdigit():
                    continue  # header
            else:
                cols = line.split()
                if len(cols) != 4:
                    raise MalformedLine(path, lineno, f"expected 3 tab-separated or 4 TREC columns, got {len(cols)}")
                qid, _, did, grade = cols
            grade = _parse_grade(grade.strip(), path, lineno)
            try:
                qrels.add(qid, did, grade)
            except ValueError as e:
                raise MalformedLine(path, lineno, str(e)) from None
    return qrels


def write_qrels(qrels: Qrels, path, fmt: str = "tsv") -> None:
    with open(path, "w", encoding="utf-8") as f:
        if fmt == "tsv":
            f.write("query-id\tcorpus-id\tscore\n")
            for qid, docs in qrels.judgments.items():
                for did, g in docs.items():
                    f.write(f"{qid}\t{did}\t{g}\n")
        elif fmt == "trec":
            for qid, docs in qrels.judgments.items():
                for did, g in docs.items():
                    f.write(f"{qid} 0 {did} {g}\n")
        else:
            raise ValueError(f"unknown qrels format {fmt!r}")


def write_run(run: RunResult, path, tag: str = "lthkit") -> None:
    """TREC six-column run: ``qid Q0 docid rank score tag``."""
    with open(path, "w", encoding="utf-8") as f:
        for qid, ranked in run.rankings.items():
            for rank, (did, score) in enumerate(ranked, start=1):
                f.write(f"{qid} Q0 {did} {rank} {float(score)!r} {tag}\n")


def read_run(path) -> RunResult:
    rankings: dict[str, list[tuple[str, float]]] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            cols = line.split()
            if len(cols) != 6:
                raise MalformedLine(path, lineno, f"expected 6 columns, got {len(cols)}")
            qid, _, did, _, score, _ = cols
            try:
                rankings.setdefault(qid, []).append((did, float(score)))
            except ValueError:
                raise MalformedLine(path, lineno, f"score {score!r} is not a number") from None
    try:
        return RunResult(rankings)
    except ValueError as e:
        raise MalformedLine(path, 0, str(e)) from None


# --------------------------------------------------------------------------
# BEIR-style JSON lines


def read_jsonl(path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise MalformedLine(path, lineno, f"invalid JSON: {e.msg}") from None
    return rows


def write_jsonl(rows: Iterable[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, ensure_ascii=False) + "\n")


def read_corpus(path) -> dict[str, dict]:
    """``{"_id", "title", "text"}`` records keyed by id (queries use the same shape)."""
    out = {}
    for lineno, row in enumerate(read_jsonl(path), start=1):
        if "_id" not in row:
            raise MalformedLine(path, lineno, "record without _id")
        out[str(row["_id"])] = {"title": row.get("title", ""), "text": row.get("text", "")}
    return out


def write_corpus(corpus: dict[str, dict], path) -> None:
    write_jsonl(({"_id": k, "title": v.get("title", ""), "text": v.get("text", "")} for k, v in corpus.items()), path)


def format_mb(n_bytes: int) -> str:
    return f"{n_bytes / MB:.2f} MB"
