"""Domain-adaptation data: generated-query pairs, hard negatives and margin-labelled triplets.

File formats (all line oriented):

* generated queries: JSON lines ``{"passage_id": ..., "queries": [...]}``
* teacher scores: TSV ``query-id<TAB>doc-id<TAB>score``
* triplets: JSON lines with the :class:`GplTriplet` fields
"""

from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from lthkit.core import make_rng, read_jsonl, write_jsonl
from lthkit.errors import (
    EmptyPassage,
    InvalidTriplet,
    IoFailure,
    MalformedLine,
    MissingScore,
    NotEnoughCandidates,
    UnknownPassageId,
)

Q_PER_PASSAGE = 3
MINING_DEPTH = 50
_TOKEN = re.compile(r"\w+", re.UNICODE)


class Searchable(Protocol):
    def search(self, query: np.ndarray, k: int) -> list[tuple[str, float]]: ...


# ---- generated queries -------------------------------------------------------------


@dataclass
class GeneratedQuerySet:
    queries: dict[str, list[str]] = field(default_factory=dict)  # passage id -> query strings

    def check_against(self, corpus: Mapping[str, object]) -> None:
        for pid in self.queries:
            if pid not in corpus:
                raise UnknownPassageId(f"generated queries reference unknown passage {pid!r}")

    def query_ids(self) -> dict[str, tuple[str, str]]:
        """Stable id for every generated query: ``qid -> (passage_id, text)``."""
        return {f"{pid}_q{j}": (pid, q) for pid, qs in self.queries.items() for j, q in enumerate(qs)}

    def __len__(self) -> int:
        return sum(len(v) for v in self.queries.values())


def synth_query_stub(corpus: Mapping[str, dict], q_per_passage: int = Q_PER_PASSAGE, seed: int = 0,
                     min_terms: int = 2, max_terms: int = 4) -> GeneratedQuerySet:
    """Keyword pseudo-queries: seeded term subsets of each passage, in passage order.

    A stand-in for a sequence-to-sequence query generator.  Each passage gets
    its own random stream so the output does not depend on corpus order.
    """
    if q_per_passage < 0:
        raise ValueError("q_per_passage must be >= 0")
    out = GeneratedQuerySet()
    if q_per_passage == 0:
        return out
    for pid, doc in corpus.items():
        terms = _TOKEN.findall(f"{doc.get('title', '')} {doc.get('text', '')}".lower())
        if not terms:
            raise EmptyPassage(f"passage {pid!r} has no terms")
        rng = make_rng(seed, "genq", pid)
        queries = []
        for _ in range(q_per_passage):
            size = int(rng.integers(min(min_terms, len(terms)), min(max_terms, len(terms)) + 1))
            keep = np.sort(rng.choice(len(terms), size, replace=False))
            queries.append(" ".join(terms[i] for i in keep))
        out.queries[pid] = queries
    return out


@dataclass(frozen=True)
class GenqPair:
    qid: str
    query: str
    pos_id: str


def build_genq_pairs(gen: GeneratedQuerySet, corpus: Mapping[str, object] | None = None) -> list[GenqPair]:
    if corpus is not None:
        gen.check_against(corpus)
    if len(gen) == 0:
        raise ValueError("generated query set is empty")
    return [GenqPair(qid, text, pid) for qid, (pid, text) in gen.query_ids().items()]


def in_batch_negatives(pairs: Sequence[GenqPair], batch_size: int) -> list[list[str]]:
    """For each pair, the other positives of its batch (its own passage excluded)."""
    out = []
    for start in range(0, len(pairs), batch_size):
        batch = pairs[start : start + batch_size]
        for p in batch:
            out.append([o.pos_id for o in batch if o is not p and o.pos_id != p.pos_id])
    return out


def read_generated(path) -> GeneratedQuerySet:
    gen = GeneratedQuerySet()
    for i, row in enumerate(read_jsonl(path), 1):
        if "passage_id" not in row or not isinstance(row.get("queries"), list):
            raise MalformedLine(path, i, "expected passage_id and a queries list")
        gen.queries[str(row["passage_id"])] = [str(q) for q in row["queries"]]
    return gen


def write_generated(gen: GeneratedQuerySet, path) -> None:
    write_jsonl(({"passage_id": pid, "queries": qs} for pid, qs in gen.queries.items()), path)


# ---- hard negatives ---------------------------------------------------------------


def mine_hard_negatives(
    indexes: Searchable | Sequence[Searchable],
    queries: Mapping[str, np.ndarray],
    positives: Mapping[str, Iterable[str]],
    depth: int = MINING_DEPTH,
    samples: int = 1,
    seed: int = 0,
) -> dict[str, list[str]]:
    """Uniformly sample ``samples`` negatives from each query's top-``depth`` pool.

    With several indexes the pools are unioned before sampling.  Known
    positives are removed first.  Queries are visited in sorted id order and
    each has its own random stream, so the result depends only on the seed.
    """
    if depth < samples:
        raise ValueError("depth must be >= samples")
    if not isinstance(indexes, (list, tuple)):
        indexes = [indexes]
    out = {}
    for qid in sorted(queries):
        vec = queries[qid]
        pos = set(positives.get(qid, ()))
        pool: dict[str, None] = {}
        for index in indexes:
            for did, _ in index.search(vec, depth):
                if did not in pos:
                    pool.setdefault(did, None)
        cands = list(pool)
        if len(cands) < samples:
            raise NotEnoughCandidates(f"query {qid!r}: {len(cands)} candidates after removing positives, need {samples}")
        rng = make_rng(seed, "mine", qid)
        out[qid] = [cands[i] for i in rng.choice(len(cands), samples, replace=False)]
    return out


# ---- teacher scores and triplets -------------------------------------------------


def read_ce_scores(path) -> dict[tuple[str, str], float]:
    scores = {}
    try:
        f = open(path, encoding="utf-8")
    except OSError as e:
        raise IoFailure(str(e)) from e
    with f:
        for i, line in enumerate(f, 1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise MalformedLine(path, i, "expected query-id, doc-id, score")
            try:
                s = float(parts[2])
            except ValueError:
                if i == 1:
                    continue  # header
                raise MalformedLine(path, i, f"score {parts[2]!r} is not a number") from None
            if not math.isfinite(s):
                raise MalformedLine(path, i, "score is not finite")
            scores[(parts[0], parts[1])] = s
    return scores


def write_ce_scores(scores: Mapping[tuple[str, str], float], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for (q, d), s in scores.items():
            f.write(f"{q}\t{d}\t{float(s)!r}\n")


@dataclass(frozen=True)
class GplTriplet:
    query: str
    pos_id: str
    neg_id: str
    ce_pos: float
    ce_neg: float
    margin: float

    def __post_init__(self):
        if self.pos_id == self.neg_id:
            raise InvalidTriplet(f"{self.query}: positive and negative are both {self.pos_id!r}")
        if self.margin != self.ce_pos - self.ce_neg:
            raise InvalidTriplet(f"{self.query}: margin is not ce_pos - ce_neg")

    @classmethod
    def from_scores(cls, query: str, pos_id: str, neg_id: str, ce_pos: float, ce_neg: float) -> "GplTriplet":
        ce_pos, ce_neg = float(ce_pos), float(ce_neg)
        return cls(query, pos_id, neg_id, ce_pos, ce_neg, ce_pos - ce_neg)


@dataclass
class TripletReport:
    emitted: int = 0
    missing_score: int = 0
    invalid: int = 0


def build_gpl_triplets(
    positives: Mapping[str, str | Iterable[str]],
    negatives: Mapping[str, Sequence[str]],
    ce_scores: Mapping[tuple[str, str], float],
    strict: bool = True,
) -> tuple[list[GplTriplet], TripletReport]:
    """One triplet per (query, positive, negative) with the teacher margin.

    ``positives`` maps a generated query id to its passage (or passages).
    Negatives equal to a positive of the same query are rejected and counted.
    Missing teacher scores raise :class:`MissingScore` when ``strict``,
    otherwise the triplet is skipped and counted.
    """
    out: list[GplTriplet] = []
    rep = TripletReport()
    for qid in sorted(negatives):
        pos = positives.get(qid)
        if pos is None:
            raise UnknownPassageId(f"no positive passage for query {qid!r}")
        pos_ids = [pos] if isinstance(pos, str) else list(pos)
        for p in pos_ids:
            for n in negatives[qid]:
                if n in pos_ids:
                    rep.invalid += 1
                    continue
                sp, sn = ce_scores.get((qid, p)), ce_scores.get((qid, n))
                if sp is None or sn is None:
                    if strict:
                        missing = (qid, p) if sp is None else (qid, n)
                        raise MissingScore(f"no teacher score for {missing}")
                    rep.missing_score += 1
                    continue
                out.append(GplTriplet.from_scores(qid, p, n, sp, sn))
    rep.emitted = len(out)
    return out, rep


def write_triplets(triplets: Iterable[GplTriplet], path) -> None:
    write_jsonl((asdict(t) for t in triplets), path)


def read_triplets(path) -> list[GplTriplet]:
    out = []
    for i, row in enumerate(read_jsonl(path), 1):
        try:
            out.append(GplTriplet(**row))
        except TypeError as e:
            raise MalformedLine(path, i, str(e)) from None
    return out
