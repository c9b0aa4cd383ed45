"""Seeded toy training runs on clustered synthetic data.

Both runs start from a k-means PQ codebook and an identity query head, mine
negatives once against the untrained index (half hard, half uniform), and cycle
a fixed list of batches so every 50-step window of the trace covers one epoch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from lthkit.compress.pq import PqCodebook, PqCodeSet, fit_pq, pq_encode, pq_search
from lthkit.core import make_rng
from lthkit.lthtrain import LossConfig, TrainingBatch, TrainResult, compute_loss, reconstruct, train
from lthkit.synthetic import SyntheticTask, clustered_task


@dataclass
class ToyConfig:
    n_passages: int = 2000
    n_train_queries: int = 10_000
    n_eval_queries: int = 200
    d: int = 32
    n_clusters: int = 32
    M: int = 8
    K: int = 16
    batch_size: int = 200
    hard_negatives: int = 4
    random_negatives: int = 4
    depth: int = 50
    steps: int = 500
    seed: int = 0
    teacher_scale: float = 5.0


@dataclass
class ToyRun:
    config: ToyConfig
    result: TrainResult
    metrics: dict[str, float] = field(default_factory=dict)

    @property
    def losses(self) -> np.ndarray:
        return self.result.losses


@dataclass
class _Prepared:
    task: SyntheticTask
    codebook: PqCodebook
    codes: PqCodeSet
    train_x: np.ndarray
    train_pos: np.ndarray
    eval_ids: list[str]


def _prepare(cfg: ToyConfig) -> _Prepared:
    n_q = cfg.n_train_queries + cfg.n_eval_queries
    task = clustered_task(cfg.n_passages, n_q, cfg.d, cfg.n_clusters, cfg.seed)
    cb = fit_pq(task.corpus, cfg.M, cfg.K, seed=cfg.seed)
    codes = pq_encode(cb, task.corpus)
    row = {p: i for i, p in enumerate(task.corpus.ids)}
    train_ids = task.queries.ids[: cfg.n_train_queries]
    x = task.queries.data[: cfg.n_train_queries].astype(np.float64)
    pos = np.array([row[task.positives[q]] for q in train_ids])
    return _Prepared(task, cb, codes, x, pos, task.queries.ids[cfg.n_train_queries :])


def _negatives(prep: _Prepared, cfg: ToyConfig, idx: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    rec = reconstruct(prep.codebook.centroids.astype(np.float64), prep.codes.codes.astype(np.int64))
    scores = prep.train_x[idx] @ rec.T
    scores[np.arange(len(idx)), prep.train_pos[idx]] = -np.inf
    top = np.argsort(-scores, axis=1, kind="stable")[:, : cfg.depth]
    pick = np.stack([rng.choice(cfg.depth, cfg.hard_negatives, replace=False) for _ in idx])
    hard = np.take_along_axis(top, pick, axis=1)
    easy = rng.integers(0, cfg.n_passages, (len(idx), cfg.random_negatives))
    return np.concatenate([hard, easy], axis=1)


def _batches(prep: _Prepared, cfg: ToyConfig, with_teacher: bool) -> list[TrainingBatch]:
    rng = make_rng(cfg.seed, "toy-negatives")
    codes = prep.codes.codes.astype(np.int64)
    passages = prep.task.corpus.data.astype(np.float64)
    out = []
    for start in range(0, cfg.n_train_queries - cfg.batch_size + 1, cfg.batch_size):
        idx = np.arange(start, start + cfg.batch_size)
        negs = _negatives(prep, cfg, idx, rng)
        x, pos = prep.train_x[idx], prep.train_pos[idx]
        ce_pos = ce_neg = None
        if with_teacher:
            # teacher: exact uncompressed dot product on its own scale
            ce_pos = cfg.teacher_scale * (x * passages[pos]).sum(1)
            ce_neg = cfg.teacher_scale * np.einsum("bd,bjd->bj", x, passages[negs])
        out.append(TrainingBatch(x, codes[pos], codes[negs], ce_pos, ce_neg))
    return out


def pq_mrr(prep_or_task, codebook: PqCodebook, codes: PqCodeSet, head: np.ndarray, query_ids, k: int = 10) -> float:
    """MRR@k of each query's generating passage under ``pq_search``."""
    task = prep_or_task.task if isinstance(prep_or_task, _Prepared) else prep_or_task
    rr = []
    for q in query_ids:
        hits = [d for d, _ in pq_search(codebook, codes, task.queries.row(q) @ head.T, k)]
        pos = task.positives[q]
        rr.append(1.0 / (hits.index(pos) + 1) if pos in hits else 0.0)
    return float(np.mean(rr))


def _full_loss(kind: str, params: dict, batches: list[TrainingBatch]) -> float:
    return float(np.mean([compute_loss(kind, params, b).loss for b in batches]))


def jpq_toy_run(cfg: ToyConfig | None = None, learning_rate: float = 0.006) -> ToyRun:
    """Train head and centroids with the pairwise loss; report held-out MRR@10 before and after."""
    cfg = cfg or ToyConfig()
    prep = _prepare(cfg)
    batches = _batches(prep, cfg, with_teacher=False)
    params = {"head": np.eye(cfg.d), "centroids": prep.codebook.centroids}
    loss_cfg = LossConfig("jpq_infonce", learning_rate=learning_rate, batch_size=cfg.batch_size, steps=cfg.steps, seed=cfg.seed)
    res = train(loss_cfg, batches, params)
    trained = PqCodebook(res.params["centroids"].astype(np.float32))
    metrics = {
        "mrr_before": pq_mrr(prep, prep.codebook, prep.codes, np.eye(cfg.d), prep.eval_ids),
        "mrr_after": pq_mrr(prep, trained, prep.codes, res.params["head"], prep.eval_ids),
        "loss_before": _full_loss("jpq_infonce", params, batches),
        "loss_after": _full_loss("jpq_infonce", res.params, batches),
    }
    return ToyRun(cfg, res, metrics)


def margin_mse_toy_run(cfg: ToyConfig | None = None, learning_rate: float = 0.1) -> ToyRun:
    """Distil teacher score margins into head and centroids; report full-data loss before and after."""
    cfg = cfg or ToyConfig()
    prep = _prepare(cfg)
    batches = _batches(prep, cfg, with_teacher=True)
    params = {"head": np.eye(cfg.d), "centroids": prep.codebook.centroids}
    loss_cfg = LossConfig("margin_mse", learning_rate=learning_rate, batch_size=cfg.batch_size, steps=cfg.steps, seed=cfg.seed)
    res = train(loss_cfg, batches, params)
    metrics = {
        "loss_before": _full_loss("margin_mse", params, batches),
        "loss_after": _full_loss("margin_mse", res.params, batches),
    }
    return ToyRun(cfg, res, metrics)


def flattening_ratio(ma: np.ndarray) -> float:
    """Drop over the last third of a curve divided by the drop over the first third."""
    third = len(ma) // 3
    first = ma[0] - ma[third]
    last = ma[len(ma) - third - 1] - ma[-1]
    return float(last / first) if first > 0 else float("inf")
