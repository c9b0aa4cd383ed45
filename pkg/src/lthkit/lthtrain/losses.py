"""Ranking losses with analytic gradients.

Parameters live in a plain dict: ``"head"`` is the ``d_out x d_in`` query head
and, for PQ-backed batches, ``"centroids"`` is the ``M x K x d_sub`` codebook.
Everything is float64 so the finite-difference checks are meaningful.

Reductions: hinge, InfoNCE and MarginMSE terms are averaged over queries
(MarginMSE over triplets); the pairwise JPQ loss is summed over the batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from lthkit.errors import DimensionMismatch, MissingMarginLabel


@dataclass
class TrainingBatch:
    """One batch of queries with a positive and ``J >= 1`` negatives each.

    ``positives``/``negatives`` hold passage input rows (``B x d_in`` and
    ``B x J x d_in``) for the binary model, or PQ codes (``B x M`` and
    ``B x J x M``) for the PQ model.  ``ce_pos``/``ce_neg`` are teacher
    scores for MarginMSE.
    """

    queries: np.ndarray
    positives: np.ndarray
    negatives: np.ndarray
    ce_pos: np.ndarray | None = None
    ce_neg: np.ndarray | None = None

    def __post_init__(self):
        self.queries = np.asarray(self.queries, dtype=np.float64)
        self.positives = np.asarray(self.positives)
        self.negatives = np.asarray(self.negatives)
        if self.is_pq:
            self.positives = self.positives.astype(np.int64)
            self.negatives = self.negatives.astype(np.int64)
        else:
            self.positives = self.positives.astype(np.float64)
            self.negatives = self.negatives.astype(np.float64)
        b = self.queries.shape[0]
        if self.positives.shape[0] != b or self.negatives.shape[0] != b:
            raise DimensionMismatch("queries, positives and negatives disagree on batch size")
        if self.negatives.ndim != self.positives.ndim + 1 or self.negatives.shape[1] < 1:
            raise DimensionMismatch("every query needs at least one negative")
        if self.negatives.shape[2:] != self.positives.shape[1:]:
            raise DimensionMismatch("negatives and positives have different widths")
        if self.ce_pos is not None:
            self.ce_pos = np.asarray(self.ce_pos, dtype=np.float64)
            self.ce_neg = np.asarray(self.ce_neg, dtype=np.float64)
            if self.ce_pos.shape != (b,) or self.ce_neg.shape != self.negatives.shape[:2]:
                raise DimensionMismatch("margin labels must be B and B x J")

    @property
    def is_pq(self) -> bool:
        return np.issubdtype(self.positives.dtype, np.integer)

    @property
    def size(self) -> int:
        return self.queries.shape[0]

    @property
    def n_negatives(self) -> int:
        return self.negatives.shape[1]


@dataclass
class LossResult:
    loss: float
    grads: dict[str, np.ndarray]
    components: dict[str, float] = field(default_factory=dict)


def relaxed_hash(x: np.ndarray, beta: float) -> np.ndarray:
    if not beta > 0:
        raise ValueError("beta must be > 0")
    return np.tanh(beta * np.asarray(x, dtype=np.float64))


def relaxed_hash_grad(x: np.ndarray, beta: float) -> np.ndarray:
    """Elementwise derivative of ``tanh(beta x)``."""
    t = relaxed_hash(x, beta)
    return beta * (1.0 - t * t)


def hard_sign(x: np.ndarray) -> np.ndarray:
    # zero maps to +1, same convention as the bit packer
    return np.where(x >= 0, 1.0, -1.0)


def _log_softmax_first(scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row ``-log softmax(scores)[0]`` and the softmax, max-subtracted.

    The row maximum contributes exactly 1 to the partition sum, so the rest
    goes through ``log1p``; this keeps precision when the loss is near zero.
    """
    rows = np.arange(scores.shape[0])
    arg = scores.argmax(axis=1)
    top = scores[rows, arg][:, None]
    z = np.exp(scores - top)
    others = z.copy()
    others[rows, arg] = 0.0
    rest = others.sum(axis=1)
    nll = np.log1p(rest) + (top[:, 0] - scores[:, 0])
    return nll, z / (1.0 + rest)[:, None]


# ---- binary (sign-hash) model --------------------------------------------------


def rank_loss(params: dict, batch: TrainingBatch, beta: float, alpha: float = 2.0) -> LossResult:
    """Hinge ranking loss on relaxed hashes of queries and passages.

    Both sides go through the shared head: ``h~(x) = tanh(beta W x)``.  The
    per-query loss sums ``max(0, alpha - (h~q.h~p+ - h~q.h~p-_j))`` over
    negatives; the batch loss is the mean over queries.
    """
    w = params["head"]
    b = batch.size
    uq = batch.queries @ w.T
    up = batch.positives @ w.T
    un = batch.negatives @ w.T  # B x J x d_out
    hq, hp, hn = (relaxed_hash(u, beta) for u in (uq, up, un))
    margin = np.einsum("bd,bjd->bj", hq, hp[:, None, :] - hn)
    slack = alpha - margin
    active = (slack > 0).astype(np.float64)  # subgradient 0 at the kink
    loss = float((slack * active).sum() / b)

    # dL/dmargin = -active / b
    g = -active / b
    d_hq = g.sum(1)[:, None] * hp - np.einsum("bj,bjd->bd", g, hn)
    d_hp = g.sum(1)[:, None] * hq
    d_hn = -g[:, :, None] * hq[:, None, :]
    d_uq = d_hq * beta * (1 - hq * hq)
    d_up = d_hp * beta * (1 - hp * hp)
    d_un = d_hn * beta * (1 - hn * hn)
    grad = d_uq.T @ batch.queries + d_up.T @ batch.positives
    grad += np.einsum("bjd,bji->di", d_un, batch.negatives)
    return LossResult(loss, {"head": grad}, {"rank": loss})


def infonce_loss(params: dict, batch: TrainingBatch) -> LossResult:
    """Softmax cross-entropy of the positive against all negatives.

    Queries are embedded but not hashed, ``e(q) = W x``; passages use the hard
    hash ``sign(W x)``, held constant, so the gradient flows through ``e(q)``.
    """
    w = params["head"]
    e = batch.queries @ w.T
    hp = hard_sign(batch.positives @ w.T)
    hn = hard_sign(batch.negatives @ w.T)
    b = batch.size
    scores = np.einsum("bd,bjd->bj", e, np.concatenate([hp[:, None, :], hn], axis=1))
    nll, soft = _log_softmax_first(scores)
    loss = float(nll.mean())
    ds = soft.copy()
    ds[:, 0] -= 1.0
    ds /= b
    d_e = ds[:, :1] * hp + np.einsum("bj,bjd->bd", ds[:, 1:], hn)
    return LossResult(loss, {"head": d_e.T @ batch.queries}, {"infonce": loss})


def bpr_loss(params: dict, batch: TrainingBatch, beta: float, alpha: float = 2.0) -> LossResult:
    r = rank_loss(params, batch, beta, alpha)
    c = infonce_loss(params, batch)
    return LossResult(
        r.loss + c.loss,
        {"head": r.grads["head"] + c.grads["head"]},
        {"rank": r.loss, "infonce": c.loss},
    )


# ---- PQ model --------------------------------------------------------------------


def reconstruct(centroids: np.ndarray, codes: np.ndarray) -> np.ndarray:
    """Decode ``(..., M)`` codes into ``(..., M * d_sub)`` vectors."""
    m = centroids.shape[0]
    parts = centroids[np.arange(m), codes]  # (..., M, d_sub)
    return parts.reshape(*codes.shape[:-1], -1)


def _scatter_centroid_grad(shape, codes: np.ndarray, coef: np.ndarray, e: np.ndarray) -> np.ndarray:
    """Accumulate ``coef * e_m`` into ``centroids[m, codes[..., m]]``.

    ``codes`` is ``(N, M)``, ``coef`` is ``(N,)`` and ``e`` is ``(N, M*d_sub)``.
    """
    m_sub, k, d_sub = shape
    grad = np.zeros(shape)
    contrib = coef[:, None, None] * e.reshape(-1, m_sub, d_sub)
    for m in range(m_sub):
        np.add.at(grad[m], codes[:, m], contrib[:, m])
    return grad


def jpq_loss(params: dict, batch: TrainingBatch) -> LossResult:
    """Pairwise softmax loss ``-log sigmoid(s+ - s-)`` summed over every (query, negative) pair.

    Passages are reconstructed from the current centroids through their fixed
    codes; gradients reach the query head and only the centroids those codes
    reference.
    """
    w, cents = params["head"], params["centroids"]
    e = batch.queries @ w.T
    hp = reconstruct(cents, batch.positives)
    hn = reconstruct(cents, batch.negatives)
    gap = np.einsum("bd,bjd->bj", e, hn - hp[:, None, :])
    loss = float(np.logaddexp(0.0, gap).sum())
    g = 0.5 * (1.0 + np.tanh(0.5 * gap))  # sigmoid, overflow-free
    d_e = np.einsum("bj,bjd->bd", g, hn) - g.sum(1)[:, None] * hp
    j = batch.n_negatives
    grad_c = _scatter_centroid_grad(cents.shape, batch.positives, -g.sum(1), e)
    grad_c += _scatter_centroid_grad(
        cents.shape,
        batch.negatives.reshape(-1, cents.shape[0]),
        g.reshape(-1),
        np.repeat(e, j, axis=0),
    )
    return LossResult(loss, {"head": d_e.T @ batch.queries, "centroids": grad_c}, {"jpq": loss})


# ---- MarginMSE ---------------------------------------------------------------------


def margin_mse_from_margins(model_margin: np.ndarray, teacher_margin: np.ndarray) -> tuple[float, np.ndarray]:
    """Loss and its derivative with respect to each model margin."""
    resid = model_margin - teacher_margin
    n = resid.size
    return float((resid**2).sum() / n), 2.0 * resid / n


def margin_mse_loss(params: dict, batch: TrainingBatch) -> LossResult:
    """Mean squared error between model score margins and teacher margins.

    Each (query, negative) pair is one triplet.  Passages are the PQ
    reconstruction for code batches and the constant hard hash otherwise.
    """
    if batch.ce_pos is None or batch.ce_neg is None:
        raise MissingMarginLabel("MarginMSE needs ce_pos and ce_neg for every triplet")
    w = params["head"]
    e = batch.queries @ w.T
    if batch.is_pq:
        hp = reconstruct(params["centroids"], batch.positives)
        hn = reconstruct(params["centroids"], batch.negatives)
    else:
        hp = hard_sign(batch.positives @ w.T)
        hn = hard_sign(batch.negatives @ w.T)
    loss, g = margin_mse_from_margins(np.einsum("bd,bjd->bj", e, hp[:, None, :] - hn), batch.ce_pos[:, None] - batch.ce_neg)
    d_e = g.sum(1)[:, None] * hp - np.einsum("bj,bjd->bd", g, hn)
    grads = {"head": d_e.T @ batch.queries}
    if batch.is_pq:
        cents = params["centroids"]
        grad_c = _scatter_centroid_grad(cents.shape, batch.positives, g.sum(1), e)
        grad_c += _scatter_centroid_grad(
            cents.shape,
            batch.negatives.reshape(-1, cents.shape[0]),
            -g.reshape(-1),
            np.repeat(e, batch.n_negatives, axis=0),
        )
        grads["centroids"] = grad_c
    return LossResult(loss, grads, {"margin_mse": loss})


def compute_loss(kind: str, params: dict, batch: TrainingBatch, beta: float = 1.0, alpha: float = 2.0) -> LossResult:
    if kind == "bpr":
        return bpr_loss(params, batch, beta, alpha)
    if kind == "jpq_infonce":
        return jpq_loss(params, batch)
    if kind == "margin_mse":
        return margin_mse_loss(params, batch)
    raise ValueError(f"unknown loss kind {kind!r}")
