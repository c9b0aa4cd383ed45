"""Central finite differences, independent of the analytic gradient code."""

import numpy as np


def numeric_grad(f, params: dict, name: str, eps: float = 1e-6) -> np.ndarray:
    base = {k: v.copy() for k, v in params.items()}
    x = base[name]
    out = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        orig = x[i]
        x[i] = orig + eps
        up = f(base)
        x[i] = orig - eps
        down = f(base)
        x[i] = orig
        out[i] = (up - down) / (2 * eps)
    return out


def rel_error(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    if scale < 1e-12:
        return 0.0
    return float(np.linalg.norm(a - b) / scale)


# ---- randomized instances ---------------------------------------------------------
# Each ``*_errors`` function returns the relative error of the analytic gradient on
# ``n`` random small instances (per checked parameter).


def float_batch(rng, b=3, j=2, d_in=5, ce=False):
    from lthkit.lthtrain import TrainingBatch

    return TrainingBatch(
        rng.standard_normal((b, d_in)),
        rng.standard_normal((b, d_in)),
        rng.standard_normal((b, j, d_in)),
        rng.standard_normal(b) if ce else None,
        rng.standard_normal((b, j)) if ce else None,
    )


def pq_batch(rng, b=3, j=2, d_in=4, m=2, k=4, ce=False):
    from lthkit.lthtrain import TrainingBatch

    return TrainingBatch(
        rng.standard_normal((b, d_in)),
        rng.integers(0, k, (b, m)),
        rng.integers(0, k, (b, j, m)),
        rng.standard_normal(b) if ce else None,
        rng.standard_normal((b, j)) if ce else None,
    )


def signs_stable(params, batch, eps=1e-4):
    # keep hard hashes away from zero so finite differences do not flip a sign
    w = params["head"]
    u = np.concatenate([(batch.positives @ w.T).ravel(), (batch.negatives @ w.T).ravel()])
    return np.abs(u).min() > eps


def rank_errors(n=100, seed=10):
    from lthkit.lthtrain import rank_loss, relaxed_hash

    rng = np.random.default_rng(seed)
    errs = []
    while len(errs) < n:
        batch = float_batch(rng, b=int(rng.integers(1, 5)), j=int(rng.integers(1, 4)))
        params = {"head": rng.standard_normal((int(rng.integers(2, 6)), 5)) * 0.5}
        beta, alpha = float(rng.uniform(0.3, 2.0)), float(rng.uniform(0.0, 3.0))
        w = params["head"]
        hq, hp, hn = (relaxed_hash(a @ w.T, beta) for a in (batch.queries, batch.positives, batch.negatives))
        slack = alpha - ((hq * hp).sum(1)[:, None] - np.einsum("bd,bjd->bj", hq, hn))
        if np.abs(slack).min() < 1e-3 or (slack <= 0).all():
            continue  # stay off the kink and skip trivially inactive instances
        res = rank_loss(params, batch, beta, alpha)
        num = numeric_grad(lambda p: rank_loss(p, batch, beta, alpha).loss, params, "head")
        errs.append(rel_error(res.grads["head"], num))
    return errs


def infonce_errors(n=100, seed=11):
    from lthkit.lthtrain import infonce_loss

    rng = np.random.default_rng(seed)
    errs = []
    while len(errs) < n:
        batch = float_batch(rng, b=int(rng.integers(1, 5)), j=int(rng.integers(1, 4)), d_in=4)
        params = {"head": rng.standard_normal((4, 4))}
        if not signs_stable(params, batch):
            continue
        res = infonce_loss(params, batch)
        num = numeric_grad(lambda p: infonce_loss(p, batch).loss, params, "head")
        errs.append(rel_error(res.grads["head"], num))
    return errs


def jpq_errors(n=100, seed=12):
    """Errors for head and centroids, two entries per instance."""
    from lthkit.lthtrain import jpq_loss

    rng = np.random.default_rng(seed)
    errs = []
    for _ in range(n):
        batch = pq_batch(rng, b=int(rng.integers(1, 5)), j=int(rng.integers(1, 4)))
        params = {"head": rng.standard_normal((4, 4)), "centroids": rng.standard_normal((2, 4, 2))}
        res = jpq_loss(params, batch)
        for name in ("head", "centroids"):
            num = numeric_grad(lambda p: jpq_loss(p, batch).loss, params, name)
            errs.append(rel_error(res.grads[name], num))
    return errs


def margin_mse_errors(n=100, seed=13):
    """PQ-mode instances (head and centroids) then binary-mode instances (head)."""
    from lthkit.lthtrain import margin_mse_loss

    rng = np.random.default_rng(seed)
    errs = []
    for _ in range(n):
        batch = pq_batch(rng, b=int(rng.integers(1, 5)), j=int(rng.integers(1, 4)), ce=True)
        params = {"head": rng.standard_normal((4, 4)), "centroids": rng.standard_normal((2, 4, 2))}
        res = margin_mse_loss(params, batch)
        for name in ("head", "centroids"):
            num = numeric_grad(lambda p: margin_mse_loss(p, batch).loss, params, name)
            errs.append(rel_error(res.grads[name], num))
    checked = 0
    while checked < n:
        batch = float_batch(rng, b=3, j=2, d_in=4, ce=True)
        params = {"head": rng.standard_normal((4, 4))}
        if not signs_stable(params, batch):
            continue
        res = margin_mse_loss(params, batch)
        num = numeric_grad(lambda p: margin_mse_loss(p, batch).loss, params, "head")
        errs.append(rel_error(res.grads["head"], num))
        checked += 1
    return errs
