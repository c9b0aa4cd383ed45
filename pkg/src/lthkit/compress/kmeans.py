"""Seeded Lloyd k-means used to train PQ codebooks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lthkit import kernels


@dataclass
class KMeansResult:
    centroids: np.ndarray
    assign: np.ndarray
    objective: list[float]  # sum of squared distances after each assignment step


def nearest(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Index of the nearest centroid for every row; ties go to the lowest index."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    return kernels.nearest_centroid(x, np.ascontiguousarray(c, dtype=np.float64))


def kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = ((x - x[chosen[0]]) ** 2).sum(1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            i = int(rng.choice(n, p=d2 / total))
        else:
            # every point coincides with a chosen centre
            rest = np.setdiff1d(np.arange(n), chosen)
            i = int(rng.choice(rest))
        chosen.append(i)
        d2 = np.minimum(d2, ((x - x[i]) ** 2).sum(1))
    return x[chosen].copy()


def kmeans(x: np.ndarray, k: int, iters: int, rng: np.random.Generator) -> KMeansResult:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] < k:
        raise ValueError(f"{x.shape[0]} points for {k} clusters")
    c = kmeans_pp_init(x, k, rng)
    objective = []
    assign = nearest(x, c)
    for _ in range(iters):
        resid = ((x - c[assign]) ** 2).sum(1)
        objective.append(float(resid.sum()))
        counts = np.bincount(assign, minlength=k)
        sums = np.zeros_like(c)
        np.add.at(sums, assign, x)
        filled = counts > 0
        c[filled] = sums[filled] / counts[filled, None]
        # empty clusters take the points farthest from their current centroid
        empty = np.flatnonzero(~filled)
        if empty.size:
            far = np.argsort(-resid, kind="stable")[: empty.size]
            c[empty] = x[far]
        new_assign = nearest(x, c)
        if np.array_equal(new_assign, assign) and not empty.size:
            assign = new_assign
            break
        assign = new_assign
    objective.append(float(((x - c[assign]) ** 2).sum()))
    return KMeansResult(c, assign, objective)
