"""PCA projection with optional whitening; scoring on the projections is cosine."""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass

import numpy as np

from lthkit.compress.scalar import FlatIndex
from lthkit.core import EmbeddingMatrix
from lthkit.errors import (
    DimensionMismatch,
    IoFailure,
    MalformedHeader,
    NormalizationOfZero,
    RankDeficient,
)

PCA_MAGIC = b"PCA1"
_HEAD = struct.Struct("<4sII")


@dataclass
class PcaModel:
    mean: np.ndarray  # (d,)
    components: np.ndarray  # (target_dim, d), orthonormal rows
    eigenvalues: np.ndarray  # (target_dim,), descending
    whiten: bool = True
    epsilon: float = 1e-9

    @property
    def input_dim(self) -> int:
        return self.mean.shape[0]

    @property
    def target_dim(self) -> int:
        return self.components.shape[0]


def fit_pca(train: EmbeddingMatrix, target_dim: int, whiten: bool = True, epsilon: float = 1e-9) -> PcaModel:
    if not 0 < target_dim <= train.d:
        raise ValueError(f"target_dim {target_dim} outside 1..{train.d}")
    if train.n <= target_dim:
        raise ValueError(f"need more than {target_dim} training vectors, got {train.n}")
    x = train.data.astype(np.float64)
    mean = x.mean(0)
    xc = x - mean
    cov = xc.T @ xc / train.n
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1][:target_dim]
    vals = np.clip(vals[order], 0.0, None)
    comps = vecs[:, order].T
    # deterministic sign: largest-magnitude coordinate of each component positive
    pivot = np.abs(comps).argmax(1)
    comps *= np.sign(comps[np.arange(target_dim), pivot])[:, None]
    negligible = vals <= 1e-10 * max(vals[0], 1e-300)
    if negligible.any():
        warnings.warn(
            f"only {int((~negligible).sum())} of {target_dim} PCA components carry variance",
            RankDeficient,
            stacklevel=2,
        )
    return PcaModel(mean, comps, vals, whiten, epsilon)


def project(model: PcaModel, x: np.ndarray) -> np.ndarray:
    """Centre, rotate and (optionally) whiten; no normalization."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.input_dim:
        raise DimensionMismatch(f"input dim {x.shape[-1]} != model dim {model.input_dim}")
    y = (x - model.mean) @ model.components.T
    if model.whiten:
        y = y / np.sqrt(model.eigenvalues + model.epsilon)
    return y


def apply_pca(model: PcaModel, m: EmbeddingMatrix) -> EmbeddingMatrix:
    y = project(model, m.data)
    norms = np.linalg.norm(y, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise NormalizationOfZero(f"{m.ids[zero[0]]!r} projects to the zero vector (equals the PCA mean)")
    return EmbeddingMatrix(m.ids, y / norms[:, None])


def apply_pca_vector(model: PcaModel, x: np.ndarray) -> np.ndarray:
    y = project(model, x)
    norm = np.linalg.norm(y)
    if norm == 0:
        raise NormalizationOfZero("query projects to the zero vector")
    return (y / norm).astype(np.float32)


def save_pca(model: PcaModel, path) -> int:
    """``PCA1 | u32 d | u32 target_dim | mean | components | eigenvalues | u8 whiten | f64 epsilon``."""
    blob = b"".join(
        [
            _HEAD.pack(PCA_MAGIC, model.input_dim, model.target_dim),
            model.mean.astype("<f4").tobytes(),
            model.components.astype("<f4").tobytes(),
            model.eigenvalues.astype("<f4").tobytes(),
            struct.pack("<Bd", int(model.whiten), model.epsilon),
        ]
    )
    try:
        with open(path, "wb") as f:
            f.write(blob)
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e
    return len(blob)


def load_pca(path) -> PcaModel:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < _HEAD.size:
        raise MalformedHeader(f"{path}: too short")
    magic, d, t = _HEAD.unpack_from(blob)
    if magic != PCA_MAGIC:
        raise MalformedHeader(f"{path}: bad magic {magic!r}")
    want = _HEAD.size + 4 * (d + t * d + t) + 9
    if len(blob) != want:
        raise DimensionMismatch(f"{path}: expected {want} bytes, found {len(blob)}")
    off = _HEAD.size
    mean = np.frombuffer(blob, "<f4", d, off).astype(np.float64)
    off += 4 * d
    comps = np.frombuffer(blob, "<f4", t * d, off).reshape(t, d).astype(np.float64)
    off += 4 * t * d
    vals = np.frombuffer(blob, "<f4", t, off).astype(np.float64)
    off += 4 * t
    whiten, eps = struct.unpack_from("<Bd", blob, off)
    return PcaModel(mean, comps, vals, bool(whiten), eps)


class PcaIndex:
    """Cosine search: normalized projections of the corpus, queries projected on the fly."""

    def __init__(self, model: PcaModel, projected):
        self.model = model
        self.flat = projected if isinstance(projected, FlatIndex) else FlatIndex(projected.ids, projected.data)

    @classmethod
    def build(cls, model: PcaModel, m: EmbeddingMatrix) -> "PcaIndex":
        return cls(model, apply_pca(model, m))

    @property
    def ids(self) -> list[str]:
        return self.flat.ids

    @property
    def dim(self) -> int:
        return self.model.input_dim

    def search(self, query: np.ndarray, k: int) -> list[tuple[str, float]]:
        return self.flat.search(apply_pca_vector(self.model, query), k)
