"""fp16 / fp8 scalar quantization and the exhaustive flat index over it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lthkit.core import (
    DTYPE_F16,
    DTYPE_F32,
    DTYPE_U8,
    EmbeddingMatrix,
    IndexManifest,
    id_ranks,
    read_emb_container,
    select_smallest,
    write_emb_container,
)
from lthkit.errors import DimensionMismatch, EmptyIndex, NonFiniteValue, OverflowToInfinity

MODES = ("fp16", "fp8")
_KIND = {"f32": "flat-f32", "fp16": "flat-fp16", "fp8": "flat-fp8"}
_DTYPE = {"f32": DTYPE_F32, "fp16": DTYPE_F16, "fp8": DTYPE_U8}
_MODE_OF_DTYPE = {v: k for k, v in _DTYPE.items()}


@dataclass
class ScalarQuantParams:
    mode: str
    per_dim_min: np.ndarray | None = None
    per_dim_max: np.ndarray | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown scalar quantization mode {self.mode!r}")
        if self.mode == "fp8":
            self.per_dim_min = np.asarray(self.per_dim_min, dtype=np.float32)
            self.per_dim_max = np.asarray(self.per_dim_max, dtype=np.float32)
            if np.any(self.per_dim_min > self.per_dim_max):
                raise ValueError("per_dim_min exceeds per_dim_max")


def scalar_quantize(m: EmbeddingMatrix, mode: str) -> tuple[np.ndarray, ScalarQuantParams]:
    """Compress ``m`` to half precision (``fp16``) or per-dimension uint8 (``fp8``).

    fp8 fits a uniform 255-step grid over each dimension's [min, max] on the
    matrix itself, so the round-trip error is at most half a step.
    """
    x = m.data
    if mode == "fp16":
        with np.errstate(over="ignore"):
            half = x.astype(np.float16)
        if np.isinf(half).any():
            raise OverflowToInfinity("value outside the float16 range")
        return half, ScalarQuantParams("fp16")
    if mode == "fp8":
        lo = x.min(axis=0)
        hi = x.max(axis=0)
        params = ScalarQuantParams("fp8", lo, hi)
        return _encode_u8(x, params), params
    raise ValueError(f"unknown scalar quantization mode {mode!r}")


def _encode_u8(x: np.ndarray, params: ScalarQuantParams) -> np.ndarray:
    lo = params.per_dim_min.astype(np.float64)
    span = params.per_dim_max.astype(np.float64) - lo
    step = np.where(span > 0, span / 255.0, 1.0)
    codes = np.rint((x.astype(np.float64) - lo) / step)
    return np.clip(codes, 0, 255).astype(np.uint8)


def dequantize(payload: np.ndarray, params: ScalarQuantParams) -> np.ndarray:
    if params.mode == "fp16":
        return payload.astype(np.float32)
    lo = params.per_dim_min.astype(np.float64)
    hi = params.per_dim_max.astype(np.float64)
    vals = lo + payload.astype(np.float64) * ((hi - lo) / 255.0)
    # clip before the float32 cast: rounding then stays inside [min, max]
    return np.clip(vals, lo, hi).astype(np.float32)


def compression_ratio(mode: str) -> float:
    return {"fp16": 4 / 2, "fp8": 4 / 1}[mode]


# --------------------------------------------------------------------------
# flat index


class FlatIndex:
    """Exhaustive inner-product search over float32 (possibly dequantized) rows."""

    def __init__(self, ids: list[str], vectors: np.ndarray, mode: str = "f32", params: ScalarQuantParams | None = None):
        self.ids = list(ids)
        self.vectors = np.ascontiguousarray(vectors, dtype=np.float32)
        self.mode = mode
        self.params = params
        self._ranks = None

    @classmethod
    def from_embeddings(cls, m: EmbeddingMatrix, mode: str = "f32") -> "FlatIndex":
        if mode == "f32":
            return cls(m.ids, m.data)
        payload, params = scalar_quantize(m, mode)
        return cls(m.ids, dequantize(payload, params), mode, params)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def tie_ranks(self) -> np.ndarray:
        if self._ranks is None:
            self._ranks = id_ranks(self.ids)
        return self._ranks

    def scores(self, query: np.ndarray) -> np.ndarray:
        return self.vectors @ np.asarray(query, dtype=np.float32)

    def search(self, query: np.ndarray, k: int) -> list[tuple[str, float]]:
        if not self.ids:
            raise EmptyIndex("flat index is empty")
        query = np.asarray(query, dtype=np.float32)
        if query.shape != (self.dim,):
            raise DimensionMismatch(f"query of shape {query.shape} against dim {self.dim}")
        s = self.scores(query)
        top = select_smallest(-s, k, self.tie_ranks)
        return [(self.ids[i], float(s[i])) for i in top]


def write_flat_index(m: EmbeddingMatrix, path, mode: str = "f32", seed: int = 0) -> IndexManifest:
    """Write ``m`` as an ``EMB1`` file, quantized according to ``mode``."""
    if mode == "f32":
        payload = m.data.astype("<f4").tobytes()
        params = {}
    else:
        codes, qp = scalar_quantize(m, mode)
        if mode == "fp16":
            payload = codes.astype("<f2").tobytes()
            params = {"mode": "fp16"}
        else:
            payload = qp.per_dim_min.astype("<f4").tobytes() + qp.per_dim_max.astype("<f4").tobytes() + codes.tobytes()
            params = {"mode": "fp8", "levels": 256}
    layout = write_emb_container(path, m.ids, m.d, _DTYPE[mode], payload)
    return IndexManifest(_KIND[mode], m.d, params, sum(layout.values()), seed, layout)


def load_flat_index(path) -> FlatIndex:
    ids, d, dtype, payload = read_emb_container(path)
    n = len(ids)
    mode = _MODE_OF_DTYPE[dtype]
    if mode == "f32":
        vecs = np.frombuffer(payload, dtype="<f4").reshape(n, d).copy()
        if not np.isfinite(vecs).all():
            raise NonFiniteValue(f"{path}: payload contains NaN or Inf")
        return FlatIndex(ids, vecs)
    if mode == "fp16":
        half = np.frombuffer(payload, dtype="<f2").reshape(n, d)
        return FlatIndex(ids, half.astype(np.float32), "fp16", ScalarQuantParams("fp16"))
    lo = np.frombuffer(payload[: 4 * d], dtype="<f4")
    hi = np.frombuffer(payload[4 * d : 8 * d], dtype="<f4")
    codes = np.frombuffer(payload[8 * d :], dtype=np.uint8).reshape(n, d)
    params = ScalarQuantParams("fp8", lo, hi)
    return FlatIndex(ids, dequantize(codes, params), "fp8", params)
