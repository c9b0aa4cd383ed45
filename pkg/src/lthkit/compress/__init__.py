"""Out-of-the-box compressors: scalar float quantization, PCA, product quantization."""

from lthkit.compress.pca import PcaIndex, PcaModel, apply_pca, fit_pca, load_pca, project, save_pca
from lthkit.compress.pq import (
    PqCodebook,
    PqCodeSet,
    PqIndex,
    fit_pq,
    load_pq,
    pq_decode,
    pq_encode,
    pq_layout,
    pq_search,
    save_pq,
)
from lthkit.compress.scalar import (
    FlatIndex,
    ScalarQuantParams,
    dequantize,
    load_flat_index,
    scalar_quantize,
    write_flat_index,
)

__all__ = [
    "FlatIndex",
    "PcaIndex",
    "PcaModel",
    "PqCodeSet",
    "PqCodebook",
    "PqIndex",
    "ScalarQuantParams",
    "apply_pca",
    "dequantize",
    "fit_pca",
    "fit_pq",
    "load_flat_index",
    "load_pca",
    "load_pq",
    "pq_decode",
    "pq_encode",
    "pq_layout",
    "pq_search",
    "project",
    "save_pca",
    "save_pq",
    "scalar_quantize",
    "write_flat_index",
]
