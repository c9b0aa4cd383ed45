"""Compiled scan kernels: popcount Hamming, PQ lookup-table accumulation, nearest centroid.

Single-threaded on purpose; latency comparisons assume one core.
"""

import numpy as np
from numba import njit

_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)


@njit(cache=True, inline="always")
def _popcount64(x):
    # SWAR popcount; LLVM lowers this to POPCNT when available
    x = x - ((x >> np.uint64(1)) & _M1)
    x = (x & _M2) + ((x >> np.uint64(2)) & _M2)
    x = (x + (x >> np.uint64(4))) & _M4
    return (x * _H01) >> np.uint64(56)


@njit(cache=True)
def hamming_u64(codes, query):
    n, w = codes.shape
    out = np.empty(n, np.int64)
    for i in range(n):
        acc = np.uint64(0)
        for j in range(w):
            acc += _popcount64(codes[i, j] ^ query[j])
        out[i] = acc
    return out


@njit(cache=True)
def hamming_u8(codes, query, table):
    n, w = codes.shape
    out = np.empty(n, np.int64)
    for i in range(n):
        acc = 0
        for j in range(w):
            acc += table[codes[i, j] ^ query[j]]
        out[i] = acc
    return out


@njit(cache=True)
def adc_scores(codes, table):
    """``out[i] = sum_m table[m, codes[i, m]]``, accumulated in subspace order."""
    n, m_sub = codes.shape
    out = np.empty(n, np.float64)
    for i in range(n):
        s = 0.0
        for m in range(m_sub):
            s += table[m, codes[i, m]]
        out[i] = s
    return out


@njit(cache=True)
def nearest_centroid(x, c):
    """argmin_j ||x_i - c_j||^2 summed directly; ties keep the lowest j."""
    n, d = x.shape
    k = c.shape[0]
    out = np.empty(n, np.int64)
    for i in range(n):
        best = np.inf
        arg = 0
        for j in range(k):
            acc = 0.0
            for t in range(d):
                diff = x[i, t] - c[j, t]
                acc += diff * diff
            if acc < best:
                best = acc
                arg = j
        out[i] = arg
    return out


POPCOUNT8 = np.array([bin(i).count("1") for i in range(256)], dtype=np.int64)


def hamming_distances(codes: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Hamming distance of a packed uint8 query code against packed uint8 rows."""
    codes = np.ascontiguousarray(codes, dtype=np.uint8)
    query = np.ascontiguousarray(query, dtype=np.uint8)
    width = codes.shape[1]
    if width % 8 == 0 and codes.shape[0] > 0:
        return hamming_u64(codes.view(np.uint64), query.view(np.uint64))
    return hamming_u8(codes, query, POPCOUNT8)
