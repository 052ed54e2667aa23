"""numba kernels for shingle hashing and MinHash permutation minima."""

import numba
import numpy as np


@numba.njit(cache=True, inline="always")
def _splitmix64(x):
    x = x + np.uint64(0x9E3779B97F4A7C15)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


@numba.njit(cache=True)
def gram_hashes(codepoints, n):
    """64-bit hash of every length-n window of a code-point array."""
    m = codepoints.shape[0] - n + 1
    if m <= 0:
        return np.empty(0, dtype=np.uint64)
    out = np.empty(m, dtype=np.uint64)
    for i in range(m):
        h = np.uint64(n)
        for j in range(n):
            h = (h ^ np.uint64(codepoints[i + j])) * np.uint64(0x100000001B3)
        out[i] = _splitmix64(h)
    return out


@numba.njit(cache=True, inline="always")
def _reduce61(x):
    x = (x & np.uint64(0x1FFFFFFFFFFFFFFF)) + (x >> np.uint64(61))
    x = (x & np.uint64(0x1FFFFFFFFFFFFFFF)) + (x >> np.uint64(61))
    if x >= np.uint64(0x1FFFFFFFFFFFFFFF):
        x -= np.uint64(0x1FFFFFFFFFFFFFFF)
    return x


@numba.njit(cache=True, inline="always")
def _mulmod61(a, x):
    lo31 = np.uint64(0x7FFFFFFF)
    lo30 = np.uint64(0x3FFFFFFF)
    a1 = a >> np.uint64(31)
    a0 = a & lo31
    x1 = x >> np.uint64(31)
    x0 = x & lo31
    hi = (a1 * x1) << np.uint64(1)
    mid = a1 * x0 + a0 * x1
    mid = (mid >> np.uint64(30)) + ((mid & lo30) << np.uint64(31))
    return _reduce61(hi + mid + a0 * x0)


@numba.njit(cache=True)
def minhash_minima(hashes, a, b):
    """min over hashes of (a[k] * (h mod p) + b[k]) mod p for each k."""
    k = a.shape[0]
    out = np.full(k, np.uint64(0xFFFFFFFFFFFFFFFF), dtype=np.uint64)
    for i in range(hashes.shape[0]):
        x = _reduce61(hashes[i])
        for j in range(k):
            v = _reduce61(_mulmod61(a[j], x) + b[j])
            if v < out[j]:
                out[j] = v
    return out
