"""Pure-numpy kernel implementations (fallback backend).

Same surface as ``_kernels_numba``: batched 1-d DFTs over the rows of a
2-d complex array, the quadratic-time reference DFT, and a max-pool over
contiguous row groups. Forward transforms are unnormalized, inverse
transforms divide by the length.
"""

from __future__ import annotations

import numpy as np


def _bit_reverse_indices(n: int) -> np.ndarray:
    # n must be a power of two
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for _ in range(bits):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    return rev


def _fft_pow2(a: np.ndarray) -> np.ndarray:
    """Forward radix-2 transform of each row; row length a power of two."""
    b, n = a.shape
    out = a[:, _bit_reverse_indices(n)].astype(np.complex128)
    half = 1
    while half < n:
        step = half * 2
        tw = np.exp(-1j * np.pi * np.arange(half) / half)  # e^{-2pi i k/step}
        blocks = out.reshape(b, n // step, step)
        even = blocks[:, :, :half].copy()
        odd = blocks[:, :, half:] * tw
        blocks[:, :, :half] = even + odd
        blocks[:, :, half:] = even - odd
        half = step
    return out


def _next_pow2(n: int) -> int:
    m = 1
    while m < n:
        m <<= 1
    return m


def _bluestein(a: np.ndarray) -> np.ndarray:
    """Forward chirp-z transform of each row; any row length."""
    b, n = a.shape
    j = np.arange(n)
    # j^2 mod 2n keeps the chirp angles small without changing e^{-i pi j^2/n}
    q = (j * j) % (2 * n)
    chirp = np.exp(-1j * np.pi * q / n)
    m = _next_pow2(2 * n - 1)
    fa = np.zeros((b, m), dtype=np.complex128)
    fa[:, :n] = a * chirp
    fb = np.zeros(m, dtype=np.complex128)
    fb[:n] = np.conj(chirp)
    fb[m - n + 1:] = np.conj(chirp[1:])[::-1]
    spec = _fft_pow2(fa) * _fft_pow2(fb[None, :])
    conv = np.conj(_fft_pow2(np.conj(spec))) / m  # inverse pow2 fft via conjugation
    return conv[:, :n] * chirp


def fft_batch(a: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Transform each row of ``a``; radix-2 for power-of-two lengths, chirp-z otherwise."""
    a = np.ascontiguousarray(a, dtype=np.complex128)
    if inverse:
        return np.conj(fft_batch(np.conj(a), False)) / a.shape[1]
    n = a.shape[1]
    if n & (n - 1) == 0:
        return _fft_pow2(a)
    return _bluestein(a)


def dft_batch(a: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Textbook O(n^2) DFT of each row; the independent correctness oracle."""
    a = np.ascontiguousarray(a, dtype=np.complex128)
    n = a.shape[1]
    sign = 2j if inverse else -2j
    k = np.arange(n)
    w = np.exp(sign * np.pi * np.outer(k, k) / n)
    out = a @ w
    if inverse:
        out /= n
    return out


def binned_max(features: np.ndarray, boundaries: np.ndarray) -> np.ndarray:
    """Elementwise max over contiguous row groups.

    ``boundaries`` has G+1 ascending entries; group g spans rows
    ``boundaries[g]:boundaries[g+1]`` and every group is nonempty.
    """
    features = np.ascontiguousarray(features, dtype=np.float64)
    boundaries = np.asarray(boundaries, dtype=np.int64)
    groups = boundaries.shape[0] - 1
    if groups <= 0:
        return np.empty((0, features.shape[1]), dtype=np.float64)
    # slice to the last edge so an edge short of the final row still counts
    return np.maximum.reduceat(features[: boundaries[-1]], boundaries[:-1], axis=0)
