"""Numba-jitted kernel implementations.

Scalar loop versions of the batched DFT, the reference DFT and the bin
max-pool. Compiled lazily on first call with on-disk caching, so the cost
is paid once per interpreter/arch combination.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _fft_pow2_inplace(v):
    # in-place forward radix-2 transform, len(v) a power of two
    n = v.shape[0]
    j = 0
    for i in range(1, n):
        bit = n >> 1
        while j & bit:
            j ^= bit
            bit >>= 1
        j |= bit
        if i < j:
            tmp = v[i]
            v[i] = v[j]
            v[j] = tmp
    half = 1
    while half < n:
        tw = np.empty(half, np.complex128)
        for k in range(half):
            ang = -np.pi * k / half
            tw[k] = complex(np.cos(ang), np.sin(ang))
        start = 0
        while start < n:
            for k in range(half):
                e = v[start + k]
                o = v[start + k + half] * tw[k]
                v[start + k] = e + o
                v[start + k + half] = e - o
            start += 2 * half
        half *= 2


@njit(cache=True)
def _fft_line_forward(line):
    # forward transform of one contiguous line, any length; mutates and returns it
    n = line.shape[0]
    if n & (n - 1) == 0:
        _fft_pow2_inplace(line)
        return line
    m = 1
    while m < 2 * n - 1:
        m <<= 1
    chirp = np.empty(n, np.complex128)
    for j in range(n):
        q = (j * j) % (2 * n)
        ang = -np.pi * q / n
        chirp[j] = complex(np.cos(ang), np.sin(ang))
    fa = np.zeros(m, np.complex128)
    fb = np.zeros(m, np.complex128)
    for j in range(n):
        fa[j] = line[j] * chirp[j]
        fb[j] = np.conj(chirp[j])
    for j in range(1, n):
        fb[m - j] = np.conj(chirp[j])
    _fft_pow2_inplace(fa)
    _fft_pow2_inplace(fb)
    for j in range(m):
        fa[j] = np.conj(fa[j] * fb[j])
    _fft_pow2_inplace(fa)
    inv = 1.0 / m
    for j in range(n):
        line[j] = np.conj(fa[j]) * inv * chirp[j]
    return line


@njit(cache=True)
def _fft_batch_jit(a, inverse):
    rows, n = a.shape
    out = np.empty_like(a)
    for r in range(rows):
        line = a[r].copy()
        if inverse:
            for j in range(n):
                line[j] = np.conj(line[j])
        _fft_line_forward(line)
        if inverse:
            for j in range(n):
                out[r, j] = np.conj(line[j]) / n
        else:
            out[r] = line
    return out


@njit(cache=True)
def _dft_batch_jit(a, inverse):
    rows, n = a.shape
    out = np.zeros((rows, n), np.complex128)
    s = (2.0 if inverse else -2.0) * np.pi / n
    for r in range(rows):
        for k in range(n):
            acc = 0.0 + 0.0j
            for t in range(n):
                ang = s * ((k * t) % n)
                acc += a[r, t] * complex(np.cos(ang), np.sin(ang))
            out[r, k] = acc / n if inverse else acc
    return out


@njit(cache=True)
def _binned_max_jit(features, boundaries):
    groups = boundaries.shape[0] - 1
    width = features.shape[1]
    out = np.empty((groups, width), np.float64)
    for g in range(groups):
        lo = boundaries[g]
        hi = boundaries[g + 1]
        for c in range(width):
            m = features[lo, c]
            for r in range(lo + 1, hi):
                if features[r, c] > m:
                    m = features[r, c]
            out[g, c] = m
    return out


def fft_batch(a: np.ndarray, inverse: bool = False) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.complex128)
    return _fft_batch_jit(a, bool(inverse))


def dft_batch(a: np.ndarray, inverse: bool = False) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.complex128)
    return _dft_batch_jit(a, bool(inverse))


def binned_max(features: np.ndarray, boundaries: np.ndarray) -> np.ndarray:
    features = np.ascontiguousarray(features, dtype=np.float64)
    boundaries = np.ascontiguousarray(boundaries, dtype=np.int64)
    if boundaries.shape[0] <= 1:
        return np.empty((0, features.shape[1]), dtype=np.float64)
    return _binned_max_jit(features, boundaries)
