"""Discrete Fourier kernels shared by the carving and aggregation stages.

Conventions, fixed across the package:

* forward transforms are unnormalized, inverse transforms divide by the
  sample count, so ``inverse(forward(x)) == x`` and Parseval reads
  ``sum |X[w]|^2 == N * sum |x[n]|^2``;
* any length is supported: powers of two take the radix-2 path, everything
  else goes through the Bluestein chirp-z construction (both live in the
  kernel backends);
* multi-dimensional transforms are separable, applied axis by axis;
* the "centered" frequency of bin k on an axis of extent n is
  ``min(k, n - k)``, i.e. its distance to DC on the periodic axis.

:func:`naive_dft` is an intentionally independent quadratic-time
implementation kept as the correctness oracle for the fast path.
"""

from __future__ import annotations

import math

import numpy as np

from . import backend


def _as_line(signal, name: str) -> np.ndarray:
    arr = np.asarray(signal, dtype=np.complex128)
    if arr.ndim != 1:
        raise ValueError(f"{name} expects a 1-d sequence, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} expects a nonempty sequence")
    return arr


def fft_1d(signal, inverse: bool = False) -> np.ndarray:
    """Fast DFT of a 1-d sequence (forward unnormalized, inverse scaled by 1/n)."""
    arr = _as_line(signal, "fft_1d")
    return backend.kernels().fft_batch(arr[None, :], inverse)[0]


def naive_dft(signal, inverse: bool = False) -> np.ndarray:
    """Quadratic-time reference DFT of a 1-d sequence; the oracle for fft_1d."""
    arr = _as_line(signal, "naive_dft")
    return backend.kernels().dft_batch(arr[None, :], inverse)[0]


def fft_nd(grid, inverse: bool = False) -> np.ndarray:
    """Separable DFT over every axis of a grid (1-d, 2-d or 3-d in practice)."""
    arr = np.asarray(grid, dtype=np.complex128)
    if arr.ndim < 1:
        raise ValueError("fft_nd expects an array with at least one axis")
    if arr.size == 0:
        raise ValueError(f"fft_nd expects nonempty extents, got shape {arr.shape}")
    out = arr
    for ax in range(out.ndim):
        moved = np.moveaxis(out, ax, -1)
        shape = moved.shape
        flat = np.ascontiguousarray(moved).reshape(-1, shape[-1])
        flat = backend.kernels().fft_batch(flat, inverse)
        out = np.moveaxis(flat.reshape(shape), -1, ax)
    return out


def power_at(spectrum, index) -> float:
    """Squared magnitude of one spectral bin, addressed by multi-index."""
    spec = np.asarray(spectrum)
    idx = tuple(int(i) for i in np.atleast_1d(np.asarray(index)))
    if len(idx) != spec.ndim:
        raise ValueError(
            f"index has {len(idx)} components but spectrum has {spec.ndim} axes"
        )
    for i, n in zip(idx, spec.shape):
        if not 0 <= i < n:
            raise ValueError(f"index {idx} outside spectrum dims {spec.shape}")
    value = complex(spec[idx])
    return value.real * value.real + value.imag * value.imag


def centered_frequencies(n: int) -> np.ndarray:
    """Per-bin distance to DC on a periodic axis of extent n: min(k, n - k)."""
    if n < 1:
        raise ValueError(f"axis extent must be >= 1, got {n}")
    k = np.arange(n)
    return np.minimum(k, n - k).astype(np.float64)


def radial_frequencies(dims) -> np.ndarray:
    """Euclidean centered-frequency radius of every bin of a grid spectrum."""
    dims = tuple(int(d) for d in dims)
    if not dims:
        raise ValueError("dims must be nonempty")
    axes = [centered_frequencies(n) ** 2 for n in dims]
    total = np.zeros(dims, dtype=np.float64)
    for ax, sq in enumerate(axes):
        shape = [1] * len(dims)
        shape[ax] = dims[ax]
        total = total + sq.reshape(shape)
    return np.sqrt(total)


def max_radius(dims) -> float:
    """Largest attainable centered-frequency radius for the given extents."""
    dims = tuple(int(d) for d in dims)
    if not dims:
        raise ValueError("dims must be nonempty")
    return math.sqrt(sum((n // 2) ** 2 for n in dims))


def highpass_mask(dims, cutoff: float) -> np.ndarray:
    """Boolean mask of bins strictly above ``cutoff * max_radius(dims)``.

    DC (radius 0) is never selected for any positive cutoff.
    """
    if not 0.0 < cutoff < 1.0:
        raise ValueError(f"cutoff must lie in (0, 1), got {cutoff}")
    return radial_frequencies(dims) > cutoff * max_radius(dims)
