"""Spectral complexity analysis and scale-adaptive token aggregation.

The decode stage measures how much of an instance's spectral power sits
above a half-Nyquist cutoff (the high-frequency energy ratio, HFER), joins
the 2-d silhouette view with the 3-d occupancy view, and picks one of three
downsampling factors: detailed instances keep a fine 1.25x grid, smooth
ones can afford 2x. Aggregation floors coordinates into bins and max-pools
features per bin, which is deterministic and order-independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend, numerics

__all__ = [
    "AggSchedule",
    "SpectralProfile",
    "TokenSet",
    "hfer",
    "joint_complexity",
    "select_scale",
    "quantize_coords",
    "aggregate",
    "analyze_and_aggregate",
]

DEFAULT_HFER_CUTOFF = 0.5  # half-Nyquist
DEFAULT_JOINT_WEIGHT = 0.9  # silhouette view dominates the blend


@dataclass(frozen=True)
class AggSchedule:
    """Complexity thresholds and the three aggregation factors they select."""

    tau_low: float = 0.5
    tau_high: float = 0.7
    levels: tuple[float, float, float] = (1.25, 1.5, 2.0)

    def __post_init__(self):
        if not 0.0 <= self.tau_low <= self.tau_high <= 1.0:
            raise ValueError(
                "thresholds must satisfy 0 <= tau_low <= tau_high <= 1, got "
                f"tau_low={self.tau_low}, tau_high={self.tau_high}"
            )
        if len(self.levels) != 3 or any(s <= 0 for s in self.levels):
            raise ValueError(f"levels must be three positive factors, got {self.levels}")


@dataclass(frozen=True)
class SpectralProfile:
    hfer_2d: float
    hfer_3d: float
    weight: float
    joint: float


@dataclass(frozen=True)
class TokenSet:
    """Tokens on an integer grid: unique positions plus a feature row each."""

    positions: np.ndarray  # (N, 3) integers
    features: np.ndarray  # (N, F) reals

    def __post_init__(self):
        pos = np.asarray(self.positions)
        feats = np.asarray(self.features, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError(f"positions must be (tokens, 3), got {pos.shape}")
        if not np.issubdtype(pos.dtype, np.integer):
            raise ValueError("positions must be integer coordinates")
        if feats.ndim != 2 or feats.shape[0] != pos.shape[0]:
            raise ValueError("features must be one row per token")
        if pos.shape[0] and np.unique(pos, axis=0).shape[0] != pos.shape[0]:
            raise ValueError("token positions must be unique")
        object.__setattr__(self, "positions", pos.astype(np.int64))
        object.__setattr__(self, "features", feats)

    def __len__(self) -> int:
        return self.positions.shape[0]


def hfer(grid, cutoff: float = DEFAULT_HFER_CUTOFF) -> float:
    """Fraction of spectral power strictly above ``cutoff * max_radius``.

    Zero-power grids (all zeros) return 0 by convention; DC is never part
    of the high band, so constant grids also return 0.
    """
    arr = np.asarray(grid, dtype=np.float64)
    if arr.ndim < 1 or arr.size == 0:
        raise ValueError("hfer expects a nonempty grid")
    if not 0.0 < cutoff < 1.0:
        raise ValueError(f"cutoff must lie in (0, 1), got {cutoff}")
    spectrum = numerics.fft_nd(arr)
    power = spectrum.real**2 + spectrum.imag**2
    total = float(power.sum())
    if total <= 0.0:
        return 0.0
    high = float(power[numerics.highpass_mask(arr.shape, cutoff)].sum())
    return high / total


def joint_complexity(h2d: float, h3d: float, w: float = DEFAULT_JOINT_WEIGHT) -> float:
    """Weighted blend of the silhouette and occupancy energy ratios."""
    for name, value in (("h2d", h2d), ("h3d", h3d), ("w", w)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return w * h2d + (1.0 - w) * h3d


def select_scale(h_joint: float, schedule: AggSchedule) -> float:
    """Pick the aggregation factor: fine above tau_high, coarse below tau_low."""
    if not 0.0 <= h_joint <= 1.0:
        raise ValueError(f"h_joint must lie in [0, 1], got {h_joint}")
    fine, mid, coarse = schedule.levels
    if h_joint > schedule.tau_high:
        return fine
    if h_joint < schedule.tau_low:
        return coarse
    return mid


def quantize_coords(positions, scale: float) -> np.ndarray:
    """Bin coordinates: elementwise floor(position / scale) as integers."""
    pos = np.asarray(positions)
    if not np.issubdtype(pos.dtype, np.integer):
        raise ValueError("positions must be integer coordinates")
    if not scale > 0.0:
        raise ValueError(f"scale must be > 0, got {scale}")
    return np.floor(pos / float(scale)).astype(np.int64)


def aggregate(tokens: TokenSet, scale: float) -> TokenSet:
    """Merge tokens sharing a quantized bin by elementwise feature max.

    The result is canonically ordered (lexicographic by bin coordinate), so
    any permutation of the input yields an identical token set.
    """
    if len(tokens) == 0:
        raise ValueError("aggregate expects at least one token")
    bins = quantize_coords(tokens.positions, scale)
    mins = bins.min(axis=0)
    shifted = bins - mins
    extents = shifted.max(axis=0) + 1
    ids = (shifted[:, 0] * extents[1] + shifted[:, 1]) * extents[2] + shifted[:, 2]
    order = np.argsort(ids, kind="stable")
    sorted_ids = ids[order]
    starts = np.flatnonzero(np.concatenate([[True], sorted_ids[1:] != sorted_ids[:-1]]))
    boundaries = np.concatenate([starts, [sorted_ids.size]]).astype(np.int64)
    pooled = backend.kernels().binned_max(tokens.features[order], boundaries)
    return TokenSet(positions=bins[order][starts], features=pooled)


def analyze_and_aggregate(
    mask2d,
    voxels,
    tokens: TokenSet,
    schedule: AggSchedule | None = None,
    cutoff: float = DEFAULT_HFER_CUTOFF,
    w: float = DEFAULT_JOINT_WEIGHT,
) -> tuple[SpectralProfile, float, TokenSet]:
    """Full decode-stage pipeline: profile spectra, pick a factor, aggregate."""
    schedule = schedule or AggSchedule()
    mask = np.asarray(mask2d, dtype=np.float64)
    grid = np.asarray(voxels, dtype=np.float64)
    if mask.ndim != 2:
        raise ValueError(f"mask must be 2-d, got shape {mask.shape}")
    if not np.isin(mask, (0.0, 1.0)).all():
        raise ValueError("mask values must be binary (0 or 1)")
    if grid.ndim != 3:
        raise ValueError(f"voxel grid must be 3-d, got shape {grid.shape}")
    if grid.min() < 0.0 or grid.max() > 1.0:
        raise ValueError("voxel occupancy values must lie in [0, 1]")
    h2d = hfer(mask, cutoff)
    h3d = hfer(grid, cutoff)
    joint = joint_complexity(h2d, h3d, w)
    profile = SpectralProfile(hfer_2d=h2d, hfer_3d=h3d, weight=w, joint=joint)
    factor = select_scale(joint, schedule)
    return profile, factor, aggregate(tokens, factor)
