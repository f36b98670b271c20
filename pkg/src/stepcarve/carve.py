"""Saliency token carving and error-budgeted tangent reuse.

This drives the latent-refinement stage. Per-token importance blends three
signals computed from the two most recent available outputs: feature
magnitude, step-to-step abruptness, and a spatial high-frequency response
obtained by scattering per-token norms onto the voxel grid and high-pass
filtering. A carve mask keeps the top fraction. Between real model calls,
every token reuses its cached tangent offset (v - x at the anchor); an
accumulated error budget, scaled by a curvature proxy measured at the
anchor, decides when the next real call happens.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics
from .records import (
    RunMetrics,
    StepDecision,
    TrajectoryRecord,
    counters_from,
    integration_dt,
)

__all__ = [
    "CarveConfig",
    "SaliencyScores",
    "TangentCache",
    "magnitude_scores",
    "abruptness_scores",
    "freq_scores",
    "unified_importance",
    "carve_mask",
    "curvature",
    "accumulate_error",
    "slat_step",
    "run_slat_stage",
]


@dataclass(frozen=True)
class CarveConfig:
    gamma: float = 0.7  # weight of abruptness inside the temporal term
    keep_ratio: float = 0.1
    error_threshold: float = 1.5  # 0 forces a refresh every step, inf never refreshes
    warmup_steps: int = 2
    freq_cutoff: float = 0.25
    refresh_freq_scores: bool = False  # recompute the spatial term every step

    def __post_init__(self):
        if self.gamma < 0.0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if not 0.0 < self.keep_ratio <= 1.0:
            raise ValueError(f"keep_ratio must lie in (0, 1], got {self.keep_ratio}")
        if not self.error_threshold >= 0.0:  # also rejects nan
            raise ValueError(
                f"error_threshold must be >= 0, got {self.error_threshold}"
            )
        if int(self.warmup_steps) != self.warmup_steps or self.warmup_steps < 0:
            raise ValueError(
                f"warmup_steps must be an integer >= 0, got {self.warmup_steps}"
            )
        if not 0.0 < self.freq_cutoff < 1.0:
            raise ValueError(f"freq_cutoff must lie in (0, 1), got {self.freq_cutoff}")


@dataclass(frozen=True)
class SaliencyScores:
    magnitude: np.ndarray
    abruptness: np.ndarray
    freq: np.ndarray
    unified: np.ndarray


@dataclass
class TangentCache:
    """Anchor state for tangent reuse plus the running error budget."""

    anchor_step: int = -1
    offset_delta: np.ndarray | None = None  # v - x at the last real call
    kappa_anchor: float | None = None  # None means curvature is undefined
    accumulated_error: float = 0.0
    prev_x: np.ndarray | None = None
    prev_v: np.ndarray | None = None


def _token_matrix(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError(f"{name} expects a nonempty (tokens, features) matrix")
    return arr


def magnitude_scores(v: np.ndarray) -> np.ndarray:
    """Per-token L2 norm of the current output."""
    return np.linalg.norm(_token_matrix(v, "magnitude_scores"), axis=1)


def abruptness_scores(v: np.ndarray, v_prev: np.ndarray) -> np.ndarray:
    """Per-token L2 norm of the change against the previous output."""
    cur = _token_matrix(v, "abruptness_scores")
    prev = _token_matrix(v_prev, "abruptness_scores")
    if cur.shape != prev.shape:
        raise ValueError(f"output shapes differ: {cur.shape} vs {prev.shape}")
    return np.linalg.norm(cur - prev, axis=1)


def freq_scores(positions, feature_norms, grid_dims, cutoff: float) -> np.ndarray:
    """High-frequency spatial response sampled back at each token position.

    Scatters per-token feature norms onto a dense grid, zeroes every
    spectral bin at or below ``cutoff * max_radius``, inverse transforms,
    and returns the magnitude at the token positions. Constant fields
    therefore score ~0 while isolated or fine-textured occupancy scores high.
    """
    pos = np.asarray(positions, dtype=np.int64)
    norms = np.asarray(feature_norms, dtype=np.float64)
    dims = tuple(int(d) for d in grid_dims)
    if pos.ndim != 2 or pos.shape[1] != len(dims):
        raise ValueError(
            f"positions must be (tokens, {len(dims)}) integer coordinates, got {pos.shape}"
        )
    if norms.shape != (pos.shape[0],):
        raise ValueError("feature_norms must be one scalar per token")
    if pos.shape[0] == 0:
        raise ValueError("freq_scores expects at least one token")
    for ax, extent in enumerate(dims):
        if extent < 1:
            raise ValueError(f"grid extents must be >= 1, got {dims}")
        axis_vals = pos[:, ax]
        if axis_vals.min() < 0 or axis_vals.max() >= extent:
            raise ValueError(f"token positions fall outside grid dims {dims}")

    grid = np.zeros(dims, dtype=np.float64)
    grid[tuple(pos.T)] = norms
    spectrum = numerics.fft_nd(grid)
    spectrum[~numerics.highpass_mask(dims, cutoff)] = 0.0
    back = numerics.fft_nd(spectrum, inverse=True)
    return np.abs(back[tuple(pos.T)])


def _minmax(values: np.ndarray) -> np.ndarray:
    lo = values.min()
    span = values.max() - lo
    if span <= 0.0:
        return np.zeros_like(values)
    return (values - lo) / span


def unified_importance(magnitude, abruptness, freq, gamma: float) -> np.ndarray:
    """Blend the three saliency signals after min-max normalizing each.

    J = 0.5 * (M + gamma * A) + 0.5 * S on the normalized terms; constant
    inputs normalize to all-zeros, so they contribute nothing to the ranking.
    """
    if gamma < 0.0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    mag = np.asarray(magnitude, dtype=np.float64)
    abr = np.asarray(abruptness, dtype=np.float64)
    frq = np.asarray(freq, dtype=np.float64)
    if not (mag.shape == abr.shape == frq.shape) or mag.ndim != 1 or mag.size == 0:
        raise ValueError("score vectors must be nonempty and share one length")
    return 0.5 * (_minmax(mag) + gamma * _minmax(abr)) + 0.5 * _minmax(frq)


def carve_mask(importance, keep_ratio: float) -> np.ndarray:
    """Boolean mask keeping the top max(1, floor(keep_ratio * N)) tokens.

    Ties break toward the lower token index, so the mask is a deterministic
    function of the scores.
    """
    scores = np.asarray(importance, dtype=np.float64)
    if scores.ndim != 1 or scores.size == 0:
        raise ValueError("importance must be a nonempty vector")
    if not 0.0 < keep_ratio <= 1.0:
        raise ValueError(f"keep_ratio must lie in (0, 1], got {keep_ratio}")
    keep = max(1, int(np.floor(keep_ratio * scores.size)))
    order = np.argsort(-scores, kind="stable")  # stable: equal scores keep index order
    mask = np.zeros(scores.size, dtype=bool)
    mask[order[:keep]] = True
    return mask


def curvature(v_t, v_prev, x_t, x_prev) -> float | None:
    """Local curvature proxy ||dv||_F / ||dx||_F; None when dx vanishes.

    A None return means the trajectory gave no usable displacement signal
    and callers must treat the next step as requiring a real model call.
    """
    dv = np.asarray(v_t, dtype=np.float64) - np.asarray(v_prev, dtype=np.float64)
    dx = np.asarray(x_t, dtype=np.float64) - np.asarray(x_prev, dtype=np.float64)
    if dv.shape != dx.shape:
        raise ValueError(f"output/input deltas differ in shape: {dv.shape} vs {dx.shape}")
    dx_norm = float(np.linalg.norm(dx))
    if dx_norm == 0.0:
        return None
    return float(np.linalg.norm(dv)) / dx_norm


def accumulate_error(cache: TangentCache, x_t, x_prev, v_prev_norm: float) -> float:
    """Grow the budget by kappa_anchor * ||x_t - x_prev|| / v_prev_norm."""
    if not v_prev_norm > 0.0:
        raise ValueError(f"v_prev_norm must be > 0, got {v_prev_norm}")
    if cache.kappa_anchor is None:
        raise ValueError("cannot accumulate error while curvature is undefined")
    step = float(np.linalg.norm(np.asarray(x_t, float) - np.asarray(x_prev, float)))
    return cache.accumulated_error + cache.kappa_anchor * step / float(v_prev_norm)


def slat_step(
    x_t: np.ndarray,
    step: int,
    mask: np.ndarray,
    cache: TangentCache,
    config: CarveConfig,
    backbone,
) -> tuple[np.ndarray, StepDecision, TangentCache]:
    """One decision of the refinement stage.

    A real model call happens during warmup, whenever no usable anchor or
    curvature exists, and whenever the accumulated budget reaches the
    threshold. On such steps only masked tokens take fresh outputs; the rest
    carry their tangent prediction forward, and the anchor state (offset,
    curvature, budget) is refreshed. All other steps reuse the tangent for
    every token and cost nothing.
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    n_tokens = x_t.shape[0]

    have_anchor = cache.offset_delta is not None
    force_full = step < config.warmup_steps or not have_anchor
    budget = cache.accumulated_error
    if not force_full:
        prev_norm = float(np.linalg.norm(cache.prev_v)) if cache.prev_v is not None else 0.0
        if cache.kappa_anchor is None or cache.prev_x is None or prev_norm <= 0.0:
            force_full = True
        else:
            budget = accumulate_error(cache, x_t, cache.prev_x, prev_norm)
            force_full = budget >= config.error_threshold

    if force_full:
        fresh = np.asarray(backbone(x_t, step), dtype=np.float64)
        if have_anchor and not mask.all():
            v = np.where(mask[:, None], fresh, x_t + cache.offset_delta)
            active = int(mask.sum())
        else:
            v = fresh
            active = n_tokens
        if cache.prev_x is not None:
            cache.kappa_anchor = curvature(v, cache.prev_v, x_t, cache.prev_x)
        cache.offset_delta = v - x_t
        cache.anchor_step = step
        cache.accumulated_error = 0.0
        decision = StepDecision(kind="full", active_tokens=active, budget=0.0)
    else:
        v = x_t + cache.offset_delta
        cache.accumulated_error = budget
        decision = StepDecision(
            kind="tangent", distance=step - cache.anchor_step, budget=budget
        )

    cache.prev_x = x_t
    cache.prev_v = v
    return v, decision, cache


def run_slat_stage(
    backbone,
    config: CarveConfig,
    total_steps: int,
) -> tuple[TrajectoryRecord, RunMetrics]:
    """Run the carved, tangent-cached refinement stage.

    ``backbone`` follows the simulator protocol: callable ``(x, step) -> v``
    with ``initial_state()``, integer ``positions`` and ``grid_dims``.
    Saliency needs history, so warmup steps (and any step before the first
    output exists) evaluate every token. The spatial frequency term is
    computed once from the first post-warmup output unless
    ``refresh_freq_scores`` asks for per-step recomputation.
    """
    if int(total_steps) != total_steps or total_steps < 1:
        raise ValueError(f"total_steps must be an integer >= 1, got {total_steps}")
    x = np.array(backbone.initial_state(), dtype=np.float64)
    n_tokens, _ = x.shape
    positions = np.asarray(backbone.positions, dtype=np.int64)
    grid_dims = tuple(backbone.grid_dims)

    dt = integration_dt(total_steps)
    cache = TangentCache()
    spatial = None
    inputs = np.empty((total_steps, *x.shape))
    outputs = np.empty_like(inputs)
    decisions: list[StepDecision] = []
    anchor_steps: list[int] = []
    realized: list[np.ndarray] = []

    for step in range(total_steps):
        inputs[step] = x
        if step >= config.warmup_steps and realized:
            latest = realized[-1]
            mag = magnitude_scores(latest)
            abrupt = (
                abruptness_scores(latest, realized[-2])
                if len(realized) >= 2
                else np.zeros(n_tokens)
            )
            if spatial is None or config.refresh_freq_scores:
                spatial = freq_scores(positions, mag, grid_dims, config.freq_cutoff)
            unified = unified_importance(mag, abrupt, spatial, config.gamma)
            mask = carve_mask(unified, config.keep_ratio)
        else:
            mask = np.ones(n_tokens, dtype=bool)

        v, decision, cache = slat_step(x, step, mask, cache, config, backbone)
        if decision.kind == "full":
            anchor_steps.append(step)
        decisions.append(decision)
        outputs[step] = v
        realized.append(v)
        x = x + dt * v

    record = TrajectoryRecord(
        inputs=inputs,
        outputs=outputs,
        final_state=x,
        decisions=decisions,
        anchor_steps=anchor_steps,
        partition=None,
    )
    return record, counters_from(record)
