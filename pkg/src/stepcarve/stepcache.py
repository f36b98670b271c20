"""Stride step caching for the structure-generation stage.

The run evaluates the real model ("full eval") on a warmup prefix and then
once every ``stride_k`` steps; every other step is filled in from the two
most recent full evaluations (the anchors). Smooth shape tokens get plain
finite-difference trend continuation; volatile layout tokens get the same
extrapolation blended toward the last anchor by a momentum factor, which
damps the overshoot that raw extrapolation shows on oscillating streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .records import (
    ModalityPartition,
    RunMetrics,
    StepDecision,
    TrajectoryRecord,
    counters_from,
    integration_dt,
)

__all__ = [
    "StepCacheConfig",
    "ScheduleDecision",
    "SsCacheState",
    "ModalityPartition",
    "finite_difference",
    "extrapolate_shape",
    "extrapolate_layout",
    "ss_schedule",
    "full_eval_count",
    "run_ss_stage",
]


@dataclass(frozen=True)
class StepCacheConfig:
    stride_k: int = 3
    momentum_beta: float = 0.5
    warmup_steps: int = 2
    total_steps: int = 25

    def __post_init__(self):
        if int(self.stride_k) != self.stride_k or self.stride_k < 1:
            raise ValueError(f"stride_k must be an integer >= 1, got {self.stride_k}")
        if not 0.0 <= self.momentum_beta <= 1.0:
            raise ValueError(
                f"momentum_beta must lie in [0, 1], got {self.momentum_beta}"
            )
        if int(self.warmup_steps) != self.warmup_steps or self.warmup_steps < 0:
            raise ValueError(
                f"warmup_steps must be an integer >= 0, got {self.warmup_steps}"
            )
        if int(self.total_steps) != self.total_steps or self.total_steps < 1:
            raise ValueError(
                f"total_steps must be an integer >= 1, got {self.total_steps}"
            )
        if self.warmup_steps >= self.total_steps:
            raise ValueError(
                f"warmup_steps must be < total_steps "
                f"({self.warmup_steps} >= {self.total_steps})"
            )


@dataclass(frozen=True)
class ScheduleDecision:
    """full_eval=True runs the model; otherwise extrapolate at the given distance."""

    full_eval: bool
    distance: int = 0


@dataclass
class SsCacheState:
    """Rolling anchor state kept by the cached runner."""

    last_anchor_step: int = -1
    prev_anchor_step: int = -1
    anchor_output: np.ndarray | None = None
    prev_anchor_output: np.ndarray | None = None
    grad: np.ndarray | None = None  # per-step slope from the last two anchors
    layout_anchor: np.ndarray | None = None


def finite_difference(v_current: np.ndarray, v_prev_anchor: np.ndarray, k: int) -> np.ndarray:
    """Per-step slope between two anchors that are ``k`` steps apart."""
    cur = np.asarray(v_current, dtype=np.float64)
    prev = np.asarray(v_prev_anchor, dtype=np.float64)
    if cur.shape != prev.shape:
        raise ValueError(f"anchor shapes differ: {cur.shape} vs {prev.shape}")
    if int(k) != k or k < 1:
        raise ValueError(f"anchor distance k must be an integer >= 1, got {k}")
    return (cur - prev) / float(k)


def extrapolate_shape(v_anchor: np.ndarray, grad: np.ndarray, i: int) -> np.ndarray:
    """Trend continuation ``i`` steps past the anchor: v_anchor + i * grad.

    Exact (zero error) whenever the stream is affine in the step index.
    """
    anchor = np.asarray(v_anchor, dtype=np.float64)
    slope = np.asarray(grad, dtype=np.float64)
    if anchor.shape != slope.shape:
        raise ValueError(f"anchor/gradient shapes differ: {anchor.shape} vs {slope.shape}")
    if int(i) != i or i < 1:
        raise ValueError(f"extrapolation distance must be an integer >= 1, got {i}")
    return anchor + float(i) * slope


def extrapolate_layout(
    v_anchor: np.ndarray,
    grad: np.ndarray,
    i: int,
    layout_anchor: np.ndarray,
    beta: float,
) -> np.ndarray:
    """Momentum-anchored smoothing: blend trend continuation with the anchor.

    beta=1 reduces to :func:`extrapolate_shape`; beta=0 holds the anchor.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    anchor = np.asarray(layout_anchor, dtype=np.float64)
    linear = extrapolate_shape(v_anchor, grad, i)
    if anchor.shape != linear.shape:
        raise ValueError(
            f"layout anchor shape {anchor.shape} does not match prediction {linear.shape}"
        )
    return beta * linear + (1.0 - beta) * anchor


def ss_schedule(step_index: int, config: StepCacheConfig) -> ScheduleDecision:
    """Full eval for the warmup prefix and every stride_k-th step after it."""
    if not 0 <= step_index < config.total_steps:
        raise ValueError(
            f"step_index must lie in [0, {config.total_steps}), got {step_index}"
        )
    w, k = config.warmup_steps, config.stride_k
    if step_index < w or (step_index - w) % k == 0:
        return ScheduleDecision(full_eval=True)
    last_full = w + ((step_index - w) // k) * k
    return ScheduleDecision(full_eval=False, distance=step_index - last_full)


def full_eval_count(config: StepCacheConfig) -> int:
    """Closed-form count of scheduled full evaluations: warmup + ceil((T-w)/k)."""
    w, k, t = config.warmup_steps, config.stride_k, config.total_steps
    return w + math.ceil((t - w) / k)


def run_ss_stage(
    backbone,
    partition: ModalityPartition,
    config: StepCacheConfig,
) -> tuple[TrajectoryRecord, RunMetrics]:
    """Run the stride-cached structure stage.

    ``backbone`` is a deterministic map ``(x, step) -> v`` that also exposes
    ``initial_state()`` (see the simulator for the protocol). Full-eval steps
    refresh the anchors and recompute the finite difference from the actual
    anchor spacing; skipped steps are filled per modality. If a skipped step
    arrives before two anchors exist, the anchor value is held as-is and the
    step is flagged as a fallback in the metrics.
    """
    x = np.array(backbone.initial_state(), dtype=np.float64)
    n_tokens, _ = x.shape
    partition.validate_for(n_tokens)
    shape_idx = partition.shape_indices
    layout_idx = partition.layout_indices

    dt = integration_dt(config.total_steps)
    state = SsCacheState()
    inputs = np.empty((config.total_steps, *x.shape))
    outputs = np.empty_like(inputs)
    decisions: list[StepDecision] = []
    anchor_steps: list[int] = []

    for step in range(config.total_steps):
        inputs[step] = x
        decided = ss_schedule(step, config)
        if decided.full_eval:
            v = np.asarray(backbone(x, step), dtype=np.float64)
            if state.anchor_output is not None:
                spacing = step - state.last_anchor_step
                state.grad = finite_difference(v, state.anchor_output, spacing)
                state.prev_anchor_output = state.anchor_output
                state.prev_anchor_step = state.last_anchor_step
            state.anchor_output = v
            state.last_anchor_step = step
            state.layout_anchor = v[layout_idx]
            anchor_steps.append(step)
            decisions.append(StepDecision(kind="full", active_tokens=n_tokens))
        else:
            anchor = state.anchor_output
            if state.grad is None:
                # only one anchor so far: zero-order hold, flagged
                v = anchor.copy()
                decisions.append(
                    StepDecision(kind="extrapolate", distance=decided.distance, fallback=True)
                )
            else:
                v = np.empty_like(anchor)
                v[shape_idx] = extrapolate_shape(
                    anchor[shape_idx], state.grad[shape_idx], decided.distance
                )
                v[layout_idx] = extrapolate_layout(
                    anchor[layout_idx],
                    state.grad[layout_idx],
                    decided.distance,
                    state.layout_anchor,
                    config.momentum_beta,
                )
                decisions.append(
                    StepDecision(kind="extrapolate", distance=decided.distance)
                )
        outputs[step] = v
        x = x + dt * v

    record = TrajectoryRecord(
        inputs=inputs,
        outputs=outputs,
        final_state=x,
        decisions=decisions,
        anchor_steps=anchor_steps,
        partition=partition,
    )
    return record, counters_from(record)
