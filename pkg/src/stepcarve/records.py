"""Shared run-record shapes used by the cached runners and the simulator."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def integration_dt(total_steps: int) -> float:
    """Latent update size per step; the run integrates x += dt * v."""
    if total_steps < 1:
        raise ValueError(f"total_steps must be >= 1, got {total_steps}")
    return 1.0 / total_steps


def relative_frobenius(value: np.ndarray, reference: np.ndarray) -> float:
    """||value - reference||_F / ||reference||_F, with 0/0 -> 0 and x/0 -> inf."""
    diff = float(np.linalg.norm(value - reference))
    ref = float(np.linalg.norm(reference))
    if ref > 0.0:
        return diff / ref
    return 0.0 if diff == 0.0 else float("inf")


@dataclass(frozen=True)
class ModalityPartition:
    """Disjoint split of token indices into a smooth stream and a volatile one."""

    shape_indices: np.ndarray
    layout_indices: np.ndarray

    def __post_init__(self):
        shape_idx = np.asarray(self.shape_indices, dtype=np.int64)
        layout_idx = np.asarray(self.layout_indices, dtype=np.int64)
        object.__setattr__(self, "shape_indices", shape_idx)
        object.__setattr__(self, "layout_indices", layout_idx)
        merged = np.concatenate([shape_idx, layout_idx])
        if merged.size != np.unique(merged).size:
            raise ValueError("shape and layout index sets must be disjoint")

    def validate_for(self, token_count: int) -> None:
        merged = np.concatenate([self.shape_indices, self.layout_indices])
        if merged.size != token_count or not np.array_equal(
            np.sort(merged), np.arange(token_count)
        ):
            raise ValueError(
                f"partition must cover exactly the token range 0..{token_count - 1}"
            )

    @classmethod
    def trailing_layout(cls, token_count: int, layout_count: int) -> "ModalityPartition":
        """Convention used by the simulator: the last tokens are the layout stream."""
        if not 0 <= layout_count <= token_count:
            raise ValueError(
                f"layout_count must lie in [0, {token_count}], got {layout_count}"
            )
        split = token_count - layout_count
        return cls(np.arange(split), np.arange(split, token_count))


@dataclass(frozen=True)
class StepDecision:
    """What happened at one step of a cached run.

    kind: "full" (real model call), "extrapolate" (stride-cache prediction)
    or "tangent" (cached-offset reuse).
    distance: steps since the anchor this prediction leans on (0 on full).
    active_tokens: tokens actually sent through the model (0 when skipped).
    fallback: a zero-order hold was used because no gradient existed yet.
    budget: accumulated error budget after the step (0 right after a refresh).
    """

    kind: str
    distance: int = 0
    active_tokens: int = 0
    fallback: bool = False
    budget: float = 0.0


@dataclass
class TrajectoryRecord:
    """Per-step tape of one run: latents in, predictions out, decisions taken."""

    inputs: np.ndarray  # (T, N, F) latent state entering each step
    outputs: np.ndarray  # (T, N, F) realized per-step prediction
    final_state: np.ndarray  # (N, F) latent after the last update
    decisions: list[StepDecision]
    anchor_steps: list[int]
    partition: ModalityPartition | None = None

    def __post_init__(self):
        steps = self.inputs.shape[0]
        if self.outputs.shape != self.inputs.shape:
            raise ValueError("inputs and outputs must share one (T, N, F) shape")
        if len(self.decisions) != steps or self.final_state.shape != self.inputs.shape[1:]:
            raise ValueError("record lengths are inconsistent with the step count")

    @property
    def total_steps(self) -> int:
        return self.inputs.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.inputs.shape[2]


@dataclass
class RunMetrics:
    """Compute counters plus (after comparison against an oracle) error figures.

    flops_proxy counts token evaluations times feature_dim squared; it is a
    relative cost model, not a hardware estimate.
    """

    full_eval_count: int = 0
    token_evals: int = 0
    flops_proxy: float = 0.0
    fallback_count: int = 0
    per_step_error: np.ndarray = field(default_factory=lambda: np.zeros(0))
    final_error: float = 0.0
    layout_drift: float = 0.0


def counters_from(record: TrajectoryRecord) -> RunMetrics:
    """Fold a decision log into compute counters (error fields left zero)."""
    full = sum(1 for d in record.decisions if d.kind == "full")
    token_evals = sum(d.active_tokens for d in record.decisions)
    fd = record.feature_dim
    return RunMetrics(
        full_eval_count=full,
        token_evals=token_evals,
        flops_proxy=float(token_evals) * fd * fd,
        fallback_count=sum(1 for d in record.decisions if d.fallback),
        per_step_error=np.zeros(record.total_steps),
    )
