"""Training-free acceleration toolkit for iterative denoising samplers.

Three mechanisms, each usable on its own:

* stride step caching with modality-aware extrapolation (smooth token
  streams get finite-difference trend continuation, volatile streams get
  momentum-anchored smoothing),
* saliency-driven token carving with error-budgeted tangent reuse,
* spectral-complexity-driven token aggregation for the decode stage.

A synthetic trajectory simulator provides closed-form ground truth, so
every mechanism's error and compute savings are exactly measurable
against a full-compute oracle.
"""

__version__ = "0.1.0"

from .backend import available_backends, get_backend, set_backend
from .numerics import fft_1d, fft_nd, naive_dft, power_at
from .records import ModalityPartition, RunMetrics, StepDecision, TrajectoryRecord
from .stepcache import (
    ScheduleDecision,
    SsCacheState,
    StepCacheConfig,
    extrapolate_layout,
    extrapolate_shape,
    finite_difference,
    run_ss_stage,
    ss_schedule,
)
from .carve import (
    CarveConfig,
    SaliencyScores,
    TangentCache,
    abruptness_scores,
    accumulate_error,
    carve_mask,
    curvature,
    freq_scores,
    magnitude_scores,
    run_slat_stage,
    slat_step,
    unified_importance,
)
from .spectralagg import (
    AggSchedule,
    SpectralProfile,
    TokenSet,
    aggregate,
    analyze_and_aggregate,
    hfer,
    joint_complexity,
    quantize_coords,
    select_scale,
)
from .sim import SimConfig, SyntheticBackbone, compare_runs, make_backbone, run_oracle
from .cvxg import CvxgError, read_mask, read_voxel_grid, write_mask, write_voxel_grid

__all__ = [
    "__version__",
    "available_backends",
    "get_backend",
    "set_backend",
    "fft_1d",
    "fft_nd",
    "naive_dft",
    "power_at",
    "ModalityPartition",
    "RunMetrics",
    "StepDecision",
    "TrajectoryRecord",
    "ScheduleDecision",
    "SsCacheState",
    "StepCacheConfig",
    "extrapolate_layout",
    "extrapolate_shape",
    "finite_difference",
    "run_ss_stage",
    "ss_schedule",
    "CarveConfig",
    "SaliencyScores",
    "TangentCache",
    "abruptness_scores",
    "accumulate_error",
    "carve_mask",
    "curvature",
    "freq_scores",
    "magnitude_scores",
    "run_slat_stage",
    "slat_step",
    "unified_importance",
    "AggSchedule",
    "SpectralProfile",
    "TokenSet",
    "aggregate",
    "analyze_and_aggregate",
    "hfer",
    "joint_complexity",
    "quantize_coords",
    "select_scale",
    "SimConfig",
    "SyntheticBackbone",
    "compare_runs",
    "make_backbone",
    "run_oracle",
    "CvxgError",
    "read_mask",
    "read_voxel_grid",
    "write_mask",
    "write_voxel_grid",
]
