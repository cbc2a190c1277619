"""Hard-sample-aware training-data engine for robot-manipulation episodes.

Filters generated episodes by quality, scores every sample's trajectory
performance, and serves deterministically reweighted training batches that
mix real and generated data.
"""

from .behavior import EpisodeLog, RuleTable, aggregate, builtin_rule_table, score_episode
from .config import PipelineConfig, load_config
from .errors import DataMixError
from .manifest import DatasetManifest, load_manifest, write_manifest
from .metrics import (
    ExecutionReport,
    NormalizedScores,
    RawScores,
    action_mse_score,
    execution_report,
    joint_limit_score,
    minmax_normalize,
    sample_raw_scores,
    smoothness_score,
    unified_scores,
)
from .quality import FilterConfig, apply_filter, clip_alignment, depth_metrics, pixel_match_count
from .records import (
    ActionChunkPair,
    JointTrajectory,
    QualityReport,
    SampleRecord,
    Source,
    validate_trajectory,
    window,
)
from .sampler import (
    Phase,
    SamplerConfig,
    StrataMode,
    WeightTable,
    compute_weights,
    draw_batch,
    emit_epoch_plan,
    phase_schedule,
)

__version__ = "0.1.0"

__all__ = [
    "ActionChunkPair",
    "DataMixError",
    "DatasetManifest",
    "EpisodeLog",
    "ExecutionReport",
    "FilterConfig",
    "JointTrajectory",
    "NormalizedScores",
    "Phase",
    "PipelineConfig",
    "QualityReport",
    "RawScores",
    "RuleTable",
    "SampleRecord",
    "SamplerConfig",
    "Source",
    "StrataMode",
    "WeightTable",
    "action_mse_score",
    "aggregate",
    "apply_filter",
    "builtin_rule_table",
    "clip_alignment",
    "compute_weights",
    "depth_metrics",
    "draw_batch",
    "emit_epoch_plan",
    "execution_report",
    "joint_limit_score",
    "load_config",
    "load_manifest",
    "minmax_normalize",
    "phase_schedule",
    "pixel_match_count",
    "sample_raw_scores",
    "score_episode",
    "smoothness_score",
    "unified_scores",
    "validate_trajectory",
    "window",
    "write_manifest",
]
