"""Sparse, pooled and skill-decomposed advantages for reasoning trajectories."""

from pdcr.advantages import (
    AdvantageTable,
    combine_advantages,
    compute_pipeline,
    decomposed_advantages,
    dynamic_sampling_filter,
    expand_to_tokens,
    outcome_advantages,
    outcome_rewards,
)
from pdcr.config import EngineConfig
from pdcr.confidence import confidence_gains, discounted_returns, global_process_advantages
from pdcr.decomposition import (
    SkillPartition,
    brute_force_split_oracle,
    decompose,
    otsu_threshold,
    partition_by_threshold,
    random_partition,
    topk_partition,
    visual_dependence_scores,
)
from pdcr.evaluation import cohens_kappa, decomposition_accuracy, threshold_sweep
from pdcr.synthetic import MixtureSpec, degradation_report, generate_batch, generate_group
from pdcr.toy import ToyTrainConfig, train_toy
from pdcr.trajectory import (
    StepIndex,
    StepRecord,
    Trajectory,
    TrajectoryGroup,
    check_format_compliance,
    parse_group_log,
    read_group_log,
    segment_trajectory,
    serialize_groups,
    validate_group,
)

__version__ = "0.1.0"

__all__ = [
    "AdvantageTable",
    "brute_force_split_oracle",
    "check_format_compliance",
    "cohens_kappa",
    "combine_advantages",
    "compute_pipeline",
    "confidence_gains",
    "decompose",
    "decomposed_advantages",
    "decomposition_accuracy",
    "degradation_report",
    "discounted_returns",
    "dynamic_sampling_filter",
    "EngineConfig",
    "expand_to_tokens",
    "generate_batch",
    "generate_group",
    "global_process_advantages",
    "MixtureSpec",
    "otsu_threshold",
    "outcome_advantages",
    "outcome_rewards",
    "parse_group_log",
    "partition_by_threshold",
    "random_partition",
    "read_group_log",
    "segment_trajectory",
    "serialize_groups",
    "SkillPartition",
    "StepIndex",
    "StepRecord",
    "threshold_sweep",
    "topk_partition",
    "ToyTrainConfig",
    "train_toy",
    "Trajectory",
    "TrajectoryGroup",
    "validate_group",
    "visual_dependence_scores",
]
