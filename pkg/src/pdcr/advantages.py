"""Outcome, process and combined advantages for a trajectory group.

Modes:

``grpo``
    Group-normalized outcome advantage only.
``dapo``
    ``grpo`` on groups that survive :func:`dynamic_sampling_filter`.
``pacr``
    Outcome plus returns min-max normalized over the whole group.
``pdcr``
    Outcome plus returns min-max normalized inside each skill cluster found
    by :func:`pdcr.decomposition.decompose`.
``pdcr_random``
    As ``pdcr`` but with a random skill partition (ablation).
"""

from __future__ import annotations

import zlib
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from pdcr.config import EngineConfig
from pdcr.confidence import (
    DEGENERATE_VALUE,
    global_process_advantages,
    group_returns,
    minmax_normalize,
)
from pdcr.decomposition import (
    TEXTUAL,
    VISUAL,
    SkillPartition,
    decompose,
    random_partition,
    visual_dependence_scores,
)
from pdcr.errors import CoverageMismatch, LengthMismatch
from pdcr.trajectory import StepIndex, TrajectoryGroup


class TaggedAdvantage(NamedTuple):
    value: float
    cluster: str


def outcome_rewards(group: TrajectoryGroup, format_bonus: float = 0.1) -> np.ndarray:
    """1 for a correct answer, 0 otherwise, plus ``format_bonus`` if compliant."""
    return np.array(
        [float(t.is_correct) + (format_bonus if t.format_ok else 0.0) for t in group.trajectories]
    )


def outcome_advantages(rewards: Sequence[float], std_floor: float = 1e-6) -> np.ndarray:
    """Group-relative advantage ``(R - mean) / max(std, std_floor)``.

    Uses the population std. A group with identical rewards gets exactly
    zero advantage instead of dividing by the floor.
    """
    r = np.asarray(rewards, dtype=float)
    if np.all(r == r[0]):
        return np.zeros_like(r)
    return (r - r.mean()) / max(float(r.std()), std_floor)


def decomposed_advantages(
    returns: Mapping[StepIndex, float], partition: SkillPartition
) -> dict[StepIndex, TaggedAdvantage]:
    """Min-max normalize returns within each cluster of ``partition``."""
    if set(returns) != set(partition.steps) or partition.visual & partition.textual:
        raise CoverageMismatch("partition and returns cover different steps")
    out: dict[StepIndex, TaggedAdvantage] = {}
    for tag, members in ((VISUAL, partition.visual), (TEXTUAL, partition.textual)):
        if not members:
            continue
        keys = sorted(members)
        scaled = minmax_normalize([returns[k] for k in keys])
        for k, v in zip(keys, scaled):
            out[k] = TaggedAdvantage(float(v), tag)
    return out


def combine_advantages(
    outcome: Sequence[float],
    process: Mapping[StepIndex, float],
    lambda_outcome: float = 0.7,
    lambda_process: float = 0.3,
) -> dict[StepIndex, float]:
    """``lambda_outcome * A_O(i) + lambda_process * process(i, k)`` per step."""
    return {
        idx: lambda_outcome * float(outcome[idx.trajectory]) + lambda_process * p
        for idx, p in process.items()
    }


def expand_to_tokens(advantages: Sequence[float], token_counts: Sequence[int]) -> np.ndarray:
    """Repeat each step's advantage over that step's tokens."""
    if len(advantages) != len(token_counts):
        raise LengthMismatch(f"{len(advantages)} advantages vs {len(token_counts)} token counts")
    counts = np.asarray(token_counts, dtype=int)
    if counts.size and counts.min() < 1:
        raise LengthMismatch("token counts must be positive")
    return np.repeat(np.asarray(advantages, dtype=float), counts)


def has_outcome_variance(group: TrajectoryGroup) -> bool:
    outcomes = {t.is_correct for t in group.trajectories}
    return len(outcomes) > 1


def dynamic_sampling_filter(
    groups: Sequence[TrajectoryGroup],
) -> tuple[list[TrajectoryGroup], list[str]]:
    """Drop groups whose correctness outcomes are all identical.

    The format bonus is ignored here; only answer correctness counts.
    """
    kept, dropped = [], []
    for g in groups:
        if has_outcome_variance(g):
            kept.append(g)
        else:
            dropped.append(g.group_id)
    return kept, dropped


@dataclass(frozen=True)
class AdvantageTable:
    """Every advantage computed for one group under one mode."""

    group_id: str
    mode: str
    rewards: np.ndarray
    outcome: np.ndarray
    returns: dict[StepIndex, float]
    total: dict[StepIndex, float]
    token_counts: dict[StepIndex, int]
    lambda_outcome: float
    lambda_process: float
    process_global: dict[StepIndex, float] | None = None
    process_decomposed: dict[StepIndex, TaggedAdvantage] | None = None
    partition: SkillPartition | None = None
    degenerate_clusters: int = 0
    scores: dict[StepIndex, float] = field(default_factory=dict)

    def steps(self) -> list[StepIndex]:
        return sorted(self.total)

    def process(self, idx: StepIndex) -> float:
        if self.process_decomposed is not None:
            return self.process_decomposed[idx].value
        if self.process_global is not None:
            return self.process_global[idx]
        return 0.0

    def cluster(self, idx: StepIndex) -> str:
        if self.process_decomposed is not None:
            return self.process_decomposed[idx].cluster
        return ""

    def token_advantages(self, trajectory: int) -> np.ndarray:
        steps = [s for s in self.steps() if s.trajectory == trajectory]
        return expand_to_tokens([self.total[s] for s in steps], [self.token_counts[s] for s in steps])


def group_seed(seed: int, group_id: str) -> np.random.SeedSequence:
    """Per-group seed so random partitions do not depend on batch order."""
    return np.random.SeedSequence([seed, zlib.crc32(group_id.encode("utf-8"))])


def _count_degenerate(returns: Mapping[StepIndex, float], members) -> int:
    vals = [returns[m] for m in members]
    return int(bool(vals) and max(vals) == min(vals))


def compute_pipeline(
    group: TrajectoryGroup,
    mode: str | None = None,
    config: EngineConfig | None = None,
) -> AdvantageTable:
    """Run the full advantage computation for one group.

    ``mode`` overrides ``config.mode``. Returns use the group's own gamma.
    """
    config = config or EngineConfig()
    mode = (mode or config.mode).replace("-", "_")
    if mode not in ("grpo", "dapo", "pacr", "pdcr", "pdcr_random"):
        raise ValueError(f"unknown mode {mode!r}")

    rewards = outcome_rewards(group, config.format_bonus)
    a_out = outcome_advantages(rewards, config.std_floor)
    returns = group_returns(group)
    tokens = {idx: group.step(idx).token_count for idx in returns}

    process_global = None
    process_decomposed = None
    partition = None
    scores: dict[StepIndex, float] = {}
    degenerate = 0

    if mode in ("grpo", "dapo"):
        process = {idx: 0.0 for idx in returns}
    elif mode == "pacr":
        process_global = global_process_advantages(returns)
        process = process_global
        degenerate = _count_degenerate(returns, returns)
    else:
        scores = visual_dependence_scores(group)
        if mode == "pdcr":
            partition = decompose(scores, config.decomposition_scope, config.spread_tolerance)
        else:
            partition = random_partition(
                returns, config.visual_probability, group_seed(config.seed, group.group_id)
            )
        process_decomposed = decomposed_advantages(returns, partition)
        process = {idx: t.value for idx, t in process_decomposed.items()}
        degenerate = _count_degenerate(returns, partition.visual) + _count_degenerate(
            returns, partition.textual
        )

    total = combine_advantages(a_out, process, config.lambda_outcome, config.lambda_process)
    return AdvantageTable(
        group_id=group.group_id,
        mode=mode,
        rewards=rewards,
        outcome=a_out,
        returns=returns,
        total=total,
        token_counts=tokens,
        lambda_outcome=config.lambda_outcome,
        lambda_process=config.lambda_process,
        process_global=process_global,
        process_decomposed=process_decomposed,
        partition=partition,
        degenerate_clusters=degenerate,
        scores=scores,
    )


__all__ = [
    "AdvantageTable",
    "DEGENERATE_VALUE",
    "TaggedAdvantage",
    "combine_advantages",
    "compute_pipeline",
    "decomposed_advantages",
    "dynamic_sampling_filter",
    "expand_to_tokens",
    "outcome_advantages",
    "outcome_rewards",
]
