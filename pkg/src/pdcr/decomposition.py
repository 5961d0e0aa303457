"""Visual-dependence scoring and the split of steps into perception/reasoning.

The main partitioner is a 1-D two-cluster split that minimises total
within-cluster sum of squared errors over every split point of the sorted
scores (Otsu's criterion). Top-K and random partitioners are kept as
baselines.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from pdcr.errors import DegenerateSpread, FractionOutOfRange, TooFewValues
from pdcr.trajectory import StepIndex, TrajectoryGroup

VISUAL = "visual"
TEXTUAL = "textual"

DEFAULT_SPREAD_TOLERANCE = 1e-9
DEFAULT_VISUAL_PROBABILITY = 0.314

# Split SSEs closer than this (relative to the total sum of squares about
# the mean) count as tied; ties resolve to the smallest split index.
TIE_RTOL = 1e-12


class OtsuResult(NamedTuple):
    split_index: int
    threshold: float
    sse: float


@dataclass(frozen=True)
class SkillPartition:
    """Disjoint visual/textual step sets plus how they were produced.

    ``threshold`` is the single cut used for group scope (``inf`` when the
    degenerate fallback put everything in textual). For trajectory scope each
    trajectory has its own cut in ``unit_thresholds`` and ``threshold`` is
    ``None``. Baseline partitioners set ``method`` to ``"topk"``/``"random"``.
    """

    visual: frozenset[StepIndex]
    textual: frozenset[StepIndex]
    threshold: float | None = None
    split_index: int | None = None
    scope: str = "group"
    method: str = "otsu"
    unit_thresholds: Mapping[int, float] = field(default_factory=dict)

    @property
    def steps(self) -> frozenset[StepIndex]:
        return self.visual | self.textual

    def label(self, idx: StepIndex) -> str:
        if idx in self.visual:
            return VISUAL
        if idx in self.textual:
            return TEXTUAL
        raise KeyError(idx)

    def threshold_for(self, idx: StepIndex) -> float | None:
        if self.scope == "trajectory" and self.method == "otsu":
            return self.unit_thresholds.get(idx.trajectory)
        return self.threshold

    @property
    def fallback_units(self) -> int:
        """Scope units that hit the degenerate all-textual fallback."""
        if self.method != "otsu":
            return 0
        if self.scope == "trajectory":
            return sum(math.isinf(t) for t in self.unit_thresholds.values())
        return int(self.threshold is not None and math.isinf(self.threshold))

    def labels(self) -> dict[StepIndex, str]:
        return {idx: self.label(idx) for idx in sorted(self.steps)}


def visual_dependence_scores(group: TrajectoryGroup) -> dict[StepIndex, float]:
    """Log-likelihood ratio of each step under the real vs. blank image."""
    return {
        idx: group.step(idx).logp_real - group.step(idx).logp_blank
        for idx in group.step_indices()
    }


def _split_sse(sorted_values: np.ndarray, k: int) -> float:
    lo, hi = sorted_values[:k], sorted_values[k:]
    return float(((lo - lo.mean()) ** 2).sum() + ((hi - hi.mean()) ** 2).sum())


def otsu_threshold(
    values: Sequence[float],
    spread_tolerance: float = DEFAULT_SPREAD_TOLERANCE,
) -> OtsuResult:
    """Optimal two-cluster split of 1-D values.

    Sorts the values, scores every split ``k`` in ``[1, M-1]`` (lower cluster
    = first ``k`` sorted values) by total within-cluster SSE using prefix
    sums, and returns the smallest minimising ``k``. The threshold is the
    smallest member of the upper cluster, so ``value >= threshold`` selects
    exactly the upper cluster.

    Splits whose prefix-sum SSE lies within the rounding bound of the minimum
    are re-scored with a two-pass sum before the argmin is taken, which keeps
    the result exact when clusters are tight relative to their separation.

    Raises:
        TooFewValues: fewer than two values.
        DegenerateSpread: ``max - min < spread_tolerance``.
    """
    v = np.sort(np.asarray(values, dtype=float))
    m = v.size
    if m < 2:
        raise TooFewValues(f"need at least 2 values, got {m}")
    if v[-1] - v[0] < spread_tolerance:
        raise DegenerateSpread(f"spread {v[-1] - v[0]!r} below {spread_tolerance!r}")

    x = v - v.mean()
    total_sq = float(np.dot(x, x))
    k = np.arange(1, m)
    s1 = np.cumsum(x)[:-1]
    s = s1[-1] + x[-1]
    sse = total_sq - s1**2 / k - (s - s1) ** 2 / (m - k)

    bound = 8.0 * m * np.finfo(float).eps * total_sq
    candidates = np.flatnonzero(sse <= sse.min() + 2.0 * bound) + 1
    exact = np.array([_split_sse(v, int(c)) for c in candidates])
    tie = TIE_RTOL * total_sq
    best = int(np.flatnonzero(exact <= exact.min() + tie)[0])
    k_star = int(candidates[best])
    return OtsuResult(k_star, float(v[k_star]), float(exact[best]))


def brute_force_split_oracle(values: Sequence[float]) -> tuple[int, float]:
    """Reference split by direct summation over every ``k``; O(M^2).

    Pure Python with ``math.fsum``, independent of :func:`otsu_threshold`.
    Uses the same tie rule (smallest ``k`` within ``TIE_RTOL`` of the total
    sum of squares).
    """
    v = sorted(float(x) for x in values)
    m = len(v)
    if m < 2:
        raise TooFewValues(f"need at least 2 values, got {m}")
    mean = math.fsum(v) / m
    total_sq = math.fsum((x - mean) ** 2 for x in v)
    sses = []
    for k in range(1, m):
        lo, hi = v[:k], v[k:]
        mu1 = math.fsum(lo) / k
        mu2 = math.fsum(hi) / (m - k)
        sses.append(math.fsum((x - mu1) ** 2 for x in lo) + math.fsum((x - mu2) ** 2 for x in hi))
    floor = min(sses) + TIE_RTOL * total_sq
    for k, value in enumerate(sses, start=1):
        if value <= floor:
            return k, value
    raise AssertionError("unreachable")


def partition_by_threshold(
    scores: Mapping[StepIndex, float], threshold: float, scope: str = "group"
) -> SkillPartition:
    visual = frozenset(i for i, s in scores.items() if s >= threshold)
    textual = frozenset(i for i, s in scores.items() if s < threshold)
    return SkillPartition(visual, textual, threshold=threshold, scope=scope, method="threshold")


def _otsu_unit(scores: Mapping[StepIndex, float], spread_tolerance: float) -> tuple[float, int | None]:
    if len(scores) < 2:
        return math.inf, None
    try:
        res = otsu_threshold(list(scores.values()), spread_tolerance)
    except DegenerateSpread:
        return math.inf, None
    return res.threshold, res.split_index


def decompose(
    scores: Mapping[StepIndex, float],
    scope: str = "group",
    spread_tolerance: float = DEFAULT_SPREAD_TOLERANCE,
) -> SkillPartition:
    """Split steps into visual/textual by the optimal dependence threshold.

    ``group`` scope runs one split over all scores; ``trajectory`` scope
    splits each trajectory separately and unions the results. A unit with
    fewer than two steps or a flat score spread goes entirely to textual.
    """
    if scope not in ("group", "trajectory"):
        raise ValueError(f"unknown scope {scope!r}")
    if scope == "group":
        threshold, k = _otsu_unit(scores, spread_tolerance)
        part = partition_by_threshold(scores, threshold)
        return SkillPartition(part.visual, part.textual, threshold=threshold, split_index=k)

    by_traj: dict[int, dict[StepIndex, float]] = {}
    for idx, s in scores.items():
        by_traj.setdefault(idx.trajectory, {})[idx] = s
    visual: set[StepIndex] = set()
    textual: set[StepIndex] = set()
    cuts: dict[int, float] = {}
    for t in sorted(by_traj):
        cut, _ = _otsu_unit(by_traj[t], spread_tolerance)
        cuts[t] = cut
        for idx, s in by_traj[t].items():
            (visual if s >= cut else textual).add(idx)
    return SkillPartition(
        frozenset(visual), frozenset(textual), scope="trajectory", unit_thresholds=cuts
    )


def topk_partition(scores: Mapping[StepIndex, float], fraction: float) -> SkillPartition:
    """Label the ``ceil(fraction * M)`` highest-scoring steps visual.

    Ties at the cutoff go to the lower (trajectory, step) index. ``threshold``
    records the lowest visual score.
    """
    if not 0.0 < fraction < 1.0:
        raise FractionOutOfRange(f"fraction={fraction} outside (0, 1)")
    if not scores:
        raise TooFewValues("no scores")
    # round() guards against 0.3 * 10 == 3.0000000000000004
    n_visual = math.ceil(round(fraction * len(scores), 9))
    ranked = sorted(scores, key=lambda i: (-scores[i], i))
    visual = frozenset(ranked[:n_visual])
    textual = frozenset(ranked[n_visual:])
    cut = min((scores[i] for i in visual), default=math.inf)
    return SkillPartition(visual, textual, threshold=cut, method="topk")


def random_partition(
    step_indices: Iterable[StepIndex],
    visual_probability: float = DEFAULT_VISUAL_PROBABILITY,
    seed: int | np.random.SeedSequence | None = 0,
) -> SkillPartition:
    """Label each step visual independently with ``visual_probability``."""
    if not 0.0 <= visual_probability <= 1.0:
        raise FractionOutOfRange(f"visual_probability={visual_probability} outside [0, 1]")
    steps = sorted(step_indices)
    draws = np.random.default_rng(seed).random(len(steps))
    visual = frozenset(s for s, u in zip(steps, draws) if u < visual_probability)
    textual = frozenset(s for s in steps if s not in visual)
    return SkillPartition(visual, textual, method="random")
