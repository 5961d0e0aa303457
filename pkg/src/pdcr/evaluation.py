"""Decomposition quality: accuracy, Cohen's kappa and threshold sweeps."""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import NamedTuple

from pdcr.decomposition import (
    DEFAULT_SPREAD_TOLERANCE,
    VISUAL,
    SkillPartition,
    decompose,
    topk_partition,
)
from pdcr.errors import CoverageMismatch, EmptyInput
from pdcr.trajectory import StepIndex


@dataclass(frozen=True)
class ConfusionCounts:
    true_visual_pred_visual: int = 0
    true_visual_pred_textual: int = 0
    true_textual_pred_visual: int = 0
    true_textual_pred_textual: int = 0

    @property
    def total(self) -> int:
        return (
            self.true_visual_pred_visual
            + self.true_visual_pred_textual
            + self.true_textual_pred_visual
            + self.true_textual_pred_textual
        )

    @property
    def accuracy(self) -> float:
        agree = self.true_visual_pred_visual + self.true_textual_pred_textual
        return agree / self.total if self.total else math.nan

    def __add__(self, other: ConfusionCounts) -> ConfusionCounts:
        return ConfusionCounts(
            self.true_visual_pred_visual + other.true_visual_pred_visual,
            self.true_visual_pred_textual + other.true_visual_pred_textual,
            self.true_textual_pred_visual + other.true_textual_pred_visual,
            self.true_textual_pred_textual + other.true_textual_pred_textual,
        )


def decomposition_accuracy(
    predicted: SkillPartition, labels: Mapping[StepIndex, str]
) -> tuple[float, ConfusionCounts]:
    """Fraction of steps whose predicted cluster matches ``labels``."""
    if set(labels) != set(predicted.steps):
        raise CoverageMismatch("labels and partition cover different steps")
    counts = [0, 0, 0, 0]
    agree = 0
    for idx, truth in labels.items():
        pred_visual = idx in predicted.visual
        true_visual = truth == VISUAL
        counts[(0 if true_visual else 2) + (0 if pred_visual else 1)] += 1
        agree += pred_visual == true_visual
    conf = ConfusionCounts(*counts)
    return agree / len(labels), conf


def cohens_kappa(labels_a: Mapping, labels_b: Mapping) -> float:
    """Chance-corrected agreement between two binary labelings.

    When chance agreement is 1 (both raters constant and equal) kappa is
    reported as 1 if observed agreement is perfect, else 0.
    """
    if set(labels_a) != set(labels_b):
        raise CoverageMismatch("labelings cover different keys")
    if not labels_a:
        raise EmptyInput("no labels")
    keys = list(labels_a)
    n = len(keys)
    categories = sorted({labels_a[k] for k in keys} | {labels_b[k] for k in keys}, key=str)
    if len(categories) > 2:
        raise ValueError(f"expected binary labels, got {categories}")
    p_o = sum(labels_a[k] == labels_b[k] for k in keys) / n
    p_e = sum(
        (sum(labels_a[k] == c for k in keys) / n) * (sum(labels_b[k] == c for k in keys) / n)
        for c in categories
    )
    if p_e == 1.0:
        return 1.0 if p_o == 1.0 else 0.0
    return (p_o - p_e) / (1.0 - p_e)


class SweepRow(NamedTuple):
    method: str
    parameter: float
    accuracy: float
    confusion: ConfusionCounts


def _sweep_unit(scores, labels, fractions, scope, spread_tolerance):
    yield "otsu", math.nan, decomposition_accuracy(decompose(scores, scope, spread_tolerance), labels)[1]
    for f in fractions:
        yield "topk", float(f), decomposition_accuracy(topk_partition(scores, f), labels)[1]


def threshold_sweep(
    scores: Mapping[StepIndex, float] | Sequence[Mapping[StepIndex, float]],
    labels: Mapping[StepIndex, str] | Sequence[Mapping[StepIndex, str]],
    fractions: Sequence[float],
    *,
    scope: str = "group",
    spread_tolerance: float = DEFAULT_SPREAD_TOLERANCE,
    per_group: bool = False,
) -> list[SweepRow]:
    """Accuracy of Top-K at each fraction and of the optimal split.

    ``scores``/``labels`` may be one mapping or parallel lists of per-group
    mappings. Each partitioner runs separately on every group. Accuracy is
    pooled over all steps by default; ``per_group=True`` averages per-group
    accuracies instead. Rows are sorted by method, then parameter, with the
    parameterless ``otsu`` row carrying ``nan``.
    """
    if not fractions:
        raise EmptyInput("empty fraction grid")
    if isinstance(scores, Mapping):
        scores, labels = [scores], [labels]
    if len(scores) != len(labels):
        raise CoverageMismatch("scores and labels list different numbers of groups")

    pooled: dict[tuple[str, float], ConfusionCounts] = {}
    averaged: dict[tuple[str, float], list[float]] = {}
    for s, lab in zip(scores, labels):
        for method, param, conf in _sweep_unit(s, lab, fractions, scope, spread_tolerance):
            key = (method, param)
            pooled[key] = pooled.get(key, ConfusionCounts()) + conf
            averaged.setdefault(key, []).append(conf.accuracy)

    rows = []
    for (method, param), conf in pooled.items():
        acc = sum(averaged[(method, param)]) / len(averaged[(method, param)]) if per_group else conf.accuracy
        rows.append(SweepRow(method, param, acc, conf))
    rows.sort(key=lambda r: (r.method, -math.inf if math.isnan(r.parameter) else r.parameter))
    return rows
