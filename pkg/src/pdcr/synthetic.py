"""Synthetic two-skill trajectory groups and the degradation analysis.

Every generated step is a perception (``visual``) or reasoning (``textual``)
step. Its confidence gain and its visual-dependence score are drawn from
per-skill Gaussians, so the ground-truth labels are known and the effect of
pooled vs. per-skill normalization can be measured directly.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import asdict, dataclass

import numpy as np

from pdcr.confidence import group_returns, minmax_normalize
from pdcr.decomposition import TEXTUAL, VISUAL
from pdcr.errors import CoverageMismatch, SpecInvalid
from pdcr.trajectory import StepIndex, StepRecord, Trajectory, TrajectoryGroup

# All sampled reals are snapped to this grid so that the differences the
# pipeline takes (logp_real - logp_blank, c_k - c_{k-1}) are exact in float64.
_GRID = 2.0**-24


def _snap(x):
    return np.round(np.asarray(x, dtype=float) / _GRID) * _GRID


@dataclass(frozen=True)
class MixtureSpec:
    visual_fraction: float = 0.314
    visual_gain_mean: float = 0.3
    visual_gain_std: float = 0.2
    textual_gain_mean: float = 0.1
    textual_gain_std: float = 0.6
    visual_dep_mean: float = 3.0
    visual_dep_std: float = 0.5
    textual_dep_mean: float = 0.0
    textual_dep_std: float = 0.5
    steps_min: int = 8
    steps_max: int = 16
    trajectories_per_group: int = 8
    correct_probability: float = 0.5
    gamma: float = 0.9
    n_groups: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.visual_fraction < 1.0:
            raise SpecInvalid("visual_fraction must lie in (0, 1)")
        if not 0.0 <= self.correct_probability <= 1.0:
            raise SpecInvalid("correct_probability must lie in [0, 1]")
        if not 0.0 <= self.gamma <= 1.0:
            raise SpecInvalid("gamma must lie in [0, 1]")
        for name in ("visual_gain_std", "textual_gain_std", "visual_dep_std", "textual_dep_std"):
            if getattr(self, name) < 0:
                raise SpecInvalid(f"{name} must be >= 0")
        if not 1 <= self.steps_min <= self.steps_max:
            raise SpecInvalid("need 1 <= steps_min <= steps_max")
        if self.trajectories_per_group < 2:
            raise SpecInvalid("trajectories_per_group must be >= 2")
        if self.n_groups < 1:
            raise SpecInvalid("n_groups must be >= 1")

    def as_dict(self) -> dict:
        return asdict(self)


def _sample_trajectory(
    spec: MixtureSpec, rng: np.random.Generator, traj_index: int
) -> tuple[Trajectory, dict[StepIndex, str]]:
    k = int(rng.integers(spec.steps_min, spec.steps_max + 1))
    is_visual = rng.random(k) < spec.visual_fraction
    gains = np.where(
        is_visual,
        rng.normal(spec.visual_gain_mean, spec.visual_gain_std, k),
        rng.normal(spec.textual_gain_mean, spec.textual_gain_std, k),
    )
    deps = np.where(
        is_visual,
        rng.normal(spec.visual_dep_mean, spec.visual_dep_std, k),
        rng.normal(spec.textual_dep_mean, spec.textual_dep_std, k),
    )
    gains, deps = _snap(gains), _snap(deps)
    # c0 sits below the running maximum so every confidence stays negative
    prefix = np.cumsum(gains)
    c0 = float(_snap(-(rng.exponential(1.0) + 0.5 + max(0.0, prefix.max()))))
    conf = c0 + prefix
    blank = _snap(-(np.abs(deps) + rng.exponential(4.0, k) + 0.5))
    real = blank + deps
    tokens = rng.integers(4, 40, k)

    steps = tuple(
        StepRecord(
            index=j + 1,
            text=f"step {j + 1}",
            token_count=int(tokens[j]),
            confidence_after=float(conf[j]),
            logp_real=float(real[j]),
            logp_blank=float(blank[j]),
        )
        for j in range(k)
    )
    traj = Trajectory(
        steps=steps,
        confidence_initial=c0,
        is_correct=bool(rng.random() < spec.correct_probability),
        format_ok=True,
    )
    labels = {StepIndex(traj_index, j + 1): (VISUAL if is_visual[j] else TEXTUAL) for j in range(k)}
    return traj, labels


def generate_group(
    spec: MixtureSpec,
    group_id: str = "g0",
    seed: int | np.random.SeedSequence | None = None,
) -> tuple[TrajectoryGroup, dict[StepIndex, str]]:
    """Sample one group and its ground-truth step labels.

    ``seed`` defaults to ``spec.seed``; equal seeds give identical groups.
    """
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    trajs, labels = [], {}
    for i in range(spec.trajectories_per_group):
        traj, lab = _sample_trajectory(spec, rng, i)
        trajs.append(traj)
        labels.update(lab)
    return TrajectoryGroup(group_id, tuple(trajs), spec.gamma), labels


def generate_batch(spec: MixtureSpec) -> list[tuple[TrajectoryGroup, dict[StepIndex, str]]]:
    """``spec.n_groups`` independent groups, seeded from ``spec.seed``."""
    children = np.random.SeedSequence(spec.seed).spawn(spec.n_groups)
    width = len(str(spec.n_groups - 1))
    return [generate_group(spec, f"g{n:0{width}d}", child) for n, child in enumerate(children)]


@dataclass(frozen=True)
class SkillStats:
    count: int
    range: float
    mean: float
    std: float


def _stats(values) -> SkillStats:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return SkillStats(0, 0.0, float("nan"), float("nan"))
    return SkillStats(int(v.size), float(v.max() - v.min()), float(v.mean()), float(v.std()))


@dataclass(frozen=True)
class DegradationReport:
    """How pooled normalization distorts the sparse skill's advantages.

    ``compression_ratio`` is the decomposed visual advantage range divided by
    the global one: how many times the pooled normalization squeezed the
    perception steps. It is 1 when nothing was compressed (including when
    visual steps are absent or all share one return). ``misalignment`` is the
    visual mean minus the textual mean under global normalization.
    """

    global_visual: SkillStats
    global_textual: SkillStats
    decomposed_visual: SkillStats
    decomposed_textual: SkillStats
    compression_ratio: float
    misalignment: float

    def row(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for name in ("global_visual", "global_textual", "decomposed_visual", "decomposed_textual"):
            for key, value in asdict(getattr(self, name)).items():
                out[f"{name}_{key}"] = value
        out["compression_ratio"] = self.compression_ratio
        out["misalignment"] = self.misalignment
        return out


def degradation_report(
    group: TrajectoryGroup,
    labels: Mapping[StepIndex, str],
    gamma: float | None = None,
) -> DegradationReport:
    """Compare global and per-skill min-max advantages using true labels."""
    returns = group_returns(group, gamma)
    if set(labels) != set(returns):
        raise CoverageMismatch("labels must cover exactly the group's steps")
    keys = sorted(returns)
    g = np.array([returns[k] for k in keys])
    vis = np.array([labels[k] == VISUAL for k in keys])

    glob = minmax_normalize(g)
    dec = np.empty_like(g)
    for mask in (vis, ~vis):
        if mask.any():
            dec[mask] = minmax_normalize(g[mask])

    gv, gt = _stats(glob[vis]), _stats(glob[~vis])
    dv, dt = _stats(dec[vis]), _stats(dec[~vis])
    ratio = dv.range / gv.range if dv.range > 0 else 1.0
    misalignment = gv.mean - gt.mean if vis.any() and (~vis).any() else 0.0
    return DegradationReport(gv, gt, dv, dt, ratio, misalignment)
