"""Confidence gains, discounted returns and pooled min-max process advantages."""

from __future__ import annotations

from collections.abc import Mapping, Sequence

import numpy as np

from pdcr.errors import EmptyPool, EmptySeries, GammaOutOfRange
from pdcr.trajectory import StepIndex, TrajectoryGroup

#: Value emitted for every member of a pool whose returns are all equal.
DEGENERATE_VALUE = 0.5


def confidence_gains(c0: float, confidences: Sequence[float]) -> np.ndarray:
    """Per-step change in ground-truth log-probability.

    ``gains[k-1] = c_k - c_{k-1}`` with ``c_0 = c0``. The gains telescope to
    ``c_K - c_0``.
    """
    c = np.asarray(confidences, dtype=float)
    if c.ndim != 1 or c.size == 0:
        raise EmptySeries("confidences must be a non-empty 1-D sequence")
    return np.diff(c, prepend=float(c0))


def discounted_returns(gains: Sequence[float], gamma: float) -> np.ndarray:
    """Suffix sums ``G_k = g_k + gamma * G_{k+1}`` computed backwards."""
    if not 0.0 <= gamma <= 1.0:
        raise GammaOutOfRange(f"gamma={gamma} outside [0, 1]")
    g = np.asarray(gains, dtype=float)
    out = np.empty_like(g)
    acc = 0.0
    for k in range(g.size - 1, -1, -1):
        acc = g[k] + gamma * acc
        out[k] = acc
    return out


def minmax_normalize(values: Sequence[float]) -> np.ndarray:
    """Scale ``values`` onto [0, 1] against their own min and max.

    A constant (or single-element) pool maps to :data:`DEGENERATE_VALUE`.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise EmptyPool("cannot normalize an empty pool")
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.full(v.shape, DEGENERATE_VALUE)
    return (v - lo) / (hi - lo)


def group_returns(group: TrajectoryGroup, gamma: float | None = None) -> dict[StepIndex, float]:
    """Discounted return of every step in the group, keyed by step index."""
    gamma = group.gamma if gamma is None else gamma
    out: dict[StepIndex, float] = {}
    for i, traj in enumerate(group.trajectories):
        returns = discounted_returns(
            confidence_gains(traj.confidence_initial, traj.confidences), gamma
        )
        for k, value in enumerate(returns, start=1):
            out[StepIndex(i, k)] = float(value)
    return out


def global_process_advantages(
    group_returns: Mapping[StepIndex, float],
) -> dict[StepIndex, float]:
    """Min-max normalize returns against the pool of all steps in the group."""
    if not group_returns:
        raise EmptyPool("no steps in the pool")
    keys = list(group_returns)
    scaled = minmax_normalize([group_returns[k] for k in keys])
    return {k: float(v) for k, v in zip(keys, scaled)}
