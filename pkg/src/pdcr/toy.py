"""A two-step perceive-then-deduce bandit trained with group advantages.

Each episode draws a hidden fact ``f`` out of ``n_facts``. A rollout first
picks one of ``n_observations`` observation actions; only action 0 reveals
``f``, the others show nothing. It then picks a deduction conditioned on
what it saw and succeeds iff the deduction equals ``f``. The first step is
the perception step, the second the reasoning step.

Because the environment is fully known, the quantities a real pipeline
would log are computed exactly:

* confidence in the true fact before the episode, after observing, and
  after answering;
* step log-probabilities under the real observation and under a blank one
  (a blank observation cannot identify ``f``), so the revealing step's
  dependence score is ``log(n_facts)`` and every other step scores 0.

Each episode samples a group of rollouts, runs
:func:`pdcr.advantages.compute_pipeline` on it, and takes one
advantage-weighted log-likelihood ascent step on the logit tables.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from pdcr.advantages import compute_pipeline
from pdcr.config import MODES, EngineConfig
from pdcr.errors import ConfigInvalid
from pdcr.trajectory import StepIndex, StepRecord, Trajectory, TrajectoryGroup

REVEAL_ACTION = 0
ANSWER_EPS = 1e-3


@dataclass(frozen=True)
class ToyTrainConfig:
    n_observations: int = 4
    n_facts: int = 4
    episodes: int = 500
    group_size: int = 8
    learning_rate: float = 0.5
    mode: str = "pdcr"
    lambda_outcome: float = 0.7
    lambda_process: float = 0.3
    gamma: float = 0.9
    init: str = "uniform"
    init_logit: float = 30.0
    dapo_max_resamples: int = 8
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", str(self.mode).replace("-", "_"))
        if self.mode not in MODES:
            raise ConfigInvalid(f"mode must be one of {MODES}")
        for name in ("n_observations", "n_facts", "episodes", "group_size"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ConfigInvalid(f"{name} must be a positive integer")
        if self.n_observations < 2 or self.n_facts < 2 or self.group_size < 2:
            raise ConfigInvalid("n_observations, n_facts and group_size must be >= 2")
        if not (math.isfinite(self.learning_rate) and self.learning_rate >= 0):
            raise ConfigInvalid("learning_rate must be finite and >= 0")
        if self.init not in ("uniform", "expert"):
            raise ConfigInvalid("init must be 'uniform' or 'expert'")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigInvalid("gamma must lie in [0, 1]")
        if self.lambda_outcome < 0 or self.lambda_process < 0:
            raise ConfigInvalid("lambda weights must be >= 0")
        if self.dapo_max_resamples < 1:
            raise ConfigInvalid("dapo_max_resamples must be >= 1")

    def engine_config(self) -> EngineConfig:
        return EngineConfig(
            mode=self.mode,
            gamma=self.gamma,
            lambda_outcome=self.lambda_outcome,
            lambda_process=self.lambda_process,
            format_bonus=0.0,
            seed=self.seed,
        )

    def as_dict(self) -> dict:
        return asdict(self)


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class ToyPolicy:
    """Logit tables. Row ``n_facts`` of ``deduce`` is the 'saw nothing' state."""

    observe: np.ndarray
    deduce: np.ndarray

    @classmethod
    def initial(cls, config: ToyTrainConfig) -> ToyPolicy:
        observe = np.zeros(config.n_observations)
        deduce = np.zeros((config.n_facts + 1, config.n_facts))
        if config.init == "expert":
            observe[REVEAL_ACTION] = config.init_logit
            deduce[np.arange(config.n_facts), np.arange(config.n_facts)] = config.init_logit
        return cls(observe, deduce)

    def copy(self) -> ToyPolicy:
        return ToyPolicy(self.observe.copy(), self.deduce.copy())

    @property
    def n_facts(self) -> int:
        return self.deduce.shape[1]

    def seen(self, fact: int, obs: int) -> int:
        return fact if obs == REVEAL_ACTION else self.n_facts

    def success_probability(self) -> float:
        """Exact expected success rate under a uniformly random fact."""
        p_obs = _softmax(self.observe)
        p_ded = _softmax(self.deduce)
        revealed = np.mean(np.diag(p_ded[: self.n_facts]))
        blind = np.mean(p_ded[self.n_facts])
        return float(p_obs[REVEAL_ACTION] * revealed + (1 - p_obs[REVEAL_ACTION]) * blind)


class Rollout(NamedTuple):
    fact: int
    obs: int
    deduction: int

    @property
    def correct(self) -> bool:
        return self.deduction == self.fact


def sample_rollouts(
    policy: ToyPolicy, fact: int, n: int, rng: np.random.Generator
) -> list[Rollout]:
    p_obs = _softmax(policy.observe)
    p_ded = _softmax(policy.deduce)
    out = []
    for _ in range(n):
        obs = int(rng.choice(p_obs.size, p=p_obs))
        ded = int(rng.choice(policy.n_facts, p=p_ded[policy.seen(fact, obs)]))
        out.append(Rollout(fact, obs, ded))
    return out


def rollouts_to_group(
    policy: ToyPolicy, rollouts: list[Rollout], gamma: float, group_id: str = "toy"
) -> TrajectoryGroup:
    """Build the log a real pipeline would record for these rollouts."""
    p_obs = _softmax(policy.observe)
    p_ded = _softmax(policy.deduce)
    n_facts = policy.n_facts
    trajs = []
    for r in rollouts:
        seen = policy.seen(r.fact, r.obs)
        c0 = math.log(
            p_obs[REVEAL_ACTION] * p_ded[r.fact, r.fact]
            + (1 - p_obs[REVEAL_ACTION]) * p_ded[n_facts, r.fact]
        )
        c1 = math.log(p_ded[seen, r.fact])
        c2 = math.log(1 - ANSWER_EPS) if r.correct else math.log(ANSWER_EPS)
        lp_obs = math.log(p_obs[r.obs])
        lp_obs_blank = lp_obs - math.log(n_facts) if r.obs == REVEAL_ACTION else lp_obs
        lp_ded = math.log(p_ded[seen, r.deduction])
        steps = (
            StepRecord(1, f"observe {r.obs}", 1, c1, lp_obs, lp_obs_blank),
            StepRecord(2, f"answer {r.deduction}", 1, c2, lp_ded, lp_ded),
        )
        trajs.append(Trajectory(steps, c0, r.correct, True, str(r.deduction)))
    return TrajectoryGroup(group_id, tuple(trajs), gamma)


def policy_gradient(
    policy: ToyPolicy, rollouts: list[Rollout], advantages: dict[StepIndex, float]
) -> ToyPolicy:
    """Group-mean of ``A * grad log pi(action)`` for both steps."""
    p_obs = _softmax(policy.observe)
    p_ded = _softmax(policy.deduce)
    g_obs = np.zeros_like(policy.observe)
    g_ded = np.zeros_like(policy.deduce)
    for i, r in enumerate(rollouts):
        a1 = advantages[StepIndex(i, 1)]
        a2 = advantages[StepIndex(i, 2)]
        g_obs -= a1 * p_obs
        g_obs[r.obs] += a1
        seen = policy.seen(r.fact, r.obs)
        g_ded[seen] -= a2 * p_ded[seen]
        g_ded[seen, r.deduction] += a2
    n = len(rollouts)
    return ToyPolicy(g_obs / n, g_ded / n)


def episode_update(
    policy: ToyPolicy, rollouts: list[Rollout], config: ToyTrainConfig, mode: str | None = None
) -> ToyPolicy:
    """Return the parameter change one episode would apply (not the new policy)."""
    group = rollouts_to_group(policy, rollouts, config.gamma)
    table = compute_pipeline(group, mode or config.mode, config.engine_config())
    grad = policy_gradient(policy, rollouts, table.total)
    return ToyPolicy(config.learning_rate * grad.observe, config.learning_rate * grad.deduce)


@dataclass
class TrainResult:
    config: ToyTrainConfig
    success: list[float] = field(default_factory=list)
    group_success: list[float] = field(default_factory=list)
    update_norm: list[float] = field(default_factory=list)
    policy: ToyPolicy | None = None

    def summary(self) -> dict:
        p_obs = _softmax(self.policy.observe)
        p_ded = _softmax(self.policy.deduce)
        n = self.policy.n_facts
        return {
            "mode": self.config.mode,
            "seed": self.config.seed,
            "episodes": self.config.episodes,
            "initial_success": self.success[0] if self.success else math.nan,
            "final_success": self.success[-1] if self.success else math.nan,
            "p_reveal": float(p_obs[REVEAL_ACTION]),
            "p_correct_when_revealed": float(np.mean(np.diag(p_ded[:n]))),
            "zero_update_episodes": int(sum(u == 0.0 for u in self.update_norm)),
        }

    def curve_rows(self) -> list[dict]:
        return [
            {"episode": e, "success": s, "group_success": gs, "update_norm": u}
            for e, (s, gs, u) in enumerate(
                zip(self.success, self.group_success, self.update_norm), start=1
            )
        ]


def train_toy(config: ToyTrainConfig) -> TrainResult:
    """Train a fresh policy; ``success[e]`` is the exact success rate after episode ``e``."""
    rng = np.random.default_rng(config.seed)
    policy = ToyPolicy.initial(config)
    result = TrainResult(config)
    for _ in range(config.episodes):
        fact = int(rng.integers(config.n_facts))
        rollouts = sample_rollouts(policy, fact, config.group_size, rng)
        keep = True
        if config.mode == "dapo":
            tries = 1
            while not _has_variance(rollouts) and tries < config.dapo_max_resamples:
                rollouts = sample_rollouts(policy, fact, config.group_size, rng)
                tries += 1
            keep = _has_variance(rollouts)
        norm = 0.0
        if keep:
            delta = episode_update(policy, rollouts, config)
            policy = ToyPolicy(policy.observe + delta.observe, policy.deduce + delta.deduce)
            norm = float(np.sqrt(np.sum(delta.observe**2) + np.sum(delta.deduce**2)))
        result.group_success.append(float(np.mean([r.correct for r in rollouts])))
        result.success.append(policy.success_probability())
        result.update_norm.append(norm)
    result.policy = policy
    return result


def _has_variance(rollouts: list[Rollout]) -> bool:
    return len({r.correct for r in rollouts}) > 1


def compare_modes(
    config: ToyTrainConfig, modes: tuple[str, ...] = ("grpo", "dapo", "pacr", "pdcr"), seeds=range(10)
) -> list[dict]:
    """Final success for every (mode, seed) pair; a report, not a claim."""
    rows = []
    for mode in modes:
        for seed in seeds:
            cfg = ToyTrainConfig(**{**config.as_dict(), "mode": mode, "seed": int(seed)})
            rows.append(train_toy(cfg).summary())
    return rows
