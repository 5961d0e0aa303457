"""
Advantage modes on a perceive-then-deduce bandit
================================================

A policy first picks what to look at (only one action reveals the hidden
fact), then answers. We train it with each advantage mode and compare.
"""

import numpy as np

from pdcr.toy import Rollout, ToyPolicy, ToyTrainConfig, compare_modes, episode_update, train_toy

#%%
# When every rollout in a group is correct the outcome advantage vanishes.
# The confidence-based process term still moves the policy.

cfg = ToyTrainConfig()
policy = ToyPolicy.initial(cfg)
group = [Rollout(2, o, 2) for o in (0, 1, 0, 3, 2, 0, 1, 0)]
for mode in ("grpo", "pacr", "pdcr"):
    d = episode_update(policy, group, cfg, mode)
    print(mode, "observe update", d.observe.round(4))

#%%
# Learning curves from a uniform start

for mode in ("grpo", "pacr", "pdcr"):
    res = train_toy(ToyTrainConfig(episodes=300, mode=mode, seed=0))
    marks = [res.success[e] for e in (9, 49, 99, 299)]
    print(mode, " ".join(f"{m:.3f}" for m in marks))

#%%
# Final success over a few seeds. This is a report, not a ranking claim.

rows = compare_modes(ToyTrainConfig(episodes=300), seeds=range(5))
for mode in ("grpo", "dapo", "pacr", "pdcr"):
    finals = [r["final_success"] for r in rows if r["mode"] == mode]
    print(f"{mode:5s} mean final success {np.mean(finals):.3f}")
