"""
Walking one group through the advantage pipeline
================================================

Two trajectories answer the same chart question. We follow them from the
logged confidences and log-probabilities to the per-token advantages.
"""

import io

from pdcr import compute_pipeline, parse_group_log

LOG = """\
{"group_id": "chart", "gamma": 0.5, "is_correct": true, "format_ok": false, "confidence_initial": -2.0, "steps": [{"text": "The chart shows three bars.", "token_count": 2, "confidence_after": -1.5, "logp_real": -1.0, "logp_blank": -4.0}, {"text": "So the sum is 12.", "token_count": 3, "confidence_after": -1.5, "logp_real": -2.0, "logp_blank": -2.0}]}
{"group_id": "chart", "gamma": 0.5, "is_correct": false, "format_ok": false, "confidence_initial": -2.0, "steps": [{"text": "The tallest bar reads 7.", "token_count": 1, "confidence_after": -2.5, "logp_real": -0.5, "logp_blank": -3.0}, {"text": "Adding gives 10.", "token_count": 2, "confidence_after": -1.0, "logp_real": -1.0, "logp_blank": -1.25}]}
"""

(group,) = parse_group_log(io.StringIO(LOG))

#%%
# Confidence gains turn into discounted returns (gamma 0.5 here). How much a
# step depends on the image is the log-likelihood ratio between the real and
# a blank image.

table = compute_pipeline(group, "pdcr")
for idx in table.steps():
    print(f"step {idx}: return {table.returns[idx]:+.3f}  V {table.scores[idx]:+.2f}")

#%%
# The optimal two-cluster split on V puts both image-reading steps in the
# visual cluster. Each cluster is min-max normalized on its own.

print("threshold", table.partition.threshold)
for idx in table.steps():
    print(idx, table.cluster(idx), table.process(idx), round(table.total[idx], 3))

#%%
# Finally every token of a step carries that step's combined advantage.

for i in range(len(group.trajectories)):
    print(i, table.token_advantages(i).round(3))

#%%
# The outcome-only baseline gives every step of a trajectory the same value.

grpo = compute_pipeline(group, "grpo")
print({str(k): round(v, 3) for k, v in grpo.total.items()})
