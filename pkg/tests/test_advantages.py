import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdcr.advantages import (
    combine_advantages,
    compute_pipeline,
    decomposed_advantages,
    dynamic_sampling_filter,
    expand_to_tokens,
    outcome_advantages,
    outcome_rewards,
)
from pdcr.config import EngineConfig
from pdcr.confidence import global_process_advantages
from pdcr.decomposition import SkillPartition
from pdcr.errors import CoverageMismatch, LengthMismatch
from pdcr.trajectory import StepIndex

from conftest import make_group

A, B, C, D = (StepIndex(0, 1), StepIndex(0, 2), StepIndex(1, 1), StepIndex(1, 2))


def part(visual, textual):
    return SkillPartition(frozenset(visual), frozenset(textual))


@pytest.mark.parametrize(
    "correct, fmt, bonus, expected",
    [(True, True, 0.1, 1.1), (False, False, 0.1, 0.0), (True, False, 0.0, 1.0)],
)
def test_outcome_rewards(correct, fmt, bonus, expected):
    g = make_group([(-1, [(-1,)], correct, fmt), (-1, [(-1,)], False, False)])
    assert outcome_rewards(g, bonus)[0] == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize(
    "rewards, expected",
    [([1, 0, 0, 1], [1, -1, -1, 1]), ([1, 1, 1, 1], [0, 0, 0, 0]), ([1, 0], [1, -1])],
)
def test_outcome_advantages(rewards, expected):
    assert outcome_advantages(rewards).tolist() == expected


@given(st.lists(st.sampled_from([0.0, 0.1, 1.0, 1.1]), min_size=2, max_size=16))
def test_outcome_zero_mean_unit_variance(rewards):
    a = outcome_advantages(rewards)
    assert abs(a.mean()) <= 1e-9
    if np.std(rewards) > 1e-6:
        assert abs(a.var() - 1.0) <= 1e-9
    elif len(set(rewards)) == 1:
        assert not a.any()


def test_decomposed_examples():
    out = decomposed_advantages({A: 1, B: 3, C: 0, D: 10}, part({A, B}, {C, D}))
    assert {k: v.value for k, v in out.items()} == {A: 0, B: 1, C: 0, D: 1}
    assert out[A].cluster == "visual" and out[C].cluster == "textual"
    single = decomposed_advantages({A: 42.0, B: 1.0, C: 2.0}, part({A}, {B, C}))
    assert single[A].value == 0.5


def test_decomposed_all_textual_matches_global():
    returns = {A: 0.3, B: -1.0, C: 2.5, D: 0.0}
    out = decomposed_advantages(returns, part((), returns))
    assert {k: v.value for k, v in out.items()} == global_process_advantages(returns)


def test_decomposed_coverage():
    with pytest.raises(CoverageMismatch):
        decomposed_advantages({A: 1.0, B: 2.0}, part({A}, ()))
    with pytest.raises(CoverageMismatch):
        decomposed_advantages({A: 1.0}, part({A}, {A}))


def test_combine():
    assert combine_advantages([1.0], {A: 0.5})[A] == pytest.approx(0.85, abs=1e-15)
    out = combine_advantages([1.0, -1.0], {A: 0.2, C: 0.9}, 0.7, 0.0)
    assert out == {A: 0.7, C: -0.7}
    out = combine_advantages([1.0, -1.0], {A: 0.4, B: 0.4, C: 0.4}, 0.0, 0.3)
    assert len(set(out.values())) == 1


def test_expand():
    assert expand_to_tokens([0.2, 0.9], [2, 3]).tolist() == [0.2, 0.2, 0.9, 0.9, 0.9]
    assert expand_to_tokens([0.4], [1]).tolist() == [0.4]
    assert expand_to_tokens([1.0, 2.0, 3.0], [1, 1, 1]).tolist() == [1.0, 2.0, 3.0]
    with pytest.raises(LengthMismatch):
        expand_to_tokens([1.0], [1, 2])
    with pytest.raises(LengthMismatch):
        expand_to_tokens([1.0], [0])


def test_dynamic_sampling_filter():
    mixed = make_group([(-1, [(-1,)], True, True), (-1, [(-1,)], False, True),
                        (-1, [(-1,)], True, True)], group_id="mixed")
    solved = make_group([(-1, [(-1,)], True, True)] * 3, group_id="solved")
    # differing format bonus alone must not count as variance
    fmt_only = make_group([(-1, [(-1,)], True, True), (-1, [(-1,)], True, False)], group_id="fmt")
    kept, dropped = dynamic_sampling_filter([mixed, solved, fmt_only])
    assert [g.group_id for g in kept] == ["mixed"]
    assert dropped == ["solved", "fmt"]


# -- pipeline ----------------------------------------------------------------


def test_alpha_hand_trace(alpha_group):
    t = compute_pipeline(alpha_group, "pdcr")
    # gains (0.5, 0), (-0.5, 1.5); gamma 0.5 returns (0.5, 0), (0.25, 1.5)
    assert t.returns == {A: 0.5, B: 0.0, C: 0.25, D: 1.5}
    # V = 3, 0, 2.5, -0.25 -> split {B, D} | {C, A}
    assert t.partition.visual == {A, C}
    assert t.outcome.tolist() == [1.0, -1.0]
    assert t.total == pytest.approx({A: 1.0, B: 0.7, C: -0.7, D: -0.4}, abs=1e-15)
    assert t.token_advantages(0).tolist() == pytest.approx([1.0, 1.0, 0.7, 0.7, 0.7])


def test_grpo_is_outcome_only(alpha_group):
    t = compute_pipeline(alpha_group, "grpo")
    for idx, v in t.total.items():
        assert v == 0.7 * t.outcome[idx.trajectory]
    assert t.cluster(A) == "" and t.process(A) == 0.0


def test_collapse_pdcr_equals_pacr():
    # all dependence scores equal -> degenerate split -> everything textual
    g = make_group([(-2, [(-1.5, -1, -2), (-0.5, -3, -4)], True, True),
                    (-2, [(-2.5, -2, -3)], False, True)])
    pdcr = compute_pipeline(g, "pdcr")
    pacr = compute_pipeline(g, "pacr")
    assert pdcr.partition.visual == frozenset()
    assert pdcr.total == pacr.total


def test_pdcr_random_reproducible(alpha_group):
    cfg = EngineConfig(seed=4)
    a = compute_pipeline(alpha_group, "pdcr_random", cfg)
    b = compute_pipeline(alpha_group, "pdcr-random", cfg)
    assert a.partition == b.partition and a.total == b.total


def test_non_vanishing_process_signal():
    g = make_group([(-2, [(-1.0, -1, -4), (-1.5, -1, -1)], True, True),
                    (-2, [(-0.5, -1, -3.5), (-0.25, -2, -2)], True, True)])
    for mode in ("pacr", "pdcr"):
        t = compute_pipeline(g, mode)
        assert not t.outcome.any()
        assert any(v != 0.0 for v in t.total.values())
    assert not any(compute_pipeline(g, "grpo").total.values())


returns_st = st.dictionaries(
    st.builds(StepIndex, st.integers(0, 3), st.integers(1, 6)),
    st.integers(-40, 40).map(float), min_size=2, max_size=20,
)


@settings(max_examples=200)
@given(returns_st, st.data())
def test_decomposed_contract(returns, data):
    keys = sorted(returns)
    vis = set(data.draw(st.lists(st.sampled_from(keys), unique=True)))
    out = decomposed_advantages(returns, part(vis, set(keys) - vis))
    for members in (vis, set(keys) - vis):
        vals = [returns[k] for k in members]
        got = [out[k].value for k in members]
        assert all(0.0 <= x <= 1.0 for x in got)
        if not vals:
            continue
        if max(vals) == min(vals):
            assert set(got) == {0.5}
        else:
            assert {out[k].value for k in members if returns[k] == max(vals)} == {1.0}
            assert {out[k].value for k in members if returns[k] == min(vals)} == {0.0}
        for a in members:
            for b in members:
                if returns[a] < returns[b]:
                    assert out[a].value <= out[b].value


@settings(max_examples=200)
@given(returns_st, st.data(), st.sampled_from([0.5, 2.0, 8.0]), st.integers(-16, 16))
def test_per_cluster_affine_invariance(returns, data, a, b):
    keys = sorted(returns)
    vis = set(data.draw(st.lists(st.sampled_from(keys), unique=True)))
    p = part(vis, set(keys) - vis)
    moved = {k: (a * v + b if k in vis else v) for k, v in returns.items()}
    assert decomposed_advantages(moved, p) == decomposed_advantages(returns, p)


def test_degradation_construction():
    # pooled extremes are textual (-2 and 4); visual returns sit inside
    returns = {A: 0.0, B: -2.0, C: 1.0, D: 4.0}
    visual, textual = {A, C}, {B, D}
    glob = global_process_advantages(returns)
    dec = decomposed_advantages(returns, part(visual, textual))
    assert glob[C] - glob[A] < 1.0
    assert dec[C].value - dec[A].value == 1.0
