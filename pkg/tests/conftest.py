from __future__ import annotations

from pathlib import Path

import pytest

from pdcr.trajectory import StepRecord, Trajectory, TrajectoryGroup

DATA = Path(__file__).parent / "data"


def make_step(k, conf=-1.0, real=-1.0, blank=-1.0, tokens=1, text="s"):
    return StepRecord(k, text, tokens, conf, real, blank)


def make_group(specs, gamma=0.9, group_id="g"):
    """``specs``: list of (c0, [(conf, real, blank), ...], is_correct, format_ok)."""
    trajs = []
    for c0, steps, correct, fmt in specs:
        trajs.append(
            Trajectory(
                tuple(make_step(k, *s) for k, s in enumerate(steps, start=1)),
                c0, correct, fmt,
            )
        )
    return TrajectoryGroup(group_id, tuple(trajs), gamma)


@pytest.fixture
def data_dir() -> Path:
    return DATA


@pytest.fixture
def alpha_group():
    from pdcr.trajectory import read_group_log

    (group,) = read_group_log(DATA / "alpha.jsonl")
    return group


# One line per acceptance criterion, printed after the run.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("[")[1].split("]")[0])):
            terminalreporter.write_line(line)
