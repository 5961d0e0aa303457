"""Trajectory domain types, log ingestion and raw-text step handling.

A log is line-delimited JSON, one record per trajectory::

    {"group_id": "g0", "gamma": 0.9, "is_correct": true, "format_ok": true,
     "confidence_initial": -2.3,
     "steps": [{"text": "...", "token_count": 12, "confidence_after": -1.9,
                "logp_real": -8.1, "logp_blank": -11.4}, ...]}

Records sharing a ``group_id`` form one group; groups come back in order of
first appearance. ``gamma`` and ``final_answer`` are optional.
"""

from __future__ import annotations

import io
import json
import math
import re
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from typing import IO, NamedTuple

from pdcr.errors import EmptyInput, InvariantError, SchemaError

DEFAULT_GAMMA = 0.9

STEP_FIELDS = ("text", "token_count", "confidence_after", "logp_real", "logp_blank")


class StepIndex(NamedTuple):
    """Address of a step: 0-based trajectory position, 1-based step position."""

    trajectory: int
    step: int


@dataclass(frozen=True)
class StepRecord:
    index: int
    text: str
    token_count: int
    confidence_after: float
    logp_real: float
    logp_blank: float


@dataclass(frozen=True)
class Trajectory:
    steps: tuple[StepRecord, ...]
    confidence_initial: float
    is_correct: bool
    format_ok: bool
    final_answer: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple(self.steps))

    @property
    def confidences(self) -> list[float]:
        return [s.confidence_after for s in self.steps]

    @property
    def token_counts(self) -> list[int]:
        return [s.token_count for s in self.steps]


@dataclass(frozen=True)
class TrajectoryGroup:
    group_id: str
    trajectories: tuple[Trajectory, ...]
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self) -> None:
        object.__setattr__(self, "trajectories", tuple(self.trajectories))

    @property
    def n_steps(self) -> int:
        return sum(len(t.steps) for t in self.trajectories)

    def step_indices(self) -> list[StepIndex]:
        """All step indices in (trajectory, step) order."""
        return [
            StepIndex(i, s.index)
            for i, t in enumerate(self.trajectories)
            for s in t.steps
        ]

    def step(self, idx: StepIndex) -> StepRecord:
        return self.trajectories[idx.trajectory].steps[idx.step - 1]


@dataclass(frozen=True)
class Violation:
    invariant: str
    trajectory: int | None = None
    step: int | None = None
    detail: str = ""

    def __str__(self) -> str:
        where = []
        if self.trajectory is not None:
            where.append(f"i={self.trajectory}")
        if self.step is not None:
            where.append(f"k={self.step}")
        loc = f" at ({', '.join(where)})" if where else ""
        return f"{self.invariant}{loc}: {self.detail}" if self.detail else f"{self.invariant}{loc}"


# ---------------------------------------------------------------------------
# raw text


_SENTENCE_BREAK = re.compile(r"(?<=[.!?])[ \t]+")


def segment_trajectory(raw_text: str, mode: str = "newline") -> list[str]:
    """Split a generated reasoning trace into steps.

    ``newline`` starts a new step at every line break. ``sentence`` also
    breaks after ``.``, ``!`` or ``?`` followed by a space. Segments are
    stripped and blank segments dropped.
    """
    if mode not in ("newline", "sentence"):
        raise ValueError(f"unknown segmentation mode {mode!r}")
    if not raw_text.strip():
        raise EmptyInput("raw_text is empty after trimming")
    pieces = raw_text.splitlines()
    if mode == "sentence":
        pieces = [p for line in pieces for p in _SENTENCE_BREAK.split(line)]
    return [p.strip() for p in pieces if p.strip()]


_THINK_OPEN = "<think>"
_THINK_CLOSE = "</think>"
_BOXED = "\\boxed{"


def _balanced_box(text: str, start: int) -> bool:
    depth = 1
    for pos in range(start, len(text)):
        ch = text[pos]
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return bool(text[start:pos].strip())
    return False


def check_format_compliance(raw_text: str) -> bool:
    """True iff the text has exactly one ``<think>...</think>`` block followed
    by a non-empty, brace-balanced ``\\boxed{...}`` answer."""
    if raw_text.count(_THINK_OPEN) != 1 or raw_text.count(_THINK_CLOSE) != 1:
        return False
    open_at = raw_text.index(_THINK_OPEN)
    close_at = raw_text.index(_THINK_CLOSE)
    if close_at < open_at:
        return False
    tail = raw_text[close_at + len(_THINK_CLOSE):]
    box_at = tail.find(_BOXED)
    while box_at != -1:
        if _balanced_box(tail, box_at + len(_BOXED)):
            return True
        box_at = tail.find(_BOXED, box_at + 1)
    return False


# ---------------------------------------------------------------------------
# validation


def _finite(x: float) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def validate_group(group: TrajectoryGroup) -> list[Violation]:
    """Return every invariant violation in ``group`` (empty list if valid)."""
    out: list[Violation] = []
    n = len(group.trajectories)
    if n < 2:
        out.append(Violation("group_size", detail=f"N={n} < 2"))
    if not (_finite(group.gamma) and 0.0 <= group.gamma <= 1.0):
        out.append(Violation("gamma_range", detail=f"gamma={group.gamma!r}"))
    if group.n_steps < 2:
        out.append(Violation("step_total", detail=f"M={group.n_steps} < 2"))
    for i, traj in enumerate(group.trajectories):
        if not traj.steps:
            out.append(Violation("trajectory_nonempty", trajectory=i, detail="K=0"))
        if not _finite(traj.confidence_initial):
            out.append(
                Violation("finite", trajectory=i, detail="confidence_initial is not finite")
            )
        for pos, step in enumerate(traj.steps, start=1):
            if step.index != pos:
                out.append(
                    Violation("step_index", trajectory=i, step=pos,
                              detail=f"index {step.index} != {pos}")
                )
            tc = step.token_count
            if isinstance(tc, bool) or not isinstance(tc, int) or tc < 1:
                out.append(
                    Violation("token_count", trajectory=i, step=pos,
                              detail=f"token_count={tc!r}")
                )
            for name in ("confidence_after", "logp_real", "logp_blank"):
                if not _finite(getattr(step, name)):
                    out.append(
                        Violation("finite", trajectory=i, step=pos,
                                  detail=f"{name}={getattr(step, name)!r}")
                    )
    return out


# ---------------------------------------------------------------------------
# log I/O


def _lines(stream: IO[bytes] | IO[str] | Iterable[str | bytes]) -> Iterator[tuple[int, str]]:
    for lineno, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        yield lineno, raw


def _require(rec: dict, key: str, types: tuple[type, ...], line: int, where: str = "") -> object:
    name = f"{where}{key}"
    if key not in rec:
        raise SchemaError(line, name, "missing")
    value = rec[key]
    if isinstance(value, bool) and bool not in types:
        raise SchemaError(line, name, f"expected number, got {value!r}")
    if not isinstance(value, types):
        raise SchemaError(line, name, f"unexpected type {type(value).__name__}")
    return value


def _parse_record(rec: object, line: int) -> tuple[str, float | None, Trajectory]:
    if not isinstance(rec, dict):
        raise SchemaError(line, "<record>", "not a JSON object")
    group_id = _require(rec, "group_id", (str,), line)
    gamma = rec.get("gamma")
    if gamma is not None and (isinstance(gamma, bool) or not isinstance(gamma, (int, float))):
        raise SchemaError(line, "gamma", "expected number")
    is_correct = _require(rec, "is_correct", (bool,), line)
    format_ok = _require(rec, "format_ok", (bool,), line)
    c0 = _require(rec, "confidence_initial", (int, float), line)
    final_answer = rec.get("final_answer")
    if final_answer is not None and not isinstance(final_answer, str):
        raise SchemaError(line, "final_answer", "expected string")
    raw_steps = _require(rec, "steps", (list,), line)
    steps = []
    for k, s in enumerate(raw_steps, start=1):
        where = f"steps[{k - 1}]."
        if not isinstance(s, dict):
            raise SchemaError(line, f"steps[{k - 1}]", "not a JSON object")
        steps.append(
            StepRecord(
                index=k,
                text=_require(s, "text", (str,), line, where),
                token_count=_require(s, "token_count", (int,), line, where),
                confidence_after=float(_require(s, "confidence_after", (int, float), line, where)),
                logp_real=float(_require(s, "logp_real", (int, float), line, where)),
                logp_blank=float(_require(s, "logp_blank", (int, float), line, where)),
            )
        )
    traj = Trajectory(
        steps=tuple(steps),
        confidence_initial=float(c0),
        is_correct=is_correct,
        format_ok=format_ok,
        final_answer=final_answer,
    )
    return group_id, (None if gamma is None else float(gamma)), traj


def parse_group_log(
    stream: IO[bytes] | IO[str] | Iterable[str | bytes],
    default_gamma: float = DEFAULT_GAMMA,
) -> list[TrajectoryGroup]:
    """Read a line-delimited trajectory log into validated groups.

    Blank lines are skipped. Raises :class:`SchemaError` on the first
    malformed record and :class:`InvariantError` on the first group that
    fails :func:`validate_group`.
    """
    order: list[str] = []
    trajs: dict[str, list[Trajectory]] = {}
    gammas: dict[str, float | None] = {}
    for line, raw in _lines(stream):
        if not raw.strip():
            continue
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise SchemaError(line, "<record>", f"invalid JSON: {exc.msg}") from None
        gid, gamma, traj = _parse_record(rec, line)
        if gid not in trajs:
            order.append(gid)
            trajs[gid] = []
            gammas[gid] = gamma
        elif gamma is not None:
            if gammas[gid] is None:
                gammas[gid] = gamma
            elif gammas[gid] != gamma:
                raise InvariantError(gid, f"conflicting gamma {gamma} vs {gammas[gid]} (line {line})")
        trajs[gid].append(traj)

    groups = []
    for gid in order:
        gamma = gammas[gid]
        group = TrajectoryGroup(gid, tuple(trajs[gid]), default_gamma if gamma is None else gamma)
        problems = validate_group(group)
        if problems:
            raise InvariantError(gid, "; ".join(str(p) for p in problems))
        groups.append(group)
    return groups


def read_group_log(path, default_gamma: float = DEFAULT_GAMMA) -> list[TrajectoryGroup]:
    with open(path, "rb") as fh:
        return parse_group_log(fh, default_gamma=default_gamma)


def trajectory_record(group: TrajectoryGroup, traj: Trajectory) -> dict:
    rec = {
        "group_id": group.group_id,
        "gamma": group.gamma,
        "is_correct": traj.is_correct,
        "format_ok": traj.format_ok,
        "confidence_initial": traj.confidence_initial,
        "steps": [
            {
                "text": s.text,
                "token_count": s.token_count,
                "confidence_after": s.confidence_after,
                "logp_real": s.logp_real,
                "logp_blank": s.logp_blank,
            }
            for s in traj.steps
        ],
    }
    if traj.final_answer is not None:
        rec["final_answer"] = traj.final_answer
    return rec


def serialize_groups(groups: Sequence[TrajectoryGroup]) -> str:
    """Inverse of :func:`parse_group_log`.

    Floats are written with Python's shortest round-trip repr (up to 17
    significant digits), so parsing the output reproduces the groups exactly.
    """
    buf = io.StringIO()
    for group in groups:
        for traj in group.trajectories:
            buf.write(json.dumps(trajectory_record(group, traj), ensure_ascii=False))
            buf.write("\n")
    return buf.getvalue()


def write_group_log(path, groups: Sequence[TrajectoryGroup]) -> None:
    with open(path, "x", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_groups(groups))

