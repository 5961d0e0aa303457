"""CSV writers and readers for every file the command line emits.

All CSVs start with one ``# config: {...}`` comment line echoing the
effective configuration, followed by a header row. Reals are written with
15 significant digits (``inf``/``nan`` spelled out).

==================  ==========================================================
file                columns
==================  ==========================================================
advantages.csv      group_id, trajectory, step, cluster, outcome_advantage,
                    process_advantage, total_advantage
partition.csv       group_id, trajectory, step, score, label, threshold, scope
labels.csv          group_id, trajectory, step, label
sweep.csv           method, parameter, accuracy, true_visual_pred_visual,
                    true_visual_pred_textual, true_textual_pred_visual,
                    true_textual_pred_textual
report.csv          group_id, then one column per DegradationReport statistic
curve.csv           episode, success, group_success, update_norm
==================  ==========================================================

``trajectory`` is 0-based, ``step`` 1-based. ``cluster`` is empty for modes
without a skill split.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections.abc import Iterable, Mapping, Sequence
from typing import IO, Any

from pdcr.advantages import AdvantageTable
from pdcr.decomposition import SkillPartition
from pdcr.errors import SchemaError
from pdcr.evaluation import SweepRow
from pdcr.trajectory import StepIndex

ADVANTAGE_COLUMNS = (
    "group_id", "trajectory", "step", "cluster",
    "outcome_advantage", "process_advantage", "total_advantage",
)
PARTITION_COLUMNS = ("group_id", "trajectory", "step", "score", "label", "threshold", "scope")
LABEL_COLUMNS = ("group_id", "trajectory", "step", "label")
SWEEP_COLUMNS = (
    "method", "parameter", "accuracy",
    "true_visual_pred_visual", "true_visual_pred_textual",
    "true_textual_pred_visual", "true_textual_pred_textual",
)
CURVE_COLUMNS = ("episode", "success", "group_success", "update_norm")


def fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        out = format(value, ".15g")
        return "0" if out == "-0" else out
    if value is None:
        return ""
    return str(value)


def config_line(config: Mapping[str, Any]) -> str:
    return "# config: " + json.dumps(dict(config), sort_keys=True) + "\n"


def write_csv(
    fh: IO[str], columns: Sequence[str], rows: Iterable[Sequence[Any]], config: Mapping[str, Any]
) -> None:
    fh.write(config_line(config))
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])


def read_csv(fh: IO[str], columns: Sequence[str]) -> tuple[dict[str, Any], list[dict[str, str]]]:
    """Parse a file written by :func:`write_csv`; returns (config, rows)."""
    config: dict[str, Any] = {}
    body = []
    for line in fh:
        if line.startswith("# config: "):
            config = json.loads(line[len("# config: "):])
        elif not line.startswith("#"):
            body.append(line)
    reader = csv.DictReader(io.StringIO("".join(body)))
    missing = [c for c in columns if c not in (reader.fieldnames or ())]
    if missing:
        raise SchemaError(1, missing[0], "missing column")
    return config, list(reader)


def advantage_rows(tables: Sequence[AdvantageTable]) -> list[tuple]:
    rows = []
    for table in sorted(tables, key=lambda t: t.group_id):
        for idx in table.steps():
            rows.append((
                table.group_id, idx.trajectory, idx.step, table.cluster(idx),
                float(table.outcome[idx.trajectory]), float(table.process(idx)),
                float(table.total[idx]),
            ))
    return rows


def token_records(tables: Sequence[AdvantageTable]) -> list[dict]:
    out = []
    for table in sorted(tables, key=lambda t: t.group_id):
        for i in sorted({idx.trajectory for idx in table.total}):
            out.append({
                "group_id": table.group_id,
                "trajectory": i,
                "token_advantages": [float(x) for x in table.token_advantages(i)],
            })
    return out


def partition_rows(
    group_id: str, scores: Mapping[StepIndex, float], partition: SkillPartition
) -> list[tuple]:
    return [
        (group_id, idx.trajectory, idx.step, float(scores[idx]), partition.label(idx),
         partition.threshold_for(idx), partition.scope)
        for idx in sorted(scores)
    ]


def _index(row: Mapping[str, str], line: int) -> tuple[str, StepIndex]:
    try:
        return row["group_id"], StepIndex(int(row["trajectory"]), int(row["step"]))
    except (KeyError, ValueError) as exc:
        raise SchemaError(line, "trajectory/step", str(exc)) from None


def read_partition(fh: IO[str]) -> tuple[dict[str, Any], dict[str, dict[StepIndex, float]], dict[str, dict[StepIndex, str]]]:
    """Returns (config, scores per group, predicted labels per group)."""
    config, rows = read_csv(fh, PARTITION_COLUMNS)
    scores: dict[str, dict[StepIndex, float]] = {}
    labels: dict[str, dict[StepIndex, str]] = {}
    for n, row in enumerate(rows, start=3):
        gid, idx = _index(row, n)
        try:
            scores.setdefault(gid, {})[idx] = float(row["score"])
        except ValueError:
            raise SchemaError(n, "score", "not a number") from None
        labels.setdefault(gid, {})[idx] = row["label"]
    return config, scores, labels


def label_rows(group_id: str, labels: Mapping[StepIndex, str]) -> list[tuple]:
    return [(group_id, idx.trajectory, idx.step, labels[idx]) for idx in sorted(labels)]


def read_labels(fh: IO[str]) -> dict[str, dict[StepIndex, str]]:
    _, rows = read_csv(fh, LABEL_COLUMNS)
    out: dict[str, dict[StepIndex, str]] = {}
    for n, row in enumerate(rows, start=3):
        gid, idx = _index(row, n)
        if row["label"] not in ("visual", "textual"):
            raise SchemaError(n, "label", f"unknown label {row['label']!r}")
        out.setdefault(gid, {})[idx] = row["label"]
    return out


def sweep_rows(rows: Sequence[SweepRow]) -> list[tuple]:
    return [
        (r.method, r.parameter, r.accuracy,
         r.confusion.true_visual_pred_visual, r.confusion.true_visual_pred_textual,
         r.confusion.true_textual_pred_visual, r.confusion.true_textual_pred_textual)
        for r in rows
    ]
