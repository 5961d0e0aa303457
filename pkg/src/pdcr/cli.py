"""Command line entry point: ``pdcr {compute,decompose,simulate,evaluate,train-toy}``.

Exit codes: 0 success, 2 usage or configuration error, 3 data error.
Errors are reported on stderr as one JSON object.

Settings resolve as command-line flag > ``--config`` file > built-in
default. Output files are created exclusively and never overwritten.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any

from pdcr import config as cfg
from pdcr.advantages import compute_pipeline, dynamic_sampling_filter
from pdcr.decomposition import decompose, visual_dependence_scores
from pdcr.errors import ConfigInvalid, PDCRError, SchemaError, SpecInvalid
from pdcr.evaluation import threshold_sweep
from pdcr.export import (
    ADVANTAGE_COLUMNS,
    CURVE_COLUMNS,
    LABEL_COLUMNS,
    PARTITION_COLUMNS,
    SWEEP_COLUMNS,
    advantage_rows,
    label_rows,
    partition_rows,
    read_labels,
    read_partition,
    sweep_rows,
    token_records,
    write_csv,
)
from pdcr.synthetic import MixtureSpec, degradation_report, generate_batch
from pdcr.toy import ToyTrainConfig, compare_modes, train_toy
from pdcr.trajectory import read_group_log, serialize_groups

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 2, 3
CLI_MODES = ("grpo", "dapo", "pacr", "pdcr", "pdcr-random")
DEFAULT_GRID = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9"


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# config resolution


_FLAG_KEYS = {
    "mode": "mode",
    "gamma": "gamma",
    "lambda_outcome": "lambda_outcome",
    "lambda_process": "lambda_process",
    "format_bonus": "format_bonus",
    "scope": "decomposition_scope",
    "seed": "seed",
}


def _resolve(cls, args: argparse.Namespace, flag_keys: dict[str, str]) -> tuple[Any, set[str]]:
    """Build ``cls`` from defaults, then the config file, then flags.

    Returns the config and the set of keys that were set explicitly.
    """
    values: dict[str, Any] = {}
    if args.config:
        try:
            values.update(cfg.read_kv(args.config))
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc.strerror}") from None
    for flag, key in flag_keys.items():
        value = getattr(args, flag, None)
        if value is not None:
            values[key] = value
    try:
        return cfg.build(cls, values), set(values)
    except (ConfigInvalid, SpecInvalid, TypeError) as exc:
        raise UsageError(str(exc)) from None


def _output_dir(args: argparse.Namespace) -> Path:
    if not args.output:
        raise UsageError("--output is required")
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _create(path: Path):
    try:
        return open(path, "x", encoding="utf-8", newline="")
    except FileExistsError:
        raise UsageError(f"refusing to overwrite existing file {path}") from None


def _write_json(path: Path, payload: dict) -> None:
    with _create(path) as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _require_input(args: argparse.Namespace) -> Path:
    if not args.input:
        raise UsageError("--input is required")
    path = Path(args.input)
    if not path.is_file():
        raise UsageError(f"input file not found: {path}")
    return path


def _load_groups(args: argparse.Namespace, config: cfg.EngineConfig, explicit: set[str]):
    groups = read_group_log(_require_input(args), default_gamma=config.gamma)
    if "gamma" in explicit:
        groups = [dataclasses.replace(g, gamma=config.gamma) for g in groups]
    return groups


def _parse_grid(text: str) -> list[float]:
    try:
        grid = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--grid must be comma-separated numbers, got {text!r}") from None
    if not grid or any(not 0.0 < f < 1.0 for f in grid):
        raise UsageError("--grid fractions must lie in (0, 1)")
    return grid


# ---------------------------------------------------------------------------
# subcommands


def _pipeline_job(job):
    group, config = job
    return compute_pipeline(group, config.mode, config)


def cmd_compute(args: argparse.Namespace) -> int:
    config, explicit = _resolve(cfg.EngineConfig, args, _FLAG_KEYS)
    out = _output_dir(args)
    groups = _load_groups(args, config, explicit)
    dropped: list[str] = []
    if config.mode == "dapo":
        groups, dropped = dynamic_sampling_filter(groups)
    jobs = [(g, config) for g in groups]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            tables = list(pool.map(_pipeline_job, jobs))
    else:
        tables = [_pipeline_job(j) for j in jobs]

    echo = config.as_dict()
    with _create(out / "advantages.csv") as fh:
        write_csv(fh, ADVANTAGE_COLUMNS, advantage_rows(tables), echo)
    if args.tokens:
        with _create(out / "tokens.jsonl") as fh:
            for rec in token_records(tables):
                fh.write(json.dumps(rec) + "\n")
    _write_json(out / "summary.json", {
        "config": echo,
        "mode": config.mode,
        "groups_processed": len(tables),
        "groups_dropped": sorted(dropped),
        "degenerate_clusters": sum(t.degenerate_clusters for t in tables),
        "decomposition_fallbacks": sum(t.partition.fallback_units for t in tables if t.partition),
        "steps": sum(len(t.total) for t in tables),
    })
    return EXIT_OK


def cmd_decompose(args: argparse.Namespace) -> int:
    config, explicit = _resolve(cfg.EngineConfig, args, _FLAG_KEYS)
    out = _output_dir(args)
    groups = _load_groups(args, config, explicit)
    rows = []
    for g in sorted(groups, key=lambda g: g.group_id):
        scores = visual_dependence_scores(g)
        part = decompose(scores, config.decomposition_scope, config.spread_tolerance)
        rows.extend(partition_rows(g.group_id, scores, part))
    with _create(out / "partition.csv") as fh:
        write_csv(fh, PARTITION_COLUMNS, rows, config.as_dict())
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    spec, _ = _resolve(MixtureSpec, args, {"seed": "seed"})
    out = _output_dir(args)
    batch = generate_batch(spec)
    echo = spec.as_dict()
    with _create(out / "log.jsonl") as fh:
        fh.write(serialize_groups([g for g, _ in batch]))
    with _create(out / "labels.csv") as fh:
        rows = [r for g, lab in batch for r in label_rows(g.group_id, lab)]
        write_csv(fh, LABEL_COLUMNS, rows, echo)
    reports = [(g.group_id, degradation_report(g, lab)) for g, lab in batch]
    columns = ("group_id",) + tuple(reports[0][1].row())
    with _create(out / "report.csv") as fh:
        write_csv(fh, columns, [(gid, *r.row().values()) for gid, r in reports], echo)
    ratios = [r.compression_ratio for _, r in reports]
    _write_json(out / "summary.json", {
        "config": echo,
        "groups": len(batch),
        "steps": sum(g.n_steps for g, _ in batch),
        "visual_share": sum(v == "visual" for _, lab in batch for v in lab.values())
        / sum(len(lab) for _, lab in batch),
        "compressed_fraction": sum(r > 1 for r in ratios) / len(ratios),
    })
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    config, _ = _resolve(cfg.EngineConfig, args, _FLAG_KEYS)
    out = _output_dir(args)
    grid = _parse_grid(args.grid)
    if not args.labels:
        raise UsageError("--labels is required")
    with open(_require_input(args), encoding="utf-8") as fh:
        _, scores, _ = read_partition(fh)
    try:
        with open(args.labels, encoding="utf-8") as fh:
            labels = read_labels(fh)
    except OSError as exc:
        raise UsageError(f"cannot read labels {args.labels}: {exc.strerror}") from None
    gids = sorted(scores)
    missing = [g for g in gids if g not in labels]
    if missing:
        raise SchemaError(0, "group_id", f"no labels for group {missing[0]!r}")
    rows = threshold_sweep(
        [scores[g] for g in gids], [labels[g] for g in gids], grid,
        scope=config.decomposition_scope, spread_tolerance=config.spread_tolerance,
        per_group=args.per_group,
    )
    echo = {**config.as_dict(), "grid": grid, "per_group": args.per_group}
    with _create(out / "sweep.csv") as fh:
        write_csv(fh, SWEEP_COLUMNS, sweep_rows(rows), echo)
    return EXIT_OK


def cmd_train_toy(args: argparse.Namespace) -> int:
    keys = {"mode": "mode", "gamma": "gamma", "lambda_outcome": "lambda_outcome",
            "lambda_process": "lambda_process", "seed": "seed"}
    config, _ = _resolve(ToyTrainConfig, args, keys)
    out = _output_dir(args)
    result = train_toy(config)
    echo = config.as_dict()
    with _create(out / "curve.csv") as fh:
        write_csv(fh, CURVE_COLUMNS, [tuple(r.values()) for r in result.curve_rows()], echo)
    _write_json(out / "summary.json", {"config": echo, **result.summary()})
    if args.compare_seeds:
        rows = compare_modes(config, seeds=range(args.compare_seeds))
        with _create(out / "comparison.csv") as fh:
            write_csv(fh, tuple(rows[0]), [tuple(r.values()) for r in rows], echo)
    return EXIT_OK


# ---------------------------------------------------------------------------


def _mode(text: str) -> str:
    if text not in CLI_MODES:
        raise argparse.ArgumentTypeError(f"invalid choice {text!r} (choose from {', '.join(CLI_MODES)})")
    return text.replace("-", "_")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pdcr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--input")
    common.add_argument("--output", help="output directory")

    weights = argparse.ArgumentParser(add_help=False)
    weights.add_argument("--mode", type=_mode, metavar="{" + ",".join(CLI_MODES) + "}")
    weights.add_argument("--gamma", type=float)
    weights.add_argument("--lambda-outcome", type=float)
    weights.add_argument("--lambda-process", type=float)

    engine = argparse.ArgumentParser(add_help=False, parents=[weights])
    engine.add_argument("--format-bonus", type=float)
    engine.add_argument("--scope", choices=cfg.SCOPES)

    p = sub.add_parser("compute", parents=[common, engine], help="per-step advantages")
    p.add_argument("--tokens", action="store_true", help="also write per-token advantages")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("decompose", parents=[common, engine], help="visual/textual step split")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("simulate", parents=[common], help="synthetic groups + degradation report")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", parents=[common, engine], help="Top-K vs optimal split sweep")
    p.add_argument("--labels")
    p.add_argument("--grid", default=DEFAULT_GRID)
    p.add_argument("--per-group", action="store_true", help="average per-group accuracies")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("train-toy", parents=[common, weights], help="toy policy-gradient run")
    p.add_argument("--compare-seeds", type=int, default=0,
                   help="also train every mode on this many seeds")
    p.set_defaults(func=cmd_train_toy)
    return parser


def _report(kind: str, exc: Exception, **extra) -> None:
    payload = {"error": kind, "type": type(exc).__name__, "message": str(exc), **extra}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        _report("usage", exc)
        return EXIT_USAGE
    except SchemaError as exc:
        _report("data", exc, line=exc.line, field=exc.field)
        return EXIT_DATA
    except PDCRError as exc:
        _report("data", exc, **({"group_id": exc.group_id} if hasattr(exc, "group_id") else {}))
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
