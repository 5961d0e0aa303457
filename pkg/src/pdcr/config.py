"""Engine configuration and the flat ``key = value`` config-file format.

Config files hold one ``key = value`` pair per line. ``#`` starts a comment.
Values are parsed as ``true``/``false``, integers, floats, or else taken as
strings (surrounding quotes are stripped). Unknown keys are rejected by the
consumer, so a typo never silently falls back to a default::

    # pdcr.conf
    mode = pdcr
    gamma = 0.9
    lambda_outcome = 0.7
    lambda_process = 0.3
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from pdcr.errors import ConfigInvalid

MODES = ("grpo", "dapo", "pacr", "pdcr", "pdcr_random")
SCOPES = ("group", "trajectory")


def parse_value(text: str) -> Any:
    text = text.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"":
        return text[1:-1]
    return text


def parse_kv(text: str, source: str = "<config>") -> dict[str, Any]:
    out: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigInvalid(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigInvalid(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigInvalid(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = parse_value(value)
    return out


def read_kv(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    return parse_kv(path.read_text(encoding="utf-8"), source=str(path))


def format_kv(values: dict[str, Any]) -> str:
    lines = []
    for key, value in values.items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def build(cls, values: dict[str, Any]):
    """Instantiate dataclass ``cls`` from ``values``, rejecting unknown keys."""
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - set(names))
    if unknown:
        raise ConfigInvalid(f"unknown {cls.__name__} keys: {', '.join(unknown)}")
    coerced = {}
    for key, value in values.items():
        default = names[key].default
        if isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        coerced[key] = value
    return cls(**coerced)


def _check_number(name: str, value: Any, lo: float = -math.inf, hi: float = math.inf) -> None:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigInvalid(f"{name} must be a finite number, got {value!r}")
    if not lo <= value <= hi:
        raise ConfigInvalid(f"{name}={value} outside [{lo}, {hi}]")


@dataclass(frozen=True)
class EngineConfig:
    """Knobs for advantage computation.

    ``lambda_outcome``/``lambda_process`` default to 0.7/0.3 and the format
    bonus to 0.1. ``gamma`` is used only for groups whose log records carry
    no gamma of their own.
    """

    mode: str = "pdcr"
    gamma: float = 0.9
    lambda_outcome: float = 0.7
    lambda_process: float = 0.3
    format_bonus: float = 0.1
    std_floor: float = 1e-6
    spread_tolerance: float = 1e-9
    decomposition_scope: str = "group"
    visual_probability: float = 0.314
    seed: int = 0

    def __post_init__(self) -> None:
        mode = self.mode.replace("-", "_") if isinstance(self.mode, str) else self.mode
        object.__setattr__(self, "mode", mode)
        if mode not in MODES:
            raise ConfigInvalid(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.decomposition_scope not in SCOPES:
            raise ConfigInvalid(f"decomposition_scope must be one of {SCOPES}")
        _check_number("gamma", self.gamma, 0.0, 1.0)
        _check_number("lambda_outcome", self.lambda_outcome, 0.0)
        _check_number("lambda_process", self.lambda_process, 0.0)
        _check_number("format_bonus", self.format_bonus, 0.0)
        _check_number("std_floor", self.std_floor, 0.0)
        _check_number("spread_tolerance", self.spread_tolerance, 0.0)
        _check_number("visual_probability", self.visual_probability, 0.0, 1.0)
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ConfigInvalid(f"seed must be an integer, got {self.seed!r}")

    def as_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)
