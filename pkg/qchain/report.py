"""Scenario reports and their canonical emitters.

JSON output is canonical: sorted keys, two-space indent, shortest
round-trip floats, trailing newline.  Wall time lives only in the text
footer so JSON bytes depend on (config, seed) alone.
"""
from __future__ import annotations

import json
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

FORMATS: tuple[str, ...] = ("json", "text")


@dataclass(frozen=True, slots=True)
class Metric:
    name: str
    value: Any
    units: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "value": self.value, "units": self.units}


@dataclass(frozen=True, slots=True)
class Expectation:
    name: str
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


@dataclass(slots=True)
class Report:
    scenario: str
    seed: int
    config: Mapping[str, Any]
    metrics: list[Metric] = field(default_factory=list)
    digests: dict[str, str] = field(default_factory=dict)
    expectations: list[Expectation] = field(default_factory=list)
    details: dict[str, Any] = field(default_factory=dict)
    wall_time: float = 0.0

    def metric(self, name: str, value: Any, units: str = "") -> None:
        self.metrics.append(Metric(name, to_plain(value), units))

    def expect(self, name: str, passed: bool, detail: str = "") -> bool:
        self.expectations.append(Expectation(name, bool(passed), detail))
        return bool(passed)

    def value(self, name: str) -> Any:
        for m in self.metrics:
            if m.name == name:
                return m.value
        raise KeyError(name)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.expectations)

    @property
    def failures(self) -> list[Expectation]:
        return [e for e in self.expectations if not e.passed]

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "config": to_plain(self.config),
            "metrics": [m.to_dict() for m in self.metrics],
            "digests": dict(self.digests),
            "expectations": [e.to_dict() for e in self.expectations],
            "details": to_plain(self.details),
            "passed": self.passed,
        }


def to_plain(value: Any) -> Any:
    """Convert numpy scalars/arrays, tuples, enums and bytes into JSON types."""
    if isinstance(value, Enum):
        return value.value
    if value is None or isinstance(value, bool | str):
        return value
    if isinstance(value, np.generic):
        return to_plain(value.item())
    if isinstance(value, int):
        return int(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite value {value!r} cannot be reported")
        return float(value)
    if isinstance(value, bytes):
        return value.hex()
    if isinstance(value, np.ndarray):
        return to_plain(value.tolist())
    if isinstance(value, Mapping):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, list | tuple | set | frozenset):
        items = sorted(value) if isinstance(value, set | frozenset) else value
        return [to_plain(v) for v in items]
    raise TypeError(f"cannot report value of type {type(value).__name__}")


def _format_value(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        return value
    return json.dumps(value, sort_keys=True)


def render_json(report: Report) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=2, allow_nan=False, ensure_ascii=False) + "\n"


def render_text(report: Report) -> str:
    """Header line, one line per metric, footer line."""
    lines = [f"scenario {report.scenario}  seed {report.seed}  metrics {len(report.metrics)}"]
    width = max((len(m.name) for m in report.metrics), default=0)
    for m in report.metrics:
        units = f" {m.units}" if m.units else ""
        lines.append(f"  {m.name:<{width}}  {_format_value(m.value)}{units}")
    ok = sum(e.passed for e in report.expectations)
    verdict = "PASS" if report.passed else "FAIL"
    failed = ", ".join(e.name for e in report.failures)
    tail = f"  failed: {failed}" if failed else ""
    lines.append(f"{verdict} {ok}/{len(report.expectations)} expectations  wall_time {report.wall_time:.3f}s{tail}")
    return "\n".join(lines) + "\n"


def emit(report: Report, fmt: str = "json") -> bytes:
    if fmt == "json":
        return render_json(report).encode("utf-8")
    if fmt == "text":
        return render_text(report).encode("utf-8")
    raise ValueError(f"unknown report format {fmt!r}; expected one of {', '.join(FORMATS)}")
