"""Structured result reports.

A report is a plain dict rendered to JSON (or CSV) with sorted keys and no
timestamps, so identical inputs produce identical bytes. Every numeric
result carries the full-precision value, a 17-significant-digit string, a
display string rounded at table precision, and either a sigma (same three
forms) or an explicit exact marker.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from ._version import __version__

SCHEMA_VERSION = 1


def fmt17(x: float) -> str:
    return f"{float(x):.17g}"


def make_result(value: float, sigma: float | None = None, unit: str = "", decimals: int = 2) -> dict:
    """One report entry; sigma None marks the value as exact arithmetic."""
    entry = {
        "value": float(value),
        "value_str": fmt17(value),
        "unit": unit,
    }
    if sigma is None:
        entry["exact"] = True
        entry["display"] = f"{value:.{decimals}f}"
    else:
        entry["sigma"] = float(sigma)
        entry["sigma_str"] = fmt17(sigma)
        entry["display"] = f"{value:.{decimals}f} ± {sigma:.{decimals}f}"
    return entry


@dataclass
class Report:
    """Inputs echo, results, provenance and warnings for one CLI command."""

    command: str
    inputs: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    provenance: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def add_result(self, name: str, value: float, sigma: float | None = None,
                   unit: str = "", decimals: int = 2) -> None:
        self.results[name] = make_result(value, sigma, unit, decimals)

    def add_warning(self, message: str) -> None:
        if message not in self.warnings:
            self.warnings.append(message)

    def to_dict(self) -> dict:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "tool": "cavqed",
            "tool_version": __version__,
            "command": self.command,
            "inputs": self.inputs,
            "results": self.results,
            "provenance": sorted(self.provenance),
            "warnings": list(self.warnings),
        }
        doc.update(self.extra)
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        lines = ["key,value,sigma,unit,display"]
        for name in sorted(self.results):
            entry = self.results[name]
            sigma = "exact" if entry.get("exact") else entry.get("sigma_str", "")
            lines.append(
                f"{name},{entry['value_str']},{sigma},{entry['unit']},{entry['display']}"
            )
        return "\n".join(lines) + "\n"

    def write(self, path, fmt: str = "json") -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        if fmt == "json":
            path.write_text(self.to_json())
        elif fmt == "csv":
            path.write_text(self.to_csv())
        else:
            raise ValueError(f"unknown report format {fmt!r}")
        return path


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
