"""
Report serialization for CLI runs.

The JSON document is ``{"schemaVersion", "spec", "results", "metadata"}``.
Everything outside ``metadata`` is a pure function of the run spec and seed;
wall times and timestamps live in ``metadata`` only. Tables go out through
pandas as CSV with a header row.
"""

import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, TextIO, Union

import pandas as pd

from src.core.errors import ConfigError

SCHEMA_VERSION = 1


def build_report(spec: Mapping[str, Any], results: Mapping[str, Any], wall_time: float, version: str) -> Dict[str, Any]:
    """Assemble a report; ``metadata.digest`` fingerprints everything outside ``metadata``."""
    report = {
        "schemaVersion": SCHEMA_VERSION,
        "spec": dict(spec),
        "results": dict(results),
        "metadata": {
            "generatedAt": datetime.now(timezone.utc).isoformat(),
            "wallTime": wall_time,
            "version": version,
        },
    }
    report["metadata"]["digest"] = report_digest(report)
    return report


def deterministic_view(report: Mapping[str, Any]) -> Dict[str, Any]:
    """The report minus ``metadata``: equal for equal spec and seed."""
    return {key: value for key, value in report.items() if key != "metadata"}


def report_digest(report: Mapping[str, Any]) -> str:
    """SHA-256 of the canonical deterministic view; equal runs share it."""
    return hashlib.sha256(dumps(deterministic_view(report)).encode("utf-8")).hexdigest()


def dumps(report: Mapping[str, Any]) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def write_json(report: Mapping[str, Any], out: Optional[Union[str, Path]], stream: Optional[TextIO] = None) -> None:
    """Write to ``out``; "-" or None means ``stream`` (stdout by default)."""
    text = dumps(report)
    if out is None or str(out) == "-":
        (stream or sys.stdout).write(text)
        return
    _write(Path(out), text)


def write_csv(rows: List[Mapping[str, Any]], out: Optional[Union[str, Path]]) -> None:
    """Tabular records (per grid point, per sweep row, per truth-table row)."""
    if not rows:
        raise ConfigError("nothing tabular to write for this command; use --format json")
    frame = pd.DataFrame.from_records(rows)
    if out is None or str(out) == "-":
        frame.to_csv(sys.stdout, index=False, float_format="%.17g")
        return
    _write(Path(out), frame.to_csv(index=False, float_format="%.17g"))


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot write report to {path}: {exc}") from exc
