#!/usr/bin/env python3
"""
Formatting helpers for montevideo-sim artifacts.

Series go to CSV with ``#`` metadata lines, reports to versioned JSON. Floats
are written with ``repr`` (shortest round-trip form) so identical runs give
identical bytes.
"""

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from . import __version__
from .errors import UsageError

REPORT_SCHEMA = "montevideo-sim/report/1"

Cell = Union[int, float, str, bool, None]


@dataclass
class ExperimentOutput:
    """Tabular result of one experiment run.

    ``columns[0]`` is the grid variable. ``plot`` names the columns drawn in
    the SVG, keyed by legend label.
    """

    columns: List[str]
    rows: List[List[Cell]]
    summary: Dict[str, Any] = field(default_factory=dict)
    plot: Dict[str, str] = field(default_factory=dict)
    x_label: Optional[str] = None
    y_label: str = ""
    log_x: bool = False

    def __post_init__(self) -> None:
        width = len(self.columns)
        for index, row in enumerate(self.rows):
            if len(row) != width:
                raise UsageError(f"row {index} has {len(row)} cells, expected {width}")

    def column(self, name: str) -> np.ndarray:
        index = self.columns.index(name)
        return np.array([row[index] for row in self.rows], dtype=float)


def _single_line(value: str) -> bool:
    return "\n" not in value and "\r" not in value


def format_number(value: Cell) -> str:
    """Shortest round-trip decimal text of a cell."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        number = float(value)
        if math.isnan(number):
            return "nan"
        if math.isinf(number):
            return "inf" if number > 0 else "-inf"
        return repr(number)
    return str(value)


def format_csv(output: ExperimentOutput, metadata: Optional[Dict[str, Any]] = None) -> str:
    buffer = io.StringIO()
    for key, value in sorted((metadata or {}).items()):
        text = value if isinstance(value, str) else json.dumps(sanitize(value), sort_keys=True)
        if not _single_line(text):
            raise UsageError(f"metadata {key!r} must fit on one line")
        buffer.write(f"# {key}: {text}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(output.columns)
    for row in output.rows:
        writer.writerow([format_number(cell) for cell in row])
    return buffer.getvalue()


def sanitize(value: Any) -> Any:
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats as strings."""
    if isinstance(value, dict):
        return {str(k): sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [sanitize(v) for v in value]
    if isinstance(value, np.ndarray):
        return [sanitize(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        number = float(value)
        return number if math.isfinite(number) else format_number(number)
    if isinstance(value, (complex, np.complexfloating)):
        return [sanitize(value.real), sanitize(value.imag)]
    return value


def build_report(
    experiment: str,
    config_echo: Dict[str, Any],
    output: ExperimentOutput,
    *,
    metadata: Optional[Dict[str, Any]] = None,
) -> Dict[str, Any]:
    """Report payload. Only ``metadata`` may differ between identical runs."""
    return {
        "schema": REPORT_SCHEMA,
        "experiment": experiment,
        "version": __version__,
        "config": sanitize(config_echo),
        "columns": list(output.columns),
        "summary": sanitize(output.summary),
        "metadata": sanitize(metadata or {}),
    }


def format_json(report: Dict[str, Any]) -> str:
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def deterministic_payload(report: Dict[str, Any]) -> Dict[str, Any]:
    """The report without its metadata block."""
    return {key: value for key, value in report.items() if key != "metadata"}


def write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(text)
    return path


def rows_from_columns(*columns: Sequence[Cell]) -> List[List[Cell]]:
    lengths = {len(column) for column in columns}
    if len(lengths) > 1:
        raise UsageError(f"columns have different lengths: {sorted(lengths)}")
    return [list(row) for row in zip(*columns)]
