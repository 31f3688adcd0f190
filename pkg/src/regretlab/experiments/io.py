"""
CSV and JSON writers for signals, reports and sweep results.

Floats are written in their shortest round-trip form so identical results give
byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Iterable, List, Sequence, Union

import numpy as np
from pydantic import BaseModel

from regretlab.core.schema import Signal
from regretlab.experiments.schema import SweepResult

PathLike = Union[str, Path]


def format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(value) for value in row])
    return path


def write_json(path: PathLike, payload: Union[BaseModel, dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(payload, BaseModel):
        payload = payload.model_dump(mode="json")
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def signal_header(dim: int, prefix: str = "w") -> List[str]:
    return ["t"] + [f"{prefix}_{i + 1}" for i in range(dim)]


def write_signal_csv(path: PathLike, signal: Signal, prefix: str = "w") -> Path:
    """Columns t, w_1..w_n."""
    rows = ([t] + [float(x) for x in signal[t]] for t in range(signal.horizon))
    return write_csv(path, signal_header(signal.dim, prefix), rows)


def read_signal_csv(path: PathLike) -> Signal:
    """Read a signal written by ``write_signal_csv`` (rows ordered by t)."""
    with Path(path).open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if not header or header[0] != "t":
            raise ValueError(f"{path}: expected a header starting with 't'")
        rows = sorted(([int(r[0])] + [float(x) for x in r[1:]] for r in reader if r), key=lambda r: r[0])
    if not rows:
        raise ValueError(f"{path}: no samples")
    if [r[0] for r in rows] != list(range(len(rows))):
        raise ValueError(f"{path}: time index must run 0..T-1 without gaps")
    return Signal(steps=[r[1:] for r in rows])


SWEEP_HEADER = ["controller", "gap_norm", "samples", "max_regret", "bound", "slack"]


def write_sweep_csv(path: PathLike, result: SweepResult) -> Path:
    rows = (
        [row.controller, row.gap_norm, row.samples, row.max_regret, row.bound, row.slack]
        for row in result.rows
    )
    return write_csv(path, SWEEP_HEADER, rows)


def write_samples_csv(path: PathLike, result: SweepResult) -> Path:
    header = ["controller", "grid_index", "sample_index", "gap_norm", "regret", "bound"]
    rows = (
        [s.controller, s.grid_index, s.sample_index, s.gap_norm, s.regret, s.bound]
        for s in result.samples
    )
    return write_csv(path, header, rows)


def read_csv_rows(path: PathLike) -> List[dict]:
    with Path(path).open(newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))
