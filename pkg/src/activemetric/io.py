"""Dataset and results files.

Everything is CSV: comma delimited, ``.`` radix, header mandatory.  Floats
are written with 17 significant digits, which is enough for a save/load
round trip to reproduce every double bit for bit.  Results files get a JSON
sidecar holding the configuration that produced them.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any

import numpy as np

from .core import Dataset
from .errors import IoError, ParseError

__all__ = [
    "LABEL_COLUMN",
    "RESULT_COLUMNS",
    "ResultRecord",
    "load_csv",
    "save_csv",
    "save_results",
    "sidecar_path",
]

LABEL_COLUMN = "label"
RESULT_COLUMNS = ("setting", "strategy", "n_queries", "rep", "seed", "ari",
                  "runtime_seconds")


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def load_csv(path: str | os.PathLike[str]) -> Dataset:
    """Read a dataset file.

    The header row names the features; a final column called ``label`` is
    split off as ground truth (integers starting at 1).  Malformed content
    raises :class:`ParseError` naming the offending line, and filesystem
    failures raise :class:`IoError`.
    """
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            return _parse_dataset(csv.reader(handle))
    except OSError as exc:
        raise IoError(f"could not read {os.fspath(path)}: {exc}") from exc


def _parse_dataset(reader: Any) -> Dataset:
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty file: header row is mandatory") from None
    has_label = bool(header) and header[-1] == LABEL_COLUMN
    names = tuple(header[:-1]) if has_label else tuple(header)
    if not names:
        raise ParseError("line 1: header defines no feature columns")

    rows: list[list[float]] = []
    labels: list[int] = []
    for row in reader:
        line = reader.line_num
        if len(row) != len(header):
            raise ParseError(
                f"line {line}: expected {len(header)} fields, got {len(row)}")
        try:
            values = [float(field) for field in row[:len(names)]]
        except ValueError:
            raise ParseError(f"line {line}: non-numeric feature value") from None
        if not all(math.isfinite(v) for v in values):
            raise ParseError(f"line {line}: feature values must be finite")
        if has_label:
            try:
                label = int(row[-1])
            except ValueError:
                raise ParseError(f"line {line}: non-integer label") from None
            if label < 1:
                raise ParseError(f"line {line}: labels start at 1")
            labels.append(label)
        rows.append(values)

    if len(rows) < 2:
        raise ParseError("need at least two data rows")
    return Dataset(
        points=np.array(rows, dtype=np.float64),
        labels=np.array(labels, dtype=np.int64) if has_label else None,
        feature_names=names,
    )


def save_csv(path: str | os.PathLike[str], data: Dataset) -> None:
    """Write a dataset in the format :func:`load_csv` reads."""
    names = data.feature_names or tuple(f"x{j + 1}" for j in range(data.p))
    header = [*names, LABEL_COLUMN] if data.labels is not None else list(names)
    try:
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            for i in range(data.n):
                row = [_fmt(v) for v in data.points[i]]
                if data.labels is not None:
                    row.append(str(int(data.labels[i])))
                writer.writerow(row)
    except OSError as exc:
        raise IoError(f"could not write {os.fspath(path)}: {exc}") from exc


@dataclasses.dataclass(frozen=True)
class ResultRecord:
    """One experiment cell: a single replication at one query count.

    ``runtime_seconds`` stays empty unless timing was requested, so files
    from identical configurations compare byte for byte.
    """

    setting: str
    strategy: str
    n_queries: int
    rep: int
    seed: int
    ari: float
    runtime_seconds: float | None = None


def sidecar_path(path: str | os.PathLike[str]) -> Path:
    return Path(path).with_suffix(".meta.json")


def _plain(value: Any) -> Any:
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    raise TypeError(f"config value {value!r} is not serializable")


def save_results(path: str | os.PathLike[str],
                 records: Sequence[ResultRecord],
                 config: Mapping[str, Any] | None = None) -> None:
    """Write experiment records plus a sidecar capturing the full config."""
    try:
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(RESULT_COLUMNS)
            for rec in records:
                writer.writerow([
                    rec.setting,
                    rec.strategy,
                    str(int(rec.n_queries)),
                    str(int(rec.rep)),
                    str(int(rec.seed)),
                    _fmt(rec.ari),
                    "" if rec.runtime_seconds is None else _fmt(rec.runtime_seconds),
                ])
        text = json.dumps(dict(config) if config is not None else {},
                          indent=2, sort_keys=True, default=_plain)
        sidecar_path(path).write_text(text + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"could not write {os.fspath(path)}: {exc}") from exc
