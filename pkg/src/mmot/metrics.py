"""Per-epoch training records and their CSV / JSON-lines serialization.

CSV columns, in order: ``epoch, transport_cost, pseudo_label_accuracy,
train_loss, validation_error, n_clusters, n_excluded``.  Missing optional
values are empty cells in CSV and ``null`` in JSON lines.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import InvalidInput, IoError, ParseError


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    transport_cost: float
    train_loss: float
    pseudo_label_accuracy: float | None = None
    validation_error: float | None = None
    n_clusters: int | None = None
    n_excluded: int = 0


COLUMNS = (
    "epoch",
    "transport_cost",
    "pseudo_label_accuracy",
    "train_loss",
    "validation_error",
    "n_clusters",
    "n_excluded",
)
_INT_COLUMNS = {"epoch", "n_clusters", "n_excluded"}


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_metrics(metrics, path, format: str = "csv") -> None:
    records = list(metrics)
    epochs = [m.epoch for m in records]
    if any(b <= a for a, b in zip(epochs, epochs[1:])):
        raise InvalidInput("epochs must be strictly increasing")
    path = Path(path)
    try:
        with path.open("w", newline="") as handle:
            if format == "csv":
                writer = csv.writer(handle)
                writer.writerow(COLUMNS)
                for m in records:
                    writer.writerow([_cell(getattr(m, col)) for col in COLUMNS])
            elif format in ("jsonl", "json-lines"):
                for m in records:
                    row = {col: getattr(m, col) for col in COLUMNS}
                    handle.write(json.dumps(row, allow_nan=False) + "\n")
            else:
                raise InvalidInput(f"unknown metrics format {format!r}")
    except OSError as exc:
        raise IoError(f"cannot write metrics to {path}: {exc}") from None


def _parse(col: str, text):
    if text is None or text == "":
        return None
    return int(text) if col in _INT_COLUMNS else float(text)


def read_metrics(path, format: str = "csv") -> list[EpochMetrics]:
    path = Path(path)
    out = []
    with path.open(newline="") as handle:
        if format == "csv":
            reader = csv.reader(handle)
            header = next(reader, None)
            if tuple(header or ()) != COLUMNS:
                raise ParseError(f"{path}: unexpected metrics header", line=1)
            for row in reader:
                out.append(EpochMetrics(**{c: _parse(c, v) for c, v in zip(COLUMNS, row)}))
        else:
            for line in handle:
                if line.strip():
                    out.append(EpochMetrics(**json.loads(line)))
    return out
