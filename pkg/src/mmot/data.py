"""Datasets at the file boundary and synthetic Gaussian blobs.

File formats
------------
CSV
    Header ``f0,...,f{d-1}`` optionally followed by ``label``.  Floats are
    written with ``repr`` so a save/load round trip is exact.
flat-binary
    Little-endian float32, row-major, no header.  A sidecar ``<path>.json``
    holds ``{"rows": r, "cols": c, "has_labels": bool}``; ``cols`` counts every
    stored column, and when ``has_labels`` is true the last one is the label.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, InvalidInput, IoError, ParseError
from .seeding import make_rng

SPLITS = ("train-labeled", "train-unlabeled", "validation", "test")


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray | None = None
    split: str = "train-labeled"

    def __post_init__(self):
        if self.split not in SPLITS:
            raise InvalidInput(f"unknown split {self.split!r}")
        if self.features.ndim != 2:
            raise DataError("features must be a 2-D matrix")
        if not np.all(np.isfinite(self.features)):
            raise DataError("features contain non-finite values")
        if self.labels is None:
            if self.split != "train-unlabeled":
                raise DataError(f"split {self.split!r} requires labels")
        elif self.labels.shape != (self.features.shape[0],):
            raise DataError("one label per row required")
        elif self.labels.size and self.labels.min() < 0:
            raise DataError("labels must be nonnegative class ids")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return 0 if self.labels is None or self.labels.size == 0 else int(self.labels.max()) + 1

    def subset(self, idx, split: str | None = None) -> "Dataset":
        labels = None if self.labels is None else self.labels[idx]
        return Dataset(self.features[idx], labels, split or self.split)


def _class_centers(c: int, dim: int, separation: float, rng: np.random.Generator) -> np.ndarray:
    if dim >= c:
        # scaled unit vectors are pairwise exactly `separation` apart; rotate at random
        q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        return (separation / np.sqrt(2.0)) * q[:, :c].T
    side = separation * max(2.0, c ** (1.0 / dim))
    for _ in range(10_000):
        centers = rng.uniform(0.0, side, size=(c, dim))
        d = np.sqrt(((centers[:, None] - centers[None]) ** 2).sum(-1))
        if d[np.triu_indices(c, 1)].min() >= separation:
            return centers
        side *= 1.01
    raise InvalidInput("could not place class centers")


def generate_blobs(
    c: int,
    per_class: int,
    dim: int,
    separation: float,
    spread: float,
    seed: int,
    *,
    split: str = "train-labeled",
    centers: np.ndarray | None = None,
    stream: str = "points",
) -> Dataset:
    """Isotropic Gaussian blobs, ``per_class`` rows per class, class-major order.

    Class centers depend only on ``seed`` (not on ``stream``), so several
    draws with different ``stream`` names share one geometry.
    """
    if c < 2 or per_class < 1:
        raise InvalidInput("need c >= 2 classes and per_class >= 1")
    if centers is None:
        centers = blob_centers(c, dim, separation, seed)
    rng = make_rng(seed, "blobs", stream)
    labels = np.repeat(np.arange(c), per_class)
    X = centers[labels] + spread * rng.standard_normal((labels.size, dim))
    return Dataset(X, labels, split)


def blob_centers(c: int, dim: int, separation: float, seed: int) -> np.ndarray:
    return _class_centers(c, dim, separation, make_rng(seed, "blobs", "centers"))


def make_blob_splits(n_classes, dim, separation, spread, labeled_per_class, unlabeled, validation, test, seed):
    """Labeled / unlabeled / validation / test draws from one blob geometry.

    Unlabeled rows keep their true labels for diagnostics only.
    """
    centers = blob_centers(n_classes, dim, separation, seed)

    def draw(total, split, name):
        per = -(-total // n_classes)
        ds = generate_blobs(n_classes, per, dim, separation, spread, seed, split=split, centers=centers, stream=name)
        idx = make_rng(seed, "subsample", name).permutation(len(ds))[:total]
        return ds.subset(np.sort(idx))

    labeled = generate_blobs(
        n_classes, labeled_per_class, dim, separation, spread, seed, centers=centers, stream="labeled"
    )
    return {
        "labeled": labeled,
        "unlabeled": draw(unlabeled, "train-unlabeled", "unlabeled"),
        "validation": draw(validation, "validation", "validation"),
        "test": draw(test, "test", "test"),
    }


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def _read_csv(path: Path, split: str) -> Dataset:
    try:
        handle = path.open(newline="")
    except OSError as exc:
        raise IoError(f"cannot open {path}: {exc}") from None
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file", line=1) from None
        header = [h.strip() for h in header]
        has_labels = bool(header) and header[-1] == "label"
        feat_names = header[:-1] if has_labels else header
        expected = [f"f{i}" for i in range(len(feat_names))]
        if not feat_names or feat_names != expected:
            raise ParseError(f"{path}: header must be f0,...,f{{d-1}}[,label]", line=1)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}: expected {len(header)} fields, got {len(row)}", line=lineno)
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise ParseError(f"{path}: non-numeric field", line=lineno) from None
    arr = np.array(rows, dtype=float).reshape(len(rows), len(header))
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{path}: non-finite values")
    return _split_columns(arr, has_labels, split, str(path))


def _split_columns(arr: np.ndarray, has_labels: bool, split: str, where: str) -> Dataset:
    if not has_labels:
        return Dataset(arr, None, split)
    raw = arr[:, -1]
    labels = raw.astype(np.int64)
    if np.any(labels != raw) or np.any(labels < 0):
        raise DataError(f"{where}: labels must be nonnegative integers")
    return Dataset(arr[:, :-1], labels, split)


def _write_csv(ds: Dataset, path: Path) -> None:
    header = [f"f{i}" for i in range(ds.dim)] + (["label"] if ds.labels is not None else [])
    try:
        with path.open("w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            for i in range(len(ds)):
                row = [repr(float(v)) for v in ds.features[i]]
                if ds.labels is not None:
                    row.append(str(int(ds.labels[i])))
                writer.writerow(row)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None


# ---------------------------------------------------------------------------
# flat binary + JSON sidecar
# ---------------------------------------------------------------------------


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def _read_binary(path: Path, split: str) -> Dataset:
    side = sidecar_path(path)
    try:
        meta = json.loads(side.read_text())
    except OSError as exc:
        raise IoError(f"cannot read sidecar {side}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{side}: invalid JSON ({exc.msg})", line=exc.lineno) from None
    if set(meta) != {"rows", "cols", "has_labels"}:
        raise ParseError(f"{side}: expected keys rows, cols, has_labels")
    rows, cols, has_labels = meta["rows"], meta["cols"], meta["has_labels"]
    if not (isinstance(rows, int) and isinstance(cols, int) and rows >= 0 and cols >= 1):
        raise ParseError(f"{side}: rows/cols must be nonnegative integers")
    if not isinstance(has_labels, bool) or (has_labels and cols < 2):
        raise ParseError(f"{side}: has_labels must be a boolean and leave at least one feature column")
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from None
    expected = rows * cols * 4
    if len(blob) != expected:
        raise ParseError(f"{path}: {len(blob)} bytes, descriptor implies {expected}", offset=min(len(blob), expected))
    arr = np.frombuffer(blob, dtype="<f4").reshape(rows, cols).astype(np.float32)
    bad = np.argwhere(~np.isfinite(arr))
    if bad.size:
        r, c = bad[0]
        raise DataError(f"{path}: non-finite value at row {r}, column {c} (byte offset {(r * cols + c) * 4})")
    return _split_columns(arr.astype(float), has_labels, split, str(path))


def _write_binary(ds: Dataset, path: Path) -> None:
    arr = ds.features
    if ds.labels is not None:
        arr = np.column_stack([arr, ds.labels])
    meta = {"rows": int(arr.shape[0]), "cols": int(arr.shape[1]), "has_labels": ds.labels is not None}
    try:
        path.write_bytes(np.ascontiguousarray(arr, dtype="<f4").tobytes())
        sidecar_path(path).write_text(json.dumps(meta))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None


def _fmt(path: Path, fmt: str | None) -> str:
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "flat-binary"
    if fmt in ("bin", "binary"):
        fmt = "flat-binary"
    if fmt not in ("csv", "flat-binary"):
        raise InvalidInput(f"unknown dataset format {fmt!r}")
    return fmt


def load_dataset(path, format: str | None = None, split: str | None = None) -> Dataset:
    path = Path(path)
    fmt = _fmt(path, format)
    ds = _read_csv(path, "train-unlabeled") if fmt == "csv" else _read_binary(path, "train-unlabeled")
    if split is None:
        split = "train-unlabeled" if ds.labels is None else "train-labeled"
    return Dataset(ds.features, ds.labels, split)


def save_dataset(ds: Dataset, path, format: str | None = None) -> None:
    path = Path(path)
    if _fmt(path, format) == "csv":
        _write_csv(ds, path)
    else:
        _write_binary(ds, path)


def load_measure_csv(path):
    """Points plus optional ``weight`` column (a ``label`` column is ignored)."""
    path = Path(path)
    try:
        with path.open(newline="") as handle:
            reader = csv.reader(handle)
            header = [h.strip() for h in next(reader)]
            body = [row for row in reader if row]
    except (OSError, StopIteration) as exc:
        raise IoError(f"cannot read measure file {path}: {exc}") from None
    cols = [h for h in header if h not in ("weight", "label")]
    if cols != [f"f{i}" for i in range(len(cols))] or not cols:
        raise ParseError(f"{path}: header must be f0,...,f{{d-1}}[,weight][,label]", line=1)
    try:
        arr = np.array([[float(v) for v in row] for row in body], dtype=float)
    except ValueError:
        raise ParseError(f"{path}: non-numeric field") from None
    if arr.ndim != 2 or arr.shape[1] != len(header):
        raise ParseError(f"{path}: ragged rows")
    pts = arr[:, [header.index(c) for c in cols]]
    weights = arr[:, header.index("weight")] if "weight" in header else None
    return pts, weights
