"""Weighted point clouds, collections of them, and ground-cost matrices."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionError, EmptyClassError, InvalidMeasure

SIMPLEX_TOL = 1e-9


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DiscreteMeasure:
    """``sum_i weights[i] * delta(support[i])`` with weights on the simplex."""

    support: np.ndarray  # (n, d)
    weights: np.ndarray  # (n,)

    def __post_init__(self):
        if self.support.ndim != 2 or self.support.shape[0] == 0:
            raise InvalidMeasure("support must be a nonempty (n, d) array")
        if self.weights.shape != (self.support.shape[0],):
            raise InvalidMeasure("weights must have one entry per support point")
        if not np.all(np.isfinite(self.support)):
            raise InvalidMeasure("support coordinates must be finite")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > SIMPLEX_TOL:
            raise InvalidMeasure("weights must lie on the probability simplex")

    @property
    def size(self) -> int:
        return self.support.shape[0]

    @property
    def dim(self) -> int:
        return self.support.shape[1]


@dataclass(frozen=True)
class MeasureOfMeasures:
    """Discrete measure whose atoms are themselves ``DiscreteMeasure``s.

    ``keys`` records which class (or cluster) id each atom stands for, so
    atoms can be dropped without losing the mapping back to ids.
    """

    measures: tuple[DiscreteMeasure, ...]
    masses: np.ndarray
    keys: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if len(self.measures) != len(self.masses):
            raise InvalidMeasure("one mass per measure required")
        if len(self.measures) == 0:
            raise InvalidMeasure("measure of measures must be nonempty")
        if np.any(self.masses < 0) or abs(self.masses.sum() - 1.0) > SIMPLEX_TOL:
            raise InvalidMeasure("masses must lie on the probability simplex")
        if not self.keys:
            object.__setattr__(self, "keys", tuple(range(len(self.measures))))
        elif len(self.keys) != len(self.measures):
            raise InvalidMeasure("one key per measure required")

    def __len__(self) -> int:
        return len(self.measures)


@dataclass(frozen=True)
class CostMatrix:
    entries: np.ndarray
    order_k: int = 1

    def __post_init__(self):
        if self.entries.ndim != 2:
            raise DimensionError("cost matrix must be two-dimensional")
        if not np.all(np.isfinite(self.entries)) or np.any(self.entries < 0):
            raise InvalidMeasure("cost entries must be finite and nonnegative")

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape


def as_simplex(weights, n: int | None = None) -> np.ndarray:
    """Validate nonnegativity and renormalize to sum exactly one."""
    w = np.asarray(weights, dtype=float).ravel()
    if n is not None and w.shape[0] != n:
        raise InvalidMeasure(f"expected {n} weights, got {w.shape[0]}")
    if w.size == 0:
        raise InvalidMeasure("empty weight vector")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InvalidMeasure("weights must be finite and nonnegative")
    total = w.sum()
    if total <= 0:
        raise InvalidMeasure("weights sum to zero")
    return w / total


def make_measure(points, weights=None) -> DiscreteMeasure:
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        raise InvalidMeasure("a measure needs at least one point")
    if pts.ndim == 1:
        pts = pts[:, None]
    if weights is None:
        w = np.full(pts.shape[0], 1.0 / pts.shape[0])
    else:
        w = as_simplex(weights, pts.shape[0])
    return DiscreteMeasure(_frozen(pts.copy()), _frozen(w))


def _as_points(A) -> np.ndarray:
    if isinstance(A, DiscreteMeasure):
        return A.support
    arr = np.asarray(A, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr


def pairwise_sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    diff = A[:, None, :] - B[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def euclidean_cost_matrix(A, B, k: int = 2) -> CostMatrix:
    """``C[i, j] = ||A_i - B_j||_2 ** k``."""
    A = _as_points(A)
    B = _as_points(B)
    if A.shape[1] != B.shape[1]:
        raise DimensionError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    if k < 1:
        raise ValueError("order k must be >= 1")
    sq = pairwise_sq_dists(A, B)
    # Exact powers for the common orders avoid a sqrt round trip.
    if k == 2:
        entries = sq
    elif k % 2 == 0:
        entries = sq ** (k // 2)
    else:
        entries = np.sqrt(sq) ** k
    return CostMatrix(entries, order_k=k)


def group_by_label(features, labels, n_classes: int | None = None) -> MeasureOfMeasures:
    """Split labeled rows into per-class uniform measures with masses n_i / m."""
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise DimensionError("features must be (m, d) with one label per row")
    c = int(y.max()) + 1 if n_classes is None else n_classes
    if y.min() < 0 or y.max() >= c:
        raise EmptyClassError(f"labels must lie in 0..{c - 1}")
    counts = np.bincount(y, minlength=c)
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        raise EmptyClassError(f"no samples for classes {missing.tolist()}")
    measures = tuple(make_measure(X[y == i]) for i in range(c))
    return MeasureOfMeasures(measures, _frozen(counts / counts.sum()), tuple(range(c)))
