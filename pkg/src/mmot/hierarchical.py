"""Coupling unlabeled clusters to labeled classes and reading off pseudo-labels.

Orientation used throughout: rows of the coupling are unlabeled clusters
(masses ``beta``), columns are labeled classes (masses ``alpha``), and
``T[i, j]`` is the mass moved from cluster ``i`` to class ``j``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRow, DimensionError, InvalidInput
from .measures import CostMatrix, MeasureOfMeasures, as_simplex, euclidean_cost_matrix, pairwise_sq_dists
from .solvers import (
    SinkhornConfig,
    TransportPlan,
    plan_entropy,
    solve_exact,
    solve_sinkhorn,
    transport_cost,
)

DEGENERATE_MASS = 1e-12


@dataclass(frozen=True)
class MeasureCoupling:
    plan: TransportPlan
    cost_matrix: CostMatrix
    reg_strength: float
    objective: float
    row_keys: tuple[int, ...] = ()
    col_keys: tuple[int, ...] = ()


@dataclass(frozen=True)
class PseudoLabelSet:
    hard: np.ndarray  # -1 where the sample was excluded
    soft: np.ndarray  # (n_u, c); zero rows where excluded
    source_cluster: np.ndarray

    @property
    def mask(self) -> np.ndarray:
        return self.hard >= 0

    def accuracy(self, truth) -> float | None:
        """Fraction of included samples whose pseudo-label matches ``truth``."""
        if truth is None or not self.mask.any():
            return None
        truth = np.asarray(truth)
        return float(np.mean(self.hard[self.mask] == truth[self.mask]))


def _check_dims(Mu: MeasureOfMeasures, Ml: MeasureOfMeasures) -> None:
    dims = {m.dim for m in Mu.measures} | {m.dim for m in Ml.measures}
    if len(dims) != 1:
        raise DimensionError(f"measures live in different dimensions: {sorted(dims)}")


def pairwise_measure_distances(
    Mu: MeasureOfMeasures,
    Ml: MeasureOfMeasures,
    k: int = 2,
    cfg: SinkhornConfig | None = None,
    *,
    exact: bool = False,
    rooted: bool = False,
    workers: int = 1,
) -> CostMatrix:
    """``X[i, j]``: transport cost between unlabeled measure ``i`` and labeled measure ``j``.

    Entries are the optimal ``<T, M>`` with order-``k`` Euclidean ground cost;
    ``rooted=True`` returns ``W_k = cost ** (1/k)`` instead.  Sinkhorn with
    ``cfg`` is used unless ``exact`` is set or ``cfg`` is None.
    """
    _check_dims(Mu, Ml)
    inner_cfg = None if exact else cfg
    cells = [(i, j) for i in range(len(Mu)) for j in range(len(Ml))]

    def cell(ij):
        i, j = ij
        return transport_cost(Mu.measures[i], Ml.measures[j], k, inner_cfg)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(cell, cells))
    else:
        values = [cell(ij) for ij in cells]
    X = np.maximum(np.array(values, dtype=float).reshape(len(Mu), len(Ml)), 0.0)
    if rooted:
        X = X ** (1.0 / k)
    return CostMatrix(X, order_k=k)


def solve_measure_coupling(
    X,
    alpha,
    beta,
    lam: float,
    cfg: SinkhornConfig | None = None,
    *,
    row_keys: tuple[int, ...] = (),
    col_keys: tuple[int, ...] = (),
) -> MeasureCoupling:
    """Minimize ``<T, X> - lam * E(T)`` with row sums ``beta`` and column sums ``alpha``.

    ``alpha`` are the labeled class masses, ``beta`` the unlabeled cluster
    masses.  ``lam == 0`` solves the unregularized problem exactly; otherwise
    Sinkhorn runs with ``reg_strength = lam`` and the stopping rule from
    ``cfg``.
    """
    C = X if isinstance(X, CostMatrix) else CostMatrix(np.asarray(X, dtype=float))
    a_cols = as_simplex(alpha)
    b_rows = as_simplex(beta)
    if lam < 0:
        raise InvalidInput("lambda must be nonnegative")
    if lam == 0:
        plan, _ = solve_exact(b_rows, a_cols, C)
        objective = plan.cost
    else:
        base = cfg or SinkhornConfig(reg_strength=lam)
        run_cfg = SinkhornConfig(
            reg_strength=lam,
            max_iter=base.max_iter,
            tolerance=base.tolerance,
            log_domain=base.log_domain,
            check_every=base.check_every,
        )
        plan = solve_sinkhorn(b_rows, a_cols, C, run_cfg)
        objective = plan.cost - lam * plan_entropy(plan)
    return MeasureCoupling(plan, C, float(lam), float(objective), tuple(row_keys), tuple(col_keys))


def couple_measures(
    Mu: MeasureOfMeasures,
    Ml: MeasureOfMeasures,
    lam: float,
    cfg: SinkhornConfig | None = None,
    *,
    k: int = 2,
    exact_inner: bool = False,
    rooted: bool = False,
    workers: int = 1,
) -> MeasureCoupling:
    """Cost matrix between the two collections followed by the coupling solve."""
    inner = cfg if cfg is not None else (SinkhornConfig(reg_strength=lam) if lam > 0 else None)
    X = pairwise_measure_distances(Mu, Ml, k, inner, exact=exact_inner, rooted=rooted, workers=workers)
    return solve_measure_coupling(X, Ml.masses, Mu.masses, lam, cfg, row_keys=Mu.keys, col_keys=Ml.keys)


def assign_pseudo_labels(
    coupling: MeasureCoupling,
    cluster_labels,
    soft_mode: bool = False,
    *,
    on_degenerate: str = "exclude",
) -> PseudoLabelSet:
    """Label each sample with the class its cluster sends most mass to.

    ``cluster_labels`` holds cluster ids as produced by the clustering step;
    they are matched against ``coupling.row_keys`` (row index when keys are
    absent).  Rows with no mass above ``1e-12`` either exclude their samples
    (``on_degenerate="exclude"``) or raise ``DegenerateRow``.  ``soft_mode``
    only controls whether ``soft`` holds the renormalized plan row or the
    one-hot of ``hard``.
    """
    T = coupling.plan.matrix
    n_rows, c = T.shape
    keys = coupling.row_keys or tuple(range(n_rows))
    col_keys = np.asarray(coupling.col_keys or tuple(range(c)))
    lookup = {key: r for r, key in enumerate(keys)}
    cl = np.asarray(cluster_labels)
    try:
        rows = np.array([lookup[int(v)] for v in cl], dtype=int)
    except KeyError as exc:
        raise InvalidInput(f"cluster {exc.args[0]} has no row in the coupling") from None

    row_mass = T.sum(axis=1)
    degenerate = T.max(axis=1) < DEGENERATE_MASS
    if degenerate.any() and on_degenerate == "raise":
        raise DegenerateRow(f"clusters {[keys[r] for r in np.flatnonzero(degenerate)]} received no mass")

    n_classes = int(col_keys.max()) + 1
    row_soft = np.zeros((n_rows, n_classes))
    safe_mass = np.where(degenerate, 1.0, row_mass)
    row_soft[:, col_keys] = T / safe_mass[:, None]
    row_soft[degenerate] = 0.0
    # argmax keeps the lowest class index on ties
    row_hard = np.where(degenerate, -1, np.argmax(row_soft, axis=1))

    hard = row_hard[rows]
    if soft_mode:
        soft = row_soft[rows]
    else:
        soft = np.zeros((cl.size, n_classes))
        ok = hard >= 0
        soft[np.flatnonzero(ok), hard[ok]] = 1.0
    return PseudoLabelSet(hard=hard, soft=soft, source_cluster=cl.copy())


def _one_hot(labels: np.ndarray, c: int) -> np.ndarray:
    out = np.zeros((labels.size, c))
    out[np.arange(labels.size), labels] = 1.0
    return out


def gnn_sample_to_sample(X_u, X_l, y_l, n_classes: int | None = None) -> PseudoLabelSet:
    """Give each unlabeled sample the label of its nearest labeled sample."""
    X_u = np.asarray(X_u, dtype=float)
    X_l = np.asarray(X_l, dtype=float)
    y_l = np.asarray(y_l)
    if X_l.shape[0] == 0:
        raise InvalidInput("labeled set is empty")
    if X_u.shape[1] != X_l.shape[1]:
        raise DimensionError("labeled and unlabeled features differ in dimension")
    nearest = np.argmin(pairwise_sq_dists(X_u, X_l), axis=1)
    hard = y_l[nearest]
    c = n_classes or int(y_l.max()) + 1
    return PseudoLabelSet(hard=hard, soft=_one_hot(hard, c), source_cluster=nearest)


def gnn_sample_to_measure(X_u, Ml: MeasureOfMeasures, k: int = 2) -> PseudoLabelSet:
    """Label each unlabeled sample by the class measure it is cheapest to transport onto."""
    X_u = np.asarray(X_u, dtype=float)
    if X_u.shape[1] != Ml.measures[0].dim:
        raise DimensionError("unlabeled features and class measures differ in dimension")
    # closed form of dirac_to_measure, vectorized over the unlabeled rows
    costs = np.column_stack([euclidean_cost_matrix(X_u, P.support, k).entries @ P.weights for P in Ml.measures])
    best = np.argmin(costs, axis=1)
    keys = np.asarray(Ml.keys)
    hard = keys[best]
    c = int(keys.max()) + 1
    return PseudoLabelSet(hard=hard, soft=_one_hot(hard, c), source_cluster=hard.copy())
