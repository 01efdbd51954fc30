"""K-means as a one-measure Wasserstein barycenter, with Lloyd's algorithm beside it.

For a single empirical measure with uniform weights ``1/n``, the best
``k``-point approximation in W2 is the K-means solution.  ``barycenter_cluster``
runs the alternating scheme: a maximization step over the centroid weights
``a`` driven by dual potentials of the exact OT problem, then an expectation
step that re-solves the OT plan and moves each centroid to the barycentric
projection of the mass it receives.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import InvalidInput, TooManyClusters
from .measures import MeasureOfMeasures, make_measure, pairwise_sq_dists
from .seeding import make_rng
from .solvers import TransportPlan, _transport_simplex, solve_exact


class EmptyClusterWarning(UserWarning):
    pass


@dataclass(frozen=True)
class BarycenterState:
    centroids: np.ndarray  # (k, d)
    centroid_weights: np.ndarray  # (k,)
    assignment_plan: TransportPlan  # (n, k): rows data atoms, columns centroids
    # accelerated iterate before rounding to the nearest-centroid masses
    dual_weights: np.ndarray | None = None


@dataclass(frozen=True)
class ClusterResult:
    labels: np.ndarray
    centroids: np.ndarray
    objective: float
    history: tuple[float, ...] = ()
    n_iter: int = 0
    state: BarycenterState | None = None
    counts: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.counts is None:
            object.__setattr__(self, "counts", np.bincount(self.labels, minlength=self.centroids.shape[0]))

    @property
    def k(self) -> int:
        return self.centroids.shape[0]


def kmeans_objective(X: np.ndarray, centroids: np.ndarray) -> float:
    return float(pairwise_sq_dists(X, centroids).min(axis=1).mean())


def _check_inputs(X, k: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise InvalidInput("data must be a nonempty (n, d) matrix")
    if not np.all(np.isfinite(X)):
        raise InvalidInput("data must be finite")
    if k < 1:
        raise InvalidInput("k must be >= 1")
    if k > X.shape[0]:
        raise TooManyClusters(f"k={k} exceeds the number of points n={X.shape[0]}")
    return X


def kmeanspp_init(X: np.ndarray, k: int, seed: int) -> np.ndarray:
    """k-means++ seeding over a canonical (lexicographic) row order.

    Sampling in canonical order makes the chosen centroids independent of how
    the caller happened to order the rows.
    """
    order = np.lexsort(X.T[::-1])
    Xs = X[order]
    rng = make_rng(seed, "kmeans++")
    centers = [Xs[rng.integers(Xs.shape[0])]]
    d2 = ((Xs - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(Xs.shape[0]))
        else:
            idx = int(rng.choice(Xs.shape[0], p=d2 / total))
        centers.append(Xs[idx])
        d2 = np.minimum(d2, ((Xs - Xs[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def _reseed_empty(X: np.ndarray, centroids: np.ndarray, empty: np.ndarray) -> np.ndarray:
    """Move each empty centroid onto the point farthest from its current centroid."""
    centroids = centroids.copy()
    d2 = pairwise_sq_dists(X, centroids)
    nearest = d2.min(axis=1)
    for j in empty:
        far = int(np.argmax(nearest))
        centroids[j] = X[far]
        nearest[far] = 0.0
    return centroids


def nearest_centroid(d2: np.ndarray) -> np.ndarray:
    # argmin keeps the lowest index on ties
    return np.argmin(d2, axis=1)


@njit(cache=True)
def _centroid_potential(b, a, M):
    # same row grouping as the checked solver, done inside compiled code
    n, k = M.shape
    order = np.argsort(np.argmin(M, axis=1), kind="mergesort")
    Ms = np.empty((n, k))
    bs = np.empty(n)
    for r in range(n):
        Ms[r] = M[order[r]]
        bs[r] = b[order[r]]
    tol = 1e-12 * max(1.0, M.max())
    _, _, v, _, _ = _transport_simplex(bs, a, Ms, 50 * (n + k) ** 2, tol)
    return v


@njit(cache=True)
def _maximization_step(M, b, iters, t0, tol=1e-6):
    """Accelerated mirror descent on the centroid weights ``a`` of ``p(a, b, M)``.

    The subgradient with respect to ``a`` is the dual potential of the exact
    transport problem on the centroid side.
    """
    k = M.shape[1]
    a_hat = np.full(k, 1.0 / k)
    log_tilde = np.log(a_hat)
    total = b.sum()
    for t in range(1, iters + 1):
        beta = (t + 1) / 2.0
        a_tilde = np.exp(log_tilde)
        a = (1.0 - 1.0 / beta) * a_hat + a_tilde / beta
        a = a * (total / a.sum())
        grad = _centroid_potential(b, a, M)
        # multiplicative update kept in log space; large dual gaps underflow otherwise
        log_tilde = log_tilde - t0 * beta * grad
        log_tilde -= log_tilde.max()
        log_tilde -= np.log(np.exp(log_tilde).sum())
        a_tilde = np.exp(log_tilde)
        new_hat = (1.0 - 1.0 / beta) * a_hat + a_tilde / beta
        moved = np.abs(new_hat - a_hat).sum()
        a_hat = new_hat
        if moved <= tol:
            break
    return a_hat


def _plan_cost(b: np.ndarray, a: np.ndarray, M: np.ndarray) -> float:
    return solve_exact(b, a, M)[0].cost


def barycenter_cluster(
    X_u,
    k: int,
    seed: int = 0,
    inner_iters: int = 50,
    step_theta: float = 1.0,
    step_t0: float = 1.0,
    *,
    max_iter: int = 100,
    tol: float = 1e-10,
    round_weights: bool = True,
) -> ClusterResult:
    """Cluster rows of ``X_u`` into ``k`` groups via the W2 barycenter scheme.

    ``round_weights`` finishes each maximization step at the exact minimizer of
    ``p(., b, M)`` over the simplex, the nearest-centroid mass vector, whenever
    that improves on the accelerated iterate (it always ties or wins).  With
    ``step_theta=1`` this makes every outer iteration coincide with a Lloyd
    step; turn it off to keep the raw iterate.
    """
    X = _check_inputs(X_u, k)
    if not 0.0 <= step_theta <= 1.0:
        raise InvalidInput("step_theta must lie in [0, 1]")
    n = X.shape[0]
    b = np.full(n, 1.0 / n)
    Y = kmeanspp_init(X, k, seed)
    history: list[float] = []

    it = 0
    for it in range(1, max_iter + 1):
        M = pairwise_sq_dists(X, Y)
        history.append(float(M.min(axis=1).mean()))
        a = _maximization_step(M, b, inner_iters, float(step_t0))
        if round_weights:
            a_vertex = np.bincount(nearest_centroid(M), weights=b, minlength=k)
            if _plan_cost(b, a_vertex, M) <= _plan_cost(b, a, M) + 1e-12:
                a = a_vertex
        empty = np.flatnonzero(a <= 1e-12)
        if empty.size:
            Y = _reseed_empty(X, Y, empty)
            continue
        plan, _ = solve_exact(b, a, M)
        target = (plan.matrix.T @ X) / a[:, None]
        Y_new = (1.0 - step_theta) * Y + step_theta * target
        shift = float(np.abs(Y_new - Y).max())
        Y = Y_new
        if shift <= tol:
            break

    M = pairwise_sq_dists(X, Y)
    a_raw = _maximization_step(M, b, inner_iters, float(step_t0))
    a = a_raw
    if round_weights:
        a_vertex = np.bincount(nearest_centroid(M), weights=b, minlength=k)
        if _plan_cost(b, a_vertex, M) <= _plan_cost(b, a_raw, M) + 1e-12:
            a = a_vertex
    plan, _ = solve_exact(b, a, M)
    labels = np.argmax(plan.matrix, axis=1)
    state = BarycenterState(Y, a, plan, a_raw)
    return ClusterResult(
        labels=labels,
        centroids=Y,
        objective=kmeans_objective(X, Y),
        history=tuple(history),
        n_iter=it,
        state=state,
    )


def lloyd_kmeans(X_u, k: int, seed: int = 0, max_iter: int = 300) -> ClusterResult:
    X = _check_inputs(X_u, k)
    Y = kmeanspp_init(X, k, seed)
    labels = None
    history: list[float] = []
    it = 0
    for it in range(1, max_iter + 1):
        d2 = pairwise_sq_dists(X, Y)
        history.append(float(d2.min(axis=1).mean()))
        new_labels = nearest_centroid(d2)
        counts = np.bincount(new_labels, minlength=k)
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            Y = _reseed_empty(X, Y, empty)
            labels = None
            continue
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        Y = np.stack([X[labels == j].mean(axis=0) for j in range(k)])
    labels = nearest_centroid(pairwise_sq_dists(X, Y))
    return ClusterResult(labels=labels, centroids=Y, objective=kmeans_objective(X, Y), history=tuple(history), n_iter=it)


def measures_from_clusters(X_u, result: ClusterResult) -> MeasureOfMeasures:
    """One uniform measure per nonempty cluster, with masses n'_j / n.

    Empty clusters are dropped (with an ``EmptyClusterWarning``); ``keys`` on
    the result keeps the original cluster ids.
    """
    X = np.asarray(X_u, dtype=float)
    labels = np.asarray(result.labels)
    if labels.shape != (X.shape[0],):
        raise InvalidInput("cluster labels do not match the data")
    counts = np.bincount(labels, minlength=result.k)
    keep = np.flatnonzero(counts > 0)
    if keep.size < counts.size:
        dropped = np.flatnonzero(counts == 0).tolist()
        warnings.warn(f"dropping empty clusters {dropped}", EmptyClusterWarning, stacklevel=2)
    measures = tuple(make_measure(X[labels == j]) for j in keep)
    masses = counts[keep] / counts[keep].sum()
    return MeasureOfMeasures(measures, masses, tuple(int(j) for j in keep))
