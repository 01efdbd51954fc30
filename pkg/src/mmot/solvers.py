"""Discrete optimal transport between two weighted point clouds.

Two solvers share one result type:

* ``solve_exact`` -- transportation simplex (north-west corner start, MODI
  potentials, Dantzig pivoting).  Returns the optimal plan together with the
  dual potentials, which double as a certificate of optimality.
* ``solve_sinkhorn`` -- entropic regularization, ``T = diag(u) K diag(v)`` with
  ``K = exp(-M / reg)``.  Log-domain updates by default.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DimensionError, MarginalMismatch, NumericalBlowup
from .measures import CostMatrix, DiscreteMeasure, euclidean_cost_matrix

MARGINAL_MISMATCH_TOL = 1e-6
_STAGE_ITERS = 200


@dataclass(frozen=True)
class TransportPlan:
    matrix: np.ndarray
    cost: float
    reg_strength: float = 0.0
    converged: bool = True
    n_iter: int = 0
    residual: float = 0.0
    # "optimal" for the exact solver, "tolerance" or "max_iter" for Sinkhorn
    stop_reason: str = "optimal"

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape


@dataclass(frozen=True)
class DualPotentials:
    f: np.ndarray
    g: np.ndarray

    def objective(self, a, b) -> float:
        return float(self.f @ np.asarray(a) + self.g @ np.asarray(b))


@dataclass(frozen=True)
class SinkhornConfig:
    reg_strength: float
    max_iter: int = 10_000
    tolerance: float = 1e-8
    log_domain: bool = True
    check_every: int = 10
    # warm-start the log-domain potentials along a decreasing reg schedule
    eps_scaling: bool = True

    def __post_init__(self):
        if not self.reg_strength > 0:
            raise ValueError("reg_strength must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.check_every < 1:
            raise ValueError("check_every must be >= 1")


def _cost_entries(M) -> np.ndarray:
    if isinstance(M, CostMatrix):
        return M.entries
    arr = np.asarray(M, dtype=float)
    if arr.ndim != 2:
        raise DimensionError("cost matrix must be two-dimensional")
    if not np.all(np.isfinite(arr)):
        raise ValueError("cost matrix must be finite")
    return arr


def _check_marginals(a, b, M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if M.shape != (a.size, b.size):
        raise DimensionError(f"cost shape {M.shape} does not match marginals ({a.size}, {b.size})")
    if np.any(a < 0) or np.any(b < 0):
        raise MarginalMismatch("marginals must be nonnegative")
    if abs(a.sum() - b.sum()) > MARGINAL_MISMATCH_TOL:
        raise MarginalMismatch(f"marginal totals differ: {a.sum()!r} vs {b.sum()!r}")
    return a, b


# ---------------------------------------------------------------------------
# Transportation simplex
# ---------------------------------------------------------------------------


@njit(cache=True)
def _northwest_corner(a, b, x, basic):
    n, m = x.shape
    ra = a.copy()
    rb = b.copy()
    i = 0
    j = 0
    while True:
        q = min(ra[i], rb[j])
        row_done = ra[i] <= rb[j]
        x[i, j] = q
        basic[i, j] = True
        ra[i] -= q
        rb[j] -= q
        if i == n - 1 and j == m - 1:
            break
        if i == n - 1:
            j += 1
        elif j == m - 1:
            i += 1
        elif row_done:
            i += 1
        else:
            j += 1


@njit(cache=True)
def _potentials(M, basic, u, v, queue, seen):
    # Spanning tree traversal; node ids < n are rows, >= n are columns.
    n, m = M.shape
    seen[:] = False
    u[0] = 0.0
    seen[0] = True
    queue[0] = 0
    head = 0
    tail = 1
    while head < tail:
        node = queue[head]
        head += 1
        if node < n:
            for j in range(m):
                if basic[node, j] and not seen[n + j]:
                    v[j] = M[node, j] - u[node]
                    seen[n + j] = True
                    queue[tail] = n + j
                    tail += 1
        else:
            j = node - n
            for i in range(n):
                if basic[i, j] and not seen[i]:
                    u[i] = M[i, j] - v[j]
                    seen[i] = True
                    queue[tail] = i
                    tail += 1
    return tail


@njit(cache=True)
def _cycle(basic, ie, je, parent, queue, seen, path):
    # Tree path from column je back to row ie; returns its node count.
    n, m = basic.shape
    seen[:] = False
    seen[ie] = True
    parent[ie] = -1
    queue[0] = ie
    head = 0
    tail = 1
    target = n + je
    while head < tail:
        node = queue[head]
        head += 1
        if node == target:
            break
        if node < n:
            for j in range(m):
                if basic[node, j] and not seen[n + j]:
                    seen[n + j] = True
                    parent[n + j] = node
                    queue[tail] = n + j
                    tail += 1
        else:
            j = node - n
            for i in range(n):
                if basic[i, j] and not seen[i]:
                    seen[i] = True
                    parent[i] = node
                    queue[tail] = i
                    tail += 1
    length = 0
    node = target
    while node != -1:
        path[length] = node
        length += 1
        node = parent[node]
    return length


@njit(cache=True)
def _transport_simplex(a, b, M, max_iter, tol):
    n, m = M.shape
    x = np.zeros((n, m))
    basic = np.zeros((n, m), dtype=np.bool_)
    _northwest_corner(a, b, x, basic)

    u = np.zeros(n)
    v = np.zeros(m)
    queue = np.empty(n + m, dtype=np.int64)
    seen = np.zeros(n + m, dtype=np.bool_)
    parent = np.empty(n + m, dtype=np.int64)
    path = np.empty(n + m, dtype=np.int64)

    it = 0
    degenerate_run = 0
    status = 0
    while True:
        _potentials(M, basic, u, v, queue, seen)
        # entering cell: most negative reduced cost, or first negative one
        # (Bland) after a long run of degenerate pivots
        best = -tol
        ie = -1
        je = -1
        bland = degenerate_run > n + m
        for i in range(n):
            for j in range(m):
                if basic[i, j]:
                    continue
                r = M[i, j] - u[i] - v[j]
                if r < best:
                    best = r
                    ie = i
                    je = j
                    if bland:
                        break
            if bland and ie >= 0:
                break
        if ie < 0:
            break
        if it >= max_iter:
            status = 1
            break
        it += 1

        length = _cycle(basic, ie, je, parent, queue, seen, path)
        # path: col je, row, col, ..., row ie.  Edge k joins path[k], path[k+1];
        # even edges lose mass, odd edges gain it.
        theta = np.inf
        li = -1
        lj = -1
        for k in range(length - 1):
            if k % 2 == 0:
                p = path[k]
                q = path[k + 1]
                if p < n:
                    ri, cj = p, q - n
                else:
                    ri, cj = q, p - n
                if x[ri, cj] < theta:
                    theta = x[ri, cj]
                    li = ri
                    lj = cj
        for k in range(length - 1):
            p = path[k]
            q = path[k + 1]
            if p < n:
                ri, cj = p, q - n
            else:
                ri, cj = q, p - n
            if k % 2 == 0:
                x[ri, cj] -= theta
            else:
                x[ri, cj] += theta
        x[ie, je] = theta
        basic[ie, je] = True
        basic[li, lj] = False
        x[li, lj] = 0.0
        if theta == 0.0:
            degenerate_run += 1
        else:
            degenerate_run = 0

    _potentials(M, basic, u, v, queue, seen)
    return x, u, v, it, status


def _exact_arrays(a: np.ndarray, b: np.ndarray, C: np.ndarray, max_iter: int, tol: float):
    # north-west corner over rows grouped by their cheapest column starts
    # close to the greedy assignment and saves most pivots
    order = np.argsort(np.argmin(C, axis=1), kind="stable")
    xs, us, v, it, status = _transport_simplex(
        np.ascontiguousarray(a[order]), np.ascontiguousarray(b), np.ascontiguousarray(C[order]), max_iter, tol
    )
    x = np.empty_like(xs)
    x[order] = xs
    u = np.empty_like(us)
    u[order] = us
    np.maximum(x, 0.0, out=x)
    return x, u, v, it, status


def exact_potentials(a: np.ndarray, b: np.ndarray, C: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Dual potentials of the exact problem, skipping input validation.

    For inner loops whose inputs are already known to be well formed
    (float arrays, equal totals, finite costs).
    """
    n, m = C.shape
    _, u, v, _, _ = _exact_arrays(a, b, C, 50 * (n + m) ** 2, 1e-12 * max(1.0, float(C.max())))
    return u, v


def solve_exact(a, b, M, *, max_iter: int | None = None) -> tuple[TransportPlan, DualPotentials]:
    """Exact OT as a transportation LP; returns the optimal plan and dual potentials."""
    C = _cost_entries(M)
    a, b = _check_marginals(a, b, C)
    # exact equality of totals keeps the NW corner start on the polytope
    b = b * (a.sum() / b.sum())
    n, m = C.shape
    if max_iter is None:
        max_iter = 50 * (n + m) ** 2
    scale = max(1.0, float(np.abs(C).max()))
    x, u, v, it, status = _exact_arrays(a, b, C, max_iter, 1e-12 * scale)
    plan = TransportPlan(
        matrix=x,
        cost=float(np.sum(x * C)),
        reg_strength=0.0,
        converged=status == 0,
        n_iter=int(it),
        residual=float(np.abs(x.sum(1) - a).max() + np.abs(x.sum(0) - b).max()),
        stop_reason="optimal" if status == 0 else "max_iter",
    )
    return plan, DualPotentials(u, v)


# ---------------------------------------------------------------------------
# Sinkhorn
# ---------------------------------------------------------------------------


def _reg_schedule(C: np.ndarray, reg: float) -> np.ndarray:
    stages = []
    r = max(float(C.max() - C.min()), reg)
    while r > 10.0 * reg:
        stages.append(r)
        r /= 10.0
    return np.array(stages, dtype=float)


@njit(cache=True)
def _lse_rows(f, g, C, r, log_a, out):
    n, m = C.shape
    for i in range(n):
        zmax = -np.inf
        for j in range(m):
            z = (g[j] - C[i, j]) / r
            if z > zmax:
                zmax = z
        acc = 0.0
        for j in range(m):
            acc += np.exp((g[j] - C[i, j]) / r - zmax)
        out[i] = r * (log_a[i] - (np.log(acc) + zmax))


@njit(cache=True)
def _lse_cols(f, g, C, r, log_b, out):
    n, m = C.shape
    for j in range(m):
        zmax = -np.inf
        for i in range(n):
            z = (f[i] - C[i, j]) / r
            if z > zmax:
                zmax = z
        acc = 0.0
        for i in range(n):
            acc += np.exp((f[i] - C[i, j]) / r - zmax)
        out[j] = r * (log_b[j] - (np.log(acc) + zmax))


@njit(cache=True)
def _sinkhorn_log_kernel(a, b, C, reg, stages, stage_iters, max_iter, check_every, tol):
    n, m = C.shape
    log_a = np.log(a)
    log_b = np.log(b)
    f = np.zeros(n)
    g = np.zeros(m)
    T = np.zeros((n, m))
    it = 0
    # coarse stages only move the potentials; the returned plan always comes
    # from the target reg and carries that stage's residual
    for r in stages:
        for _ in range(min(stage_iters, max_iter - 1 - it)):
            it += 1
            _lse_rows(f, g, C, r, log_a, f)
            _lse_cols(f, g, C, r, log_b, g)
    residual = np.inf
    converged = False
    while it < max_iter:
        it += 1
        _lse_rows(f, g, C, reg, log_a, f)
        _lse_cols(f, g, C, reg, log_b, g)
        if it % check_every == 0 or it == max_iter:
            row_err = 0.0
            col = np.zeros(m)
            for i in range(n):
                acc = 0.0
                for j in range(m):
                    t = np.exp((f[i] + g[j] - C[i, j]) / reg)
                    T[i, j] = t
                    acc += t
                    col[j] += t
                row_err = max(row_err, abs(acc - a[i]))
            col_err = 0.0
            for j in range(m):
                col_err = max(col_err, abs(col[j] - b[j]))
            residual = row_err + col_err
            if residual <= tol:
                converged = True
                break
    return T, it, residual, converged


def _sinkhorn_log(a, b, C, cfg: SinkhornConfig):
    stages = _reg_schedule(C, cfg.reg_strength) if cfg.eps_scaling else np.zeros(0)
    return _sinkhorn_log_kernel(
        np.ascontiguousarray(a), np.ascontiguousarray(b), np.ascontiguousarray(C, dtype=float),
        float(cfg.reg_strength), stages, _STAGE_ITERS, cfg.max_iter, cfg.check_every, cfg.tolerance,
    )


def _sinkhorn_scaling(a, b, C, cfg: SinkhornConfig):
    K = np.exp(-C / cfg.reg_strength)
    v = np.ones(b.size)
    u = np.ones(a.size)
    T = None
    residual = np.inf
    it = 0
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        for it in range(1, cfg.max_iter + 1):
            u = a / (K @ v)
            v = b / (K.T @ u)
            if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
                raise NumericalBlowup(
                    f"scaling vectors overflowed at iteration {it}; retry with log_domain=True"
                )
            if it % cfg.check_every == 0 or it == cfg.max_iter:
                T = u[:, None] * K * v[None, :]
                residual = np.abs(T.sum(1) - a).max() + np.abs(T.sum(0) - b).max()
                if not np.isfinite(residual):
                    raise NumericalBlowup("non-finite plan; retry with log_domain=True")
                if residual <= cfg.tolerance:
                    return T, it, residual, True
    return T, it, residual, False


def solve_sinkhorn(a, b, M, cfg: SinkhornConfig) -> TransportPlan:
    """Entropic OT: ``min <T, M> - reg * E(T)`` over the transportation polytope.

    Rows or columns with zero mass are left out of the scaling and come back
    as zeros in the plan.  Hitting ``max_iter`` is reported through
    ``converged``/``stop_reason``, not raised.
    """
    C = _cost_entries(M)
    a, b = _check_marginals(a, b, C)
    ia = np.flatnonzero(a > 0)
    ib = np.flatnonzero(b > 0)
    sub = C[np.ix_(ia, ib)]
    solver = _sinkhorn_log if cfg.log_domain else _sinkhorn_scaling
    T_sub, it, residual, converged = solver(a[ia], b[ib], sub, cfg)
    T = np.zeros(C.shape)
    T[np.ix_(ia, ib)] = T_sub
    return TransportPlan(
        matrix=T,
        cost=float(np.sum(T * C)),
        reg_strength=cfg.reg_strength,
        converged=converged,
        n_iter=it,
        residual=float(residual),
        stop_reason="tolerance" if converged else "max_iter",
    )


# ---------------------------------------------------------------------------
# Distances built on the solvers
# ---------------------------------------------------------------------------


def transport_cost(P: DiscreteMeasure, Q: DiscreteMeasure, k: int = 2, cfg: SinkhornConfig | None = None) -> float:
    """Optimal ``<T, M>`` with ``M = ||x - y||^k`` (no root taken)."""
    C = euclidean_cost_matrix(P.support, Q.support, k)
    if cfg is None:
        plan, _ = solve_exact(P.weights, Q.weights, C)
    else:
        plan = solve_sinkhorn(P.weights, Q.weights, C, cfg)
    return plan.cost


def wasserstein_distance(P: DiscreteMeasure, Q: DiscreteMeasure, k: int = 2, cfg: SinkhornConfig | None = None) -> float:
    """Order-k Wasserstein distance, ``<T*, M> ** (1/k)``; exact unless ``cfg`` given."""
    return max(transport_cost(P, Q, k, cfg), 0.0) ** (1.0 / k)


def dirac_to_measure(x, P: DiscreteMeasure, k: int = 2) -> float:
    """Cost of moving a unit Dirac at ``x`` onto ``P``: ``sum_j w_j ||x - x_j||^k``.

    Only one coupling is admissible, so this is the transport cost itself and
    not its k-th root.
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != P.dim:
        raise DimensionError(f"point has dimension {x.shape[0]}, measure has {P.dim}")
    C = euclidean_cost_matrix(x[None, :], P.support, k).entries[0]
    return float(C @ P.weights)


def plan_entropy(T) -> float:
    """``-sum T_ij (log T_ij - 1)`` with ``0 * (log 0 - 1) = 0``."""
    mat = T.matrix if isinstance(T, TransportPlan) else np.asarray(T, dtype=float)
    pos = mat[mat > 0]
    return float(-np.sum(pos * (np.log(pos) - 1.0)))
