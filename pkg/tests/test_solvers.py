import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_force_assignment
from mmot.errors import DimensionError, MarginalMismatch, NumericalBlowup
from mmot.measures import euclidean_cost_matrix, make_measure
from mmot.solvers import (
    SinkhornConfig,
    dirac_to_measure,
    plan_entropy,
    solve_exact,
    solve_sinkhorn,
    wasserstein_distance,
)


def _feasible(plan, a, b, tol):
    T = plan.matrix
    assert np.all(T >= 0)
    assert np.abs(T.sum(1) - a).max() <= tol
    assert np.abs(T.sum(0) - b).max() <= tol


# ----- exact ---------------------------------------------------------------


def test_exact_single_cell():
    plan, _ = solve_exact([1.0], [1.0], [[4.2]])
    assert plan.matrix.tolist() == [[1.0]]
    assert plan.cost == pytest.approx(4.2)


def test_exact_zero_cost_matching():
    plan, _ = solve_exact([0.5, 0.5], [0.5, 0.5], [[0.0, 3.0], [3.0, 0.0]])
    np.testing.assert_allclose(plan.matrix, np.diag([0.5, 0.5]))
    assert plan.cost == 0.0


def test_exact_two_by_two_against_line_scan():
    a, b = np.array([0.5, 0.5]), np.array([0.3, 0.7])
    M = np.array([[1.0, 2.0], [3.0, 1.0]])
    # the polytope is {[[t, .5-t], [.3-t, .2+t]] : t in [0, .3]}
    ts = np.linspace(0.0, 0.3, 3001)
    costs = ts * 1 + (0.5 - ts) * 2 + (0.3 - ts) * 3 + (0.2 + ts) * 1
    t_best = ts[np.argmin(costs)]
    plan, duals = solve_exact(a, b, M)
    assert plan.cost == pytest.approx(costs.min(), abs=1e-12)
    assert plan.cost == pytest.approx(1.2)
    np.testing.assert_allclose(plan.matrix, [[t_best, 0.5 - t_best], [0.3 - t_best, 0.2 + t_best]], atol=1e-12)
    assert duals.objective(a, b) == pytest.approx(1.2)


def test_exact_rejects_mismatched_marginals():
    with pytest.raises(MarginalMismatch):
        solve_exact([0.5, 0.5], [0.5, 0.6], np.ones((2, 2)))
    with pytest.raises(DimensionError):
        solve_exact([0.5, 0.5], [1.0], np.ones((2, 2)))


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_exact_matches_permutation_oracle(n, rng):
    for _ in range(10):
        C = rng.random((n, n)) * rng.choice([1.0, 10.0])
        u = np.full(n, 1.0 / n)
        plan, _ = solve_exact(u, u, C)
        assert plan.cost == pytest.approx(brute_force_assignment(C), abs=1e-9)


def test_exact_certificates_rectangular(rng):
    for _ in range(30):
        n, m = rng.integers(1, 9, size=2)
        a, b = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(m))
        C = rng.random((n, m)) * 5
        plan, duals = solve_exact(a, b, C)
        _feasible(plan, a, b, 1e-9)
        assert (C - duals.f[:, None] - duals.g[None, :]).min() >= -1e-7
        assert abs(plan.cost - duals.objective(a, b)) <= 1e-6
        assert plan.cost == pytest.approx(np.sum(plan.matrix * C), rel=1e-9)


def test_exact_with_zero_masses(rng):
    a = np.array([0.0, 0.5, 0.5, 0.0])
    b = np.array([0.25, 0.0, 0.75])
    C = rng.random((4, 3))
    plan, duals = solve_exact(a, b, C)
    _feasible(plan, a, b, 1e-12)
    assert abs(plan.cost - duals.objective(a, b)) <= 1e-9


def test_exact_degenerate_identical_points():
    # all costs equal: every feasible plan is optimal
    plan, _ = solve_exact(np.full(5, 0.2), np.full(5, 0.2), np.ones((5, 5)))
    assert plan.cost == pytest.approx(1.0)


def test_exact_scale_equivariance(rng):
    for _ in range(10):
        a, b = rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(5))
        C = rng.random((4, 5))
        p1, _ = solve_exact(a, b, C)
        p2, _ = solve_exact(a, b, 7.5 * C)
        assert p2.cost == pytest.approx(7.5 * p1.cost, rel=1e-12)
        # the optimal plan at scale 1 is still optimal after scaling
        assert np.sum(p1.matrix * 7.5 * C) == pytest.approx(p2.cost, rel=1e-12)


# ----- sinkhorn ------------------------------------------------------------


def test_sinkhorn_large_reg_is_independent_coupling(rng):
    a = np.array([0.5, 0.5])
    plan = solve_sinkhorn(a, a, rng.random((2, 2)), SinkhornConfig(1e3))
    np.testing.assert_allclose(plan.matrix, np.full((2, 2), 0.25), atol=1e-3)


def test_sinkhorn_small_reg_two_by_two():
    a, b = np.array([0.5, 0.5]), np.array([0.3, 0.7])
    M = np.array([[1.0, 2.0], [3.0, 1.0]])
    exact, _ = solve_exact(a, b, M)
    plan = solve_sinkhorn(a, b, M, SinkhornConfig(1e-3, log_domain=True))
    assert abs(plan.cost - exact.cost) <= 5e-3


def test_sinkhorn_converged_residual(rng):
    for _ in range(10):
        a, b = rng.dirichlet(np.ones(5)), rng.dirichlet(np.ones(6))
        plan = solve_sinkhorn(a, b, rng.random((5, 6)), SinkhornConfig(0.1))
        assert plan.converged and plan.stop_reason == "tolerance"
        assert plan.residual <= 1e-8
        _feasible(plan, a, b, 1e-8)


def test_sinkhorn_is_diagonal_scaling_of_kernel(rng):
    a, b = rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(3))
    M = rng.random((4, 3))
    reg = 0.2
    T = solve_sinkhorn(a, b, M, SinkhornConfig(reg)).matrix
    K = np.exp(-M / reg)
    ratio = T / K
    # rank one: ratio = u v^T
    u, v = ratio[:, 0], ratio[0, :] / ratio[0, 0]
    np.testing.assert_allclose(ratio, np.outer(u, v), rtol=1e-10)


def test_sinkhorn_scaling_mode_matches_log_mode(rng):
    a, b = rng.dirichlet(np.ones(5)), rng.dirichlet(np.ones(5))
    M = rng.random((5, 5))
    p_log = solve_sinkhorn(a, b, M, SinkhornConfig(0.05))
    p_lin = solve_sinkhorn(a, b, M, SinkhornConfig(0.05, log_domain=False))
    np.testing.assert_allclose(p_log.matrix, p_lin.matrix, atol=1e-9)


def test_sinkhorn_scaling_mode_blows_up():
    a = np.array([0.5, 0.5])
    M = np.array([[0.0, 1000.0], [1000.0, 0.0]]) + 1000.0
    with pytest.raises(NumericalBlowup):
        solve_sinkhorn(a, a, M, SinkhornConfig(1e-3, log_domain=False))
    plan = solve_sinkhorn(a, a, M, SinkhornConfig(1e-3))
    np.testing.assert_allclose(plan.matrix, np.diag([0.5, 0.5]), atol=1e-9)


def test_sinkhorn_reports_max_iter():
    a = np.full(3, 1 / 3)
    M = np.random.default_rng(0).random((3, 3))
    plan = solve_sinkhorn(a, a, M, SinkhornConfig(1e-3, max_iter=3, eps_scaling=False))
    assert not plan.converged and plan.stop_reason == "max_iter" and plan.n_iter == 3


def test_sinkhorn_zero_mass_rows(rng):
    a = np.array([0.5, 0.0, 0.5])
    b = np.array([0.2, 0.8])
    plan = solve_sinkhorn(a, b, rng.random((3, 2)), SinkhornConfig(0.1))
    assert np.all(plan.matrix[1] == 0)
    _feasible(plan, a, b, 1e-8)


def test_sinkhorn_joint_scale_invariance(rng):
    a, b = rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(4))
    M = rng.random((4, 4))
    T1 = solve_sinkhorn(a, b, M, SinkhornConfig(0.1)).matrix
    T2 = solve_sinkhorn(a, b, 3.0 * M, SinkhornConfig(0.3)).matrix
    np.testing.assert_allclose(T1, T2, atol=1e-9)


def _seeded_5x5(seed):
    r = np.random.default_rng(seed)
    return r.dirichlet(np.ones(5)), r.dirichlet(np.ones(5)), r.random((5, 5))


@pytest.mark.parametrize("seed", range(5))
def test_sinkhorn_cost_monotone_in_reg(seed):
    a, b, M = _seeded_5x5(seed)
    exact, _ = solve_exact(a, b, M)
    regs = [1e-3, 1e-2, 0.1, 1.0]
    costs = [solve_sinkhorn(a, b, M, SinkhornConfig(r)).cost for r in regs]
    # linear cost grows with reg, so the gap to the exact cost shrinks as reg decreases
    assert all(c2 >= c1 - 1e-7 for c1, c2 in zip(costs, costs[1:]))
    assert costs[0] >= exact.cost - 1e-7


@pytest.mark.parametrize("seed", range(5))
def test_entropy_nondecreasing_in_reg(seed):
    a, b, M = _seeded_5x5(100 + seed)
    ents = [plan_entropy(solve_sinkhorn(a, b, M, SinkhornConfig(r))) for r in (0.01, 0.1, 1.0, 10.0)]
    assert all(e2 >= e1 - 1e-9 for e1, e2 in zip(ents, ents[1:]))


# ----- distances -----------------------------------------------------------


def test_wasserstein_identity_and_shift():
    P = make_measure([[0.0], [1.0]])
    assert wasserstein_distance(P, P, 1) == pytest.approx(0.0, abs=1e-12)
    Q = make_measure([[2.0], [3.0]])
    assert wasserstein_distance(P, Q, 1) == pytest.approx(2.0)
    assert wasserstein_distance(P, Q, 2) == pytest.approx(2.0)


def test_wasserstein_permutation_invariance(rng):
    P = make_measure(rng.normal(size=(5, 2)), rng.random(5))
    Q = make_measure(rng.normal(size=(4, 2)), rng.random(4))
    perm = rng.permutation(5)
    P2 = make_measure(P.support[perm], P.weights[perm])
    assert wasserstein_distance(P, Q, 2) == pytest.approx(wasserstein_distance(P2, Q, 2), abs=1e-12)


def _small_measure(draw_pts, draw_w):
    return make_measure(draw_pts, draw_w)


measure_strategy = st.integers(1, 4).flatmap(
    lambda n: st.tuples(
        st.lists(st.lists(st.floats(-5, 5), min_size=2, max_size=2), min_size=n, max_size=n),
        st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n),
    )
).map(lambda pw: make_measure(pw[0], pw[1]))


@settings(max_examples=60, deadline=None)
@given(measure_strategy, measure_strategy, measure_strategy, st.sampled_from([1, 2]))
def test_wasserstein_metric_axioms(P, Q, R, k):
    pq = wasserstein_distance(P, Q, k)
    assert pq >= 0
    assert wasserstein_distance(P, P, k) <= 1e-7
    assert pq == pytest.approx(wasserstein_distance(Q, P, k), abs=1e-9)
    assert pq <= wasserstein_distance(P, R, k) + wasserstein_distance(R, Q, k) + 1e-7


def test_dirac_examples():
    P = make_measure([[2.0, 1.0]])
    assert dirac_to_measure([2.0, 1.0], P, 2) == 0.0
    P = make_measure([[1.0], [-1.0]])
    assert dirac_to_measure([0.0], P, 2) == pytest.approx(1.0)
    with pytest.raises(DimensionError):
        dirac_to_measure([0.0, 0.0], P, 2)


def test_dirac_matches_exact(rng):
    for _ in range(30):
        k = int(rng.integers(1, 4))
        P = make_measure(rng.normal(size=(6, 3)), rng.random(6))
        x = rng.normal(size=3)
        C = euclidean_cost_matrix(x[None], P.support, k)
        plan, _ = solve_exact([1.0], P.weights, C)
        assert dirac_to_measure(x, P, k) == pytest.approx(plan.cost, abs=1e-10)


def test_entropy_examples():
    assert plan_entropy(np.array([[1.0]])) == pytest.approx(1.0)
    assert plan_entropy(np.full((2, 2), 0.25)) == pytest.approx(np.log(4) + 1)
    assert plan_entropy(np.array([[0.5, 0.0], [0.0, 0.5]])) == pytest.approx(np.log(2) + 1)
