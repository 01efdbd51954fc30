import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmot.config import TrainConfig
from mmot.data import make_blob_splits
from mmot.errors import DimensionError
from mmot.model import (
    ClassifierParams,
    cross_entropy,
    forward,
    init_params,
    logits,
    loss_and_grad,
    softmax,
    total_loss,
)
from mmot.trainer import accuracy, train_warmup


def linear(W, b):
    return ClassifierParams(((np.asarray(W, float), np.asarray(b, float)),), 0, 0)


def test_forward_uniform_when_weights_zero():
    p = forward(linear(np.zeros((3, 4)), np.zeros(4)), [1.0, -2.0, 0.5])
    np.testing.assert_allclose(p, np.full(4, 0.25), atol=1e-15)


def test_forward_two_class_logistic():
    # logits (0, x) give p1 = 1 / (1 + e^-x)
    params = linear([[0.0, 1.0]], [0.0, 0.0])
    p = forward(params, [2.0])
    assert p[1] == pytest.approx(1.0 / (1.0 + np.exp(-2.0)), abs=1e-15)


def test_forward_batch_matches_single():
    params = init_params(3, 4, 8, seed=1)
    X = np.random.default_rng(0).standard_normal((5, 3))
    batch = forward(params, X)
    for i in range(5):
        np.testing.assert_allclose(batch[i], forward(params, X[i]), rtol=0, atol=1e-15)
    np.testing.assert_allclose(batch.sum(axis=1), 1.0, atol=1e-12)


def test_forward_dimension_mismatch():
    with pytest.raises(DimensionError):
        forward(init_params(3, 2, 0), np.zeros(4))


def test_softmax_is_shift_invariant_and_stable():
    z = np.array([1000.0, 1001.0, 999.0])
    np.testing.assert_allclose(softmax(z), softmax(z - 1000.0), atol=1e-15)
    assert np.all(np.isfinite(softmax(z)))


def test_cross_entropy_values():
    assert cross_entropy([0.5, 0.5], 0) == pytest.approx(np.log(2.0), abs=1e-11)
    assert cross_entropy([1.0, 0.0], 0) == pytest.approx(-np.log(1.0 + 1e-12), abs=1e-15)
    # certain but wrong prediction is capped by eps, not infinite
    assert cross_entropy([1.0, 0.0], 1) == pytest.approx(-np.log(1e-12), rel=1e-12)
    # soft targets: -(0.3 log 0.2 + 0.7 log 0.8)
    assert cross_entropy([0.2, 0.8], [0.3, 0.7]) == pytest.approx(
        -(0.3 * np.log(0.2 + 1e-12) + 0.7 * np.log(0.8 + 1e-12)), rel=1e-14
    )


def test_total_loss_reduces_to_labeled_term_when_alpha_zero():
    params = init_params(2, 3, 4, seed=3)
    rng = np.random.default_rng(3)
    lb = (rng.standard_normal((6, 2)), rng.integers(0, 3, 6))
    pb = (rng.standard_normal((4, 2)), rng.integers(0, 3, 4))
    assert total_loss(params, lb, pb, 0.0) == total_loss(params, lb, None, 0.0)
    expected = total_loss(params, lb, None, 0.0) + 0.5 * total_loss(params, None, pb, 1.0)
    assert total_loss(params, lb, pb, 0.5) == pytest.approx(expected, rel=1e-14)


def test_total_loss_uniform_model_is_log_c():
    params = linear(np.zeros((2, 5)), np.zeros(5))
    X = np.ones((3, 2))
    assert total_loss(params, (X, np.array([0, 1, 2])), None, 1.0) == pytest.approx(np.log(5.0), abs=1e-11)


def _ce_logits(z, t):
    return float(-np.sum(t * np.log(softmax(z) + 1e-12)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_logit_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    c = int(rng.integers(2, 6))
    z = rng.normal(scale=2.0, size=c)
    t = rng.dirichlet(np.ones(c))
    params = linear(np.eye(c), np.zeros(c))
    _, grads = loss_and_grad(params, (z[None, :], t[None, :]), None, 0.0)
    analytic = grads[0][1]  # bias gradient equals the logit gradient for an identity layer
    h = 1e-6
    numeric = np.array([(_ce_logits(z + h * e, t) - _ce_logits(z - h * e, t)) / (2 * h) for e in np.eye(c)])
    np.testing.assert_allclose(analytic, numeric, atol=1e-5)


def fd_check(params, lb, pb, alpha, h=1e-6):
    _, grads = loss_and_grad(params, lb, pb, alpha)
    analytic = np.concatenate([np.concatenate([dW.ravel(), db.ravel()]) for dW, db in grads])
    theta = params.flat()
    numeric = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        numeric[i] = (
            total_loss(params.with_flat(theta + e), lb, pb, alpha) - total_loss(params.with_flat(theta - e), lb, pb, alpha)
        ) / (2 * h)
    return analytic, numeric


def relative_error(a, b):
    return np.max(np.abs(a - b) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(b))))


@pytest.mark.parametrize("hidden", [0, 6])
def test_parameter_gradient_matches_finite_differences(hidden):
    rng = np.random.default_rng(11 + hidden)
    for draw in range(10):
        params = init_params(3, 4, hidden, seed=draw)
        lb = (rng.standard_normal((5, 3)), rng.integers(0, 4, 5))
        pb = (rng.standard_normal((4, 3)), rng.dirichlet(np.ones(4), size=4))
        alpha = float(rng.uniform(0, 2))
        analytic, numeric = fd_check(params, lb, pb, alpha)
        assert relative_error(analytic, numeric) <= 1e-4


def test_logits_are_affine_for_linear_model():
    params = linear([[1.0, 2.0], [3.0, 4.0]], [0.5, -0.5])
    np.testing.assert_allclose(logits(params, [[1.0, 1.0]]), [[4.5, 5.5]])


@pytest.fixture(scope="module")
def separable():
    return make_blob_splits(3, 4, 10.0, 1.0, 20, 3, 3, 300, seed=5)


def test_warmup_fits_separable_data(separable):
    cfg = TrainConfig(warmup_epochs=200, learning_rate=1e-2)
    params, trace = train_warmup(init_params(4, 3, 16, seed=5), separable["labeled"], cfg, seed=5)
    assert accuracy(params, separable["test"]) >= 0.99
    assert trace[-1] < trace[0]


def test_warmup_zero_epochs_is_identity(separable):
    p0 = init_params(4, 3, 16, seed=5)
    p1, trace = train_warmup(p0, separable["labeled"], TrainConfig(warmup_epochs=0), seed=5)
    assert trace == []
    np.testing.assert_array_equal(p0.flat(), p1.flat())


def test_warmup_is_deterministic(separable):
    cfg = TrainConfig(warmup_epochs=20)
    a, _ = train_warmup(init_params(4, 3, 16, seed=5), separable["labeled"], cfg, seed=9)
    b, _ = train_warmup(init_params(4, 3, 16, seed=5), separable["labeled"], cfg, seed=9)
    assert a.flat().tobytes() == b.flat().tobytes()
