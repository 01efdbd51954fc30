import dataclasses

import numpy as np
import pytest

from mmot.config import OTConfig, TrainConfig
from mmot.data import make_blob_splits
from mmot.model import init_params, loss_and_grad, make_optimizer
from mmot.seeding import make_rng
from mmot.trainer import _batches, rot_pseudo_labels, run_ssl, train_warmup


@pytest.fixture(scope="module")
def splits():
    return make_blob_splits(3, 4, 4.0, 1.0, 6, 120, 60, 60, seed=21)


@pytest.fixture(scope="module")
def warm(splits):
    cfg = TrainConfig(warmup_epochs=30, batch_size=8)
    params, _ = train_warmup(init_params(4, 3, 8, seed=21), splits["labeled"], cfg, seed=21)
    return params


def base_cfg(**kw):
    # batch size below the labeled count so some batches hold only drawn rows
    return TrainConfig(ssl_epochs=6, batch_size=8, unlabeled_per_epoch=30, **kw)


def test_zero_alpha_matches_labeler_none_bit_for_bit(splits, warm):
    a = run_ssl(warm, splits["labeled"], splits["unlabeled"], base_cfg(alpha=0.0, labeler="rot"), seed=3,
                keep_trajectory=True)
    b = run_ssl(warm, splits["labeled"], splits["unlabeled"], base_cfg(alpha=1.0, labeler="none"), seed=3,
                keep_trajectory=True)
    for pa, pb in zip(a.trajectory, b.trajectory):
        assert pa.flat().tobytes() == pb.flat().tobytes()


def test_zero_alpha_matches_hand_rolled_supervised_loop(splits, warm):
    cfg = base_cfg(alpha=0.0)
    run = run_ssl(warm, splits["labeled"], splits["unlabeled"], cfg, seed=3)
    X, y = splits["labeled"].features, splits["labeled"].labels
    n_l, n_draw = len(X), cfg.unlabeled_per_epoch
    params = warm
    opt = make_optimizer(cfg.optimizer, params, cfg.learning_rate)
    for epoch in range(1, cfg.ssl_epochs + 1):
        for idx in _batches(n_l + n_draw, cfg.batch_size, make_rng(3, "ssl-batches", epoch)):
            li = idx[idx < n_l]
            if li.size == 0:
                continue
            _, grads = loss_and_grad(params, (X[li], y[li]), None, 0.0)
            params = opt.step(params, grads)
    assert run.params.flat().tobytes() == params.flat().tobytes()


@pytest.mark.parametrize("labeler", ["rot", "gnn-ss", "gnn-sm", "none"])
def test_metrics_are_finite_and_ordered(splits, warm, labeler):
    run = run_ssl(warm, splits["labeled"], splits["unlabeled"], base_cfg(labeler=labeler),
                  validation=splits["validation"], seed=4)
    assert [m.epoch for m in run.metrics] == list(range(1, 7))
    for m in run.metrics:
        assert np.isfinite(m.transport_cost) and np.isfinite(m.train_loss)
        assert 0.0 <= m.validation_error <= 1.0
        if labeler == "none":
            assert m.pseudo_label_accuracy is None
        else:
            assert 0.0 <= m.pseudo_label_accuracy <= 1.0
    assert 1 <= run.best_epoch <= 6


def test_run_is_deterministic(splits, warm):
    cfg = base_cfg()
    a = run_ssl(warm, splits["labeled"], splits["unlabeled"], cfg, seed=8)
    b = run_ssl(warm, splits["labeled"], splits["unlabeled"], cfg, seed=8)
    assert a.params.flat().tobytes() == b.params.flat().tobytes()
    assert [m.transport_cost for m in a.metrics] == [m.transport_cost for m in b.metrics]


def test_zero_ssl_epochs_returns_input(splits, warm):
    run = run_ssl(warm, splits["labeled"], splits["unlabeled"], dataclasses.replace(base_cfg(), ssl_epochs=0))
    assert run.metrics == []
    assert run.params is warm


def test_rot_pseudo_labels_on_separated_outputs():
    rng = np.random.default_rng(0)
    eye = np.eye(3)
    y_l = np.repeat(np.arange(3), 5)
    truth = np.repeat(np.arange(3), 20)
    P_l = np.clip(eye[y_l] + 0.02 * rng.random((15, 3)), 0, None)
    P_u = np.clip(eye[truth] + 0.02 * rng.random((60, 3)), 0, None)
    P_l /= P_l.sum(1, keepdims=True)
    P_u /= P_u.sum(1, keepdims=True)
    pseudo, coupling, n_clusters = rot_pseudo_labels(P_l, y_l, P_u, 3, 0.25, OTConfig(), seed=0)
    assert n_clusters == 3
    assert pseudo.accuracy(truth) == 1.0
    assert np.isfinite(coupling.objective)
