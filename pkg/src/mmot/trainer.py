"""Warm-up and the OT pseudo-labeling training loop.

Each SSL epoch:

1. draw a fresh subset of the unlabeled pool (same size as the labeled set
   unless configured otherwise);
2. push labeled and drawn unlabeled points through the model and keep the
   softmax outputs;
3. cluster the unlabeled outputs into ``c`` groups with the barycenter
   scheme, group labeled outputs by class;
4. build the cluster-to-class cost matrix, solve the regularized coupling,
   and label every drawn point with its cluster's argmax class;
5. one pass of minibatch updates on ``CE(labeled) + alpha * CE(pseudo)``.

Randomness comes from named streams (see ``seeding``): batch order never
depends on what the pseudo-labeler consumed.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .barycenter import EmptyClusterWarning, barycenter_cluster, measures_from_clusters
from .config import OTConfig, TrainConfig
from .data import Dataset
from .hierarchical import (
    MeasureCoupling,
    PseudoLabelSet,
    assign_pseudo_labels,
    couple_measures,
    gnn_sample_to_measure,
    gnn_sample_to_sample,
)
from .measures import group_by_label
from .metrics import EpochMetrics
from .model import ClassifierParams, forward, loss_and_grad, make_optimizer, predict
from .seeding import make_rng
from .solvers import SinkhornConfig

log = logging.getLogger(__name__)


@dataclass
class SSLRun:
    params: ClassifierParams
    metrics: list[EpochMetrics]
    best_params: ClassifierParams
    best_epoch: int
    # parameter snapshots after every SSL epoch, kept only when requested
    trajectory: list[ClassifierParams] = field(default_factory=list)


def error_rate(params: ClassifierParams, ds: Dataset | None) -> float | None:
    if ds is None or len(ds) == 0:
        return None
    return float(np.mean(predict(params, ds.features) != ds.labels))


def accuracy(params: ClassifierParams, ds: Dataset) -> float:
    return float(np.mean(predict(params, ds.features) == ds.labels))


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def train_warmup(params: ClassifierParams, labeled: Dataset, cfg: TrainConfig, seed: int = 0):
    """Supervised minibatch training on the labeled set only.

    Returns the updated parameters and the per-epoch mean training loss.
    """
    if len(labeled) == 0:
        raise ValueError("labeled data is empty")
    opt = make_optimizer(cfg.optimizer, params, cfg.learning_rate)
    X, y = labeled.features, labeled.labels
    trace = []
    for epoch in range(1, cfg.warmup_epochs + 1):
        rng = make_rng(seed, "warmup-batches", epoch)
        losses = []
        for idx in _batches(len(X), cfg.batch_size, rng):
            loss, grads = loss_and_grad(params, (X[idx], y[idx]), None, 0.0)
            params = opt.step(params, grads)
            losses.append(loss)
        trace.append(float(np.mean(losses)))
    return params, trace


def _sinkhorn_cfg(lam: float, ot: OTConfig) -> SinkhornConfig | None:
    if lam <= 0:
        return None
    return SinkhornConfig(reg_strength=lam, max_iter=ot.max_iter, tolerance=ot.tolerance, log_domain=ot.log_domain)


def rot_pseudo_labels(
    P_l: np.ndarray,
    y_l: np.ndarray,
    P_u: np.ndarray,
    n_classes: int,
    lam: float,
    ot: OTConfig,
    seed: int,
    soft: bool = False,
) -> tuple[PseudoLabelSet, MeasureCoupling, int]:
    """Cluster, couple and label; returns labels, the coupling and the cluster count."""
    k = min(n_classes, P_u.shape[0])
    clusters = barycenter_cluster(
        P_u, k, seed=seed, inner_iters=ot.cluster_inner_iters, step_theta=ot.step_theta, step_t0=ot.step_t0
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyClusterWarning)
        Mu = measures_from_clusters(P_u, clusters)
    Ml = group_by_label(P_l, y_l, n_classes)
    coupling = couple_measures(
        Mu, Ml, lam, _sinkhorn_cfg(lam, ot), k=ot.order_k, exact_inner=ot.exact_inner, rooted=ot.rooted_costs,
        workers=ot.workers,
    )
    pseudo = assign_pseudo_labels(coupling, clusters.labels, soft_mode=soft)
    return pseudo, coupling, len(Mu)


def run_ssl(
    params: ClassifierParams,
    labeled: Dataset,
    unlabeled: Dataset,
    cfg: TrainConfig,
    ot: OTConfig | None = None,
    *,
    validation: Dataset | None = None,
    seed: int = 0,
    keep_trajectory: bool = False,
) -> SSLRun:
    ot = ot or OTConfig()
    n_classes = params.n_classes
    X_l, y_l = labeled.features, labeled.labels
    pool = unlabeled.features
    n_draw = min(cfg.unlabeled_per_epoch or len(labeled), len(pool))
    opt = make_optimizer(cfg.optimizer, params, cfg.learning_rate)

    metrics: list[EpochMetrics] = []
    trajectory: list[ClassifierParams] = []
    best_params, best_epoch, best_err = params, 0, np.inf

    for epoch in range(1, cfg.ssl_epochs + 1):
        drawn = np.sort(make_rng(seed, "unlabeled-draw", epoch).choice(len(pool), size=n_draw, replace=False))
        X_u = pool[drawn]
        P_l = forward(params, X_l)
        P_u = forward(params, X_u)

        # the cluster/couple pass also feeds the transport-cost metric for every labeler
        pseudo, coupling, n_clusters = rot_pseudo_labels(
            P_l, y_l, P_u, n_classes, cfg.lam, ot, seed=int(make_rng(seed, "cluster", epoch).integers(2**31)),
            soft=cfg.soft_labels,
        )
        if cfg.labeler == "gnn-ss":
            pseudo = gnn_sample_to_sample(P_u, P_l, y_l, n_classes)
        elif cfg.labeler == "gnn-sm":
            pseudo = gnn_sample_to_measure(P_u, group_by_label(P_l, y_l, n_classes), ot.order_k)
        elif cfg.labeler == "none":
            pseudo = None

        truth = None if unlabeled.labels is None else unlabeled.labels[drawn]
        pl_acc = pseudo.accuracy(truth) if pseudo is not None else None
        n_excluded = int((~pseudo.mask).sum()) if pseudo is not None else 0

        # one pass over labeled rows [0, n_l) and drawn rows [n_l, n_l + n_draw)
        n_l = len(X_l)
        losses = []
        for idx in _batches(n_l + n_draw, cfg.batch_size, make_rng(seed, "ssl-batches", epoch)):
            li = idx[idx < n_l]
            ui = idx[idx >= n_l] - n_l
            lb = (X_l[li], y_l[li]) if li.size else None
            pb = None
            if pseudo is not None:
                ui = ui[pseudo.mask[ui]]
                if ui.size:
                    pb = (X_u[ui], pseudo.soft[ui])
            # a zero-weight pseudo term alone must not move the optimizer state
            if lb is None and (pb is None or cfg.alpha == 0):
                continue
            loss, grads = loss_and_grad(params, lb, pb, cfg.alpha)
            params = opt.step(params, grads)
            losses.append(loss)

        val_err = error_rate(params, validation)
        metrics.append(
            EpochMetrics(
                epoch=epoch,
                transport_cost=coupling.objective,
                train_loss=float(np.mean(losses)) if losses else 0.0,
                pseudo_label_accuracy=pl_acc,
                validation_error=val_err,
                n_clusters=n_clusters,
                n_excluded=n_excluded,
            )
        )
        if val_err is not None and val_err < best_err:
            best_params, best_epoch, best_err = params, epoch, val_err
        if keep_trajectory:
            trajectory.append(params)
        log.debug("epoch %d cost %.5f loss %.4f val %s", epoch, coupling.objective, metrics[-1].train_loss, val_err)

    if validation is None:
        best_params, best_epoch = params, cfg.ssl_epochs
    return SSLRun(params, metrics, best_params, best_epoch, trajectory)
