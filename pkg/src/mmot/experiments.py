"""End-to-end runs shared by the CLI, the scripts and the acceptance tests.

``run_once`` builds the blob splits for one seed, warms up a classifier on
the labeled set, and then continues with each requested labeler from the
same warm-up checkpoint.  Continuing from a shared checkpoint is what makes
the labelers comparable: they differ only in the pseudo-labels.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .data import Dataset, load_dataset, make_blob_splits
from .errors import ConfigError
from .model import init_params
from .trainer import SSLRun, accuracy, run_ssl, train_warmup


# Overlapping-blob setting used by the SSL benefit runs: 5 classes whose
# centers sit 3 spreads apart, 5 labels per class and 1000 unlabeled points.
DESK_CONFIG = {
    "seed": 0,
    "data": {"n_classes": 5, "dim": 5, "separation": 3.0, "spread": 1.0,
             "labeled_per_class": 5, "unlabeled": 1000, "validation": 500, "test": 1000},
    "model": {"hidden_dim": 32},
    "ot": {"cluster_inner_iters": 5},
    "train": {"warmup_epochs": 100, "ssl_epochs": 200, "lam": 0.25, "alpha": 1.0,
              "unlabeled_per_epoch": 100, "soft_labels": True},
}

_FILE_SPLITS = {
    "labeled": "train-labeled",
    "unlabeled": "train-unlabeled",
    "validation": "validation",
    "test": "test",
}


@dataclass
class LabelerOutcome:
    labeler: str
    alpha: float
    test_accuracy: float
    best_epoch: int
    transport_costs: np.ndarray
    pseudo_label_accuracy: np.ndarray
    seconds: float

    @property
    def cost_decreased(self) -> bool:
        return bool(self.transport_costs[-1] < self.transport_costs[0])


def make_splits(cfg: RunConfig, seed: int) -> dict[str, Dataset]:
    """Generated blobs, or the four files named in the data section."""
    d = cfg.data
    if d.source == "files":
        out = {}
        for name, split in _FILE_SPLITS.items():
            path = getattr(d, f"{name}_path")
            if path is None:
                if name == "validation":
                    continue
                raise ConfigError(f"data.{name}_path is required when data.source is 'files'")
            out[name] = load_dataset(path, d.format, split)
        return out
    if d.source != "blobs":
        raise ConfigError(f"unknown data source {d.source!r}")
    return make_blob_splits(
        d.n_classes, d.dim, d.separation, d.spread, d.labeled_per_class, d.unlabeled, d.validation, d.test, seed
    )


def run_once(cfg: RunConfig, labelers=("rot", "none"), seed: int | None = None, splits=None) -> dict[str, LabelerOutcome]:
    """Warm up once, then run SSL per labeler; ``"none"`` trains with ``alpha = 0``."""
    seed = cfg.seed if seed is None else seed
    splits = splits or make_splits(cfg, seed)
    labeled, unlabeled = splits["labeled"], splits["unlabeled"]
    validation, test = splits.get("validation"), splits["test"]

    params = init_params(labeled.dim, cfg.data.n_classes, cfg.model.hidden_dim, seed)
    params, _ = train_warmup(params, labeled, cfg.train, seed)

    out = {}
    for name in labelers:
        alpha = 0.0 if name == "none" else cfg.train.alpha
        tcfg = dataclasses.replace(cfg.train, labeler=name, alpha=alpha)
        t0 = time.perf_counter()
        run: SSLRun = run_ssl(params, labeled, unlabeled, tcfg, cfg.ot, validation=validation, seed=seed)
        out[name] = LabelerOutcome(
            labeler=name,
            alpha=alpha,
            test_accuracy=accuracy(run.best_params, test),
            best_epoch=run.best_epoch,
            transport_costs=np.array([m.transport_cost for m in run.metrics]),
            pseudo_label_accuracy=np.array(
                [np.nan if m.pseudo_label_accuracy is None else m.pseudo_label_accuracy for m in run.metrics]
            ),
            seconds=time.perf_counter() - t0,
        )
    return out


def run_repeats(cfg: RunConfig, labelers=("rot", "none"), repeats: int = 20, first_seed: int | None = None):
    """``run_once`` over consecutive seeds; returns ``{labeler: [outcome, ...]}``."""
    first = cfg.seed if first_seed is None else first_seed
    table: dict[str, list[LabelerOutcome]] = {name: [] for name in labelers}
    for r in range(repeats):
        for name, res in run_once(cfg, labelers, seed=first + r).items():
            table[name].append(res)
    return table
