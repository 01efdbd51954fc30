"""Hyperparameter and validation-size sweeps.

Every (lambda, alpha) grid point trains once from a shared warm-up.  The
validation set only chooses which epoch's parameters are kept, so evaluating
each per-epoch snapshot on every validation subsample gives exactly the
result of rerunning the pipeline once per subsample, at the cost of one run.
"""

from __future__ import annotations

import dataclasses
import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig, SweepConfig
from .data import Dataset
from .errors import ConfigError, IoError
from .experiments import make_splits
from .model import init_params, predict
from .seeding import make_rng
from .trainer import run_ssl, train_warmup


@dataclass(frozen=True)
class SweepRow:
    lam: float
    alpha: float
    validation_size: int
    repeats: int
    val_error_mean: float
    val_error_std: float
    test_error_mean: float
    test_error_std: float
    best_epochs: tuple[int, ...]


@dataclass
class SweepReport:
    rows: list[SweepRow]
    subsamples: dict[int, list[np.ndarray]]
    seed: int

    def row(self, lam: float, alpha: float, size: int) -> SweepRow:
        for r in self.rows:
            if r.lam == lam and r.alpha == alpha and r.validation_size == size:
                return r
        raise KeyError((lam, alpha, size))

    def to_json(self) -> str:
        return json.dumps({"seed": self.seed, "rows": [dataclasses.asdict(r) for r in self.rows]}, indent=2)

    def to_csv(self) -> str:
        names = [f.name for f in dataclasses.fields(SweepRow)]
        lines = [",".join(names)]
        for r in self.rows:
            vals = dataclasses.asdict(r)
            vals["best_epochs"] = " ".join(map(str, r.best_epochs))
            lines.append(",".join(repr(vals[n]) if isinstance(vals[n], float) else str(vals[n]) for n in names))
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        path = Path(path)
        text = self.to_csv() if path.suffix == ".csv" else self.to_json()
        try:
            path.write_text(text)
        except OSError as exc:
            raise IoError(f"cannot write sweep report to {path}: {exc}") from exc


def disjoint_subsamples(n_pool: int, size: int, repeats: int, seed: int) -> list[np.ndarray]:
    """``repeats`` pairwise disjoint index sets of ``size`` drawn from ``range(n_pool)``."""
    if size * repeats > n_pool:
        raise ConfigError(
            f"{repeats} disjoint validation subsets of size {size} need {size * repeats} rows; pool has {n_pool}"
        )
    perm = make_rng(seed, "validation-subsample", size).permutation(n_pool)
    return [np.sort(perm[r * size:(r + 1) * size]) for r in range(repeats)]


def _select(errors: np.ndarray) -> int:
    # first epoch reaching the lowest error, matching the trainer's checkpoint rule
    return int(np.argmin(errors))


def sweep_hyperparams(
    base_config: RunConfig,
    lambda_grid=None,
    alpha_grid=None,
    validation_sizes=None,
    repeats: int | None = None,
    *,
    splits: dict[str, Dataset] | None = None,
) -> SweepReport:
    """Mean and std of validation (and test) error over disjoint validation subsamples.

    Grid arguments left as ``None`` come from ``base_config.sweep``.  The
    cartesian product of the two grids is swept; pass a one-element grid to
    hold a parameter fixed.
    """
    sw = base_config.sweep
    sw = SweepConfig(
        lambda_grid=list(sw.lambda_grid if lambda_grid is None else lambda_grid),
        alpha_grid=list(sw.alpha_grid if alpha_grid is None else alpha_grid),
        validation_sizes=list(sw.validation_sizes if validation_sizes is None else validation_sizes),
        repeats=sw.repeats if repeats is None else repeats,
    )
    seed = base_config.seed
    splits = splits or make_splits(base_config, seed)
    labeled, unlabeled, pool, test = splits["labeled"], splits["unlabeled"], splits["validation"], splits["test"]
    subsamples = {s: disjoint_subsamples(len(pool), s, sw.repeats, seed) for s in sw.validation_sizes}

    params = init_params(labeled.dim, base_config.data.n_classes, base_config.model.hidden_dim, seed)
    params, _ = train_warmup(params, labeled, base_config.train, seed)

    rows = []
    for lam, alpha in itertools.product(sw.lambda_grid, sw.alpha_grid):
        tcfg = dataclasses.replace(base_config.train, lam=float(lam), alpha=float(alpha))
        run = run_ssl(params, labeled, unlabeled, tcfg, base_config.ot, seed=seed, keep_trajectory=True)
        # (epochs, pool) correctness of each snapshot on the validation pool
        wrong = np.stack([predict(p, pool.features) != pool.labels for p in run.trajectory])
        test_err = np.array([np.mean(predict(p, test.features) != test.labels) for p in run.trajectory])
        for size in sw.validation_sizes:
            val, tst, best = [], [], []
            for idx in subsamples[size]:
                errs = wrong[:, idx].mean(axis=1)
                e = _select(errs)
                val.append(errs[e])
                tst.append(test_err[e])
                best.append(e + 1)
            rows.append(
                SweepRow(
                    lam=float(lam),
                    alpha=float(alpha),
                    validation_size=int(size),
                    repeats=sw.repeats,
                    val_error_mean=float(np.mean(val)),
                    val_error_std=float(np.std(val)),
                    test_error_mean=float(np.mean(tst)),
                    test_error_std=float(np.std(tst)),
                    best_epochs=tuple(best),
                )
            )
    return SweepReport(rows, subsamples, seed)
