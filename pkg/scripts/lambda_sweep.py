"""Validation-set-size study over the lambda grid.

For each seed, trains once per lambda and scores every epoch's parameters on
disjoint validation subsets of each size, then prints the mean and spread of
the selected validation error per (lambda, size).

    python3 scripts/lambda_sweep.py --seeds 10 --out sweep_reports/
"""

from __future__ import annotations

import argparse
import collections
from pathlib import Path

import numpy as np

from mmot.config import DEFAULT_GRID, config_from_dict
from mmot.experiments import DESK_CONFIG
from mmot.sweep import sweep_hyperparams


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--sizes", default="50,100,500")
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--ssl-epochs", type=int, default=30)
    ap.add_argument("--alpha", type=float, default=1.0)
    ap.add_argument("--out", help="directory for one CSV report per seed")
    args = ap.parse_args()

    sizes = [int(s) for s in args.sizes.split(",")]
    doc = dict(DESK_CONFIG)
    doc["data"] = dict(DESK_CONFIG["data"], validation=max(sizes) * args.repeats)
    doc["train"] = dict(DESK_CONFIG.get("train", {}), ssl_epochs=args.ssl_epochs)
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)

    table = collections.defaultdict(list)
    for seed in range(args.seeds):
        report = sweep_hyperparams(config_from_dict(dict(doc, seed=seed)), DEFAULT_GRID, [args.alpha], sizes, args.repeats)
        if out:
            report.write(out / f"seed{seed}.csv")
        for r in report.rows:
            table[r.lam, r.validation_size].append((r.val_error_mean, r.val_error_std, r.test_error_mean))

    print(f"{'lambda':>6} {'size':>5} {'val err':>8} {'val std':>8} {'test err':>8}")
    for (lam, size), vals in sorted(table.items()):
        v = np.array(vals)
        print(f"{lam:6.2f} {size:5d} {v[:, 0].mean():8.4f} {v[:, 1].mean():8.4f} {v[:, 2].mean():8.4f}")


if __name__ == "__main__":
    main()
