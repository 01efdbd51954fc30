"""Compare OT pseudo-labeling with the supervised and nearest-neighbor baselines.

Overlapping blobs, a shared warm-up per seed, then one SSL run per labeler.
Prints the per-labeler mean test accuracy and how often the per-epoch
coupling objective ended below where it started.

    python3 scripts/ssl_benefit.py --repeats 20
    python3 scripts/ssl_benefit.py --repeats 5 --set train.lam=0.1 --set model.hidden_dim=0
"""

from __future__ import annotations

import argparse
import json
import time

import numpy as np

from mmot.config import config_from_dict, config_to_dict
from mmot.experiments import DESK_CONFIG, run_repeats


def parse_override(text: str):
    key, _, raw = text.partition("=")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip().split("."), value


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=20)
    ap.add_argument("--first-seed", type=int, default=0)
    ap.add_argument("--labelers", default="rot,none,gnn-ss,gnn-sm")
    ap.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
    args = ap.parse_args()

    doc = json.loads(json.dumps(DESK_CONFIG))
    for item in args.set:
        path, value = parse_override(item)
        node = doc
        for part in path[:-1]:
            node = node.setdefault(part, {})
        node[path[-1]] = value
    cfg = config_from_dict(doc)
    print(json.dumps({k: v for k, v in config_to_dict(cfg).items() if k != "sweep"}))

    t0 = time.perf_counter()
    labelers = tuple(args.labelers.split(","))
    table = run_repeats(cfg, labelers, args.repeats, args.first_seed)
    base = np.array([r.test_accuracy for r in table["none"]]) if "none" in table else None
    for name, rows in table.items():
        acc = np.array([r.test_accuracy for r in rows])
        down = np.mean([r.cost_decreased for r in rows])
        pl = [np.mean(r.pseudo_label_accuracy) for r in rows if not np.isnan(r.pseudo_label_accuracy).all()]
        pl = np.mean(pl) if pl else float("nan")
        gain = f" gain {100 * np.mean(acc - base):+.2f}pp" if base is not None else ""
        print(f"{name:7s} acc {acc.mean():.4f} +/- {acc.std():.4f}{gain}  cost down {down:.2f}  pl-acc {pl:.3f}")
    print(f"{time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
