"""Command-line entry point: ``mmot <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.  Summaries go to stdout as JSON; logs go to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .barycenter import barycenter_cluster
from .config import RunConfig, config_from_dict, config_to_dict, load_config
from .data import Dataset, load_dataset, load_measure_csv, save_dataset
from .errors import ConfigError, IoError, MMOTError
from .experiments import make_splits
from .hierarchical import gnn_sample_to_measure, gnn_sample_to_sample
from .measures import euclidean_cost_matrix, group_by_label, make_measure
from .metrics import emit_metrics
from .model import init_params
from .solvers import SinkhornConfig, solve_exact, solve_sinkhorn
from .sweep import sweep_hyperparams
from .trainer import accuracy, rot_pseudo_labels, run_ssl, train_warmup

log = logging.getLogger("mmot")


def _print(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    doc = config_to_dict(cfg)
    if args.seed is not None:
        doc["seed"] = args.seed
    for item in args.set or []:
        key, _, raw = item.partition("=")
        parts = key.strip().split(".")
        if len(parts) != 2 or not raw:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        doc.setdefault(parts[0], {})[parts[1]] = value
    cfg = config_from_dict(doc)
    if args.deterministic:
        cfg.ot.workers = 1
    elif args.workers:
        cfg.ot.workers = args.workers
    cfg.train.deterministic = args.deterministic
    return cfg


def _write_pseudo(path, pseudo) -> None:
    rows = ["label," + ",".join(f"p{j}" for j in range(pseudo.soft.shape[1]))]
    for h, s in zip(pseudo.hard, pseudo.soft):
        rows.append(f"{int(h)}," + ",".join(repr(float(v)) for v in s))
    try:
        Path(path).write_text("\n".join(rows) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def cmd_gen_data(args) -> None:
    cfg = _config(args)
    splits = make_splits(dataclasses.replace(cfg, data=dataclasses.replace(cfg.data, source="blobs")), cfg.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ext = "csv" if args.format == "csv" else "bin"
    written = {}
    for name, ds in splits.items():
        path = out / f"{name}.{ext}"
        save_dataset(ds, path, args.format)
        written[name] = {"path": str(path), "rows": len(ds)}
    _print(written)


def cmd_cluster(args) -> None:
    ds = load_dataset(args.input, args.format)
    res = barycenter_cluster(ds.features, args.k, seed=args.seed or 0, inner_iters=args.inner_iters)
    if args.out:
        save_dataset(Dataset(ds.features, res.labels, "train-labeled"), args.out, args.format)
    _print({"k": res.k, "objective": res.objective, "n_iter": res.n_iter,
            "counts": res.counts.tolist(), "centroids": res.centroids.tolist()})


def cmd_ot(args) -> None:
    xs, ws = load_measure_csv(args.source)
    xt, wt = load_measure_csv(args.target)
    P, Q = make_measure(xs, ws), make_measure(xt, wt)
    C = euclidean_cost_matrix(P.support, Q.support, args.order_k)
    if args.reg > 0:
        plan = solve_sinkhorn(P.weights, Q.weights, C, SinkhornConfig(reg_strength=args.reg, max_iter=args.max_iter,
                                                                      tolerance=args.tolerance,
                                                                      log_domain=args.log_domain))
    else:
        plan, _ = solve_exact(P.weights, Q.weights, C)
    if args.plan_out:
        try:
            np.savetxt(args.plan_out, plan.matrix, delimiter=",", fmt="%.17g")
        except OSError as exc:
            raise IoError(f"cannot write {args.plan_out}: {exc}") from exc
    _print({"cost": plan.cost, "converged": plan.converged, "n_iter": plan.n_iter,
            "residual": plan.residual, "stop_reason": plan.stop_reason})


def cmd_pseudo_label(args) -> None:
    cfg = _config(args)
    lab = load_dataset(args.labeled, args.format, "train-labeled")
    unl = load_dataset(args.unlabeled, args.format, "train-unlabeled")
    c = args.classes or int(lab.labels.max()) + 1
    pseudo, coupling, n_clusters = rot_pseudo_labels(
        lab.features, lab.labels, unl.features, c, cfg.train.lam, cfg.ot, cfg.seed, soft=cfg.train.soft_labels
    )
    if args.out:
        _write_pseudo(args.out, pseudo)
    summary = {"objective": coupling.objective, "n_clusters": n_clusters,
               "excluded": int((~pseudo.mask).sum()), "plan": coupling.plan.matrix.tolist()}
    if unl.labels is not None:
        summary["accuracy"] = pseudo.accuracy(unl.labels)
    _print(summary)


def cmd_baseline(args) -> None:
    lab = load_dataset(args.labeled, args.format, "train-labeled")
    unl = load_dataset(args.unlabeled, args.format, "train-unlabeled")
    c = args.classes or int(lab.labels.max()) + 1
    if args.method == "gnn-ss":
        pseudo = gnn_sample_to_sample(unl.features, lab.features, lab.labels, c)
    else:
        pseudo = gnn_sample_to_measure(unl.features, group_by_label(lab.features, lab.labels, c), args.order_k)
    if args.out:
        _write_pseudo(args.out, pseudo)
    summary = {"method": args.method, "n": int(pseudo.hard.size)}
    if unl.labels is not None:
        summary["accuracy"] = pseudo.accuracy(unl.labels)
    _print(summary)


def cmd_train(args) -> None:
    cfg = _config(args)
    splits = make_splits(cfg, cfg.seed)
    labeled = splits["labeled"]
    params = init_params(labeled.dim, cfg.data.n_classes, cfg.model.hidden_dim, cfg.seed)
    params, warm = train_warmup(params, labeled, cfg.train, cfg.seed)
    run = run_ssl(params, labeled, splits["unlabeled"], cfg.train, cfg.ot,
                  validation=splits.get("validation"), seed=cfg.seed)
    if args.metrics_out:
        emit_metrics(run.metrics, args.metrics_out, args.metrics_format)
    _print({
        "labeler": cfg.train.labeler,
        "warmup_final_loss": warm[-1] if warm else None,
        "best_epoch": run.best_epoch,
        "test_accuracy": accuracy(run.best_params, splits["test"]),
        "final_test_accuracy": accuracy(run.params, splits["test"]),
        "final_transport_cost": run.metrics[-1].transport_cost if run.metrics else None,
    })


def cmd_sweep(args) -> None:
    cfg = _config(args)
    report = sweep_hyperparams(cfg)
    if args.out:
        report.write(args.out)
    _print(json.loads(report.to_json()))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mmot", description="OT pseudo-labeling between measures of measures")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    ap.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=True,
                    help="single-threaded distance matrices (default on)")
    ap.add_argument("--workers", type=int, default=0, help="threads for distance matrices with --no-deterministic")
    sub = ap.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", help="JSON or key=value config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override one config entry")
        return p

    def with_format(p):
        p.add_argument("--format", choices=["csv", "flat-binary"], default=None,
                       help="dataset format (inferred from the extension when omitted)")
        return p

    p = with_config(sub.add_parser("gen-data", help="write blob splits to a directory"))
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["csv", "flat-binary"], default="csv")
    p.set_defaults(func=cmd_gen_data)

    p = with_format(sub.add_parser("cluster", help="barycenter K-means on one dataset"))
    p.add_argument("input")
    p.add_argument("-k", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inner-iters", type=int, default=50)
    p.add_argument("--out", help="write the data with cluster ids as labels")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("ot", help="transport between two measure files")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("--reg", type=float, default=0.0, help="entropic strength; 0 solves exactly")
    p.add_argument("--order-k", type=int, default=2)
    p.add_argument("--max-iter", type=int, default=10_000)
    p.add_argument("--tolerance", type=float, default=1e-8)
    p.add_argument("--log-domain", action=argparse.BooleanOptionalAction, default=True,
                   help="stabilized iterations (default); --no-log-domain uses plain scaling")
    p.add_argument("--plan-out")
    p.set_defaults(func=cmd_ot)

    p = with_format(with_config(sub.add_parser("pseudo-label", help="one cluster-couple-label pass")))
    p.add_argument("labeled")
    p.add_argument("unlabeled")
    p.add_argument("--classes", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_pseudo_label)

    p = with_format(sub.add_parser("baseline", help="nearest-neighbor pseudo-labels"))
    p.add_argument("labeled")
    p.add_argument("unlabeled")
    p.add_argument("--method", choices=["gnn-ss", "gnn-sm"], default="gnn-ss")
    p.add_argument("--classes", type=int)
    p.add_argument("--order-k", type=int, default=2)
    p.add_argument("--out")
    p.set_defaults(func=cmd_baseline)

    p = with_config(sub.add_parser("train", help="warm-up then OT pseudo-label training"))
    p.add_argument("--metrics-out")
    p.add_argument("--metrics-format", choices=["csv", "jsonl"], default="csv")
    p.set_defaults(func=cmd_train)

    p = with_config(sub.add_parser("sweep", help="lambda/alpha grid with validation-size study"))
    p.add_argument("--out", help="report path (.csv or .json)")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except MMOTError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
