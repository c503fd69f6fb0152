"""Command-line interface: ``unimodal-ordinal <command> ...``."""

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import bench, data, lp, simplex, transport
from .gradcheck import gradient_check
from .methods import METHOD_NAMES, LossSpec
from .validation import parse_vector


def _print_json(obj):
    print(json.dumps(obj, indent=2, default=lambda o: o.tolist() if hasattr(o, "tolist") else str(o)))


def _cost(K, r):
    return transport.CostMatrix.power(K, r)


# ------------------------------------------------------------------ geometry

def cmd_geometry(args):
    if args.what == "fraction":
        rows = []
        for K in args.K:
            f = simplex.unimodal_fraction(K)
            row = {"K": K, "us": f.us, "ns": f.ns}
            if args.mc:
                est, se = simplex.estimate_unimodal_fraction_mc(K, args.mc, seed=args.seed)
                row.update(mc_estimate=est, mc_stderr=se)
            rows.append(row)
        for row in rows:
            print("  ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                            for k, v in row.items()))
    elif args.what == "check":
        p = parse_vector(args.p)
        if args.mode is not None:
            print(json.dumps({"unimodal_with_mode": simplex.is_unimodal_with_mode(p, args.mode)}))
        else:
            m = sorted(simplex.modes(p))
            print(json.dumps({"unimodal": bool(m), "modes": m}))
    else:
        path = simplex.connectedness_path(parse_vector(args.p), args.mode, args.steps)
        for q in path:
            print(",".join(f"{v:.6f}" for v in q))
    return 0


def cmd_project(args):
    q = parse_vector(args.q)
    proj, dist, plan = transport.project_unimodal(q, args.mode, _cost(q.size, args.r))
    _print_json({"projection": proj, "distance": dist, "plan": plan.t})
    return 0


def cmd_distance(args):
    p, q = parse_vector(args.p), parse_vector(args.q)
    value, plan = transport.wasserstein_distance(p, q, _cost(p.size, args.r))
    out = {"distance": value, "plan": plan.t}
    if args.mode is not None:
        out["distance_to_unimodal_set"] = transport.distance_to_unimodal_set(
            q, args.mode, _cost(q.size, args.r))
    _print_json(out)
    return 0


def cmd_lp(args):
    text = sys.stdin.read() if args.file == "-" else Path(args.file).read_text()
    problem = lp.read_lp_text(text)
    sol = lp.solve(problem)
    out = {"status": sol.status.value, "objective": sol.objective_value, "x": sol.x,
           "iterations": sol.iterations}
    if sol.status is lp.LpStatus.OPTIMAL:
        out["certified_optimal"] = lp.verify_solution(problem, sol)
    _print_json(out)
    return 0 if sol.status is lp.LpStatus.OPTIMAL else 1


def cmd_check_grad(args):
    names = METHOD_NAMES if args.loss == "all" else [args.loss]
    failed = False
    for name in names:
        spec = LossSpec(name, lam=args.lam, delta=args.delta)
        worst = max(gradient_check(spec, K=args.K, n=args.n, seed=args.seed + t)
                    for t in range(args.trials))
        ok = worst < args.tol
        failed |= not ok
        print(f"{name:9s} max relative error {worst:.3e}  {'ok' if ok else 'FAIL'}")
    return 1 if failed else 0


# --------------------------------------------------------------- experiments

def _config_from(args, **extra):
    base = {}
    if getattr(args, "config", None):
        base = json.loads(Path(args.config).read_text())
        base = {k.replace("-", "_"): v for k, v in base.items()}
    known = {f.name for f in fields(bench.ExperimentConfig)}
    for name in known:
        value = getattr(args, name, None)
        if value is not None:
            base[name] = value
    base.update({k: v for k, v in extra.items() if v is not None})
    return base


def _seeds(args):
    if args.seed is not None:
        return [args.seed]
    return args.seeds


def cmd_train(args):
    cfg = bench.ExperimentConfig.from_dict(_config_from(args, seeds=_seeds(args)))
    ds = data.load_dataset(cfg.dataset, cfg.data_dir)
    split = data.stratified_kfold(ds.labels, cfg.n_folds, cfg.split_seed)
    fold = args.fold - 1
    X_train, y_train, X_test, y_test = bench.fold_arrays(ds, split, fold)
    reports = []
    for seed in cfg.seeds:
        model = bench.make_model(cfg, seed, ds.n_classes).fit(X_train, y_train)
        rep = bench.evaluate(model, X_test, y_test)
        reports.append(rep)
        hist = getattr(model, "loss_history_", None)
        trend = "" if hist is None or not len(hist) else \
            f"  loss {hist[0]:.4f} -> {hist[-1]:.4f}"
        print(f"seed {seed}: acc {rep.accuracy:.2f}  mae {rep.mae:.3f}  "
              f"unimodal {rep.unimodality:.2f}{trend}")
    agg = bench.MetricsReport.aggregate(reports)
    print(f"mean: acc {agg.accuracy:.2f}±{agg.accuracy_std:.2f}  mae {agg.mae:.3f}  "
          f"unimodal {agg.unimodality:.2f}  (fold {args.fold} held out)")
    return 0


def cmd_bench(args):
    cfg = _config_from(args, seeds=_seeds(args))
    cfg.pop("dataset", None)
    cfg.pop("loss", None)
    datasets = args.datasets or list(bench.TABULAR_SUITE)
    methods = args.methods or list(bench.ALL_METHODS)
    configs = bench.suite_configs(datasets, methods, **cfg)
    rows = bench.run_benchmark(configs, args.out, log=print)
    print((Path(args.out) / "results.txt").read_text())
    return 0 if all(r.report is not None for r in rows) else 2


def cmd_sweep(args):
    cfg = bench.ExperimentConfig.from_dict(_config_from(args, seeds=_seeds(args)))
    result = bench.lambda_sweep(cfg, lambdas=args.lambdas or bench.LAMBDA_GRID)
    path = bench.write_sweep(result, args.out)
    print(path.with_suffix(".txt").read_text())
    return 0


def cmd_data(args):
    if args.action == "generate":
        if args.dataset != "balance-scale":
            print(f"{args.dataset} cannot be generated; download "
                  f"{data.get_descriptor(args.dataset).url}", file=sys.stderr)
            return 1
        print(data.write_balance_scale(args.data_dir))
        return 0
    if args.action == "list":
        for name in data.available_datasets():
            d = data.get_descriptor(name)
            present = (Path(args.data_dir) / d.filename).is_file()
            print(f"{name:14s} N={d.n_rows:<5d} K={d.n_classes:<3d} "
                  f"{'present' if present else 'missing'}  {d.url}")
        return 0
    ds = data.load_dataset(args.dataset, args.data_dir)
    split = data.stratified_kfold(ds.labels, 5, args.split_seed)
    print(f"{ds.name}: N={ds.n_samples} K={ds.n_classes} counts={ds.class_counts().tolist()}")
    print(f"sha256 {ds.sha256}")
    if args.sidecars:
        for p in data.write_sidecars(ds, split, args.sidecars):
            print(f"wrote {p}")
    return 0


# -------------------------------------------------------------------- parser

def _add_experiment_flags(p, with_dataset=True):
    if with_dataset:
        p.add_argument("--dataset", choices=data.available_datasets())
    p.add_argument("--config", help="JSON file with the same keys as the flags")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--r", type=float, help="transport cost exponent")
    p.add_argument("--tau", type=float, help="fixed Poisson temperature (default: learned)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--hidden", type=int)
    p.add_argument("--batch-size", dest="batch_size")
    p.add_argument("--seed", type=int, help="single seed (overrides --seeds)")
    p.add_argument("--seeds", type=int, nargs="+")
    p.add_argument("--split-seed", dest="split_seed", type=int)
    p.add_argument("--max-seconds", dest="max_seconds", type=float)
    p.add_argument("--data-dir", dest="data_dir")


def _batch_size(value):
    if value is None or value in ("auto", "full"):
        return value
    return int(value)


def build_parser():
    parser = argparse.ArgumentParser(prog="unimodal-ordinal",
                                     description="Unimodal ordinal classification toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("geometry", help="unimodal fractions, checks and paths")
    g.add_argument("what", choices=("fraction", "check", "path"))
    g.add_argument("--K", type=int, nargs="+", default=[3, 4, 5, 6])
    g.add_argument("--mc", type=int, default=0, help="also run a Monte-Carlo estimate")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--p", help="distribution, e.g. 0.2,0.5,0.3 or 2/6,3/6,0,1/6")
    g.add_argument("--mode", type=int)
    g.add_argument("--steps", type=int, default=10)
    g.set_defaults(func=cmd_geometry)

    p = sub.add_parser("project", help="transport projection onto the unimodal set")
    p.add_argument("--q", required=True)
    p.add_argument("--mode", type=int, required=True)
    p.add_argument("--r", type=float, default=1.0)
    p.set_defaults(func=cmd_project)

    d = sub.add_parser("distance", help="Wasserstein distance between two distributions")
    d.add_argument("--p", required=True)
    d.add_argument("--q", required=True)
    d.add_argument("--mode", type=int, help="also report q's distance to the mode set")
    d.add_argument("--r", type=float, default=1.0)
    d.set_defaults(func=cmd_distance)

    l_ = sub.add_parser("lp", help="solve a linear program")
    l_.add_argument("action", choices=("solve",))
    l_.add_argument("--file", required=True, help="LP text file, or - for stdin\n" + lp.LP_TEXT_FORMAT)
    l_.set_defaults(func=cmd_lp)

    c = sub.add_parser("check-grad", help="finite-difference gradient check")
    c.add_argument("--loss", default="all", choices=("all",) + METHOD_NAMES)
    c.add_argument("--K", type=int, default=5)
    c.add_argument("--n", type=int, default=4)
    c.add_argument("--trials", type=int, default=50)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--lambda", dest="lam", type=float, default=1.0)
    c.add_argument("--delta", type=float, default=0.05)
    c.add_argument("--tol", type=float, default=1e-4)
    c.set_defaults(func=cmd_check_grad)

    t = sub.add_parser("train", help="train and evaluate one method on one fold")
    _add_experiment_flags(t)
    t.add_argument("--loss", choices=bench.ALL_METHODS)
    t.add_argument("--fold", type=int, default=2, help="1-based held-out fold")
    t.set_defaults(func=cmd_train)

    b = sub.add_parser("bench", help="run the benchmark suite")
    b.add_argument("--suite", choices=("tabular",), default="tabular")
    b.add_argument("--out", required=True)
    b.add_argument("--datasets", nargs="+", choices=data.available_datasets())
    b.add_argument("--methods", nargs="+", choices=bench.ALL_METHODS)
    _add_experiment_flags(b, with_dataset=False)
    b.set_defaults(func=cmd_bench)

    s = sub.add_parser("sweep", help="lambda sweep for a penalised loss")
    _add_experiment_flags(s)
    s.add_argument("--loss", default="wu-kldiv", choices=bench.PENALISED)
    s.add_argument("--lambdas", type=float, nargs="+")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    dt = sub.add_parser("data", help="list, inspect or generate datasets")
    dt.add_argument("action", choices=("list", "info", "generate"))
    dt.add_argument("dataset", nargs="?", default="balance-scale")
    dt.add_argument("--data-dir", default="data")
    dt.add_argument("--split-seed", type=int, default=0)
    dt.add_argument("--sidecars", help="directory for bin-edge and fold sidecar files")
    dt.set_defaults(func=cmd_data)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if hasattr(args, "batch_size"):
        args.batch_size = _batch_size(args.batch_size)
    np.set_printoptions(precision=6, suppress=True)
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
