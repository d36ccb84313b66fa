"""Command line entry point: ``sparse-relu <subcommand> ...``.

Variable indices on the command line and in JSON/CSV output are 1-based.
The resolved configuration of every run is printed to stderr as one JSON
line prefixed with ``# config:``.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import baselines, harness, synthgen
from .data_io import TabularSchema, encode_and_standardize, load_csv
from .identify import match_networks
from .net import DeepNet, canonicalize, net_from_dict, save_net
from .select import ImportanceVector, importance, roc_curve, select
from .train import (Grid, TrainConfig, fit, grid_search, load_train_config, mse,
                    validation_split)


def _print_config(d: dict) -> None:
    print("# config: " + json.dumps(d, sort_keys=True, default=str), file=sys.stderr)


def _parse_kv(tokens):
    out = {}
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if not sep:
            raise ValueError(f"expected key=value, got {tok!r}")
        out[key] = value
    return out


_GEN_ALIASES = {"r": "r_star", "n": "n_train", "normalize": "normalize_columns"}


def _gen_spec(kind: str, tokens, seed: int):
    raw = {_GEN_ALIASES.get(k, k): v for k, v in _parse_kv(tokens).items()}
    fields = {"planted": synthgen.PlantedSpec, "linear": synthgen.LinearSpec,
              "friedman": synthgen.FriedmanSpec}[kind]
    defaults = fields()
    kw = {}
    for key, value in raw.items():
        if not hasattr(defaults, key) or key == "seed":
            raise ValueError(f"unknown {kind} generator key {key!r}")
        current = getattr(defaults, key)
        if isinstance(current, bool):
            kw[key] = value.lower() in ("1", "true", "yes")
        else:
            kw[key] = type(current)(value)
    if "n_train" in kw and "n_test" not in kw:
        kw["n_test"] = kw["n_train"]
    return fields(seed=seed, **kw)


def cmd_gen(args) -> int:
    kinds = [k for k in ("planted", "linear", "friedman") if getattr(args, k) is not None]
    if len(kinds) != 1:
        raise ValueError("choose exactly one of --planted, --linear, --friedman")
    kind = kinds[0]
    spec = _gen_spec(kind, getattr(args, kind), args.seed)
    _print_config({"generator": kind, **spec.__dict__, "out": args.out})
    train, test = {"planted": synthgen.gen_planted, "linear": synthgen.gen_linear,
                   "friedman": synthgen.gen_friedman}[kind](spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    synthgen.write_csv(train, out / "train.csv")
    synthgen.write_csv(test, out / "test.csv")
    synthgen.write_sidecar(train, out / "truth.json", generator=kind, spec=spec.__dict__)
    print(f"wrote {out / 'train.csv'} ({train.n} rows), {out / 'test.csv'} ({test.n} rows), "
          f"{out / 'truth.json'}")
    return 0


def _load_xy(path, target, categorical, standardize):
    schema = TabularSchema(target, tuple(categorical or ()))
    table = load_csv(path, schema)
    if standardize or categorical:
        ds, _ = encode_and_standardize(table)
        return ds.X, ds.y, list(ds.feature_names)
    cols = table.feature_columns()
    X = np.column_stack([table.data[c] for c in cols]) if cols else np.zeros((table.n_rows, 0))
    return X, table.data[target], cols


def cmd_fit(args) -> int:
    X, y, names = _load_xy(args.train, args.target, args.categorical, args.standardize)
    if args.method in ("nn2", "nn3"):
        base, grid = (load_train_config(args.config) if args.config else (TrainConfig(), Grid()))
        overrides = {k: v for k, v in (("lam", args.lam), ("width", args.width),
                                       ("learning_rate", args.lr), ("epochs", args.epochs),
                                       ("batch_size", args.batch_size), ("seed", args.seed)) if v is not None}
        hidden = (args.hidden,) if args.method == "nn3" else ()
        config = TrainConfig(**{**base.to_dict(), **overrides, "hidden_widths": hidden})
        if args.full_grid:
            grid = Grid.full()
        _print_config({"method": args.method, "train": str(args.train), "tune": args.tune,
                       "config": config.to_dict(), "grid": grid.to_dict() if args.tune else None,
                       "val_fraction": args.val_fraction})
        if args.tune:
            config, _ = grid_search(X, y, grid, args.val_fraction, config.seed, config)
        result = fit(X, y, config)
        payload = result.to_dict()
        payload["train_mse"] = mse(result.net, X, y)
        payload["feature_names"] = names
        text = json.dumps(payload)
        summary = f"final penalized loss {result.train_loss_trace[-1]:.6g}, train MSE {payload['train_mse']:.6g}"
    else:
        _print_config({"method": args.method, "train": str(args.train), "lambda": args.lam,
                       "k": args.k, "val_fraction": args.val_fraction, "seed": args.seed or 0})
        tr, va = validation_split(len(y), args.val_fraction, args.seed or 0)
        if args.method == "lasso":
            lam = args.lam
            if lam is None:
                lam = baselines.tune_lasso(X[tr], y[tr], X[va], y[va]).lambda_or_k
            model = baselines.lasso_cd(X, y, lam)
        else:
            k = args.k
            if k is None:
                k = int(baselines.tune_omp(X[tr], y[tr], X[va], y[va]).lambda_or_k)
            model = baselines.omp(X, y, k)
        payload = model.to_dict()
        payload["feature_names"] = names
        text = json.dumps(payload)
        summary = f"{args.method}: {int(np.count_nonzero(model.beta))} nonzero coefficients"
    if args.out:
        Path(args.out).write_text(text)
        print(f"{summary}; wrote {args.out}")
    else:
        print(text)
    return 0


def _load_model_importance(path) -> tuple[ImportanceVector, dict]:
    d = json.loads(Path(path).read_text())
    if "beta" in d:
        return ImportanceVector(np.abs(np.asarray(d["beta"], dtype=float)), "linear-coefficient"), d
    net_d = d.get("net", d)
    return importance(net_from_dict(net_d)), d


def _support(args, p):
    if args.support:
        idx = [int(v) - 1 for v in args.support.replace(",", " ").split()]
    elif args.truth:
        idx = [i - 1 for i in json.loads(Path(args.truth).read_text())["true_support"]]
    else:
        return None
    if any(i < 0 or i >= p for i in idx):
        raise ValueError(f"support indices must lie in 1..{p}")
    return idx


def cmd_select(args) -> int:
    imp, _ = _load_model_importance(args.model)
    support = _support(args, len(imp))
    if args.threshold is not None:
        method, kw = "threshold", {"threshold": args.threshold}
    elif args.topk is not None:
        method, kw = "topk", {"k": args.topk}
    else:
        method, kw = {"kmeans": "kmeans2", "gmm": "gmm2"}[args.cluster], {}
    _print_config({"model": str(args.model), "method": method, **kw, "seed": args.seed,
                   "support": None if support is None else [i + 1 for i in support]})
    report = select(imp, method, true_support=support, seed=args.seed, **kw)
    d = report.to_dict()
    d["importance"] = imp.values.tolist()
    if args.format == "json":
        print(json.dumps(d))
    else:
        w = csv.writer(sys.stdout)
        w.writerow(["variable", "importance", "selected"])
        for i, v in enumerate(imp.values):
            w.writerow([i + 1, repr(float(v)), int(i in report.selected)])
    return 0


def cmd_roc(args) -> int:
    imp, _ = _load_model_importance(args.model)
    support = _support(args, len(imp))
    if support is None:
        raise ValueError("roc needs --support or --truth")
    _print_config({"model": str(args.model), "support": [i + 1 for i in support]})
    w = csv.writer(sys.stdout)
    w.writerow(["fpr", "tpr"])
    for fpr, tpr in roc_curve(imp, support):
        w.writerow([repr(fpr), repr(tpr)])
    return 0


def _load_two_layer(path, drop_tol):
    d = json.loads(Path(path).read_text())
    for key in ("planted_net", "net"):
        if key in d and isinstance(d[key], dict):
            d = d[key]
            break
    net = net_from_dict(d)
    if isinstance(net, DeepNet):
        raise ValueError(f"{path}: distances are defined for two-layer networks only")
    return canonicalize(net, drop_tol)


def cmd_match(args) -> int:
    _print_config({"a": str(args.a), "b": str(args.b), "drop_tol": args.drop_tol, "csv": args.csv,
                   "padding": args.padding})
    A = _load_two_layer(args.a, args.drop_tol)
    B = _load_two_layer(args.b, args.drop_tol)
    m = match_networks(A, B, args.padding)
    print(f"D1={m.D1:.17g} D2={m.D2:.17g}")
    print("permutation=" + " ".join(str(int(i) + 1) for i in m.permutation))
    if args.csv:
        w = csv.writer(sys.stdout)
        w.writerow(["neuron_b", "neuron_a", "d1", "d2", "sign_agree"])
        for j, (d1, d2, agree) in enumerate(m.per_neuron):
            w.writerow([j + 1, int(m.permutation[j]) + 1, repr(d1), repr(d2), int(agree)])
    return 0


def cmd_experiment(args) -> int:
    config = harness.load_experiment_config(args.config, seed=args.seed, output_dir=args.out,
                                            replications=args.replications)
    if args.full_grid:
        config = harness.with_full_grid(config)
    _print_config(config.to_dict())
    result = harness.run_experiment(config)
    w = csv.writer(sys.stdout)
    w.writerow(harness.AGG_FIELDS)
    for r in result.aggregate:
        w.writerow([r["method"], r["sigma"], r["metric"], harness._fmt(r["mean"]),
                    harness._fmt(r["stderr"]), r["R"]])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparse-relu", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a synthetic train/test pair and its ground truth")
    g.add_argument("--planted", nargs="*", metavar="KEY=VALUE")
    g.add_argument("--linear", nargs="*", metavar="KEY=VALUE")
    g.add_argument("--friedman", nargs="*", metavar="KEY=VALUE")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default=".")
    g.set_defaults(func=cmd_gen)

    f = sub.add_parser("fit", help="fit a network or linear baseline to a CSV file")
    f.add_argument("--method", choices=("nn2", "nn3", "lasso", "omp"), default="nn2")
    f.add_argument("--train", required=True)
    f.add_argument("--target", default="y")
    f.add_argument("--categorical", nargs="*")
    f.add_argument("--standardize", action="store_true")
    f.add_argument("--config")
    f.add_argument("--tune", action="store_true", help="grid search on a validation split first")
    f.add_argument("--full-grid", action="store_true")
    f.add_argument("--val-fraction", type=float, default=0.2)
    f.add_argument("--lambda", dest="lam", type=float)
    f.add_argument("--k", type=int)
    f.add_argument("--width", type=int)
    f.add_argument("--lr", type=float)
    f.add_argument("--epochs", type=int)
    f.add_argument("--batch-size", type=int)
    f.add_argument("--hidden", type=int, default=10)
    f.add_argument("--seed", type=int)
    f.add_argument("--out")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("select", help="select variables from a fitted model")
    s.add_argument("model")
    rule = s.add_mutually_exclusive_group()
    rule.add_argument("--threshold", type=float)
    rule.add_argument("--topk", type=int)
    rule.add_argument("--cluster", choices=("kmeans", "gmm"), default="gmm")
    s.add_argument("--support", help="true support, 1-based, comma separated")
    s.add_argument("--truth", help="sidecar JSON written by gen")
    s.add_argument("--format", choices=("json", "csv"), default="json")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_select)

    r = sub.add_parser("roc", help="ROC points of a model's importances as CSV")
    r.add_argument("model")
    r.add_argument("--support")
    r.add_argument("--truth")
    r.set_defaults(func=cmd_roc)

    m = sub.add_parser("match", help="permutation-invariant distances between two networks")
    m.add_argument("a")
    m.add_argument("b")
    m.add_argument("--csv", action="store_true", help="also print the per-neuron table")
    m.add_argument("--drop-tol", type=float, default=1e-8)
    m.add_argument("--padding", choices=("neutral", "positive"), default="neutral",
                   help="how zero neurons added to the narrower net are compared")
    m.set_defaults(func=cmd_match)

    e = sub.add_parser("experiment", help="run a replicated experiment from a config file")
    e.add_argument("--config", required=True)
    e.add_argument("--seed", type=int)
    e.add_argument("--out")
    e.add_argument("--replications", type=int)
    e.add_argument("--full-grid", action="store_true")
    e.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError, RuntimeError) as exc:
        print(f"sparse-relu {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
