"""Replicated selection/prediction experiments and their summary tables.

One replication draws a dataset, and for every method and noise level tunes
on a validation split, refits on the full training part, selects variables
from the importance vector and scores the selection and the test error.
Replications run independently (optionally in worker processes); the
summary is a deterministic fold over replication index.
"""
from __future__ import annotations

import configparser
import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import baselines, data_io, synthgen
from .net import forward_batch, save_net
from .seeding import derive_seed
from .select import importance, select
from .train import (Grid, TrainConfig, TrainingDiverged, fit, grid_from_mapping, grid_search,
                    validation_split)

METHODS = ("nn2", "nn3", "lasso", "omp")
METRICS = ("TP", "FP", "AUC", "MSE")
RAW_FIELDS = ("rep", "method", "sigma", "tp", "fp", "auc", "mse", "seed")
AGG_FIELDS = ("method", "sigma", "metric", "mean", "stderr", "R")
DEFAULT_BATCH = {"linear": 32, "planted": 32, "friedman": 32, "csv": 32}


@dataclass
class ExperimentConfig:
    generator: str = "planted"
    generator_params: dict = field(default_factory=dict)
    sigmas: tuple = (0.0,)
    methods: tuple = ("nn2",)
    grid: Grid = field(default_factory=Grid)
    replications: int = 1
    seed: int = 0
    selection: str = "gmm2"
    output_dir: str | None = None
    val_fraction: float = 0.2
    batch_size: int | None = None
    nn3_hidden: int = 10
    save_nets: bool = True

    def __post_init__(self):
        self.sigmas = tuple(float(s) for s in self.sigmas)
        self.methods = tuple(self.methods)
        if self.generator not in ("planted", "linear", "friedman", "csv"):
            raise ValueError(f"unknown generator {self.generator!r}")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if any(s < 0 for s in self.sigmas) or not self.sigmas:
            raise ValueError("sigma values must be nonnegative and nonempty")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ValueError(f"unknown methods {bad}")
        if self.generator == "csv" and self.sigmas != (0.0,):
            raise ValueError("csv experiments use the observed response; leave sigmas at 0")
        if self.batch_size is None:
            self.batch_size = DEFAULT_BATCH[self.generator]
        _parse_selection(self.selection)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["grid"] = self.grid.to_dict()
        d["sigmas"] = list(self.sigmas)
        d["methods"] = list(self.methods)
        return d


def _parse_selection(text: str):
    """``gmm2`` | ``kmeans2`` | ``topk:K`` | ``threshold:T``."""
    if text in ("gmm2", "kmeans2"):
        return {"method": text}
    kind, _, arg = text.partition(":")
    if kind == "topk" and arg:
        return {"method": "topk", "k": int(arg)}
    if kind == "threshold" and arg:
        return {"method": "threshold", "threshold": float(arg)}
    raise ValueError(f"bad selection rule {text!r}")


def replication_seed(config: ExperimentConfig, rep_index: int) -> int:
    return derive_seed(config.seed, "replication", rep_index)


def make_data(config: ExperimentConfig, rep_seed: int, sigma: float):
    params = dict(config.generator_params)
    data_seed = derive_seed(rep_seed, "data")
    if config.generator == "csv":
        schema = data_io.TabularSchema(params["target"], tuple(params.get("categorical", ())))
        table = data_io.load_csv(params["path"], schema)
        tr_rows, te_rows = data_io.split_rows(table.n_rows, int(params["n_train"]),
                                              int(params["n_test"]), data_seed)
        _, state = data_io.encode_and_standardize(table, tr_rows)
        return state.transform(table, tr_rows), state.transform(table, te_rows)
    return synthgen.generate(config.generator, sigma=sigma, seed=data_seed, **params)


def _fit_method(method: str, train, config: ExperimentConfig, seed: int):
    """Tune on a validation split, refit on all of ``train``; return (model, importance)."""
    if method in ("nn2", "nn3"):
        base = TrainConfig(batch_size=config.batch_size,
                           hidden_widths=(config.nn3_hidden,) if method == "nn3" else ())
        best, _ = grid_search(train.X, train.y, config.grid, config.val_fraction, seed, base)
        result = fit(train.X, train.y, best)
        return result.net, importance(result.net)
    tr, va = validation_split(train.n, config.val_fraction, seed)
    if method == "lasso":
        tuned = baselines.tune_lasso(train.X[tr], train.y[tr], train.X[va], train.y[va])
        model = baselines.lasso_cd(train.X, train.y, tuned.lambda_or_k)
    else:
        tuned = baselines.tune_omp(train.X[tr], train.y[tr], train.X[va], train.y[va])
        model = baselines.omp(train.X, train.y, int(tuned.lambda_or_k))
    return model, baselines.linear_importance(model)


def _predict(model, X):
    if isinstance(model, baselines.LinearFit):
        return model.predict(X)
    return forward_batch(model, X)


def run_replication(config: ExperimentConfig, rep_index: int, keep_models: bool = False) -> list[dict]:
    """One record per (method, sigma).  Failed fits are recorded with NaN metrics."""
    rep_seed = replication_seed(config, rep_index)
    rule = _parse_selection(config.selection)
    records = []
    for sigma in config.sigmas:
        train, test = make_data(config, rep_seed, sigma)
        for method in config.methods:
            seed = derive_seed(rep_seed, "method", method)
            rec = {"rep": rep_index, "method": method, "sigma": sigma, "tp": math.nan,
                   "fp": math.nan, "auc": math.nan, "mse": math.nan, "seed": seed,
                   "status": "ok"}
            try:
                model, imp = _fit_method(method, train, config, seed)
            except TrainingDiverged as exc:
                rec["status"] = f"diverged at epoch {exc.epoch}"
                records.append(rec)
                continue
            report = select(imp, rule["method"], threshold=rule.get("threshold"), k=rule.get("k"),
                            true_support=train.true_support, seed=seed)
            resid = test.y - _predict(model, test.X)
            rec["mse"] = float(np.mean(resid * resid))
            if report.tp is not None:
                rec["tp"], rec["fp"] = float(report.tp), float(report.fp)
            if report.auc is not None:
                rec["auc"] = report.auc
            rec["selected"] = sorted(report.selected)
            if keep_models:
                rec["model"] = model
            records.append(rec)
    return records


def _mean_stderr(values: list[float]):
    R = len(values)
    mean = math.fsum(values) / R
    if R == 1:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (R - 1)
    return mean, math.sqrt(var) / math.sqrt(R)


def aggregate(records: list[dict]) -> list[dict]:
    """Mean and standard error (sample std / sqrt(R)) per (method, sigma, metric)."""
    records = sorted(records, key=lambda r: (r["rep"], METHODS.index(r["method"]), r["sigma"]))
    keys = []
    for r in records:
        k = (r["method"], r["sigma"])
        if k not in keys:
            keys.append(k)
    keys.sort(key=lambda k: (METHODS.index(k[0]), k[1]))
    rows = []
    for method, sigma in keys:
        group = [r for r in records if r["method"] == method and r["sigma"] == sigma]
        for metric in METRICS:
            vals = [float(r[metric.lower()]) for r in group if not math.isnan(float(r[metric.lower()]))]
            if not any(not math.isnan(float(r["mse"])) for r in group):
                rows.append({"method": method, "sigma": sigma, "metric": metric,
                             "mean": "NA", "stderr": "NA", "R": 0})
                continue
            if not vals:
                continue
            mean, se = _mean_stderr(vals)
            rows.append({"method": method, "sigma": sigma, "metric": metric,
                         "mean": mean, "stderr": se, "R": len(vals)})
    return rows


def write_raw_csv(records: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RAW_FIELDS)
        for r in sorted(records, key=lambda r: (r["rep"], METHODS.index(r["method"]), r["sigma"])):
            w.writerow([r["rep"], r["method"], repr(r["sigma"])]
                       + [repr(float(r[k])) for k in ("tp", "fp", "auc", "mse")] + [r["seed"]])


def read_raw_csv(path) -> list[dict]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append({"rep": int(row["rep"]), "method": row["method"], "sigma": float(row["sigma"]),
                        "tp": float(row["tp"]), "fp": float(row["fp"]), "auc": float(row["auc"]),
                        "mse": float(row["mse"]), "seed": int(row["seed"])})
    return out


def write_aggregate_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(AGG_FIELDS)
        for r in rows:
            w.writerow([r["method"], repr(r["sigma"]),
                        r["metric"], _fmt(r["mean"]), _fmt(r["stderr"]), r["R"]])


def _fmt(v):
    return v if isinstance(v, str) else repr(float(v))


def n_workers() -> int:
    try:
        return max(1, int(os.environ.get("SPARSE_RELU_THREADS", "1")))
    except ValueError:
        return 1


def _run_one(args):
    config, rep = args
    return run_replication(config, rep, keep_models=config.save_nets and config.output_dir is not None)


@dataclass
class ExperimentResult:
    aggregate: list
    records: list


def run_experiment(config: ExperimentConfig, workers: int | None = None) -> ExperimentResult:
    workers = n_workers() if workers is None else workers
    jobs = [(config, rep) for rep in range(config.replications)]
    if workers > 1 and config.replications > 1:
        with ProcessPoolExecutor(max_workers=min(workers, config.replications)) as pool:
            per_rep = list(pool.map(_run_one, jobs))
    else:
        per_rep = [_run_one(job) for job in jobs]
    records = [r for rep in per_rep for r in rep]
    rows = aggregate(records)
    if config.output_dir is not None:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_raw_csv(records, out / "raw.csv")
        write_aggregate_csv(rows, out / "aggregate.csv")
        (out / "config.json").write_text(json.dumps(config.to_dict(), indent=1))
        if config.save_nets:
            nets = out / "nets"
            nets.mkdir(exist_ok=True)
            for r in records:
                model = r.pop("model", None)
                if model is None:
                    continue
                name = f"rep{r['rep']:03d}_{r['method']}_sigma{r['sigma']:g}.json"
                if isinstance(model, baselines.LinearFit):
                    (nets / name).write_text(json.dumps(model.to_dict()))
                else:
                    save_net(model, nets / name)
    for r in records:
        r.pop("model", None)
    return ExperimentResult(rows, records)


# -- config files -----------------------------------------------------------------

_GEN_KEYS = {
    "planted": {"p": int, "r_star": int, "s": int, "n_train": int, "n_test": int,
                "normalize_columns": lambda v: str(v).lower() in ("1", "true", "yes"), "B": float},
    "linear": {"n_train": int, "n_test": int},
    "friedman": {"p": int, "n_train": int, "n_test": int},
    "csv": {"path": str, "target": str, "categorical": lambda v: tuple(v.split()),
            "n_train": int, "n_test": int},
}


def load_experiment_config(path, **overrides) -> ExperimentConfig:
    """Read an INI-style experiment description.

    Sections: ``[experiment]`` (generator, sigmas, methods, replications,
    seed, selection, output_dir, val_fraction, batch_size, nn3_hidden),
    ``[generator]`` (generator-specific sizes) and ``[grid]``.
    """
    parser = configparser.ConfigParser()
    parser.optionxform = str
    if not parser.read(path):
        raise FileNotFoundError(path)
    exp = dict(parser["experiment"]) if parser.has_section("experiment") else {}
    kw = {}
    conv = {"generator": str, "replications": int, "seed": int, "selection": str,
            "output_dir": str, "val_fraction": float, "batch_size": int, "nn3_hidden": int}
    for key, value in exp.items():
        if key == "sigmas":
            kw["sigmas"] = tuple(float(v) for v in value.replace(",", " ").split())
        elif key == "methods":
            kw["methods"] = tuple(value.replace(",", " ").split())
        elif key in conv:
            kw[key] = conv[key](value)
        else:
            raise KeyError(f"unknown experiment key {key!r}")
    generator = kw.get("generator", "planted")
    gen = {}
    if parser.has_section("generator"):
        allowed = _GEN_KEYS[generator]
        for key, value in parser["generator"].items():
            if key not in allowed:
                raise KeyError(f"unknown {generator} generator key {key!r}")
            gen[key] = allowed[key](value)
    kw["generator_params"] = gen
    kw["grid"] = grid_from_mapping(parser["grid"]) if parser.has_section("grid") else Grid()
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**kw)


def with_full_grid(config: ExperimentConfig) -> ExperimentConfig:
    return replace(config, grid=Grid.full())
