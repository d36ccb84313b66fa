"""Synthetic regression problems with a known set of relevant inputs.

Each generator returns ``(train, test)`` datasets drawn from separate random
streams.  Inputs and noise also use separate streams, and the noise enters as
``sigma * z`` with ``z`` fixed by the seed, so changing ``sigma`` leaves the
design matrix untouched.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .net import TwoLayerNet, forward_batch
from .seeding import stream

LINEAR_BETA = np.array([3.0, 1.5, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0])


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    true_support: tuple | None = None
    planted_net: TwoLayerNet | None = None
    feature_names: tuple | None = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.X.ndim != 2 or self.y.shape != (self.X.shape[0],):
            raise ValueError(f"inconsistent shapes X {self.X.shape}, y {self.y.shape}")
        if self.true_support is not None:
            self.true_support = tuple(sorted(int(i) for i in self.true_support))
            if len(self.true_support) > self.p:
                raise ValueError("true support larger than the number of inputs")
        if self.planted_net is not None and self.planted_net.input_dim != self.p:
            raise ValueError("planted network input dimension does not match X")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset(self, rows) -> "Dataset":
        return Dataset(self.X[rows], self.y[rows], self.true_support, self.planted_net, self.feature_names)


@dataclass(frozen=True)
class PlantedSpec:
    p: int = 100
    r_star: int = 16
    s: int = 10
    n_train: int = 500
    n_test: int = 2000
    sigma: float = 0.0
    seed: int = 0
    normalize_columns: bool = False
    B: float = 1.0

    def validate(self):
        if not 1 <= self.s <= self.p:
            raise ValueError(f"need 1 <= s <= p, got s={self.s}, p={self.p}")
        if self.r_star < 1:
            raise ValueError("r_star must be positive")
        _check_common(self)
        if self.B < 1:
            raise ValueError("B must be at least 1")


@dataclass(frozen=True)
class LinearSpec:
    n_train: int = 60
    n_test: int = 200
    sigma: float = 0.0
    seed: int = 0

    p = 8

    def validate(self):
        _check_common(self)


@dataclass(frozen=True)
class FriedmanSpec:
    p: int = 50
    n_train: int = 500
    n_test: int = 2000
    sigma: float = 0.0
    seed: int = 0

    def validate(self):
        if self.p < 5:
            raise ValueError(f"the Friedman response needs p >= 5, got {self.p}")
        _check_common(self)


def _check_common(spec):
    if spec.n_train < 0 or spec.n_test < 0:
        raise ValueError("sample sizes must be nonnegative")
    if not spec.sigma >= 0:
        raise ValueError("sigma must be nonnegative")


def planted_network(spec: PlantedSpec) -> TwoLayerNet:
    """Sparse ground-truth network: first ``s`` rows of W uniform on (0, 1)."""
    rng = stream(spec.seed, "planted-net")
    W = np.zeros((spec.p, spec.r_star))
    W[:spec.s] = rng.uniform(0.0, 1.0, size=(spec.s, spec.r_star))
    b = rng.uniform(0.0, 1.0, size=spec.r_star)
    a = np.where(rng.uniform(size=spec.r_star) < 0.5, -1.0, 1.0)
    norms = np.linalg.norm(W, axis=0)
    if np.any(norms == 0):
        raise RuntimeError("planted network has a zero column")
    if spec.normalize_columns:
        # Column norms land uniformly in [1, B].
        target = rng.uniform(1.0, spec.B, size=spec.r_star) if spec.B > 1 else np.ones(spec.r_star)
        W = W * (target / norms)
    return TwoLayerNet(W, a, b)


def _draw(seed: int, part: str, n: int, p: int):
    X = stream(seed, part, "x").standard_normal((n, p))
    z = stream(seed, part, "noise").standard_normal(n)
    return X, z


def gen_planted(spec: PlantedSpec):
    spec.validate()
    net = planted_network(spec)
    support = tuple(range(spec.s))
    out = []
    for part, n in (("train", spec.n_train), ("test", spec.n_test)):
        X, z = _draw(spec.seed, part, n, spec.p)
        y = forward_batch(net, X) + spec.sigma * z
        out.append(Dataset(X, y, support, net))
    return tuple(out)


def linear_covariance(p: int = 8, rho: float = 0.5) -> np.ndarray:
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def gen_linear(spec: LinearSpec):
    spec.validate()
    L = np.linalg.cholesky(linear_covariance(spec.p))
    out = []
    for part, n in (("train", spec.n_train), ("test", spec.n_test)):
        G, z = _draw(spec.seed, part, n, spec.p)
        X = G @ L.T
        y = X @ LINEAR_BETA + spec.sigma * z
        out.append(Dataset(X, y, (0, 1, 4)))
    return tuple(out)


def friedman_response(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return (10.0 * np.sin(np.pi * X[:, 0] * X[:, 1]) + 20.0 * (X[:, 2] - 0.5) ** 2
            + 10.0 * X[:, 3] + 5.0 * X[:, 4])


def gen_friedman(spec: FriedmanSpec):
    spec.validate()
    out = []
    for part, n in (("train", spec.n_train), ("test", spec.n_test)):
        X, z = _draw(spec.seed, part, n, spec.p)
        y = friedman_response(X) + spec.sigma * z
        out.append(Dataset(X, y, (0, 1, 2, 3, 4)))
    return tuple(out)


def generate(kind: str, **params):
    """Dispatch by generator name: ``planted``, ``linear`` or ``friedman``."""
    specs = {"planted": (PlantedSpec, gen_planted), "linear": (LinearSpec, gen_linear),
             "friedman": (FriedmanSpec, gen_friedman)}
    if kind not in specs:
        raise ValueError(f"unknown generator {kind!r}")
    spec_cls, gen = specs[kind]
    return gen(spec_cls(**params))


# -- files ------------------------------------------------------------------------

def write_csv(ds: Dataset, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{j + 1}" for j in range(ds.p)] + ["y"])
        for xi, yi in zip(ds.X, ds.y):
            w.writerow([repr(float(v)) for v in xi] + [repr(float(yi))])


def write_sidecar(ds: Dataset, path, **extra) -> None:
    payload = {
        "true_support": [i + 1 for i in ds.true_support] if ds.true_support is not None else None,
        "planted_net": ds.planted_net.to_dict() if ds.planted_net is not None else None,
    }
    payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=1))
