"""L1-penalized training of ReLU networks with Adam.

The objective is ``mean((y - f(x))**2) + lam * ||W||_1`` where ``W`` is the
input-layer matrix only; output weights, biases and inner layers are not
penalized.  The L1 term enters the update as the subgradient
``lam * sign(W)`` with ``sign(0) = 0``; ``relu'(0)`` is taken as 0.
"""
from __future__ import annotations

import configparser
import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .net import DeepNet, DimensionError, TwoLayerNet, forward_batch
from .seeding import MASK64, derive_seed, stream

DIVERGENCE_LIMIT = 1e12


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")
        self.epoch = epoch
        self.loss = loss


@dataclass(frozen=True)
class TrainConfig:
    lam: float = 0.01
    width: int = 20
    learning_rate: float = 0.01
    epochs: int = 200
    batch_size: int = 32
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    hidden_widths: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(h) for h in self.hidden_widths))
        object.__setattr__(self, "seed", int(self.seed) & MASK64)
        if not self.lam >= 0:
            raise ValueError("lam must be nonnegative")
        if self.width < 1 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("width, epochs and batch_size must be positive")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1) or not self.eps > 0:
            raise ValueError("Adam requires 0 < beta1, beta2 < 1 and eps > 0")
        if any(h < 1 for h in self.hidden_widths):
            raise ValueError("hidden widths must be positive")

    def to_dict(self) -> dict:
        d = self.__dict__.copy()
        d["hidden_widths"] = list(self.hidden_widths)
        return d


@dataclass
class FitResult:
    net: TwoLayerNet | DeepNet
    train_loss_trace: np.ndarray
    val_mse: float | None
    config_used: TrainConfig

    def to_dict(self) -> dict:
        return {
            "net": self.net.to_dict(),
            "train_loss_trace": self.train_loss_trace.tolist(),
            "val_mse": self.val_mse,
            "config": self.config_used.to_dict(),
        }


@dataclass(frozen=True)
class Grid:
    lambdas: tuple = (0.05, 0.01, 0.005)
    widths: tuple = (20, 50)
    learning_rates: tuple = (0.01, 0.005)
    epoch_counts: tuple = (200, 500)

    def __post_init__(self):
        for name in ("lambdas", "widths", "learning_rates", "epoch_counts"):
            vals = tuple(getattr(self, name))
            if not vals:
                raise ValueError(f"grid field {name} is empty")
            object.__setattr__(self, name, vals)
        if any(lam < 0 for lam in self.lambdas):
            raise ValueError("lambdas must be nonnegative")
        if any(v <= 0 for v in self.widths + self.learning_rates + self.epoch_counts):
            raise ValueError("widths, learning rates and epoch counts must be positive")

    @classmethod
    def full(cls) -> "Grid":
        """The 135-cell search space used for the published tables."""
        return cls(
            lambdas=(0.1, 0.05, 0.01, 0.005, 0.001),
            widths=(20, 50, 100),
            learning_rates=(0.01, 0.005, 0.001),
            epoch_counts=(100, 200, 500),
        )

    def cells(self):
        """(lam, width, lr, epochs) in enumeration order, lambdas outermost."""
        return list(itertools.product(self.lambdas, self.widths, self.learning_rates, self.epoch_counts))

    def to_dict(self) -> dict:
        return {k: list(v) for k, v in self.__dict__.items()}


# -- parameter plumbing -------------------------------------------------------

def _layers(net):
    """Split a network into ``[(W, b), (M1, c1), ...]`` and the read-out vector."""
    if isinstance(net, TwoLayerNet):
        return [(net.W, net.b)], net.a
    return [(net.W, net.b), *net.hidden], net.out


def _flatten(net) -> list[np.ndarray]:
    layers, out = _layers(net)
    return [x for pair in layers for x in pair] + [out]


def _rebuild(like, flat: Sequence[np.ndarray]):
    if isinstance(like, TwoLayerNet):
        W, b, a = flat
        return TwoLayerNet(W, a, b)
    hidden = tuple((flat[i], flat[i + 1]) for i in range(2, len(flat) - 1, 2))
    return DeepNet(flat[0], flat[1], hidden, flat[-1])


def init_net(p: int, config: TrainConfig, rng: np.random.Generator):
    """Fan-in uniform initialisation with zero biases."""
    r = config.width
    W = rng.uniform(-1.0, 1.0, size=(p, r)) / math.sqrt(p)
    if not config.hidden_widths:
        a = rng.uniform(-1.0, 1.0, size=r) / math.sqrt(r)
        return TwoLayerNet(W, a, np.zeros(r))
    hidden = []
    fan_in = r
    for h in config.hidden_widths:
        hidden.append((rng.uniform(-1.0, 1.0, size=(fan_in, h)) / math.sqrt(fan_in), np.zeros(h)))
        fan_in = h
    out = rng.uniform(-1.0, 1.0, size=fan_in) / math.sqrt(fan_in)
    return DeepNet(W, np.zeros(r), tuple(hidden), out)


# -- objective and gradient ---------------------------------------------------

def _check_data(net, X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise DimensionError(f"expected X with {net.input_dim} columns, got shape {X.shape}")
    if y.shape != (X.shape[0],):
        raise DimensionError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
    if X.shape[0] == 0:
        raise ValueError("empty dataset")
    return X, y


def penalized_loss(net, X, y, lam: float) -> float:
    X, y = _check_data(net, X, y)
    resid = y - forward_batch(net, X)
    return float(np.mean(resid * resid) + lam * np.sum(np.abs(net.input_weights)))


def _backprop(flat: list[np.ndarray], X: np.ndarray, y: np.ndarray, lam: float) -> list[np.ndarray]:
    n_layers = (len(flat) - 1) // 2
    pre = []
    H = X
    acts = [X]
    for k in range(n_layers):
        Z = H @ flat[2 * k] + flat[2 * k + 1]
        pre.append(Z)
        H = np.maximum(Z, 0.0)
        acts.append(H)
    out = flat[-1]
    g = (2.0 / X.shape[0]) * (H @ out - y)
    grads = [None] * len(flat)
    grads[-1] = H.T @ g
    delta = np.outer(g, out)
    for k in range(n_layers - 1, -1, -1):
        delta = delta * (pre[k] > 0)
        grads[2 * k] = acts[k].T @ delta
        grads[2 * k + 1] = delta.sum(axis=0)
        if k:
            delta = delta @ flat[2 * k].T
    grads[0] = grads[0] + lam * np.sign(flat[0])
    return grads


def gradient(net, X_batch, y_batch, lam: float):
    """Gradient of the penalized objective on a batch, laid out like ``net``.

    The returned object has the same type as ``net``; e.g. for a
    :class:`TwoLayerNet` the fields ``W``, ``a``, ``b`` hold the partial
    derivatives with respect to those parameters.
    """
    X, y = _check_data(net, X_batch, y_batch)
    return _rebuild(net, _backprop(_flatten(net), X, y, lam))


# -- Adam ---------------------------------------------------------------------

@dataclass
class AdamState:
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(params, grads, state: AdamState, t: int, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One bias-corrected Adam update.  Returns ``(new_params, new_state)``."""
    if t < 1:
        raise ValueError("Adam step index starts at 1")
    if not (len(params) == len(grads) == len(state.m) == len(state.v)):
        raise DimensionError("params, grads and state have different lengths")
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if not (np.shape(p) == np.shape(g) == np.shape(m) == np.shape(v)):
            raise DimensionError(f"shape mismatch: param {np.shape(p)}, grad {np.shape(g)}")
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * (g * g)
        new_params.append(p - lr * (m / c1) / (np.sqrt(v / c2) + eps))
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(new_m, new_v)


# -- training -----------------------------------------------------------------

def fit(X, y, config: TrainConfig, val=None) -> FitResult:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise DimensionError(f"inconsistent shapes X {X.shape}, y {y.shape}")
    n, p = X.shape
    if n == 0:
        raise ValueError("empty dataset")
    net = init_net(p, config, stream(config.seed, "init"))
    shuffler = stream(config.seed, "shuffle")
    params = [np.array(x) for x in _flatten(net)]
    state = AdamState.zeros_like(params)
    bs = config.batch_size
    trace = np.empty(config.epochs)
    t = 0
    for epoch in range(config.epochs):
        order = shuffler.permutation(n)
        with np.errstate(all="ignore"):
            for start in range(0, n, bs):
                idx = order[start:start + bs]
                grads = _backprop(params, X[idx], y[idx], config.lam)
                t += 1
                params, state = adam_step(params, grads, state, t, config.learning_rate,
                                          config.beta1, config.beta2, config.eps)
        if not all(np.all(np.isfinite(x)) for x in params):
            raise TrainingDiverged(epoch, math.inf)
        with np.errstate(all="ignore"):
            net = _rebuild(net, params)
            loss = penalized_loss(net, X, y, config.lam)
        if not math.isfinite(loss) or loss > DIVERGENCE_LIMIT:
            raise TrainingDiverged(epoch, loss)
        trace[epoch] = loss
    val_mse = None
    if val is not None:
        Xv, yv = (np.asarray(v, dtype=float) for v in val)
        val_mse = mse(net, Xv, yv)
    return FitResult(net, trace, val_mse, config)


def mse(net, X, y) -> float:
    resid = np.asarray(y, dtype=float) - forward_batch(net, X)
    return float(np.mean(resid * resid))


def validation_split(n: int, val_fraction: float, seed: int):
    """Seeded permutation; the first ``(1 - val_fraction)`` share trains."""
    if not 0 < val_fraction < 1:
        raise ValueError("val_fraction must lie in (0, 1)")
    if n < 2:
        raise ValueError("need at least two rows to split")
    order = stream(seed, "validation-split").permutation(n)
    n_train = min(max(int(round((1.0 - val_fraction) * n)), 1), n - 1)
    return order[:n_train], order[n_train:]


def cell_config(base: TrainConfig, cell: tuple, seed: int, index: int) -> TrainConfig:
    lam, width, lr, epochs = cell
    return replace(base, lam=lam, width=int(width), learning_rate=lr, epochs=int(epochs),
                   seed=derive_seed(seed, "cell", index))


def grid_search(X, y, grid: Grid, val_fraction: float = 0.2, seed: int = 0,
                base: TrainConfig | None = None):
    """Fit every grid cell on a training split, keep the lowest validation MSE.

    Cells that diverge are skipped.  Ties go to the earlier cell.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    base = base or TrainConfig()
    tr, va = validation_split(X.shape[0], val_fraction, seed)
    best = None
    failures = []
    for index, cell in enumerate(grid.cells()):
        config = cell_config(base, cell, seed, index)
        try:
            result = fit(X[tr], y[tr], config, val=(X[va], y[va]))
        except TrainingDiverged as exc:
            failures.append((cell, exc))
            continue
        if best is None or result.val_mse < best.val_mse:
            best = result
    if best is None:
        raise TrainingDiverged(failures[-1][1].epoch, failures[-1][1].loss)
    return best.config_used, best


# -- config files ---------------------------------------------------------------

def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _ints(text: str) -> tuple:
    return tuple(int(v) for v in text.replace(",", " ").split())


def train_config_from_mapping(section, **overrides) -> TrainConfig:
    """Build a :class:`TrainConfig` from ``key = value`` pairs.

    Keys: ``lambda``, ``width``, ``learning_rate``, ``epochs``,
    ``batch_size``, ``seed``, ``beta1``, ``beta2``, ``eps``,
    ``hidden_widths`` (space separated, may be empty).
    """
    kw = {}
    conv = {"lambda": ("lam", float), "width": ("width", int),
            "learning_rate": ("learning_rate", float), "epochs": ("epochs", int),
            "batch_size": ("batch_size", int), "seed": ("seed", int),
            "beta1": ("beta1", float), "beta2": ("beta2", float), "eps": ("eps", float)}
    for key, value in dict(section).items():
        if key in conv:
            name, typ = conv[key]
            kw[name] = typ(value)
        elif key == "hidden_widths":
            kw["hidden_widths"] = _ints(value)
        else:
            raise KeyError(f"unknown training key {key!r}")
    kw.update(overrides)
    return TrainConfig(**kw)


def grid_from_mapping(section) -> Grid:
    """Keys ``lambdas``, ``widths``, ``learning_rates``, ``epoch_counts``, or
    ``full = true`` for the complete search space."""
    section = dict(section)
    if str(section.pop("full", "false")).lower() in ("1", "true", "yes"):
        return Grid.full()
    kw = {}
    for key, parse in (("lambdas", _floats), ("widths", _ints),
                       ("learning_rates", _floats), ("epoch_counts", _ints)):
        if key in section:
            kw[key] = parse(section.pop(key))
    if section:
        raise KeyError(f"unknown grid keys {sorted(section)}")
    return Grid(**kw)


def load_train_config(path) -> tuple[TrainConfig, Grid]:
    """Read ``[train]`` and ``[grid]`` sections from an INI-style file."""
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise FileNotFoundError(path)
    config = train_config_from_mapping(parser["train"] if parser.has_section("train") else {})
    grid = grid_from_mapping(parser["grid"] if parser.has_section("grid") else {})
    return config, grid
