"""Two-layer and deep ReLU regression networks.

A :class:`TwoLayerNet` computes ``f(x) = sum_j a_j * relu(w_j . x + b_j)``
where ``w_j`` is column ``j`` of the ``p x r`` input matrix ``W``.  There is
no output bias.  :class:`DeepNet` inserts extra ReLU layers between the input
layer and the linear read-out.

Evaluation accumulates in a fixed order (input coordinate by input
coordinate, neuron by neuron) instead of going through BLAS, so a batch
evaluation is bitwise identical to evaluating each row on its own.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DimensionError(ValueError):
    """Raised when array shapes do not match the network's dimensions."""


def _frozen(arr, ndim: int, name: str) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    if out.ndim != ndim:
        raise DimensionError(f"{name} must be {ndim}-dimensional, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite entries")
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class TwoLayerNet:
    W: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        W = _frozen(self.W, 2, "W")
        a = _frozen(self.a, 1, "a")
        b = _frozen(self.b, 1, "b")
        if a.shape[0] != W.shape[1] or b.shape[0] != W.shape[1]:
            raise DimensionError(
                f"W has {W.shape[1]} columns but a has length {a.shape[0]} "
                f"and b has length {b.shape[0]}"
            )
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def input_dim(self) -> int:
        return self.W.shape[0]

    @property
    def width(self) -> int:
        return self.W.shape[1]

    @property
    def input_weights(self) -> np.ndarray:
        return self.W

    def same_as(self, other: "TwoLayerNet") -> bool:
        return (
            isinstance(other, TwoLayerNet)
            and np.array_equal(self.W, other.W)
            and np.array_equal(self.a, other.a)
            and np.array_equal(self.b, other.b)
        )

    def to_dict(self) -> dict:
        return {
            "p": self.input_dim,
            "r": self.width,
            "a": self.a.tolist(),
            "b": self.b.tolist(),
            "W": self.W.tolist(),
        }


@dataclass(frozen=True, eq=False)
class DeepNet:
    """ReLU network with an arbitrary stack of hidden layers.

    ``hidden`` holds ``(M, c)`` pairs; layer ``k`` maps ``h -> relu(h @ M + c)``.
    With an empty stack this is the two-layer model with ``a = out``.
    """

    W: np.ndarray
    b: np.ndarray
    hidden: tuple = field(default_factory=tuple)
    out: np.ndarray = None

    def __post_init__(self):
        W = _frozen(self.W, 2, "W")
        b = _frozen(self.b, 1, "b")
        if b.shape[0] != W.shape[1]:
            raise DimensionError(f"input bias length {b.shape[0]} != width {W.shape[1]}")
        width = W.shape[1]
        hidden = []
        for k, (M, c) in enumerate(self.hidden):
            M = _frozen(M, 2, f"hidden[{k}].M")
            c = _frozen(c, 1, f"hidden[{k}].b")
            if M.shape[0] != width or c.shape[0] != M.shape[1]:
                raise DimensionError(
                    f"hidden layer {k} has shape {M.shape} / bias {c.shape[0]}, "
                    f"expected {width} input rows"
                )
            width = M.shape[1]
            hidden.append((M, c))
        out = _frozen(self.out, 1, "out")
        if out.shape[0] != width:
            raise DimensionError(f"output weights have length {out.shape[0]}, expected {width}")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "hidden", tuple(hidden))
        object.__setattr__(self, "out", out)

    @property
    def input_dim(self) -> int:
        return self.W.shape[0]

    @property
    def width(self) -> int:
        return self.W.shape[1]

    @property
    def input_weights(self) -> np.ndarray:
        return self.W

    def same_as(self, other: "DeepNet") -> bool:
        if not isinstance(other, DeepNet) or len(self.hidden) != len(other.hidden):
            return False
        pairs = [(self.W, other.W), (self.b, other.b), (self.out, other.out)]
        for (M1, c1), (M2, c2) in zip(self.hidden, other.hidden):
            pairs += [(M1, M2), (c1, c2)]
        return all(np.array_equal(x, y) for x, y in pairs)

    def to_dict(self) -> dict:
        return {
            "p": self.input_dim,
            "r": self.width,
            "b": self.b.tolist(),
            "W": self.W.tolist(),
            "hidden": [{"M": M.tolist(), "b": c.tolist()} for M, c in self.hidden],
            "out": self.out.tolist(),
        }

    def as_two_layer(self) -> TwoLayerNet:
        if self.hidden:
            raise ValueError("only a net without hidden layers reduces to a TwoLayerNet")
        return TwoLayerNet(self.W, self.out, self.b)


def _check_rows(X: np.ndarray, p: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != p:
        raise DimensionError(f"expected input with {p} columns, got shape {X.shape}")
    return X


def _affine(H: np.ndarray, M: np.ndarray, c: np.ndarray) -> np.ndarray:
    # Fixed left-to-right accumulation; do not replace with H @ M (see module doc).
    Z = np.broadcast_to(c, (H.shape[0], M.shape[1])).copy()
    for k in range(M.shape[0]):
        Z += H[:, k:k + 1] * M[k]
    return Z


def _readout(H: np.ndarray, a: np.ndarray) -> np.ndarray:
    y = np.zeros(H.shape[0])
    for j in range(a.shape[0]):
        y += a[j] * H[:, j]
    return y


def forward_batch(net: TwoLayerNet | DeepNet, X) -> np.ndarray:
    """Evaluate the network on every row of ``X`` (shape ``n x p``)."""
    X = _check_rows(X, net.input_dim)
    H = np.maximum(_affine(X, net.W, net.b), 0.0)
    if isinstance(net, DeepNet):
        for M, c in net.hidden:
            H = np.maximum(_affine(H, M, c), 0.0)
        return _readout(H, net.out)
    return _readout(H, net.a)


def forward(net: TwoLayerNet | DeepNet, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != net.input_dim:
        raise DimensionError(f"expected input of length {net.input_dim}, got shape {x.shape}")
    return float(forward_batch(net, x[None, :])[0])


def forward_deep(net: DeepNet, x) -> float:
    if not isinstance(net, DeepNet):
        raise TypeError("forward_deep expects a DeepNet")
    return forward(net, x)


def canonicalize(net: TwoLayerNet, drop_tol: float = 1e-8) -> TwoLayerNet:
    """Rescale every neuron so that ``a_j`` is +1 or -1.

    Uses ``a * relu(z) = sign(a) * relu(|a| z)``.  Neurons with
    ``|a_j| <= drop_tol`` are removed.  Already-canonical nets come back
    unchanged, so the map is idempotent.
    """
    if drop_tol < 0:
        raise ValueError("drop_tol must be nonnegative")
    keep = np.abs(net.a) > drop_tol
    a = net.a[keep]
    scale = np.abs(a)
    W = net.W[:, keep]
    b = net.b[keep]
    unit = scale == 1.0
    W = np.where(unit, W, W * scale)
    b = np.where(unit, b, b * scale)
    return TwoLayerNet(W, np.sign(a), b)


def is_canonical(net: TwoLayerNet) -> bool:
    return bool(np.all(np.abs(net.a) == 1.0))


# -- JSON --------------------------------------------------------------------
# Python's float repr is the shortest string that round-trips exactly, which
# is never longer than 17 significant digits.

def net_from_dict(d: dict) -> TwoLayerNet | DeepNet:
    p, r = int(d["p"]), int(d["r"])
    W = np.array(d["W"], dtype=float).reshape(p, r)
    if "hidden" in d or "out" in d:
        hidden = tuple(
            (np.array(layer["M"], dtype=float), np.array(layer["b"], dtype=float))
            for layer in d.get("hidden", [])
        )
        return DeepNet(W, np.array(d["b"], dtype=float), hidden, np.array(d["out"], dtype=float))
    return TwoLayerNet(W, np.array(d["a"], dtype=float), np.array(d["b"], dtype=float))


def net_to_json(net: TwoLayerNet | DeepNet, **extra) -> str:
    payload = net.to_dict()
    payload.update(extra)
    return json.dumps(payload)


def save_net(net: TwoLayerNet | DeepNet, path, **extra) -> None:
    Path(path).write_text(net_to_json(net, **extra))


def load_net(path) -> TwoLayerNet | DeepNet:
    return net_from_dict(json.loads(Path(path).read_text()))
