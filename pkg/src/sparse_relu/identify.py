"""Permutation-invariant distances between two-layer ReLU networks.

Both networks must be canonical (every ``a_j`` is +1 or -1, see
:func:`sparse_relu.net.canonicalize`).  Per-neuron costs:

``d1``  ``||w1 - w2||_1 + |b1 - b2|`` if the signs agree, otherwise
        ``||w1||_1 + ||w2||_1 + |b1| + |b2|``.
``d2``  ``sqrt(||w1 - w2||_2^2 + (b1 - b2)^2)`` if the signs agree,
        otherwise 1.

``D1`` is the minimum over neuron permutations of the summed ``d1``;
``D2`` is the minimum of the root of the summed squared ``d2``.  Both are
linear assignment problems and are solved exactly.

When widths differ the narrower net is padded with zero neurons.  A zero
neuron computes the zero function for either sign, so it is compared with
whatever it is matched to as if the signs agreed; its cost is then the
"missing neuron" mass ``||w||_1 + |b|`` (d1) or ``||(w, b)||_2`` (d2).
Passing ``padding="positive"`` instead treats pads as ordinary ``a = +1``
neurons, so a pad facing a negative neuron costs the constant 1 in d2.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .net import TwoLayerNet


class NotCanonicalError(ValueError):
    pass


def _check_signs(*signs):
    for a in signs:
        if a not in (-1.0, 1.0):
            raise NotCanonicalError(f"output weight {a} is not +1/-1; canonicalize first")


def pair_d1(w1, a1, b1, w2, a2, b2) -> float:
    _check_signs(a1, a2)
    w1, w2 = np.asarray(w1, dtype=float), np.asarray(w2, dtype=float)
    if w1.shape != w2.shape:
        raise ValueError("weight vectors differ in length")
    if a1 == a2:
        return float(np.abs(w1 - w2).sum() + abs(b1 - b2))
    return float(np.abs(w1).sum() + np.abs(w2).sum() + abs(b1) + abs(b2))


def pair_d2(w1, a1, b1, w2, a2, b2) -> float:
    _check_signs(a1, a2)
    w1, w2 = np.asarray(w1, dtype=float), np.asarray(w2, dtype=float)
    if w1.shape != w2.shape:
        raise ValueError("weight vectors differ in length")
    if a1 != a2:
        return 1.0
    d = w1 - w2
    return math.sqrt(float(d @ d) + (b1 - b2) ** 2)


@dataclass
class MatchResult:
    """``permutation[j]`` is the neuron of the first net paired with neuron
    ``j`` of the second.  ``per_neuron`` rows are ``(d1, d2, sign_agree)``
    under that pairing."""

    permutation: np.ndarray
    D1: float
    D2: float
    per_neuron: list
    D1_permutation: np.ndarray | None = None


def _require_canonical(net: TwoLayerNet):
    if not np.all(np.abs(net.a) == 1.0):
        raise NotCanonicalError("network is not canonical; canonicalize first")


def _padded(net: TwoLayerNet, r: int):
    """Parameters padded to width ``r`` plus a mask of real neurons."""
    extra = r - net.width
    W = np.hstack([net.W, np.zeros((net.input_dim, extra))])
    a = np.concatenate([net.a, np.ones(extra)])
    b = np.concatenate([net.b, np.zeros(extra)])
    real = np.arange(r) < net.width
    return W, a, b, real


PADDING_MODES = ("neutral", "positive")


def cost_matrices(netA: TwoLayerNet, netB: TwoLayerNet, padding: str = "neutral"):
    """``(C1, C2sq)`` with entry ``[i, j]`` comparing neuron i of A to neuron j of B.

    ``C2sq`` holds squared d2 values.  Widths are equalised by padding.
    """
    if padding not in PADDING_MODES:
        raise ValueError(f"padding must be one of {PADDING_MODES}")
    _require_canonical(netA)
    _require_canonical(netB)
    if netA.input_dim != netB.input_dim:
        raise ValueError("networks have different input dimensions")
    r = max(netA.width, netB.width)
    WA, aA, bA, realA = _padded(netA, r)
    WB, aB, bB, realB = _padded(netB, r)
    diff_l1 = np.abs(WA[:, :, None] - WB[:, None, :]).sum(axis=0) + np.abs(bA[:, None] - bB[None, :])
    diff_l2 = ((WA[:, :, None] - WB[:, None, :]) ** 2).sum(axis=0) + (bA[:, None] - bB[None, :]) ** 2
    mass_l1 = np.abs(WA).sum(axis=0)[:, None] + np.abs(bA)[:, None] + np.abs(WB).sum(axis=0)[None, :] + np.abs(bB)[None, :]
    agree = aA[:, None] == aB[None, :]
    if padding == "neutral":
        agree = agree | ~realA[:, None] | ~realB[None, :]
    C1 = np.where(agree, diff_l1, mass_l1)
    C2 = np.where(agree, diff_l2, 1.0)
    return C1, C2


def _summary(perm, C1, C2, netA, netB, padding):
    r = C1.shape[0]
    cols = np.arange(r)
    WA_r = max(netA.width, netB.width)
    _, aA, _, realA = _padded(netA, WA_r)
    _, aB, _, realB = _padded(netB, WA_r)
    rows = []
    for j in cols:
        i = perm[j]
        agree = bool(aA[i] == aB[j] or (padding == "neutral" and not (realA[i] and realB[j])))
        rows.append((float(C1[i, j]), math.sqrt(C2[i, j]), agree))
    return rows


def match_networks(netA: TwoLayerNet, netB: TwoLayerNet, padding: str = "neutral") -> MatchResult:
    C1, C2 = cost_matrices(netA, netB, padding)
    # Columns index B's neurons; col_ind[k] is the A-neuron for row k after transposing.
    rows, cols = linear_sum_assignment(C2.T)
    perm = cols[np.argsort(rows)]
    D2 = math.sqrt(float(C2[perm, np.arange(len(perm))].sum()))
    rows1, cols1 = linear_sum_assignment(C1.T)
    perm1 = cols1[np.argsort(rows1)]
    D1 = float(C1[perm1, np.arange(len(perm1))].sum())
    return MatchResult(perm, D1, D2, _summary(perm, C1, C2, netA, netB, padding), perm1)


def brute_force_match(netA: TwoLayerNet, netB: TwoLayerNet, padding: str = "neutral") -> MatchResult:
    """Exhaustive search over all permutations (width at most 8)."""
    r = max(netA.width, netB.width)
    if r > 8:
        raise ValueError(f"brute force refuses width {r} > 8")
    C1, C2 = cost_matrices(netA, netB, padding)
    cols = np.arange(r)
    best1 = best2 = math.inf
    perm1 = perm2 = None
    for perm in itertools.permutations(range(r)):
        perm = np.array(perm)
        s1 = float(C1[perm, cols].sum())
        s2 = float(C2[perm, cols].sum())
        if s1 < best1:
            best1, perm1 = s1, perm
        if s2 < best2:
            best2, perm2 = s2, perm
    return MatchResult(perm2, best1, math.sqrt(best2), _summary(perm2, C1, C2, netA, netB, padding), perm1)


@dataclass
class AssumptionReport:
    norm_lower_ok: np.ndarray
    norm_upper_ok: np.ndarray
    bias_ok: np.ndarray
    zero_norm: np.ndarray
    max_coherence: float
    coherence_ok: bool
    B: float
    omega: float

    @property
    def all_ok(self) -> bool:
        return bool(self.norm_lower_ok.all() and self.norm_upper_ok.all()
                    and self.bias_ok.all() and self.coherence_ok)


def check_assumption1(net: TwoLayerNet, B: float, omega: float) -> AssumptionReport:
    """Check the norm, bias and coherence conditions on a planted network.

    Neurons with a zero weight vector fail the lower norm bound and are
    flagged in ``zero_norm``; they are left out of the coherence maximum.
    """
    _require_canonical(net)
    if B < 1 or omega <= 0:
        raise ValueError("need B >= 1 and omega > 0")
    norms = np.linalg.norm(net.W, axis=0)
    zero = norms == 0
    live = ~zero
    coherence = 0.0
    if live.sum() >= 2:
        U = net.W[:, live] / norms[live]
        G = np.abs(U.T @ U)
        np.fill_diagonal(G, 0.0)
        coherence = float(min(G.max(), 1.0))
    return AssumptionReport(
        norm_lower_ok=norms >= 1.0,
        norm_upper_ok=norms <= B,
        bias_ok=np.abs(net.b) <= B,
        zero_norm=zero,
        max_coherence=coherence,
        coherence_ok=coherence <= net.width ** (-omega),
        B=B,
        omega=omega,
    )
