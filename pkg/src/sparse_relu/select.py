"""Variable importance, cutoff rules and selection metrics.

Indices are 0-based throughout the Python API.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .seeding import stream

SOURCES = ("network-row-norm", "linear-coefficient", "external")


@dataclass(frozen=True, eq=False)
class ImportanceVector:
    values: np.ndarray
    source: str = "external"

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("importances must be a finite nonnegative vector")
        if self.source not in SOURCES:
            raise ValueError(f"unknown importance source {self.source!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)


def _values(imp) -> np.ndarray:
    if isinstance(imp, ImportanceVector):
        return imp.values
    return ImportanceVector(imp).values


def importance(net) -> ImportanceVector:
    """Row-wise L2 norm of the input-layer weight matrix."""
    return ImportanceVector(np.linalg.norm(net.input_weights, axis=1), "network-row-norm")


def threshold_select(imp, t: float) -> frozenset:
    if t < 0:
        raise ValueError("threshold must be nonnegative")
    v = _values(imp)
    return frozenset(np.flatnonzero(v > t).tolist())


def topk_select(imp, k: int) -> frozenset:
    v = _values(imp)
    if not 1 <= k <= len(v):
        raise ValueError(f"k must lie in [1, {len(v)}], got {k}")
    order = np.lexsort((np.arange(len(v)), -v))
    return frozenset(order[:k].tolist())


# -- two-cluster cutoffs --------------------------------------------------------

def is_degenerate(v: np.ndarray) -> bool:
    hi = float(v.max())
    return hi - float(v.min()) < 1e-12 * max(1.0, hi)


def kmeans2_split(v: np.ndarray):
    """Exact 1-D two-means: scan every split of the sorted values.

    Returns ``(order, cut, sse)``: the high cluster is ``order[cut:]``.
    """
    order = np.argsort(v, kind="stable")
    s = v[order]
    n = len(s)
    c1 = np.cumsum(s)
    c2 = np.cumsum(s * s)
    k = np.arange(1, n)
    left = c2[:-1] - c1[:-1] ** 2 / k
    rs = c1[-1] - c1[:-1]
    right = (c2[-1] - c2[:-1]) - rs ** 2 / (n - k)
    sse = np.maximum(left, 0.0) + np.maximum(right, 0.0)
    best = int(np.argmin(sse))
    return order, best + 1, float(sse[best])


def _lloyd(v: np.ndarray, centers: np.ndarray, max_iter: int = 100) -> np.ndarray:
    labels = None
    for _ in range(max_iter):
        new = np.abs(v[:, None] - centers[None, :]).argmin(axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for c in range(2):
            if np.any(labels == c):
                centers[c] = v[labels == c].mean()
    return labels


def _gmm_em(v: np.ndarray, labels: np.ndarray, var_floor: float,
            max_iter: int = 500, tol: float = 1e-10):
    resp = np.stack([labels == 0, labels == 1], axis=1).astype(float)
    ll_old = -math.inf
    for _ in range(max_iter):
        nk = resp.sum(axis=0) + 1e-300
        w = nk / len(v)
        mu = (resp * v[:, None]).sum(axis=0) / nk
        var = np.maximum((resp * (v[:, None] - mu) ** 2).sum(axis=0) / nk, var_floor)
        logp = (np.log(w + 1e-300) - 0.5 * np.log(2 * np.pi * var)
                - 0.5 * (v[:, None] - mu) ** 2 / var)
        m = logp.max(axis=1, keepdims=True)
        lse = m[:, 0] + np.log(np.exp(logp - m).sum(axis=1))
        ll = float(lse.sum())
        resp = np.exp(logp - lse[:, None])
        if abs(ll - ll_old) < tol:
            break
        ll_old = ll
    return mu, resp, ll


def cluster_select(imp, method: str = "gmm2", seed: int = 0):
    """Split importances into two groups and keep the group with larger mean.

    ``kmeans2`` is the exact minimum-SSE split.  ``gmm2`` fits a two-component
    Gaussian mixture by EM (three starts: the exact k-means split and two
    seeded Lloyd runs; best log-likelihood wins) and keeps the indices whose
    posterior for the higher-mean component is at least 0.5.

    Returns ``(selected, degenerate)``; ``degenerate`` is set, with an empty
    selection, when all importances are (numerically) equal.
    """
    v = _values(imp)
    if len(v) < 2:
        raise ValueError("clustering needs at least two variables")
    if is_degenerate(v):
        return frozenset(), True
    # Work on a unit scale so the variance floor is scale free.
    u = v / v.max()
    order, cut, _ = kmeans2_split(u)
    if method == "kmeans2":
        return frozenset(order[cut:].tolist()), False
    if method != "gmm2":
        raise ValueError(f"unknown clustering method {method!r}")
    starts = [np.isin(np.arange(len(u)), order[cut:]).astype(int)]
    rng = stream(seed, "gmm-restarts")
    for _ in range(2):
        centers = np.sort(rng.choice(u, size=2, replace=False))
        if centers[0] == centers[1]:
            centers = np.array([u.min(), u.max()])
        starts.append(_lloyd(u, centers.astype(float)))
    best = None
    for labels in starts:
        if labels.min() == labels.max():
            continue
        mu, resp, ll = _gmm_em(u, labels, var_floor=1e-12)
        if best is None or ll > best[2]:
            best = (mu, resp, ll)
    mu, resp, _ = best
    hi = int(np.argmax(mu))
    return frozenset(np.flatnonzero(resp[:, hi] >= 0.5).tolist()), False


# -- metrics ----------------------------------------------------------------------

def evaluate_selection(selected, true_support):
    sel = set(selected)
    true = set(true_support)
    return len(sel & true), len(sel - true)


def _labels(n: int, true_support) -> np.ndarray:
    pos = np.zeros(n, dtype=bool)
    idx = list(true_support)
    pos[idx] = True
    if pos.sum() == 0 or pos.sum() == n:
        raise ValueError("AUC undefined: the true support must be a proper nonempty subset")
    return pos


def midranks(v: np.ndarray) -> np.ndarray:
    order = np.argsort(v, kind="stable")
    s = v[order]
    ranks = np.empty(len(v))
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and s[j + 1] == s[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auc_score(imp, true_support) -> float:
    """Mann-Whitney AUC: P(pos > neg) + P(pos == neg) / 2, using midranks."""
    v = _values(imp)
    pos = _labels(len(v), true_support)
    n1 = int(pos.sum())
    n0 = len(v) - n1
    u = midranks(v)[pos].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n1 * n0))


def roc_curve(imp, true_support):
    """ROC points ``(fpr, tpr)`` from sweeping the cutoff over distinct values.

    Starts at (0, 0); each distinct importance, from largest to smallest,
    adds the point obtained by selecting every variable at or above it, so
    the last point is (1, 1).
    """
    v = _values(imp)
    pos = _labels(len(v), true_support)
    n1 = pos.sum()
    n0 = len(v) - n1
    points = [(0.0, 0.0)]
    for t in np.unique(v)[::-1]:
        sel = v >= t
        points.append((float((sel & ~pos).sum() / n0), float((sel & pos).sum() / n1)))
    return points


def trapezoid_area(points) -> float:
    pts = np.asarray(points, dtype=float)
    return float(np.sum(np.diff(pts[:, 0]) * (pts[1:, 1] + pts[:-1, 1]) / 2.0))


@dataclass
class SelectionReport:
    selected: frozenset
    tp: int | None
    fp: int | None
    auc: float | None
    method: str
    degenerate: bool = False

    def to_dict(self, one_based: bool = True) -> dict:
        shift = 1 if one_based else 0
        return {
            "selected": sorted(i + shift for i in self.selected),
            "tp": self.tp,
            "fp": self.fp,
            "auc": self.auc,
            "method": self.method,
            "degenerate": self.degenerate,
        }


def select(imp, method: str = "gmm2", *, threshold: float | None = None, k: int | None = None,
           true_support=None, seed: int = 0) -> SelectionReport:
    """Apply one cutoff rule and, if the truth is known, score it.

    ``method`` is one of ``gmm2``, ``kmeans2``, ``threshold`` or ``topk``.
    """
    degenerate = False
    if method == "threshold":
        selected = threshold_select(imp, threshold)
    elif method == "topk":
        selected = topk_select(imp, k)
    else:
        selected, degenerate = cluster_select(imp, method, seed)
    tp = fp = auc = None
    if true_support is not None:
        tp, fp = evaluate_selection(selected, true_support)
        if 0 < len(set(true_support)) < len(_values(imp)):
            auc = auc_score(imp, true_support)
    return SelectionReport(selected, tp, fp, auc, method, degenerate)
