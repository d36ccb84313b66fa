import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from sparse_relu.net import DeepNet, TwoLayerNet
from sparse_relu.select import (ImportanceVector, auc_score, cluster_select, evaluate_selection, importance,
                                kmeans2_split, roc_curve, select, threshold_select, topk_select,
                                trapezoid_area)

from oracles import best_split_sse, pairwise_auc

vectors = st.lists(st.floats(0, 100, allow_nan=False), min_size=3, max_size=30)


def bimodal(rng, p=20, k=None):
    k = k if k is not None else int(rng.integers(1, p))
    v = rng.uniform(0, 0.3, size=p)
    idx = rng.choice(p, size=k, replace=False)
    v[idx] = rng.uniform(1, 2, size=k)
    return v, set(idx.tolist())


# -- importance ------------------------------------------------------------------------

def test_importance_row_norms():
    W = np.array([[0.0, 0.0], [3.0, 4.0], [1.0, -1.0]])
    imp = importance(TwoLayerNet(W, np.ones(2), np.zeros(2)))
    assert imp.values.tolist()[:2] == [0.0, 5.0]
    assert imp.values[2] == pytest.approx(math.sqrt(2), rel=1e-15)
    assert imp.source == "network-row-norm"


def test_importance_matches_loop():
    rng = np.random.default_rng(0)
    W = rng.normal(size=(9, 5))
    imp = importance(TwoLayerNet(W, np.ones(5), np.zeros(5))).values
    for i in range(9):
        assert imp[i] == pytest.approx(math.sqrt(sum(w * w for w in W[i])), rel=1e-12)


def test_importance_deep_uses_first_layer():
    rng = np.random.default_rng(1)
    W = rng.normal(size=(4, 3))
    deep = DeepNet(W, np.zeros(3), ((rng.normal(size=(3, 2)), np.zeros(2)),), np.ones(2))
    np.testing.assert_array_equal(importance(deep).values, np.linalg.norm(W, axis=1))


def test_importance_vector_validation():
    with pytest.raises(ValueError):
        ImportanceVector([1.0, -1.0])
    with pytest.raises(ValueError):
        ImportanceVector([1.0, np.inf])


# -- threshold and top-k -----------------------------------------------------------------

def test_threshold_examples():
    assert threshold_select([0.1, 5, 0.2, 7], 1) == {1, 3}
    assert threshold_select([0.1, 5, 0.2], 0) == {0, 1, 2}
    assert threshold_select([0.1, 5, 0.2], 5) == set()


@given(vectors, st.floats(0, 100), st.floats(0, 100))
def test_threshold_antitone(v, t1, t2):
    lo, hi = sorted((t1, t2))
    assert threshold_select(v, hi) <= threshold_select(v, lo)


def test_topk_examples():
    assert topk_select([1, 3, 2], 1) == {1}
    assert topk_select([2, 2, 1], 1) == {0}
    assert topk_select([1, 3, 2], 3) == {0, 1, 2}
    with pytest.raises(ValueError):
        topk_select([1, 2], 3)
    with pytest.raises(ValueError):
        topk_select([1, 2], 0)


# -- clustering -------------------------------------------------------------------------

@pytest.mark.parametrize("method", ["kmeans2", "gmm2"])
def test_cluster_clear_bimodality(method):
    assert cluster_select([10, 10, 10, 0.1, 0.1], method) == ({0, 1, 2}, False)


@pytest.mark.parametrize("method", ["kmeans2", "gmm2"])
def test_cluster_all_equal_is_degenerate(method):
    assert cluster_select([0.3] * 6, method) == (frozenset(), True)
    assert cluster_select([0.0] * 6, method) == (frozenset(), True)


def test_cluster_errors():
    with pytest.raises(ValueError):
        cluster_select([1.0], "kmeans2")
    with pytest.raises(ValueError):
        cluster_select([1.0, 2.0], "kmeans3")


@pytest.mark.parametrize("seed", range(20))
def test_kmeans_split_equals_exhaustive_scan(seed):
    rng = np.random.default_rng(seed)
    for _ in range(10):
        v, _ = bimodal(rng, p=int(rng.integers(2, 25)))
        selected, _ = cluster_select(v, "kmeans2")
        sse, high = best_split_sse((v / v.max()).tolist())
        assert selected == high
        _, _, fast_sse = kmeans2_split(v)
        assert fast_sse == pytest.approx(best_split_sse(v.tolist())[0], rel=1e-9, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(vectors)
def test_kmeans_sse_is_minimal(v):
    v = np.array(v)
    assume(v.max() - v.min() > 1e-6)
    _, _, sse = kmeans2_split(v)
    assert sse <= best_split_sse(v.tolist())[0] * (1 + 1e-9) + 1e-9


@pytest.mark.parametrize("seed", range(10))
def test_gmm_recovers_well_separated_groups(seed):
    v, truth = bimodal(np.random.default_rng(100 + seed), p=30, k=5)
    assert cluster_select(v, "gmm2", seed=seed)[0] == truth


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.floats(1e-3, 1e3))
def test_selection_scale_invariant(seed, c):
    rng = np.random.default_rng(seed)
    v, truth = bimodal(rng, p=15)
    for method in ("kmeans2", "gmm2"):
        assert cluster_select(v, method, 3) == cluster_select(v * c, method, 3)
    k = int(rng.integers(1, 15))
    assert topk_select(v, k) == topk_select(v * c, k)
    if 0 < len(truth) < 15:
        assert auc_score(v, truth) == pytest.approx(auc_score(v * c, truth), abs=1e-12)


# -- metrics ------------------------------------------------------------------------------

def test_evaluate_selection_examples():
    assert evaluate_selection({0, 1, 2}, {0, 1, 2}) == (3, 0)
    assert evaluate_selection(set(), {0, 1}) == (0, 0)
    assert evaluate_selection({1, 2, 8}, {0, 1, 2}) == (2, 1)


def test_auc_examples():
    assert auc_score([5, 4, 1, 0.5], {0, 1}) == 1.0
    assert auc_score([1, 1, 1, 1], {0, 2}) == 0.5
    with pytest.raises(ValueError, match="AUC undefined"):
        auc_score([1, 2, 3], set())
    with pytest.raises(ValueError, match="AUC undefined"):
        auc_score([1, 2, 3], {0, 1, 2})


@pytest.mark.parametrize("seed", range(10))
def test_auc_matches_pairwise_count(seed):
    rng = np.random.default_rng(seed)
    for _ in range(20):
        p = int(rng.integers(2, 30))
        v = rng.integers(0, 6, size=p).astype(float)  # plenty of ties
        k = int(rng.integers(1, p))
        truth = set(rng.choice(p, size=k, replace=False).tolist())
        assert auc_score(v, truth) == pytest.approx(pairwise_auc(v.tolist(), truth), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32))
def test_auc_reflection(seed):
    rng = np.random.default_rng(seed)
    v = rng.permutation(12).astype(float) + rng.uniform(0, 0.5)
    truth = set(rng.choice(12, size=int(rng.integers(1, 12)), replace=False).tolist())
    assert auc_score(v, truth) + auc_score(v.max() - v, truth) == pytest.approx(1.0, abs=1e-12)


def test_roc_examples():
    curve = roc_curve([5, 4, 1, 0.5], {0, 1})
    assert (0.0, 1.0) in curve
    assert roc_curve([2, 2, 2], {1}) == [(0.0, 0.0), (1.0, 1.0)]


@pytest.mark.parametrize("seed", range(10))
def test_roc_area_equals_auc(seed):
    rng = np.random.default_rng(50 + seed)
    for _ in range(10):
        p = int(rng.integers(2, 25))
        v = np.round(rng.uniform(0, 3, size=p), int(rng.integers(0, 3)))
        truth = set(rng.choice(p, size=int(rng.integers(1, p)), replace=False).tolist())
        curve = roc_curve(v, truth)
        assert curve[0] == (0.0, 0.0) and curve[-1] == (1.0, 1.0)
        xs, ys = zip(*curve)
        assert all(np.diff(xs) >= 0) and all(np.diff(ys) >= 0)
        assert len(curve) == len(np.unique(v)) + 1
        assert trapezoid_area(curve) == pytest.approx(auc_score(v, truth), abs=1e-12)


def test_select_report():
    rep = select([10, 10, 0.1, 0.1, 0.2], "kmeans2", true_support={0, 2})
    assert rep.selected == {0, 1}
    assert (rep.tp, rep.fp) == (1, 1)
    assert rep.tp + rep.fp == len(rep.selected)
    d = rep.to_dict()
    assert d["selected"] == [1, 2] and d["method"] == "kmeans2"
    assert select([1, 3, 2], "topk", k=2).selected == {1, 2}
    assert select([1, 3, 2], "threshold", threshold=1.5).tp is None
