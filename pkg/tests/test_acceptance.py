"""End-to-end acceptance criteria, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL`` line (collected again in
the terminal summary) and then asserts at the stated tolerance.  The
training-based criteria take several minutes on one core.
"""
import math

import numpy as np
import pytest

from sparse_relu.baselines import kkt_violation, lambda_max, lasso_cd
from sparse_relu.harness import ExperimentConfig, run_experiment
from sparse_relu.identify import brute_force_match, cost_matrices, match_networks
from sparse_relu.net import TwoLayerNet, canonicalize
from sparse_relu.select import auc_score, cluster_select, importance, roc_curve, trapezoid_area
from sparse_relu.synthgen import PlantedSpec, gen_planted
from sparse_relu.train import Grid, TrainConfig, _flatten, _rebuild, fit, gradient, penalized_loss

from oracles import pairwise_auc

pytestmark = pytest.mark.acceptance

DESK = Grid()


def planted_fit(seed, sigma):
    """Training setup shared by the identifiability and noise criteria."""
    spec = PlantedSpec(p=50, r_star=3, s=5, normalize_columns=True, sigma=sigma, n_train=2000,
                       n_test=10, seed=seed)
    train, _ = gen_planted(spec)
    res = fit(train.X, train.y, TrainConfig(lam=0.005, width=20, learning_rate=0.01, epochs=500, seed=seed))
    return train, res.net


def mean_metric(result, method, sigma, metric):
    row = next(r for r in result.aggregate
               if r["method"] == method and r["sigma"] == sigma and r["metric"] == metric)
    return row["mean"]


# -- 1 ------------------------------------------------------------------------------------

def test_noiseless_identifiability(verdict):
    hits, d2s, sel_ok = 0, [], []
    for seed in range(10):
        train, net = planted_fit(seed, 0.0)
        d2 = match_networks(canonicalize(net), train.planted_net).D2
        selected, _ = cluster_select(importance(net), "gmm2", seed)
        ok_sel = selected == set(train.true_support)
        d2s.append(d2)
        sel_ok.append(ok_sel)
        hits += d2 <= 0.15 and ok_sel
    detail = (f"{hits}/10 seeds with D2<=0.15 and exact support (need >=8); "
              f"support exact in {sum(sel_ok)}/10; D2 per seed " + " ".join(f"{d:.3f}" for d in d2s))
    assert verdict(1, hits >= 8, detail)


# -- 2 ------------------------------------------------------------------------------------

def test_planted_table_noiseless(verdict):
    cfg = ExperimentConfig(generator="planted",
                           generator_params=dict(p=100, r_star=16, s=10, n_train=500, n_test=2000),
                           sigmas=(0.0,), methods=("nn2",), grid=DESK, replications=10, seed=1)
    res = run_experiment(cfg)
    tp, fp, auc = (mean_metric(res, "nn2", 0.0, m) for m in ("TP", "FP", "AUC"))
    ok = tp >= 9.0 and fp <= 3.0 and auc >= 0.97
    assert verdict(2, ok, f"NN-2 mean TP {tp:.2f} (>=9), FP {fp:.2f} (<=3), AUC {auc:.4f} (>=0.97)")


# -- 3 ------------------------------------------------------------------------------------

def test_linear_table(verdict):
    params = dict(n_train=60, n_test=200)
    lasso = run_experiment(ExperimentConfig(generator="linear", generator_params=params, sigmas=(0.0, 1.0),
                                            methods=("lasso",), replications=20, seed=3))
    exact = {s: sum(1 for r in lasso.records if r["sigma"] == s and (r["tp"], r["fp"]) == (3.0, 0.0))
             for s in (0.0, 1.0)}
    nn = run_experiment(ExperimentConfig(generator="linear", generator_params=params, sigmas=(0.0,),
                                         methods=("nn2",), grid=DESK, replications=20, seed=3))
    auc = mean_metric(nn, "nn2", 0.0, "AUC")
    ok = exact[0.0] >= 18 and exact[1.0] >= 18 and auc >= 0.95
    assert verdict(3, ok, f"LASSO exact (3,0) in {exact[0.0]}/20 at sigma=0 and {exact[1.0]}/20 at sigma=1 "
                          f"(need >=18); NN-2 mean AUC {auc:.4f} (>=0.95)")


# -- 4 ------------------------------------------------------------------------------------

def test_friedman_table(verdict):
    cfg = ExperimentConfig(generator="friedman", generator_params=dict(p=50, n_train=500, n_test=2000),
                           sigmas=(0.0,), methods=("nn2", "lasso"), grid=DESK, replications=10, seed=4)
    res = run_experiment(cfg)
    tp, auc = mean_metric(res, "nn2", 0.0, "TP"), mean_metric(res, "nn2", 0.0, "AUC")
    lasso_tp = mean_metric(res, "lasso", 0.0, "TP")
    ok = tp >= 4.0 and auc >= 0.97 and lasso_tp <= 4.5
    assert verdict(4, ok, f"NN-2 mean TP {tp:.2f} (>=4), AUC {auc:.4f} (>=0.97); LASSO mean TP {lasso_tp:.2f} (<=4.5)")


# -- 5 ------------------------------------------------------------------------------------

def test_noise_degrades_auc(verdict):
    clean, noisy = [], []
    for seed in range(10):
        for sigma, bucket in ((0.0, clean), (5.0, noisy)):
            train, net = planted_fit(seed, sigma)
            bucket.append(auc_score(importance(net), train.true_support))
    lo, hi = float(np.mean(noisy)), float(np.mean(clean))
    assert verdict(5, lo < hi, f"mean AUC sigma=5 {lo:.4f} < sigma=0 {hi:.4f}")


# -- 6 ------------------------------------------------------------------------------------

def _filtered_point(rng):
    while True:
        p, r, n = (int(v) for v in rng.integers(2, 6, size=3))
        W, b, a = rng.normal(size=(p, r)), rng.normal(size=r), rng.normal(size=r)
        X = rng.normal(size=(n, p))
        if np.all(np.abs(X @ W + b) > 1e-3) and np.all(np.abs(W) > 1e-3):
            return TwoLayerNet(W, a, b), X, rng.normal(size=n)


def test_gradient_oracle(verdict):
    rng = np.random.default_rng(6)
    h, worst = 1e-5, 0.0
    for _ in range(200):
        net, X, y = _filtered_point(rng)
        lam = float(rng.uniform(0, 0.5))
        analytic = _flatten(gradient(net, X, y, lam))
        flat = [np.array(v) for v in _flatten(net)]
        for k, arr in enumerate(flat):
            for idx in np.ndindex(arr.shape):
                up = [v.copy() for v in flat]
                dn = [v.copy() for v in flat]
                up[k][idx] += h
                dn[k][idx] -= h
                numeric = (penalized_loss(_rebuild(net, up), X, y, lam)
                           - penalized_loss(_rebuild(net, dn), X, y, lam)) / (2 * h)
                scale = max(abs(numeric), abs(analytic[k][idx]), 1e-6)
                worst = max(worst, abs(analytic[k][idx] - numeric) / scale)
    assert verdict(6, worst <= 1e-4, f"max relative error {worst:.2e} over 200 points (<=1e-4)")


# -- 7 ------------------------------------------------------------------------------------

def test_matching_oracle(verdict):
    rng = np.random.default_rng(7)
    worst, cost_equal = 0.0, True
    for i in range(200):
        r = 2 + i % 5
        p = int(rng.integers(1, 5))
        A = TwoLayerNet(rng.normal(size=(p, r)), rng.choice([-1.0, 1.0], size=r), rng.normal(size=r))
        B = TwoLayerNet(rng.normal(size=(p, r)), rng.choice([-1.0, 1.0], size=r), rng.normal(size=r))
        fast, slow = match_networks(A, B), brute_force_match(A, B)
        worst = max(worst, abs(fast.D1 - slow.D1), abs(fast.D2 - slow.D2))
        cols = np.arange(r)
        _, C2 = cost_matrices(A, B)
        cost_equal &= math.isclose(C2[fast.permutation, cols].sum(), C2[slow.permutation, cols].sum(),
                                   rel_tol=1e-12, abs_tol=1e-12)
    ok = worst <= 1e-12 and cost_equal
    assert verdict(7, ok, f"max |assignment - brute force| {worst:.1e} over 200 pairs; optimal costs equal: {cost_equal}")


# -- 8 ------------------------------------------------------------------------------------

def _bounded_pair(rng):
    p, r = int(rng.integers(2, 8)), int(rng.integers(1, 6))
    Ws = rng.normal(size=(p, r)) * (rng.uniform(size=(p, r)) < 0.6)
    bs = rng.normal(size=r) * (rng.uniform(size=r) < 0.6)
    norms = np.sqrt((Ws ** 2).sum(axis=0) + bs ** 2)
    norms[norms == 0] = 1
    Ws, bs = Ws / norms * rng.uniform(0.1, 1, size=r), bs / norms * rng.uniform(0.1, 1, size=r)
    if rng.uniform() < 0.5:
        W = Ws + 0.1 * rng.normal(size=(p, r)) * (rng.uniform(size=(p, r)) < 0.5)
        b = bs + 0.1 * rng.normal(size=r) * (rng.uniform(size=r) < 0.5)
    else:
        W = rng.normal(size=(p, r)) * (rng.uniform(size=(p, r)) < 0.5)
        b = rng.normal(size=r) * (rng.uniform(size=r) < 0.5)
    budget = np.abs(Ws).sum() + np.abs(bs).sum()
    mass = np.abs(W).sum() + np.abs(b).sum()
    if mass > budget:
        W, b = W * budget / mass, b * budget / mass
    a_star = rng.choice([-1.0, 1.0], size=r)
    a = a_star.copy() if rng.uniform() < 0.5 else rng.choice([-1.0, 1.0], size=r)
    S = sum(np.count_nonzero(v) for v in (W, b, Ws, bs))
    return TwoLayerNet(W, a, b), TwoLayerNet(Ws, a_star, bs), S


def test_d1_d2_inequality(verdict):
    rng = np.random.default_rng(8)
    violations, tightest = 0, 0.0
    for _ in range(500):
        trained, planted, S = _bounded_pair(rng)
        m = match_networks(trained, planted)
        bound = 2 * math.sqrt(S) * m.D2
        violations += m.D1 > bound + 1e-9
        if bound > 0:
            tightest = max(tightest, m.D1 / bound)
    assert verdict(8, violations == 0, f"{violations} violations in 500 pairs; max D1/(2 sqrt(S) D2) = {tightest:.3f}")


# -- 9 ------------------------------------------------------------------------------------

def test_auc_oracle(verdict):
    rng = np.random.default_rng(9)
    worst_auc = worst_roc = 0.0
    for i in range(500):
        p = int(rng.integers(2, 40))
        v = rng.integers(0, 8, size=p).astype(float) if i % 2 else rng.uniform(0, 1, size=p)
        truth = set(rng.choice(p, size=int(rng.integers(1, p)), replace=False).tolist())
        auc = auc_score(v, truth)
        worst_auc = max(worst_auc, abs(auc - pairwise_auc(v.tolist(), truth)))
        worst_roc = max(worst_roc, abs(trapezoid_area(roc_curve(v, truth)) - auc))
    ok = worst_auc <= 1e-12 and worst_roc <= 1e-12
    assert verdict(9, ok, f"max |rank - pairwise| {worst_auc:.1e}, max |ROC area - AUC| {worst_roc:.1e} over 500 instances")


# -- 10 -----------------------------------------------------------------------------------

def test_lasso_correctness(verdict):
    rng = np.random.default_rng(10)
    tol = 1e-10
    kkt_ok = True
    for _ in range(100):
        n, p = int(rng.integers(10, 80)), int(rng.integers(2, 20))
        X = rng.normal(size=(n, p)) * rng.uniform(0.5, 3, size=p)
        y = X[:, :2] @ rng.normal(size=2) + rng.normal(size=n)
        lam = lambda_max(X, y) * float(rng.uniform(0.01, 0.9))
        fit_ = lasso_cd(X, y, lam, tol=tol)
        col_norm = np.linalg.norm(X - X.mean(axis=0), axis=0)
        kkt_ok &= bool(np.all(kkt_violation(X, y, fit_) <= 10 * tol * col_norm))
    closed_worst = 0.0
    for _ in range(50):
        n = int(rng.integers(5, 40))
        p = int(rng.integers(1, n + 1))
        Q, _ = np.linalg.qr(rng.normal(size=(n, p)))
        X = Q * math.sqrt(n)  # X'X / n = I
        y = rng.normal(size=n) * 2
        lam = float(rng.uniform(0, 1.5))
        z = X.T @ y / n
        expected = np.sign(z) * np.maximum(np.abs(z) - lam, 0)
        closed_worst = max(closed_worst, float(np.abs(lasso_cd(X, y, lam, fit_intercept=False).beta - expected).max()))
    zero_ok = True
    for _ in range(50):
        X = rng.normal(size=(30, 6))
        y = rng.normal(size=30)
        lmax = lambda_max(X, y)
        zero_ok &= all(np.all(lasso_cd(X, y, lmax * c).beta == 0) for c in (1.0, 1.5, 10.0))
    ok = kkt_ok and closed_worst <= 1e-10 and zero_ok
    assert verdict(10, ok, f"KKT bounds hold on 100 problems: {kkt_ok}; orthonormal max error {closed_worst:.1e}; "
                           f"lambda>=lambda_max gives zeros: {zero_ok}")
