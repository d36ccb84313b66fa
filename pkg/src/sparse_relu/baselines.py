"""Linear baselines: LASSO by coordinate descent and orthogonal matching pursuit."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .select import ImportanceVector


@dataclass
class LinearFit:
    beta: np.ndarray
    intercept: float
    lambda_or_k: float
    iterations: int
    method: str = "lasso"
    path: list = field(default_factory=list)
    objective_trace: list = field(default_factory=list)

    def predict(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.beta + self.intercept

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "beta": self.beta.tolist(),
            "intercept": self.intercept,
            "lambda_or_k": self.lambda_or_k,
            "iterations": self.iterations,
        }


def soft_threshold(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def _center(X, y, fit_intercept):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError(f"inconsistent shapes X {X.shape}, y {y.shape}")
    if X.shape[0] == 0:
        raise ValueError("empty dataset")
    if fit_intercept:
        xm, ym = X.mean(axis=0), y.mean()
        return X - xm, y - ym, xm, ym
    return X, y, np.zeros(X.shape[1]), 0.0


def lambda_max(X, y, fit_intercept: bool = True) -> float:
    """Smallest penalty at which the LASSO solution is identically zero."""
    Xc, yc, _, _ = _center(X, y, fit_intercept)
    n = Xc.shape[0]
    # Same per-column expression as the first coordinate-descent sweep, so
    # lam == lambda_max thresholds every coordinate to exactly zero.
    return max(abs(Xc[:, j] @ yc / n) for j in range(Xc.shape[1]))


def lasso_objective(X, y, beta, intercept, lam) -> float:
    r = np.asarray(y) - np.asarray(X) @ beta - intercept
    return float(r @ r / (2 * len(r)) + lam * np.abs(beta).sum())


def lasso_cd(X, y, lam: float, tol: float = 1e-10, max_iter: int = 10000,
             fit_intercept: bool = True) -> LinearFit:
    """Cyclic coordinate descent for ``(1/2n)||y - b0 - X beta||^2 + lam ||beta||_1``.

    Stops when the largest coordinate change in a sweep is below ``tol``.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    Xc, yc, xm, ym = _center(X, y, fit_intercept)
    n, p = Xc.shape
    col_sq = (Xc * Xc).sum(axis=0) / n
    dead = col_sq == 0
    if np.any(dead) and lam == 0:
        warnings.warn(f"skipping zero-variance columns {np.flatnonzero(dead).tolist()}")
    beta = np.zeros(p)
    resid = yc.copy()
    trace = [float(resid @ resid / (2 * n))]
    sweeps = 0
    for sweeps in range(1, max_iter + 1):
        max_change = 0.0
        for j in range(p):
            if dead[j]:
                continue
            old = beta[j]
            z = Xc[:, j] @ resid / n + col_sq[j] * old
            new = soft_threshold(z, lam) / col_sq[j]
            if new != old:
                resid -= Xc[:, j] * (new - old)
                beta[j] = new
                max_change = max(max_change, abs(new - old))
        trace.append(float(resid @ resid / (2 * n) + lam * np.abs(beta).sum()))
        if max_change < tol:
            break
    intercept = float(ym - xm @ beta) if fit_intercept else 0.0
    return LinearFit(beta, intercept, lam, sweeps, "lasso", objective_trace=trace)


def kkt_violation(X, y, fit: LinearFit, fit_intercept: bool = True) -> np.ndarray:
    """Per-coordinate slack in the LASSO optimality conditions (<= 0 means satisfied)."""
    Xc, yc, _, _ = _center(X, y, fit_intercept)
    n = Xc.shape[0]
    r = yc - Xc @ fit.beta
    g = Xc.T @ r / n
    lam = fit.lambda_or_k
    active = fit.beta != 0
    out = np.empty_like(g)
    out[active] = np.abs(g[active] - lam * np.sign(fit.beta[active]))
    out[~active] = np.abs(g[~active]) - lam
    return out


def omp(X, y, k: int, fit_intercept: bool = True) -> LinearFit:
    """Orthogonal matching pursuit with ``k`` greedy steps.

    Each step adds the column with the largest absolute correlation with the
    residual (ties to the smaller index) and refits least squares on the
    active set.  Stops early if the active columns become rank deficient.
    """
    Xc, yc, xm, ym = _center(X, y, fit_intercept)
    n, p = Xc.shape
    if not 1 <= k <= min(n, p):
        raise ValueError(f"k must lie in [1, {min(n, p)}], got {k}")
    norms = np.linalg.norm(Xc, axis=0)
    usable = norms > 0
    active: list[int] = []
    coef = np.zeros(0)
    resid = yc.copy()
    for _ in range(k):
        score = np.zeros(p)
        score[usable] = np.abs(Xc[:, usable].T @ resid) / norms[usable]
        score[active] = -1.0
        j = int(np.argmax(score))
        trial = active + [j]
        A = Xc[:, trial]
        if np.linalg.matrix_rank(A) < len(trial):
            break
        active = trial
        coef = np.linalg.lstsq(A, yc, rcond=None)[0]
        resid = yc - A @ coef
    beta = np.zeros(p)
    beta[active] = coef
    intercept = float(ym - xm @ beta) if fit_intercept else 0.0
    return LinearFit(beta, intercept, k, len(active), "omp", path=active)


def linear_importance(fit: LinearFit) -> ImportanceVector:
    return ImportanceVector(np.abs(fit.beta), "linear-coefficient")


def tune_lasso(X, y, X_val, y_val, n_steps: int = 11, **kw) -> LinearFit:
    """Pick lambda from ``lambda_max * 2**-i`` (i < n_steps) by validation MSE."""
    lmax = lambda_max(X, y)
    best, best_err = None, np.inf
    for i in range(n_steps):
        fit = lasso_cd(X, y, lmax * 2.0 ** (-i), **kw)
        err = float(np.mean((y_val - fit.predict(X_val)) ** 2))
        if err < best_err:
            best, best_err = fit, err
    return best


def tune_omp(X, y, X_val, y_val, k_max: int = 10) -> LinearFit:
    """Pick the step count in ``1..min(k_max, p)`` by validation MSE."""
    X = np.asarray(X, dtype=float)
    best, best_err = None, np.inf
    for k in range(1, min(k_max, X.shape[1], X.shape[0]) + 1):
        fit = omp(X, y, k)
        err = float(np.mean((y_val - fit.predict(X_val)) ** 2))
        if err < best_err:
            best, best_err = fit, err
    return best
