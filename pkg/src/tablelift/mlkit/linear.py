"""L1-regularized linear models on standardized features.

Regression uses cyclic coordinate descent (the hot loop lives in the kernels
package).  Classification trains one-vs-rest logistic models by proximal
gradient steps with an unpenalized bias; the step size comes from a power
iteration bound on the logistic Hessian.
"""

from __future__ import annotations

import numpy as np

from .. import _kernels as kernels
from ..errors import DegenerateTarget

DEFAULT_LAMBDA = 0.01
TOLERANCE = 1e-6
MAX_SWEEPS = 10_000


def _standardize(values: np.ndarray):
    means = values.mean(axis=0)
    stds = values.std(axis=0)
    safe = np.where(stds == 0.0, 1.0, stds)
    return (values - means) / safe, means, safe


class LassoModel:
    """Linear regression with an L1 penalty; weights live in standardized space."""

    kind = "lasso_linear"
    task_kind = "regression"

    def __init__(self, means, stds, weights, intercept, seed, sweeps):
        self.means = means
        self.stds = stds
        self.weights = weights
        self.intercept = intercept
        self.seed = seed
        self.sweeps = sweeps

    def predict(self, values: np.ndarray) -> np.ndarray:
        scaled = (values - self.means) / self.stds
        return scaled @ self.weights + self.intercept


def fit_lasso(values: np.ndarray, target: np.ndarray, lam: float = DEFAULT_LAMBDA,
              tol: float = TOLERANCE, max_sweeps: int = MAX_SWEEPS,
              seed: int = 0) -> LassoModel:
    values = np.asarray(values, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if len(target) < 2:
        raise DegenerateTarget("need at least 2 rows")
    if target.std() == 0.0:
        raise DegenerateTarget("target has zero variance")
    scaled, means, stds = _standardize(values)
    intercept = float(target.mean())
    centered = target - intercept
    w = np.zeros(values.shape[1])
    xt = np.ascontiguousarray(scaled.T)
    sweeps = kernels.lasso_sweeps(xt, centered, lam, tol, max_sweeps, w)
    return LassoModel(means, stds, w, intercept, seed, sweeps)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -35.0, 35.0)))


def _lipschitz(scaled: np.ndarray) -> float:
    # largest eigenvalue of [X 1]^T [X 1] / (4n), by power iteration
    n = len(scaled)
    aug = np.hstack([scaled, np.ones((n, 1))])
    v = np.full(aug.shape[1], 1.0 / np.sqrt(aug.shape[1]))
    for _ in range(100):
        nxt = aug.T @ (aug @ v)
        norm = np.linalg.norm(nxt)
        if norm == 0.0:
            return 1.0
        v = nxt / norm
    return float(v @ (aug.T @ (aug @ v))) / (4.0 * n) * 1.01 + 1e-12


class LogisticModel:
    """One-vs-rest L1 logistic classifier; ties go to the first class."""

    kind = "lasso_linear"
    task_kind = "classification"

    def __init__(self, classes, means, stds, weights, biases, seed):
        self.classes = classes          # sorted label tuple
        self.means = means
        self.stds = stds
        self.weights = weights          # (classes, features), standardized
        self.biases = biases
        self.seed = seed

    def decision(self, values: np.ndarray) -> np.ndarray:
        scaled = (values - self.means) / self.stds
        return scaled @ self.weights.T + self.biases

    def predict(self, values: np.ndarray) -> np.ndarray:
        picks = self.decision(values).argmax(axis=1)
        return np.array([self.classes[i] for i in picks], dtype=object)


def fit_logistic(values: np.ndarray, labels, lam: float = DEFAULT_LAMBDA,
                 tol: float = TOLERANCE, max_iter: int = MAX_SWEEPS,
                 seed: int = 0) -> LogisticModel:
    values = np.asarray(values, dtype=np.float64)
    labels = list(labels)
    classes = tuple(sorted(set(labels)))
    if len(classes) < 2:
        raise DegenerateTarget("need at least 2 classes")
    scaled, means, stds = _standardize(values)
    n, p = scaled.shape
    step = 1.0 / _lipschitz(scaled)
    weights = np.zeros((len(classes), p))
    biases = np.zeros(len(classes))
    for ci, cls in enumerate(classes):
        y = np.array([1.0 if lab == cls else 0.0 for lab in labels])
        w = np.zeros(p)
        b = 0.0
        for _ in range(max_iter):
            resid = _sigmoid(scaled @ w + b) - y
            grad_w = scaled.T @ resid / n
            grad_b = float(resid.mean())
            raw = w - step * grad_w
            w_new = np.sign(raw) * np.maximum(np.abs(raw) - step * lam, 0.0)
            b_new = b - step * grad_b
            delta = max(float(np.abs(w_new - w).max(initial=0.0)), abs(b_new - b))
            w, b = w_new, b_new
            if delta < tol:
                break
        weights[ci] = w
        biases[ci] = b
    return LogisticModel(classes, means, stds, weights, biases, seed)
