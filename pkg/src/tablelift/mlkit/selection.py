"""Feature scoring and subset selection.

Six methods share one entry point.  The wrapper methods (forward, backward,
rfe) evaluate candidates with the task's base linear model: forward and
backward by 2-fold validation score, rfe by fold-averaged coefficient
magnitude.  All methods return ascending feature indices.
"""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateTarget, InvalidCount
from .evaluate import shuffled_folds, stratified_folds, macro_f1, mse
from .forest import fit_forest
from .linear import fit_lasso, fit_logistic
from .vectorize import FeatureMatrix

METHODS = ("f_value", "forward", "backward", "rfe", "rf_importance", "l1")

MAX_FINITE = float(np.finfo(np.float64).max)


def f_value_scores(X: FeatureMatrix) -> np.ndarray:
    """Per-feature F statistic against the target; infinite values are
    capped at the largest finite double so the ranking stays total."""
    values = X.values
    n = len(values)
    if X.task_kind == "classification":
        labels = list(X.target)
        classes = sorted(set(labels))
        if len(classes) < 2:
            raise DegenerateTarget("need at least 2 classes")
        groups = [np.array([i for i, lab in enumerate(labels) if lab == c])
                  for c in classes]
        grand = values.mean(axis=0)
        ssb = np.zeros(values.shape[1])
        ssw = np.zeros(values.shape[1])
        for g in groups:
            gm = values[g].mean(axis=0)
            ssb += len(g) * (gm - grand) ** 2
            ssw += ((values[g] - gm) ** 2).sum(axis=0)
        dfb = len(classes) - 1
        dfw = n - len(classes)
        out = np.empty(values.shape[1])
        for j in range(values.shape[1]):
            if ssw[j] == 0.0 or dfw <= 0:
                out[j] = MAX_FINITE if ssb[j] > 0 else 0.0
            else:
                out[j] = (ssb[j] / dfb) / (ssw[j] / dfw)
        return out
    y = np.asarray(X.target, dtype=np.float64)
    if y.std() == 0.0:
        raise DegenerateTarget("target has zero variance")
    yc = y - y.mean()
    out = np.empty(values.shape[1])
    for j in range(values.shape[1]):
        x = values[:, j]
        sx = x.std()
        if sx == 0.0:
            out[j] = 0.0
            continue
        r = float((x - x.mean()) @ yc) / (n * sx * y.std())
        r2 = min(r * r, 1.0)
        if r2 >= 1.0:
            out[j] = MAX_FINITE
        else:
            out[j] = r2 / (1.0 - r2) * max(n - 2, 1)
    return out


def _base_model(values: np.ndarray, target, task_kind: str, seed: int):
    if task_kind == "regression":
        return fit_lasso(values, np.asarray(target, dtype=np.float64), seed=seed)
    return fit_logistic(values, target, seed=seed)


def _coef_magnitudes(model) -> np.ndarray:
    if model.task_kind == "regression":
        return np.abs(model.weights)
    return np.abs(model.weights).sum(axis=0)


def _internal_folds(X: FeatureMatrix, seed: int) -> list[list[int]]:
    if X.task_kind == "classification":
        return stratified_folds(list(X.target), 2, seed)
    return shuffled_folds(len(X.values), 2, seed)


def _cv_loss(X: FeatureMatrix, cols: list[int], folds: list[list[int]],
             seed: int) -> float:
    """Mean 2-fold validation loss (lower is better for both task kinds)."""
    losses = []
    for f in range(len(folds)):
        test = folds[f]
        trainers = [i for g, fold in enumerate(folds) if g != f for i in fold]
        model = _base_model(X.values[np.ix_(trainers, cols)],
                            [X.target[i] for i in trainers]
                            if X.task_kind == "classification"
                            else X.target[trainers],
                            X.task_kind, seed)
        preds = model.predict(X.values[np.ix_(test, cols)])
        if X.task_kind == "classification":
            losses.append(-macro_f1([X.target[i] for i in test], list(preds)))
        else:
            losses.append(mse(X.target[test], preds))
    return float(np.mean(losses))


def _fold_averaged_coefs(X: FeatureMatrix, cols: list[int],
                         folds: list[list[int]], seed: int) -> np.ndarray:
    acc = np.zeros(len(cols))
    for f in range(len(folds)):
        trainers = [i for g, fold in enumerate(folds) if g != f for i in fold]
        model = _base_model(X.values[np.ix_(trainers, cols)],
                            [X.target[i] for i in trainers]
                            if X.task_kind == "classification"
                            else X.target[trainers],
                            X.task_kind, seed)
        acc += _coef_magnitudes(model)
    return acc / len(folds)


def select_features(X: FeatureMatrix, method: str, target_count: int,
                    seed: int = 0) -> list[int]:
    if method not in METHODS:
        raise ValueError(f"unknown selection method {method!r}")
    p = X.feature_count
    if not 1 <= target_count <= p:
        raise InvalidCount(f"target_count must be in [1, {p}], got {target_count}")
    if target_count == p:
        return list(range(p))

    if method == "f_value":
        scores = f_value_scores(X)
        order = np.lexsort((np.arange(p), -scores))
        return sorted(int(i) for i in order[:target_count])

    if method == "rf_importance":
        model = fit_forest(X.values, X.target, X.task_kind, seed=seed)
        imp = model.feature_importances_
        order = np.lexsort((np.arange(p), -imp))
        return sorted(int(i) for i in order[:target_count])

    if method == "l1":
        model = _base_model(X.values, X.target, X.task_kind, seed)
        mags = _coef_magnitudes(model)
        nonzero = [int(i) for i in np.flatnonzero(mags > 0)]
        if len(nonzero) <= target_count:
            return sorted(nonzero)
        order = np.lexsort((np.arange(p), -mags))
        return sorted(int(i) for i in order[:target_count])

    folds = _internal_folds(X, seed)
    if method == "forward":
        chosen: list[int] = []
        remaining = list(range(p))
        while len(chosen) < target_count:
            best_i, best_loss = None, None
            for i in remaining:
                loss = _cv_loss(X, sorted(chosen + [i]), folds, seed)
                if best_loss is None or loss < best_loss:
                    best_i, best_loss = i, loss
            chosen.append(best_i)
            remaining.remove(best_i)
        return sorted(chosen)

    if method == "backward":
        kept = list(range(p))
        while len(kept) > target_count:
            best_i, best_loss = None, None
            for i in kept:
                trial = [j for j in kept if j != i]
                loss = _cv_loss(X, trial, folds, seed)
                if best_loss is None or loss < best_loss:
                    best_i, best_loss = i, loss
            kept.remove(best_i)
        return sorted(kept)

    # rfe: repeatedly drop the weakest coefficient
    kept = list(range(p))
    while len(kept) > target_count:
        coefs = _fold_averaged_coefs(X, kept, folds, seed)
        kept.pop(int(np.argmin(coefs)))
    return sorted(kept)
