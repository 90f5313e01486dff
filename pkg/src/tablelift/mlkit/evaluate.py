"""Fold construction, metrics, cross-validation, importances, and diffs."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..enrich import EnrichedTable
from ..errors import LengthMismatch, TooFewRows, UnsupportedTask
from .forest import ForestModel, fit_forest
from .linear import LassoModel, LogisticModel, fit_lasso, fit_logistic
from .vectorize import FeatureMatrix, TableVectorizer

MODEL_KINDS = ("lasso_linear", "random_forest")


# ---------------------------------------------------------------- metrics

def mse(truth, pred) -> float:
    t = np.asarray(truth, dtype=np.float64)
    p = np.asarray(pred, dtype=np.float64)
    return float(((t - p) ** 2).mean())


def rmse(truth, pred) -> float:
    return math.sqrt(mse(truth, pred))


def macro_f1(truth, pred) -> float:
    """Mean per-class F1 over every label seen in either vector."""
    classes = sorted(set(truth) | set(pred))
    total = 0.0
    for c in classes:
        tp = sum(1 for t, p in zip(truth, pred) if t == c and p == c)
        fp = sum(1 for t, p in zip(truth, pred) if t != c and p == c)
        fn = sum(1 for t, p in zip(truth, pred) if t == c and p != c)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        if precision + recall:
            total += 2 * precision * recall / (precision + recall)
    return total / len(classes)


# ---------------------------------------------------------------- folds

def shuffled_folds(n: int, folds: int, seed: int) -> list[list[int]]:
    perm = np.random.default_rng(seed).permutation(n)
    return [sorted(int(i) for i in chunk) for chunk in np.array_split(perm, folds)]


def stratified_folds(labels: list, folds: int, seed: int) -> list[list[int]]:
    """Per-class shuffle, then round-robin deal, so every fold gets each
    class's share within one row."""
    rng = np.random.default_rng(seed)
    out: list[list[int]] = [[] for _ in range(folds)]
    by_class: dict = {}
    for i, lab in enumerate(labels):
        by_class.setdefault(lab, []).append(i)
    for lab in sorted(by_class):
        members = np.array(by_class[lab])
        members = members[rng.permutation(len(members))]
        for j, idx in enumerate(members):
            out[j % folds].append(int(idx))
    return [sorted(f) for f in out]


# ---------------------------------------------------------------- config

@dataclass(frozen=True)
class EvalConfig:
    model: str = "random_forest"
    folds: int = 4
    metric: str | None = None  # None picks MSE/macroF1 by task; "rmse" forces RMSE
    scheme: str = "auto"
    seed: int = 0
    lam: float = 0.01
    n_trees: int = 100
    select_method: str | None = None
    select_count: int | None = None


@dataclass(frozen=True)
class EvalReport:
    task_kind: str
    metric: str
    fold_scores: tuple[float, ...]
    mean: float
    std: float
    wall_time_seconds: float

    def to_json(self) -> dict:
        return {
            "task_kind": self.task_kind,
            "metric": self.metric,
            "fold_scores": list(self.fold_scores),
            "mean": self.mean,
            "std": self.std,
            "wall_time_seconds": self.wall_time_seconds,
        }


@dataclass(frozen=True)
class ImportanceEntry:
    name: str
    importance: float
    origin: str


@dataclass(frozen=True)
class ImportanceReport:
    entries: tuple[ImportanceEntry, ...]

    def to_json(self) -> dict:
        return {"features": [{"name": e.name, "importance": e.importance,
                              "origin": e.origin} for e in self.entries]}


# ---------------------------------------------------------------- training

def train(X: FeatureMatrix, kind: str = "random_forest", *, lam: float = 0.01,
          n_trees: int = 100, bootstrap: bool = True, mtry: int | None = None,
          min_leaf: int = 1, seed: int = 0):
    if kind == "lasso_linear":
        if X.task_kind == "regression":
            return fit_lasso(X.values, np.asarray(X.target, dtype=np.float64),
                             lam=lam, seed=seed)
        return fit_logistic(X.values, X.target, lam=lam, seed=seed)
    if kind == "random_forest":
        return fit_forest(X.values, X.target, X.task_kind, n_trees=n_trees,
                          bootstrap=bootstrap, mtry=mtry, min_leaf=min_leaf,
                          seed=seed)
    raise ValueError(f"unknown model kind {kind!r}")


# ---------------------------------------------------------------- CV

def _metric_name(task_kind: str, metric: str | None) -> str:
    if task_kind == "classification":
        return "macroF1"
    return "RMSE" if metric == "rmse" else "MSE"


def _fold_score(metric: str, truth, pred) -> float:
    if metric == "macroF1":
        return macro_f1(list(truth), list(pred))
    if metric == "RMSE":
        return rmse(truth, pred)
    return mse(truth, pred)


def cross_validate_detailed(table: EnrichedTable, config: EvalConfig):
    """k-fold evaluation that also returns out-of-fold predictions.

    Each fold fits its own vectorizer on the training rows, so test-split
    vocabulary and imputation never leak in.  Returns
    (EvalReport, predictions, truth) with the vectors aligned to row order.
    """
    start = time.perf_counter()
    n = len(table.base.rows)
    if n < config.folds:
        raise TooFewRows(f"{n} rows cannot fill {config.folds} folds")
    task_kind = table.base.task_kind
    if task_kind == "classification":
        labels = [row[table.base.task_column] for row in table.base.rows]
        folds = stratified_folds(labels, config.folds, config.seed)
    else:
        folds = shuffled_folds(n, config.folds, config.seed)
    metric = _metric_name(task_kind, config.metric)

    predictions: list = [None] * n
    truth: list = [None] * n
    scores = []
    for f, test_rows in enumerate(folds):
        train_rows = sorted(i for g, fold in enumerate(folds) if g != f
                            for i in fold)
        vec = TableVectorizer(config.scheme).fit(table, train_rows)
        X_train = vec.transform(table, train_rows)
        X_test = vec.transform(table, test_rows)
        if config.select_method is not None and X_train.feature_count:
            from .selection import select_features

            count = min(config.select_count or X_train.feature_count,
                        X_train.feature_count)
            picked = select_features(X_train, config.select_method, count,
                                     seed=config.seed)
            X_train = X_train.take(picked)
            X_test = X_test.take(picked)
        model = train(X_train, config.model, lam=config.lam,
                      n_trees=config.n_trees, seed=config.seed)
        preds = model.predict(X_test.values)
        scores.append(_fold_score(metric, X_test.target, preds))
        for i, row in enumerate(test_rows):
            predictions[row] = preds[i]
            truth[row] = X_test.target[i]
    mean = float(np.mean(scores))
    std = float(np.std(scores, ddof=1)) if len(scores) > 1 else 0.0
    report = EvalReport(task_kind=task_kind, metric=metric,
                        fold_scores=tuple(scores), mean=mean, std=std,
                        wall_time_seconds=time.perf_counter() - start)
    return report, predictions, truth


def cross_validate(table: EnrichedTable, config: EvalConfig) -> EvalReport:
    report, _, _ = cross_validate_detailed(table, config)
    return report


# ---------------------------------------------------------------- importance

def feature_importance(model, X: FeatureMatrix) -> ImportanceReport:
    """Normalized per-feature contribution, tagged with feature origin."""
    if isinstance(model, ForestModel):
        raw = np.asarray(model.feature_importances_, dtype=np.float64)
    elif isinstance(model, LogisticModel):
        raw = np.abs(model.weights).sum(axis=0)
    elif isinstance(model, LassoModel):
        raw = np.abs(model.weights)
    else:
        raise ValueError(f"unsupported model {type(model).__name__}")
    total = raw.sum()
    norm = raw / total if total > 0 else raw
    order = np.lexsort((np.arange(len(norm)), -norm))
    entries = tuple(ImportanceEntry(name=X.feature_names[i],
                                    importance=float(norm[i]),
                                    origin=X.origins[i])
                    for i in order)
    return ImportanceReport(entries)


# ---------------------------------------------------------------- diffs

_DIFF_FLAGS = ("fixed", "broken", "both-wrong-changed")


def record_diffs(before, after, truth, task_kind: str) -> list[dict]:
    """Rows whose prediction changed, flagged by what the change did."""
    if task_kind != "classification":
        raise UnsupportedTask("prediction diffs exist for classification only")
    if not (len(before) == len(after) == len(truth)):
        raise LengthMismatch(
            f"lengths differ: {len(before)}, {len(after)}, {len(truth)}")
    out = []
    for i, (b, a, t) in enumerate(zip(before, after, truth)):
        if b == a:
            continue
        if b != t and a == t:
            flag = "fixed"
        elif b == t and a != t:
            flag = "broken"
        else:
            flag = "both-wrong-changed"
        out.append({"row": i, "before": b, "after": a, "truth": t, "flag": flag})
    return out
