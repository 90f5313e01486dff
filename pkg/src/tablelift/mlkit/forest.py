"""Random forest on top of the split-scan kernels.

Trees grow depth-first with an explicit stack; each tree owns a generator
derived from (seed, tree index) so training is reproducible and trees stay
independent.  Split thresholds are midpoints nudged down to the left value
when rounding would leak the right neighbor across the boundary; rows route
left on x <= threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels as kernels
from ..errors import DegenerateTarget

N_TREES = 100
MIN_LEAF = 1


@dataclass
class _Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def apply(self, values: np.ndarray) -> np.ndarray:
        node = np.zeros(len(values), dtype=np.int64)
        while True:
            mask = self.feature[node] >= 0
            if not mask.any():
                return self.value[node]
            rows = np.flatnonzero(mask)
            nd = node[rows]
            x = values[rows, self.feature[nd]]
            goes_left = x <= self.threshold[nd]
            node[rows] = np.where(goes_left, self.left[nd], self.right[nd])


class _TreeBuilder:
    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def add(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def done(self) -> _Tree:
        return _Tree(np.array(self.feature, dtype=np.int64),
                     np.array(self.threshold),
                     np.array(self.left, dtype=np.int64),
                     np.array(self.right, dtype=np.int64),
                     np.array(self.value))


def _grow_tree(values, target, is_classification, n_classes, mtry, min_leaf,
               rng, importance, n_root):
    builder = _TreeBuilder()
    root = builder.add()
    stack = [(root, np.arange(len(target)))]
    p = values.shape[1]
    while stack:
        node, idx = stack.pop()
        sub_t = target[idx]
        pure = bool((sub_t == sub_t[0]).all())
        if len(idx) < 2 * min_leaf or pure:
            builder.value[node] = _leaf_value(sub_t, is_classification, n_classes)
            continue
        if mtry >= p:
            feats = range(p)
        else:
            feats = rng.choice(p, size=mtry, replace=False)
        best = None
        best_cost = math.inf
        for f in feats:
            v = values[idx, f]
            order = np.argsort(v, kind="stable")
            sv = np.ascontiguousarray(v[order])
            if is_classification:
                st = np.ascontiguousarray(sub_t[order].astype(np.int32))
                pos, cost, parent = kernels.best_split_classification(
                    sv, st, n_classes, min_leaf)
            else:
                st = np.ascontiguousarray(sub_t[order].astype(np.float64))
                pos, cost, parent = kernels.best_split_regression(sv, st, min_leaf)
            if pos >= 0 and cost < best_cost:
                v1, v2 = sv[pos - 1], sv[pos]
                thr = (v1 + v2) / 2.0
                if thr >= v2:
                    thr = v1
                best = (f, order, pos, thr, parent)
                best_cost = cost
        if best is None:
            builder.value[node] = _leaf_value(sub_t, is_classification, n_classes)
            continue
        f, order, pos, thr, parent = best
        importance[f] += (len(idx) / n_root) * (parent - best_cost)
        left_id = builder.add()
        right_id = builder.add()
        builder.feature[node] = int(f)
        builder.threshold[node] = float(thr)
        builder.left[node] = left_id
        builder.right[node] = right_id
        stack.append((right_id, idx[order[pos:]]))
        stack.append((left_id, idx[order[:pos]]))
    return builder.done()


def _leaf_value(sub_t, is_classification, n_classes) -> float:
    if is_classification:
        return float(np.bincount(sub_t.astype(np.int64), minlength=n_classes).argmax())
    return float(sub_t.mean())


class ForestModel:
    kind = "random_forest"

    def __init__(self, task_kind, trees, classes, importances, seed):
        self.task_kind = task_kind
        self.trees = trees
        self.classes = classes  # sorted labels for classification, else None
        self.feature_importances_ = importances
        self.seed = seed

    def predict(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        if self.task_kind == "regression":
            acc = np.zeros(len(values))
            for tree in self.trees:
                acc += tree.apply(values)
            return acc / len(self.trees)
        votes = np.zeros((len(values), len(self.classes)), dtype=np.int64)
        for tree in self.trees:
            codes = tree.apply(values).astype(np.int64)
            votes[np.arange(len(values)), codes] += 1
        picks = votes.argmax(axis=1)
        return np.array([self.classes[i] for i in picks], dtype=object)


def fit_forest(values: np.ndarray, target, task_kind: str,
               n_trees: int = N_TREES, bootstrap: bool = True,
               mtry: int | None = None, min_leaf: int = MIN_LEAF,
               seed: int = 0) -> ForestModel:
    values = np.asarray(values, dtype=np.float64)
    n, p = values.shape
    is_classification = task_kind == "classification"
    if is_classification:
        labels = list(target)
        classes = tuple(sorted(set(labels)))
        if len(classes) < 2:
            raise DegenerateTarget("need at least 2 classes")
        code_of = {c: i for i, c in enumerate(classes)}
        y = np.array([code_of[lab] for lab in labels], dtype=np.int64)
        n_classes = len(classes)
    else:
        classes = None
        y = np.asarray(target, dtype=np.float64)
        if len(y) < 2 or y.std() == 0.0:
            raise DegenerateTarget("target is constant or too short")
        n_classes = 0
    if mtry is None:
        mtry = math.ceil(math.sqrt(p)) if is_classification else math.ceil(p / 3)
    mtry = max(1, min(mtry, p))

    importance = np.zeros(p)
    trees = []
    for t in range(n_trees):
        rng = np.random.default_rng([seed, t])
        rows = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        trees.append(_grow_tree(values[rows], y[rows], is_classification,
                                n_classes, mtry, min_leaf, rng, importance,
                                len(rows)))
    total = importance.sum()
    importances = importance / total if total > 0 else importance
    return ForestModel(task_kind, trees, classes, importances, seed)
