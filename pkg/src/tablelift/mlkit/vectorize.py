"""Turn an enriched table into a dense feature matrix.

Columns are typed by inspection: a column whose nonempty cells mostly parse
as numbers becomes one numeric feature (mean-imputed); everything else is
tokenized into per-column TF-IDF or one-hot features.  The vectorizer is a
fit/transform pair so cross-validation can learn vocabularies and imputation
means on the training split only.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..enrich import EnrichedTable, normalize_numeric
from ..errors import NoFeatures
from ..textenc import tokenize

SCHEMES = ("tfidf", "onehot", "auto")

# a column is numeric when at least this share of its nonempty cells parse
NUMERIC_SHARE = 0.8


@dataclass(frozen=True)
class FeatureMatrix:
    feature_names: tuple[str, ...]
    values: np.ndarray  # (rows, features) float64
    target: np.ndarray  # float64 for regression, object labels otherwise
    task_kind: str
    origins: tuple[str, ...]  # "query" or "enriched", aligned to features

    @property
    def feature_count(self) -> int:
        return len(self.feature_names)

    def take(self, indices: Sequence[int]) -> "FeatureMatrix":
        idx = list(indices)
        return FeatureMatrix(
            feature_names=tuple(self.feature_names[i] for i in idx),
            values=self.values[:, idx],
            target=self.target,
            task_kind=self.task_kind,
            origins=tuple(self.origins[i] for i in idx))


@dataclass(frozen=True)
class _Column:
    name: str
    origin: str
    cells: tuple[str, ...]
    forced_text: bool


def _feature_columns(table: EnrichedTable) -> list[_Column]:
    base = table.base
    cols = []
    for ci, name in enumerate(base.column_names):
        if ci == base.task_column:
            continue
        cells = tuple(row[ci] for row in base.rows)
        cols.append(_Column(name, "query", cells, forced_text=ci == base.key_column))
    for ec in table.enriched_columns:
        cols.append(_Column(ec.name, "enriched", ec.cells, forced_text=False))
    return cols


def _magnitude(cell: str) -> float | None:
    uv = normalize_numeric(cell)
    return None if uv is None else uv.magnitude


@dataclass
class _NumericPlan:
    mean: float

    def width(self) -> int:
        return 1


@dataclass
class _TextPlan:
    vocab: dict[str, int]  # token -> feature offset within the column
    idf: np.ndarray
    binary: bool

    def width(self) -> int:
        return len(self.vocab)


class TableVectorizer:
    """Learns per-column plans on one row subset, applies them to another."""

    def __init__(self, scheme: str = "auto"):
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {scheme!r}")
        self.scheme = scheme
        self._plans: list[tuple[_Column, object]] | None = None
        self._target_mean = 0.0
        self._task_kind = ""

    def fit(self, table: EnrichedTable, rows: Sequence[int] | None = None):
        columns = _feature_columns(table)
        row_ids = list(rows) if rows is not None else list(range(len(table.base.rows)))
        binary = self.scheme == "onehot"
        plans: list[tuple[_Column, object]] = []
        for col in columns:
            cells = [col.cells[r] for r in row_ids]
            nonempty = [c for c in cells if c != ""]
            mags = [m for m in (_magnitude(c) for c in nonempty) if m is not None]
            if (not col.forced_text and nonempty
                    and len(mags) >= NUMERIC_SHARE * len(nonempty)):
                mean = sum(mags) / len(mags) if mags else 0.0
                plans.append((col, _NumericPlan(mean)))
                continue
            df: Counter[str] = Counter()
            order: dict[str, None] = {}
            for c in cells:
                for t in tokenize(c).unique:
                    df[t] += 1
                for t in tokenize(c).ordered:
                    order.setdefault(t)
            floor = 1 if binary else 2
            vocab = {t: i for i, t in enumerate(t for t in order if df[t] >= floor)}
            n = len(row_ids)
            idf = np.array([math.log(n / df[t]) for t in vocab], dtype=np.float64)
            plans.append((col, _TextPlan(vocab, idf, binary)))
        if sum(plan.width() for _, plan in plans) == 0:
            raise NoFeatures("no usable feature columns")
        self._plans = plans
        self._task_kind = table.base.task_kind
        if self._task_kind == "regression":
            raw = [table.base.rows[r][table.base.task_column] for r in row_ids]
            mags = [m for m in (_magnitude(c) for c in raw) if m is not None]
            self._target_mean = sum(mags) / len(mags) if mags else 0.0
        return self

    def transform(self, table: EnrichedTable,
                  rows: Sequence[int] | None = None) -> FeatureMatrix:
        if self._plans is None:
            raise RuntimeError("fit() must run before transform()")
        row_ids = list(rows) if rows is not None else list(range(len(table.base.rows)))
        n = len(row_ids)
        names: list[str] = []
        origins: list[str] = []
        blocks: list[np.ndarray] = []
        for col, plan in self._plans:
            cells = [col.cells[r] for r in row_ids]
            if isinstance(plan, _NumericPlan):
                vals = np.empty((n, 1))
                for i, c in enumerate(cells):
                    m = _magnitude(c) if c != "" else None
                    vals[i, 0] = plan.mean if m is None else m
                names.append(col.name)
                origins.append(col.origin)
                blocks.append(vals)
                continue
            if not plan.vocab:
                continue
            vals = np.zeros((n, len(plan.vocab)))
            for i, c in enumerate(cells):
                for t, count in Counter(tokenize(c).ordered).items():
                    j = plan.vocab.get(t)
                    if j is None:
                        continue
                    vals[i, j] = 1.0 if plan.binary else count * plan.idf[j]
            names.extend(f"{col.name}::{t}" for t in plan.vocab)
            origins.extend([col.origin] * len(plan.vocab))
            blocks.append(vals)
        values = np.hstack(blocks) if blocks else np.empty((n, 0))
        base = table.base
        raw_target = [base.rows[r][base.task_column] for r in row_ids]
        if self._task_kind == "regression":
            target = np.array(
                [self._target_mean if (m := _magnitude(c)) is None else m
                 for c in raw_target], dtype=np.float64)
        else:
            target = np.array(raw_target, dtype=object)
        return FeatureMatrix(tuple(names), values, target,
                             self._task_kind, tuple(origins))


def vectorize(table: EnrichedTable, scheme: str = "auto") -> FeatureMatrix:
    return TableVectorizer(scheme).fit(table).transform(table)
