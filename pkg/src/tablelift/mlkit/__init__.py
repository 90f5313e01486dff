"""Vectorization, feature selection, model training, and evaluation."""

from .evaluate import (
    EvalConfig,
    EvalReport,
    ImportanceEntry,
    ImportanceReport,
    cross_validate,
    cross_validate_detailed,
    feature_importance,
    macro_f1,
    mse,
    record_diffs,
    rmse,
    shuffled_folds,
    stratified_folds,
    train,
)
from .forest import ForestModel, fit_forest
from .linear import LassoModel, LogisticModel, fit_lasso, fit_logistic
from .selection import f_value_scores, select_features
from .vectorize import FeatureMatrix, TableVectorizer, vectorize

__all__ = [
    "EvalConfig",
    "EvalReport",
    "FeatureMatrix",
    "ForestModel",
    "ImportanceEntry",
    "ImportanceReport",
    "LassoModel",
    "LogisticModel",
    "TableVectorizer",
    "cross_validate",
    "cross_validate_detailed",
    "f_value_scores",
    "feature_importance",
    "fit_forest",
    "fit_lasso",
    "fit_logistic",
    "macro_f1",
    "mse",
    "record_diffs",
    "rmse",
    "select_features",
    "shuffled_folds",
    "stratified_folds",
    "train",
    "vectorize",
]
