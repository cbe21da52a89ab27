from .gbt import (
    GbtHyperparams,
    GbtModel,
    Tree,
    decision_function,
    feature_importance,
    predict,
    predict_proba,
    select_top_k,
    train_gbt,
)
from .metrics import MetricsReport, auc_mann_whitney, compute_metrics, confusion_matrix

__all__ = [
    "GbtHyperparams",
    "GbtModel",
    "MetricsReport",
    "Tree",
    "auc_mann_whitney",
    "compute_metrics",
    "confusion_matrix",
    "decision_function",
    "feature_importance",
    "predict",
    "predict_proba",
    "select_top_k",
    "train_gbt",
]
