"""Classification metrics: accuracy, balanced accuracy, sensitivity, specificity, AUC, P/R/F1."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    balanced_accuracy: float
    sensitivity: float
    specificity: float
    auc: float
    precision: float
    recall: float
    f1: float

    def to_dict(self) -> dict:
        return asdict(self)


def auc_mann_whitney(y_pos, scores) -> float:
    """Rank AUC with mid-ranks for ties; ``y_pos`` is a boolean mask of positives."""
    y_pos = np.asarray(y_pos, dtype=bool)
    n_pos = int(y_pos.sum())
    n_neg = len(y_pos) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs at least one positive and one negative sample")
    ranks = rankdata(scores, method="average")
    u = ranks[y_pos].sum() - n_pos * (n_pos + 1) / 2
    return float(u / (n_pos * n_neg))


def _safe_div(a, b) -> float:
    return float(a / b) if b else 0.0


def confusion_matrix(y_true_idx, y_pred_idx, n_classes: int) -> np.ndarray:
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true_idx), np.asarray(y_pred_idx)), 1)
    return cm


def _as_prob_matrix(y_prob, n_classes):
    p = np.asarray(y_prob, dtype=float)
    if p.ndim == 1:
        if n_classes != 2:
            raise ValueError("a 1-D probability vector is only valid for binary tasks")
        p = np.column_stack([1.0 - p, p])
    if p.ndim != 2 or p.shape[1] != n_classes:
        raise ValueError(f"expected probabilities with {n_classes} columns, got shape {p.shape}")
    if np.any(p < 0) or np.any(p > 1) or np.any(np.isnan(p)):
        raise ValueError("probabilities must lie in [0, 1]")
    return p


def compute_metrics(y_true, y_prob, classes=None, positive=None) -> MetricsReport:
    """Score probabilistic predictions.

    ``y_prob`` has one column per entry of ``classes`` (default: sorted labels
    of ``y_true``); a 1-D array is read as the probability of ``positive`` in a
    binary task.  Binary tasks report positive-class sensitivity, precision,
    recall and F1; multiclass tasks report them macro-averaged.
    """
    y_true = list(np.asarray(y_true).tolist())
    if classes is None:
        classes = sorted(set(y_true))
        if len(classes) == 1 and positive is not None and positive != classes[0]:
            classes = sorted({classes[0], positive})
    classes = list(classes)
    K = len(classes)
    if K < 2:
        raise ValueError("metrics need at least two classes")
    p = _as_prob_matrix(y_prob, K)
    if len(y_true) != p.shape[0]:
        raise ValueError("y_true and y_prob differ in length")
    lookup = {c: i for i, c in enumerate(classes)}
    try:
        yt = np.array([lookup[v] for v in y_true], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"label {exc.args[0]!r} not among classes {classes}") from None
    yp = np.argmax(p, axis=1)
    cm = confusion_matrix(yt, yp, K)
    support = cm.sum(axis=1)
    missing = [classes[k] for k in range(K) if support[k] == 0]
    if missing:
        raise ValueError(f"class(es) {missing} absent from y_true")

    tp = np.diag(cm).astype(float)
    recall = tp / support
    predicted = cm.sum(axis=0)
    precision = np.array([_safe_div(tp[k], predicted[k]) for k in range(K)])
    n = cm.sum()
    spec = np.array([(n - support[k] - predicted[k] + tp[k]) / (n - support[k]) for k in range(K)])
    accuracy = float(tp.sum() / n)
    balanced = float(recall.mean())

    if K == 2:
        pos = 1 if positive is None else lookup[positive]
        neg = 1 - pos
        prec, rec = float(precision[pos]), float(recall[pos])
        f1 = _safe_div(2 * prec * rec, prec + rec)
        auc = auc_mann_whitney(yt == pos, p[:, pos])
        return MetricsReport(accuracy, balanced, rec, float(recall[neg]), auc, prec, rec, f1)

    f1s = [_safe_div(2 * precision[k] * recall[k], precision[k] + recall[k]) for k in range(K)]
    aucs = [auc_mann_whitney(yt == k, p[:, k]) for k in range(K)]
    return MetricsReport(
        accuracy=accuracy,
        balanced_accuracy=balanced,
        sensitivity=float(recall.mean()),
        specificity=float(spec.mean()),
        auc=float(np.mean(aucs)),
        precision=float(precision.mean()),
        recall=float(recall.mean()),
        f1=float(np.mean(f1s)),
    )
