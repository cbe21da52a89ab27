import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import balanced_accuracy_score, f1_score, precision_score, recall_score, roc_auc_score

from topoc.mlkit import auc_mann_whitney, compute_metrics


def test_worked_binary_example():
    r = compute_metrics([1, 1, 0, 0], [1.0, 0.0, 0.0, 0.0], positive=1)
    assert r.accuracy == 0.75
    assert r.sensitivity == 0.5
    assert r.specificity == 1.0
    assert r.balanced_accuracy == 0.75
    assert r.precision == 1.0 and r.recall == 0.5
    assert r.f1 == pytest.approx(2 / 3)


def test_perfect_ranking_auc():
    r = compute_metrics([1, 1, 0, 0], [0.9, 0.4, 0.3, 0.1], positive=1)
    assert r.auc == 1.0
    assert r.accuracy == 0.75


def test_constant_scores_auc_half():
    assert auc_mann_whitney([True, False, True, False, False], [0.3] * 5) == 0.5


def test_balanced_accuracy_five_classes():
    rng = np.random.default_rng(5)
    y = rng.choice(5, size=200, p=[0.4, 0.3, 0.15, 0.1, 0.05])
    p = rng.dirichlet(np.ones(5), size=200)
    p[np.arange(200), y] += rng.uniform(0, 0.8, size=200)
    p /= p.sum(axis=1, keepdims=True)
    r = compute_metrics(y, p, classes=[0, 1, 2, 3, 4])
    pred = p.argmax(axis=1)
    recalls = [np.mean(pred[y == k] == k) for k in range(5)]
    assert r.balanced_accuracy == pytest.approx(np.mean(recalls), abs=1e-15)
    assert r.balanced_accuracy == pytest.approx(balanced_accuracy_score(y, pred), abs=1e-12)
    assert r.recall == pytest.approx(recall_score(y, pred, average="macro"), abs=1e-12)
    assert r.precision == pytest.approx(precision_score(y, pred, average="macro"), abs=1e-12)
    assert r.f1 == pytest.approx(f1_score(y, pred, average="macro"), abs=1e-12)
    assert r.auc == pytest.approx(roc_auc_score(y, p, multi_class="ovr", average="macro"), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_binary_matches_sklearn(seed):
    rng = np.random.default_rng(seed)
    y = rng.permutation(np.r_[np.zeros(7, int), np.ones(9, int)])
    s = np.round(rng.uniform(size=16), 1)  # coarse scores force ties
    r = compute_metrics(y, s, positive=1)
    pred = (s > 0.5).astype(int)
    assert r.auc == pytest.approx(roc_auc_score(y, s), abs=1e-12)
    assert r.sensitivity == pytest.approx(recall_score(y, pred), abs=1e-12)
    assert r.specificity == pytest.approx(recall_score(1 - y, 1 - pred), abs=1e-12)
    assert r.balanced_accuracy == pytest.approx((r.sensitivity + r.specificity) / 2, abs=1e-15)
    for v in r.to_dict().values():
        assert 0.0 <= v <= 1.0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 5))
def test_balanced_equals_accuracy_on_balanced_labels(seed, k):
    rng = np.random.default_rng(seed)
    y = np.repeat(np.arange(k), 6)
    p = rng.dirichlet(np.ones(k), size=len(y))
    r = compute_metrics(y, p, classes=list(range(k)))
    assert r.balanced_accuracy == pytest.approx(r.accuracy, abs=1e-12)


def test_tie_goes_to_lowest_class():
    r = compute_metrics(["a", "b"], [[0.5, 0.5], [0.5, 0.5]], classes=["a", "b"], positive="b")
    assert r.sensitivity == 0.0 and r.specificity == 1.0


def test_errors():
    with pytest.raises(ValueError, match="absent"):
        compute_metrics([0, 0], [[0.6, 0.4], [0.3, 0.7]], classes=[0, 1])
    with pytest.raises(ValueError):
        compute_metrics([0, 1], [0.2, 0.3, 0.4], positive=1)
    with pytest.raises(ValueError):
        compute_metrics([0, 1], [1.5, 0.2], positive=1)
