"""Second-order gradient-boosted regression trees for classification.

Binary problems use the logistic loss on one margin; K > 2 classes use the
softmax loss with one tree per class per round.  Splits are exact greedy over
the raw feature values; leaves take a Newton step ``-G / (H + ridge)``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit, log_softmax, logsumexp, softmax


@dataclass(frozen=True)
class GbtHyperparams:
    learning_rate: float = 0.05
    max_depth: int = 5
    n_estimators: int = 300
    subsample: float = 0.9
    colsample_per_tree: float = 0.9
    seed: int = 0
    # XGBoost's default minimum hessian per child; 0 disables the check
    min_child_weight: float = 1.0
    ridge: float = 1e-9

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")
        if self.n_estimators < 0:
            raise ValueError("n_estimators must be non-negative")
        if not 0 < self.subsample <= 1 or not 0 < self.colsample_per_tree <= 1:
            raise ValueError("subsample and colsample_per_tree must lie in (0, 1]")
        if self.min_child_weight < 0 or self.ridge < 0:
            raise ValueError("min_child_weight and ridge must be non-negative")


# ---------------------------------------------------------------- losses


def logistic_loss(margin, y) -> float:
    margin = np.asarray(margin, dtype=float)
    return float(np.sum(np.logaddexp(0.0, margin) - y * margin))


def logistic_grad_hess(margin, y):
    p = expit(margin)
    return p - y, p * (1.0 - p)


def softmax_loss(margins, y_idx) -> float:
    margins = np.asarray(margins, dtype=float)
    n = margins.shape[0]
    return float(np.sum(logsumexp(margins, axis=1) - margins[np.arange(n), y_idx]))


def softmax_grad_hess(margins, y_idx):
    """Gradient and diagonal hessian of the softmax cross-entropy w.r.t. each margin."""
    p = softmax(margins, axis=1)
    onehot = np.zeros_like(p)
    onehot[np.arange(len(y_idx)), y_idx] = 1.0
    return p - onehot, p * (1.0 - p)


# ---------------------------------------------------------------- trees


@dataclass
class Tree:
    feature: np.ndarray  # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray

    @property
    def depth(self) -> int:
        def walk(i):
            if self.feature[i] < 0:
                return 0
            return 1 + max(walk(self.left[i]), walk(self.right[i]))

        return walk(0)

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            feat = self.feature[node]
            internal = feat >= 0
            if not internal.any():
                return self.value[node]
            r = rows[internal]
            n = node[internal]
            go_left = X[r, feat[internal]] <= self.threshold[n]
            node[internal] = np.where(go_left, self.left[n], self.right[n])

    def to_dict(self, i: int = 0) -> dict:
        if self.feature[i] < 0:
            return {"leaf": float(self.value[i])}
        return {
            "feature": int(self.feature[i]),
            "threshold": float(self.threshold[i]),
            "gain": float(self.gain[i]),
            "value": float(self.value[i]),
            "left": self.to_dict(int(self.left[i])),
            "right": self.to_dict(int(self.right[i])),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        b = _TreeBuilder()

        def add(node):
            if "leaf" in node:
                return b.leaf(node["leaf"])
            i = b.leaf(node.get("value", 0.0))
            left = add(node["left"])
            right = add(node["right"])
            b.split(i, node["feature"], node["threshold"], node["gain"], left, right)
            return i

        add(d)
        return b.finish()


class _TreeBuilder:
    def __init__(self):
        self.feature, self.threshold, self.left, self.right, self.value, self.gain = [], [], [], [], [], []

    def leaf(self, value: float) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(float(value))
        self.gain.append(0.0)
        return len(self.feature) - 1

    def split(self, i, feature, threshold, gain, left, right):
        self.feature[i] = int(feature)
        self.threshold[i] = float(threshold)
        self.gain[i] = float(gain)
        self.left[i] = left
        self.right[i] = right

    def finish(self) -> Tree:
        return Tree(
            np.array(self.feature, dtype=np.int64),
            np.array(self.threshold, dtype=float),
            np.array(self.left, dtype=np.int64),
            np.array(self.right, dtype=np.int64),
            np.array(self.value, dtype=float),
            np.array(self.gain, dtype=float),
        )


def _best_split(X, g, h, idx, feats, ridge, min_child_weight):
    """Exact greedy search; returns (gain, feature, threshold) or None."""
    Xn = X[np.ix_(idx, feats)]
    order = np.argsort(Xn, axis=0, kind="stable")
    xs = np.take_along_axis(Xn, order, axis=0)
    gl = np.cumsum(g[idx][order], axis=0)[:-1]
    hl = np.cumsum(h[idx][order], axis=0)[:-1]
    G, H = g[idx].sum(), h[idx].sum()
    gr, hr = G - gl, H - hl
    valid = (xs[:-1] < xs[1:]) & (hl >= min_child_weight) & (hr >= min_child_weight)
    if not valid.any():
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = 0.5 * (gl**2 / (hl + ridge) + gr**2 / (hr + ridge) - G**2 / (H + ridge))
    gain = np.where(valid, gain, -np.inf)
    # feature-major flattening: ties go to the lowest feature, then lowest cut
    flat = np.argmax(gain.T)
    j, pos = divmod(int(flat), gain.shape[0])
    best = gain[pos, j]
    if not best > 0:
        return None
    lo, hi = xs[pos, j], xs[pos + 1, j]
    thr = lo + (hi - lo) / 2
    if not lo <= thr < hi:
        thr = lo
    return float(best), int(feats[j]), float(thr)


def build_tree(X, g, h, idx, feats, max_depth, ridge=1e-9, min_child_weight=1.0) -> Tree:
    b = _TreeBuilder()

    def grow(idx, depth):
        G, H = g[idx].sum(), h[idx].sum()
        node = b.leaf(-G / (H + ridge))
        if depth >= max_depth or len(idx) < 2:
            return node
        found = _best_split(X, g, h, idx, feats, ridge, min_child_weight)
        if found is None:
            return node
        gain, j, thr = found
        mask = X[idx, j] <= thr
        left = grow(idx[mask], depth + 1)
        right = grow(idx[~mask], depth + 1)
        b.split(node, j, thr, gain, left, right)
        return node

    grow(np.asarray(idx), 0)
    return b.finish()


# ---------------------------------------------------------------- model


@dataclass
class GbtModel:
    classes: list
    base_score: np.ndarray  # one margin per output (1 for binary, K for multiclass)
    trees: list  # rounds -> list of Tree (one per output)
    importances: np.ndarray  # total gain per feature
    hyperparams: GbtHyperparams = field(default_factory=GbtHyperparams)
    feature_map: list | None = None  # columns of the original matrix this model reads
    n_input_features: int | None = None
    loss_history: list = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return len(self.importances)

    @property
    def is_binary(self) -> bool:
        return len(self.classes) == 2

    def to_dict(self) -> dict:
        return {
            "format": "topoc-gbt/1",
            "classes": list(self.classes),
            "base_score": [float(v) for v in self.base_score],
            "hyperparams": asdict(self.hyperparams),
            "n_features": self.n_features,
            "feature_map": None if self.feature_map is None else [int(i) for i in self.feature_map],
            "n_input_features": self.n_input_features,
            "importances": [float(v) for v in self.importances],
            "trees": [[t.to_dict() for t in rnd] for rnd in self.trees],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "GbtModel":
        return cls(
            classes=list(d["classes"]),
            base_score=np.array(d["base_score"], dtype=float),
            trees=[[Tree.from_dict(t) for t in rnd] for rnd in d["trees"]],
            importances=np.array(d["importances"], dtype=float),
            hyperparams=GbtHyperparams(**d["hyperparams"]),
            feature_map=d.get("feature_map"),
            n_input_features=d.get("n_input_features"),
        )

    @classmethod
    def from_json(cls, text: str) -> "GbtModel":
        return cls.from_dict(json.loads(text))


def _encode_labels(y):
    y = np.asarray(y)
    classes = sorted(set(y.tolist()))
    lookup = {c: i for i, c in enumerate(classes)}
    return classes, np.array([lookup[v] for v in y.tolist()], dtype=np.int64)


def train_gbt(X, y, hp: GbtHyperparams | None = None, record_loss: bool = False) -> GbtModel:
    hp = hp or GbtHyperparams()
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise ValueError("feature matrix must be a non-empty 2-D array")
    if np.isnan(X).any():
        raise ValueError("feature matrix contains missing values")
    if len(y) != X.shape[0]:
        raise ValueError("labels and feature rows differ in length")
    classes, yi = _encode_labels(y)
    if len(classes) < 2:
        raise ValueError("training needs at least two classes")
    counts = np.bincount(yi, minlength=len(classes))
    if counts.min() < 2:
        raise ValueError("every class needs at least two samples")

    n, d = X.shape
    rng = np.random.default_rng(hp.seed)
    binary = len(classes) == 2
    prior = counts / n
    if binary:
        base = np.array([np.log(prior[1] / prior[0])])
        target = yi.astype(float)
    else:
        base = np.log(prior)
    margin = np.tile(base, (n, 1))
    n_rows = max(1, int(round(hp.subsample * n)))
    n_cols = max(1, int(round(hp.colsample_per_tree * d)))
    importances = np.zeros(d)
    rounds, history = [], []

    def loss():
        return logistic_loss(margin[:, 0], target) if binary else softmax_loss(margin, yi)

    if record_loss:
        history.append(loss())
    for _ in range(hp.n_estimators):
        if binary:
            g, h = logistic_grad_hess(margin[:, 0], target)
            g, h = g[:, None], h[:, None]
        else:
            g, h = softmax_grad_hess(margin, yi)
        rows = np.arange(n) if n_rows == n else np.sort(rng.choice(n, n_rows, replace=False))
        trees = []
        for k in range(margin.shape[1]):
            feats = np.arange(d) if n_cols == d else np.sort(rng.choice(d, n_cols, replace=False))
            tree = build_tree(X, g[:, k], h[:, k], rows, feats, hp.max_depth, hp.ridge, hp.min_child_weight)
            internal = tree.feature >= 0
            np.add.at(importances, tree.feature[internal], tree.gain[internal])
            trees.append(tree)
        for k, tree in enumerate(trees):
            margin[:, k] += hp.learning_rate * tree.predict(X)
        rounds.append(trees)
        if record_loss:
            history.append(loss())
    return GbtModel(classes, base, rounds, importances, hp, loss_history=history)


def decision_function(m: GbtModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be 2-D")
    if m.feature_map is not None:
        if X.shape[1] != m.n_input_features:
            raise ValueError(f"expected {m.n_input_features} input features, got {X.shape[1]}")
        X = X[:, m.feature_map]
    elif X.shape[1] != m.n_features:
        raise ValueError(f"expected {m.n_features} features, got {X.shape[1]}")
    margin = np.tile(m.base_score, (X.shape[0], 1))
    lr = m.hyperparams.learning_rate
    for rnd in m.trees:
        for k, tree in enumerate(rnd):
            margin[:, k] += lr * tree.predict(X)
    return margin


def predict_proba(m: GbtModel, X) -> np.ndarray:
    """Class probabilities, one column per entry of ``m.classes``."""
    margin = decision_function(m, X)
    if m.is_binary:
        p = expit(margin[:, 0])
        return np.column_stack([1.0 - p, p])
    return np.exp(log_softmax(margin, axis=1))


def predict(m: GbtModel, X) -> list:
    # argmax returns the first maximum, i.e. the lowest class index on ties
    idx = np.argmax(predict_proba(m, X), axis=1)
    return [m.classes[i] for i in idx]


def feature_importance(m: GbtModel) -> list[tuple[int, float]]:
    imp = m.importances
    order = sorted(range(len(imp)), key=lambda j: (-imp[j], j))
    return [(j, float(imp[j])) for j in order]


def select_top_k(ranking, X, k: int):
    """Keep the ``k`` best-ranked columns of ``X``; returns (matrix, index map)."""
    X = np.asarray(X)
    idx = [int(j) for j, *_ in ranking] if ranking and isinstance(ranking[0], tuple) else [int(j) for j in ranking]
    if k > X.shape[1] or k > len(idx):
        raise ValueError(f"k={k} exceeds the {X.shape[1]} available features")
    if k < 1:
        raise ValueError("k must be positive")
    index_map = idx[:k]
    return X[:, index_map], index_map
