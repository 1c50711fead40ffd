"""Random forest classifier: CART trees on bootstrap resamples, majority vote."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_features, check_training_data, to_native
from .errors import EmptyInput


@dataclass(frozen=True)
class Leaf:
    label: int


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    left: "Node"
    right: "Node"


Node = Union[Leaf, Split]


def gini_impurity(labels) -> float:
    """1 - sum of squared class proportions."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise EmptyInput("gini impurity of an empty set")
    _, counts = np.unique(labels, return_counts=True)
    p = counts / labels.size
    return float(1.0 - np.sum(p * p))


def _gini_from_counts(counts, totals):
    totals = totals.astype(float)
    return 1.0 - np.sum(counts.astype(float) ** 2, axis=-1) / totals**2


def _purity(left, right, n_left, n_right) -> Fraction:
    # n * (1 - weighted gini) as an exact fraction, so equal splits compare equal
    sq_left = int(left @ left)
    sq_right = int(right @ right)
    return Fraction(sq_left * n_right + sq_right * n_left, n_left * n_right)


def best_split(X, y, n_classes, features):
    """Best (weighted gini, feature, threshold) over midpoints of ``features``.

    Ties resolve to the lowest feature index, then the lowest threshold.
    Returns None when no feature has two distinct values.
    """
    n = len(y)
    total = np.bincount(y, minlength=n_classes)
    onehot = np.zeros((n, n_classes), dtype=np.int64)
    best = None
    best_key = None
    for f in sorted(int(f) for f in features):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        valid = np.flatnonzero(xs[1:] > xs[:-1]) + 1
        if valid.size == 0:
            continue
        onehot[:] = 0
        onehot[np.arange(n), y[order]] = 1
        left = np.cumsum(onehot, axis=0)[valid - 1]
        right = total - left
        n_left = valid
        n_right = n - valid
        score = (n_left * _gini_from_counts(left, n_left) + n_right * _gini_from_counts(right, n_right)) / n
        # floats shortlist, exact arithmetic decides
        near = np.flatnonzero(score <= score.min() + 1e-9)
        k, key = None, None
        for c in near.tolist():
            cand = _purity(left[c], right[c], int(n_left[c]), int(n_right[c]))
            if key is None or cand > key:
                k, key = c, cand
        if best_key is None or key > best_key:
            i = valid[k]
            thr = (xs[i - 1] + xs[i]) / 2.0
            if thr >= xs[i]:
                thr = xs[i - 1]
            best = (float(score[k]), f, float(thr))
            best_key = key
    return best


def resolve_max_features(max_features, n_features: int) -> int:
    if max_features is None:
        return n_features
    if max_features == "sqrt":
        return max(1, math.ceil(math.sqrt(n_features)))
    if max_features == "log2":
        return max(1, math.ceil(math.log2(n_features)))
    if isinstance(max_features, float):
        return max(1, min(n_features, int(max_features * n_features)))
    return max(1, min(n_features, int(max_features)))


def train_tree(
    X,
    y,
    n_classes: int,
    rng: np.random.Generator,
    *,
    max_features: int,
    max_depth: Optional[int] = None,
    min_samples_split: int = 2,
) -> Node:
    """Grow a CART tree on integer class indices ``y``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.intp)
    if len(y) == 0:
        raise EmptyInput("cannot grow a tree on zero rows")
    d = X.shape[1]

    def grow(idx, depth):
        ys = y[idx]
        counts = np.bincount(ys, minlength=n_classes)
        majority = int(np.argmax(counts))
        if (
            np.count_nonzero(counts) == 1
            or (max_depth is not None and depth >= max_depth)
            or len(idx) < min_samples_split
        ):
            return Leaf(majority)
        features = rng.choice(d, size=max_features, replace=False)
        found = best_split(X[idx], ys, n_classes, features)
        parent = float(_gini_from_counts(counts, np.array(len(idx))))
        if found is None or found[0] >= parent - 1e-12:
            return Leaf(majority)
        _, f, thr = found
        go_left = X[idx, f] <= thr
        return Split(f, thr, grow(idx[go_left], depth + 1), grow(idx[~go_left], depth + 1))

    return grow(np.arange(len(y)), 0)


def route(node: Node, x) -> int:
    while isinstance(node, Split):
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node.label


def _route_many(node: Node, X, idx, out):
    if isinstance(node, Leaf):
        out[idx] = node.label
        return
    mask = X[idx, node.feature] <= node.threshold
    _route_many(node.left, X, idx[mask], out)
    _route_many(node.right, X, idx[~mask], out)


def tree_depth(node: Node) -> int:
    if isinstance(node, Leaf):
        return 0
    return 1 + max(tree_depth(node.left), tree_depth(node.right))


def tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    return np.random.default_rng(int(seed) ^ int(tree_index))


def bootstrap_indices(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, n, size=n)


class RandomForestClassifier(ClassifierMixin, BaseEstimator):
    """Bagged CART ensemble predicting by majority vote.

    Parameters
    ----------
    n_trees : int
        Number of trees.
    max_depth : int or None
        Depth limit per tree; None grows until leaves are pure.
    min_samples_split : int
        Nodes with fewer rows become leaves.
    max_features : int, float, "sqrt", "log2" or None
        Candidate features drawn without replacement at each node.
    bootstrap : bool
        Resample rows with replacement for each tree.
    seed : int
        Tree ``j`` draws from a generator seeded with ``seed ^ j``.
    class_order : sequence or None
        Fixed class order used for tie-breaking; sorted labels when None.
    """

    def __init__(
        self,
        n_trees=100,
        max_depth=None,
        min_samples_split=2,
        max_features="sqrt",
        bootstrap=True,
        seed=0,
        class_order=None,
    ):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.seed = seed
        self.class_order = class_order

    def fit(self, X, y):
        if self.n_trees < 1:
            raise ValueError("n_trees must be at least 1")
        X, y_idx, classes = check_training_data(X, y, self.class_order)
        n, d = X.shape
        mf = resolve_max_features(self.max_features, d)
        trees, samples = [], []
        for j in range(self.n_trees):
            rng = tree_rng(self.seed, j)
            idx = bootstrap_indices(n, rng) if self.bootstrap else np.arange(n)
            trees.append(
                train_tree(
                    X[idx],
                    y_idx[idx],
                    len(classes),
                    rng,
                    max_features=mf,
                    max_depth=self.max_depth,
                    min_samples_split=self.min_samples_split,
                )
            )
            samples.append(idx)
        self.classes_ = classes
        self.n_features_in_ = d
        self.trees_ = trees
        self.bootstrap_indices_ = samples
        return self

    def votes(self, X):
        """Per-class vote counts, shape (n_samples, n_classes)."""
        check_is_fitted(self, "trees_")
        X = check_features(X, self.n_features_in_)
        n = len(X)
        counts = np.zeros((n, len(self.classes_)), dtype=np.int64)
        leaf = np.empty(n, dtype=np.intp)
        rows = np.arange(n)
        for tree in self.trees_:
            _route_many(tree, X, rows, leaf)
            counts[rows, leaf] += 1
        return counts

    def predict(self, X):
        # argmax returns the first maximum, i.e. the lowest class index on ties
        return self.classes_[np.argmax(self.votes(X), axis=1)]

    def predict_proba(self, X):
        v = self.votes(X)
        return v / v.sum(axis=1, keepdims=True)

    def to_dict(self) -> dict:
        check_is_fitted(self, "trees_")
        classes = to_native(self.classes_)

        def node_dict(node):
            if isinstance(node, Leaf):
                return {"label": classes[node.label]}
            return {
                "feature": node.feature,
                "threshold": node.threshold,
                "left": node_dict(node.left),
                "right": node_dict(node.right),
            }

        return {
            "kind": "forest",
            "hyperparams": {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.get_params().items()},
            "class_list": classes,
            "n_features": self.n_features_in_,
            "trees": [node_dict(t) for t in self.trees_],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RandomForestClassifier":
        model = cls(**doc["hyperparams"])
        classes = list(doc["class_list"])
        index = {c: i for i, c in enumerate(classes)}

        def build(d):
            if "label" in d:
                return Leaf(index[d["label"]])
            return Split(int(d["feature"]), float(d["threshold"]), build(d["left"]), build(d["right"]))

        model.classes_ = np.asarray(classes, dtype=object if isinstance(classes[0], str) else None)
        model.n_features_in_ = int(doc["n_features"])
        model.trees_ = [build(t) for t in doc["trees"]]
        model.bootstrap_indices_ = None
        return model


ForestModel = RandomForestClassifier


def train_forest(data, **hyperparams) -> RandomForestClassifier:
    """Fit a forest on a :class:`~maneuverkit.features.Dataset`."""
    hyperparams.setdefault("class_order", tuple(data.class_list))
    if len(data) == 0:
        raise EmptyInput("dataset is empty")
    return RandomForestClassifier(**hyperparams).fit(data.X, data.y)


def predict_forest(model: RandomForestClassifier, x):
    return model.predict(np.asarray(x, dtype=float).reshape(1, -1))[0]
