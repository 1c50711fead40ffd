"""Input checks shared by the estimators."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array, check_X_y

from .errors import DimensionMismatch, EmptyInput, SingleClass


def check_training_data(X, y, class_order=None):
    """Validate (X, y) and resolve the ordered class list.

    With ``class_order`` the classes keep that order, restricted to those
    present in ``y``; otherwise they are sorted.
    """
    if len(y) == 0:
        raise EmptyInput("training set is empty")
    X, y = check_X_y(X, y, dtype=np.float64, ensure_all_finite=True)
    present = set(y.tolist())
    if class_order is None:
        classes = np.unique(y)
    else:
        extra = present.difference(class_order)
        if extra:
            raise ValueError(f"labels not in class_order: {sorted(map(str, extra))}")
        classes = np.asarray([c for c in class_order if c in present], dtype=y.dtype)
    if len(classes) < 2:
        raise SingleClass(f"training data has {len(classes)} class(es), need at least 2")
    index = {c: i for i, c in enumerate(classes.tolist())}
    y_idx = np.fromiter((index[v] for v in y.tolist()), dtype=np.intp, count=len(y))
    return X, y_idx, classes


def check_features(X, n_features):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != n_features:
        raise DimensionMismatch(f"expected {n_features} features, got {X.shape[1]}")
    return check_array(X, dtype=np.float64)


def to_native(values):
    return [v.item() if hasattr(v, "item") else v for v in values]
