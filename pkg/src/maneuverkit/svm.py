"""Soft-margin SVM trained with sequential minimal optimization (SMO).

Multiclass prediction is one-vs-rest: one binary machine per class and an
argmax over their decision values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_features, check_training_data, to_native
from .errors import DimensionMismatch, NoConvergence, SingleClass

# a pair update smaller than this is not counted as progress
_MIN_STEP = 1e-12


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "rbf"
    gamma: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ValueError(f"unknown kernel {self.kind!r}")
        if self.kind == "rbf" and self.gamma is not None:
            if not (np.isfinite(self.gamma) and self.gamma > 0):
                raise ValueError("rbf gamma must be finite and positive")

    def matrix(self, A, B) -> np.ndarray:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        if A.shape[1] != B.shape[1]:
            raise DimensionMismatch(f"kernel inputs have {A.shape[1]} and {B.shape[1]} features")
        dot = A @ B.T
        if self.kind == "linear":
            return dot
        if self.gamma is None:
            raise ValueError("rbf kernel needs gamma")
        sq = np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * dot
        return np.exp(-self.gamma * np.maximum(sq, 0.0))


def kernel_eval(kernel: KernelSpec, a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"vectors of length {a.size} and {b.size}")
    if kernel.kind == "linear":
        return float(a @ b)
    d = a - b
    return float(np.exp(-kernel.gamma * (d @ d)))


@dataclass
class BinarySvm:
    support_vectors: np.ndarray
    alphas: np.ndarray
    signs: np.ndarray
    b: float
    kernel: KernelSpec
    C: float
    converged: bool = True
    n_sweeps: int = field(default=0, compare=False)

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if len(self.alphas) == 0:
            return np.full(len(X), self.b)
        K = self.kernel.matrix(X, self.support_vectors)
        return K @ (self.alphas * self.signs) + self.b

    @property
    def weights(self) -> np.ndarray:
        """Primal weight vector; linear kernel only."""
        if self.kernel.kind != "linear":
            raise ValueError("primal weights exist only for the linear kernel")
        return (self.alphas * self.signs) @ self.support_vectors


class _Smo:
    def __init__(self, K, y, C, tol, rng):
        self.K = K
        self.y = y
        self.C = C
        self.tol = tol
        self.rng = rng
        self.n = len(y)
        self.alpha = np.zeros(self.n)
        self.g = np.zeros(self.n)  # sum_j alpha_j y_j K(x_j, x_i), bias excluded
        self.b = 0.0
        self._update_bias()

    def errors(self):
        return self.g + self.b - self.y

    def nonbound(self):
        return np.flatnonzero((self.alpha > 0) & (self.alpha < self.C))

    def violations(self):
        r = self.y * (self.g + self.b) - 1.0
        return ((r < -self.tol) & (self.alpha < self.C)) | ((r > self.tol) & (self.alpha > 0))

    def _violates(self, i):
        r = self.y[i] * (self.g[i] + self.b) - 1.0
        a = self.alpha[i]
        return (r < -self.tol and a < self.C) or (r > self.tol and a > 0)

    def _update_bias(self):
        nb = self.nonbound()
        if nb.size:
            self.b = float(np.mean(self.y[nb] - self.g[nb]))
            return
        # no free vectors: centre b in the interval the bound vectors allow
        y, g, a = self.y, self.g, self.alpha
        at_zero = a <= 0
        lower_mask = (at_zero & (y > 0)) | (~at_zero & (y < 0))
        upper_mask = ~lower_mask
        lower = np.max(y[lower_mask] - g[lower_mask]) if lower_mask.any() else -np.inf
        upper = np.min(y[upper_mask] - g[upper_mask]) if upper_mask.any() else np.inf
        if np.isfinite(lower) and np.isfinite(upper):
            self.b = float((lower + upper) / 2.0)
        elif np.isfinite(lower):
            self.b = float(lower)
        elif np.isfinite(upper):
            self.b = float(upper)

    def _snap(self, a):
        if a < _MIN_STEP * self.C:
            return 0.0
        if a > self.C * (1.0 - _MIN_STEP):
            return self.C
        return a

    def take_step(self, i, j):
        if i == j:
            return False
        y, K, C = self.y, self.K, self.C
        ai, aj = self.alpha[i], self.alpha[j]
        s = y[i] * y[j]
        if s < 0:
            lo, hi = max(0.0, aj - ai), min(C, C + aj - ai)
        else:
            lo, hi = max(0.0, ai + aj - C), min(C, ai + aj)
        if hi - lo <= 0:
            return False
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if eta <= 0:
            return False
        Ei = self.g[i] + self.b - y[i]
        Ej = self.g[j] + self.b - y[j]
        aj_new = self._snap(min(max(aj + y[j] * (Ei - Ej) / eta, lo), hi))
        if abs(aj_new - aj) < _MIN_STEP * (1.0 + aj + aj_new):
            return False
        ai_new = self._snap(min(max(ai + s * (aj - aj_new), 0.0), C))
        self.alpha[i], self.alpha[j] = ai_new, aj_new
        self.g += (ai_new - ai) * y[i] * K[:, i] + (aj_new - aj) * y[j] * K[:, j]
        self._update_bias()
        return True

    def examine(self, i):
        if not self._violates(i):
            return False
        nb = self.nonbound()
        nb = nb[nb != i]
        if nb.size:
            E = self.errors()
            j = nb[np.argmax(np.abs(E[i] - E[nb]))]
            if self.take_step(i, j):
                return True
            for j in self.rng.permutation(nb):
                if self.take_step(i, j):
                    return True
        for j in self.rng.permutation(self.n):
            if self.take_step(i, j):
                return True
        return False


def smo_solve(
    X,
    y,
    kernel: KernelSpec,
    C: float = 1.0,
    tol: float = 1e-3,
    max_passes: int = 5,
    rng: Optional[np.random.Generator] = None,
    *,
    max_sweeps: int = 5000,
    gram: Optional[np.ndarray] = None,
) -> BinarySvm:
    """Solve the soft-margin dual for labels in {-1, +1}.

    Stops after ``max_passes`` consecutive full sweeps without an update.
    If ``max_sweeps`` runs out first, or violators remain at the end, the
    returned machine has ``converged=False``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if C <= 0:
        raise ValueError("C must be positive")
    if not set(np.unique(y).tolist()) <= {-1.0, 1.0}:
        raise ValueError("labels must be -1 or +1")
    if len(np.unique(y)) < 2:
        raise SingleClass("SMO needs both +1 and -1 labels")
    if kernel.kind == "rbf" and kernel.gamma is None:
        kernel = KernelSpec("rbf", 1.0 / X.shape[1])
    if rng is None:
        rng = np.random.default_rng(0)
    K = kernel.matrix(X, X) if gram is None else gram

    smo = _Smo(K, y, float(C), float(tol), rng)
    passes = 0
    sweeps = 0
    examine_all = True
    while passes < max_passes and sweeps < max_sweeps:
        if examine_all:
            candidates = np.flatnonzero(smo.violations())
        else:
            candidates = smo.nonbound()
        changed = 0
        for i in candidates:
            changed += smo.examine(i)
        sweeps += 1
        if examine_all:
            if changed == 0:
                passes += 1
            else:
                passes = 0
                examine_all = False
        elif changed == 0:
            examine_all = True

    converged = passes >= max_passes and not smo.violations().any()
    keep = smo.alpha > 0
    return BinarySvm(
        support_vectors=X[keep].copy(),
        alphas=smo.alpha[keep].copy(),
        signs=y[keep].copy(),
        b=smo.b,
        kernel=kernel,
        C=float(C),
        converged=bool(converged),
        n_sweeps=sweeps,
    )


class SVMClassifier(ClassifierMixin, BaseEstimator):
    """One-vs-rest SMO support vector classifier with built-in standardization.

    ``gamma=None`` resolves to ``1 / n_features``. Every binary machine draws
    its random fallbacks from a generator seeded with ``seed``.
    """

    def __init__(
        self,
        kernel="rbf",
        gamma=None,
        C=1.0,
        tol=1e-3,
        max_passes=5,
        max_sweeps=5000,
        seed=0,
        class_order=None,
    ):
        self.kernel = kernel
        self.gamma = gamma
        self.C = C
        self.tol = tol
        self.max_passes = max_passes
        self.max_sweeps = max_sweeps
        self.seed = seed
        self.class_order = class_order

    def _kernel_spec(self, n_features):
        if self.kernel == "linear":
            return KernelSpec("linear")
        gamma = 1.0 / n_features if self.gamma is None else float(self.gamma)
        return KernelSpec(self.kernel, gamma)

    def fit(self, X, y):
        X, y_idx, classes = check_training_data(X, y, self.class_order)
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale == 0] = 1.0
        Z = (X - mean) / scale
        spec = self._kernel_spec(X.shape[1])
        gram = spec.matrix(Z, Z)
        machines = []
        for k, cls in enumerate(classes):
            target = np.where(y_idx == k, 1.0, -1.0)
            m = smo_solve(
                Z,
                target,
                spec,
                C=self.C,
                tol=self.tol,
                max_passes=self.max_passes,
                rng=np.random.default_rng(self.seed),
                max_sweeps=self.max_sweeps,
                gram=gram,
            )
            if not m.converged:
                raise NoConvergence(f"SMO did not converge for class {cls!r}", label=str(cls))
            machines.append(m)
        self.classes_ = classes
        self.n_features_in_ = X.shape[1]
        self.mean_ = mean
        self.scale_ = scale
        self.kernel_ = spec
        self.machines_ = machines
        return self

    def _standardize(self, X):
        return (check_features(X, self.n_features_in_) - self.mean_) / self.scale_

    def decision_function(self, X):
        check_is_fitted(self, "machines_")
        Z = self._standardize(X)
        return np.column_stack([m.decision_function(Z) for m in self.machines_])

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]

    def to_dict(self) -> dict:
        check_is_fitted(self, "machines_")
        params = {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.get_params().items()}
        return {
            "kind": "svm",
            "hyperparams": params,
            "kernel": {"kind": self.kernel_.kind, "gamma": self.kernel_.gamma},
            "class_list": to_native(self.classes_),
            "n_features": self.n_features_in_,
            "mean": self.mean_.tolist(),
            "scale": self.scale_.tolist(),
            "machines": [
                {
                    "support_vectors": m.support_vectors.tolist(),
                    "alphas": m.alphas.tolist(),
                    "signs": m.signs.tolist(),
                    "bias": m.b,
                    "C": m.C,
                }
                for m in self.machines_
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SVMClassifier":
        model = cls(**doc["hyperparams"])
        spec = KernelSpec(doc["kernel"]["kind"], doc["kernel"]["gamma"])
        d = int(doc["n_features"])
        classes = list(doc["class_list"])
        model.classes_ = np.asarray(classes, dtype=object if isinstance(classes[0], str) else None)
        model.n_features_in_ = d
        model.mean_ = np.asarray(doc["mean"], dtype=float)
        model.scale_ = np.asarray(doc["scale"], dtype=float)
        model.kernel_ = spec
        model.machines_ = [
            BinarySvm(
                np.asarray(m["support_vectors"], dtype=float).reshape(-1, d),
                np.asarray(m["alphas"], dtype=float),
                np.asarray(m["signs"], dtype=float),
                float(m["bias"]),
                spec,
                float(m["C"]),
            )
            for m in doc["machines"]
        ]
        return model


SvmModel = SVMClassifier


def train_svm(data, kernel: KernelSpec | str = "rbf", C: float = 1.0, **params) -> SVMClassifier:
    """Fit a one-vs-rest SVM on a :class:`~maneuverkit.features.Dataset`."""
    if isinstance(kernel, KernelSpec):
        params.setdefault("gamma", kernel.gamma)
        kernel = kernel.kind
    params.setdefault("class_order", tuple(data.class_list))
    return SVMClassifier(kernel=kernel, C=C, **params).fit(data.X, data.y)


def predict_svm(model: SVMClassifier, x):
    return model.predict(np.asarray(x, dtype=float).reshape(1, -1))[0]
