"""Stratified splitting, confusion matrices and precision/recall/F1 reports."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Callable, Dict, Sequence, Tuple

import numpy as np

from .errors import ClassTooSmall, EmptyInput

# guards ceil() against products such as 35 * 0.2 == 7.000000000000001
_CEIL_SLACK = 1e-9


def stratified_indices(y, class_list, test_fraction: float, seed) -> Tuple[np.ndarray, np.ndarray]:
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    y = np.asarray(y, dtype=object)
    rng = np.random.default_rng(seed)
    test = []
    for cls in class_list:
        members = np.flatnonzero(y == cls)
        if members.size == 0:
            continue
        if members.size < 2:
            raise ClassTooSmall(f"class {cls!r} has {members.size} row(s), need at least 2", label=cls)
        n_test = max(1, math.ceil(members.size * test_fraction - _CEIL_SLACK))
        test.extend(rng.permutation(members)[:n_test].tolist())
    test_idx = np.sort(np.asarray(test, dtype=int))
    train_idx = np.setdiff1d(np.arange(len(y)), test_idx)
    return train_idx, test_idx


def split_stratified(data, test_fraction: float = 0.2, seed=0):
    """Per class, shuffle with ``seed`` and send ceil(count * fraction) rows to test."""
    train_idx, test_idx = stratified_indices(data.y, data.class_list, test_fraction, seed)
    return data.subset(train_idx), data.subset(test_idx)


@dataclass(frozen=True)
class EvalReport:
    class_list: Tuple[str, ...]
    confusion: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray

    @property
    def present(self) -> np.ndarray:
        return self.support > 0

    @property
    def macro_precision(self) -> float:
        return float(np.mean(self.precision[self.present]))

    @property
    def macro_recall(self) -> float:
        return float(np.mean(self.recall[self.present]))

    @property
    def macro_f1(self) -> float:
        return float(np.mean(self.f1[self.present]))

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.confusion) / self.confusion.sum())

    def per_class(self, metric: str) -> Dict[str, float]:
        values = getattr(self, metric)
        return {c: float(v) for c, v in zip(self.class_list, values)}

    def to_dict(self) -> dict:
        return {
            "class_list": list(self.class_list),
            "confusion": self.confusion.tolist(),
            "support": self.support.tolist(),
            "precision": self.per_class("precision"),
            "recall": self.per_class("recall"),
            "f1": self.per_class("f1"),
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "accuracy": self.accuracy,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, doc) -> "EvalReport":
        classes = tuple(doc["class_list"])
        confusion = np.asarray(doc["confusion"], dtype=np.int64)
        return report_from_confusion(classes, confusion)

    def confusion_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["true\\predicted"] + list(self.class_list))
        for cls, row in zip(self.class_list, self.confusion.tolist()):
            w.writerow([cls] + row)
        return buf.getvalue()

    def to_text(self) -> str:
        width = max(len(c) for c in self.class_list)
        lines = [f"{'class':<{width}}  precision  recall     f1  support"]
        for i, c in enumerate(self.class_list):
            lines.append(
                f"{c:<{width}}  {self.precision[i]:9.3f}  {self.recall[i]:6.3f}  "
                f"{self.f1[i]:5.3f}  {self.support[i]:7d}"
            )
        lines.append(
            f"{'macro':<{width}}  {self.macro_precision:9.3f}  {self.macro_recall:6.3f}  "
            f"{self.macro_f1:5.3f}  {int(self.support.sum()):7d}"
        )
        lines.append("")
        lines.append("confusion (rows = true, columns = predicted)")
        abbrev = [f"c{i}" for i in range(len(self.class_list))]
        lines.append(" " * (width + 2) + " ".join(f"{a:>5}" for a in abbrev))
        for i, c in enumerate(self.class_list):
            cells = " ".join(f"{v:5d}" for v in self.confusion[i])
            lines.append(f"{c:<{width}}  {cells}")
        lines.append("  ".join(f"{a}={c}" for a, c in zip(abbrev, self.class_list)))
        return "\n".join(lines) + "\n"


def confusion_matrix(y_true, y_pred, class_list: Sequence[str]) -> np.ndarray:
    index = {c: i for i, c in enumerate(class_list)}
    t = np.fromiter((index[str(v)] for v in y_true), dtype=np.intp)
    p = np.fromiter((index[str(v)] for v in y_pred), dtype=np.intp)
    k = len(class_list)
    return np.bincount(t * k + p, minlength=k * k).reshape(k, k)


def report_from_confusion(class_list, confusion) -> EvalReport:
    confusion = np.asarray(confusion, dtype=np.int64)
    diag = np.diag(confusion).astype(float)
    col = confusion.sum(axis=0).astype(float)
    row = confusion.sum(axis=1).astype(float)
    precision = np.divide(diag, col, out=np.zeros_like(diag), where=col > 0)
    recall = np.divide(diag, row, out=np.zeros_like(diag), where=row > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros_like(diag), where=denom > 0)
    return EvalReport(tuple(class_list), confusion, precision, recall, f1, row.astype(np.int64))


def evaluate_predictions(y_true, y_pred, class_list) -> EvalReport:
    if len(y_true) == 0:
        raise EmptyInput("cannot evaluate an empty test set")
    if len(y_true) != len(y_pred):
        raise ValueError("y_true and y_pred differ in length")
    return report_from_confusion(class_list, confusion_matrix(y_true, y_pred, class_list))


def evaluate(predict: Callable, test) -> EvalReport:
    """Score ``predict`` (X -> labels, or a fitted estimator) on a Dataset."""
    if len(test) == 0:
        raise EmptyInput("cannot evaluate an empty test set")
    fn = predict.predict if hasattr(predict, "predict") else predict
    return evaluate_predictions(test.y, fn(test.X), test.class_list)
