"""Summary-statistic features for maneuver windows."""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import EmptyInput, MalformedRecord
from .ingest import CAN_CHANNELS
from .sync import unwrap_angle
from .windows import CLASS_LIST, ManeuverLabel, ManeuverWindow, as_label

FEATURE_CHANNELS: Tuple[str, ...] = CAN_CHANNELS + ("ground_speed", "heading_delta")
STATISTICS: Tuple[str, ...] = ("mean", "std", "min", "max", "last_minus_first", "range")
FEATURE_NAMES: Tuple[str, ...] = tuple(
    f"{ch}__{stat}" for ch in FEATURE_CHANNELS for stat in STATISTICS
)
N_FEATURES = len(FEATURE_NAMES)


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    label: ManeuverLabel


def _stats(x: np.ndarray) -> List[float]:
    lo, hi = float(x.min()), float(x.max())
    return [float(x.mean()), float(x.std()), lo, hi, float(x[-1] - x[0]), hi - lo]


def window_signals(window: ManeuverWindow) -> Dict[str, np.ndarray]:
    frames = window.frames
    signals = {ch: np.asarray(frames[ch]) for ch in CAN_CHANNELS}
    signals["ground_speed"] = np.asarray(frames["ground_speed"])
    heading = unwrap_angle(frames["heading"])
    signals["heading_delta"] = heading - heading[0]
    return signals


def featurize_window(window: ManeuverWindow) -> FeatureVector:
    signals = window_signals(window)
    values = np.array([v for ch in FEATURE_CHANNELS for v in _stats(signals[ch])])
    return FeatureVector(values, window.label)


@dataclass
class Dataset:
    """Feature matrix with string labels, in a fixed class order."""

    X: np.ndarray
    y: np.ndarray
    feature_names: Tuple[str, ...] = FEATURE_NAMES
    class_list: Tuple[str, ...] = field(default=CLASS_LIST)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float).reshape(len(self.y), -1)
        self.y = np.asarray([str(v) for v in self.y], dtype=object)
        if self.X.shape[1] != len(self.feature_names):
            raise ValueError(
                f"{self.X.shape[1]} feature columns but {len(self.feature_names)} names"
            )

    def __len__(self):
        return len(self.y)

    @property
    def class_counts(self) -> Dict[str, int]:
        counts = Counter(self.y.tolist())
        return {c: counts.get(c, 0) for c in self.class_list}

    @property
    def rows(self) -> List[FeatureVector]:
        return [FeatureVector(x, as_label(lbl)) for x, lbl in zip(self.X, self.y)]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=int)
        return Dataset(self.X[idx], self.y[idx], self.feature_names, self.class_list)


def build_dataset(windows: Sequence[ManeuverWindow]) -> Dataset:
    if not windows:
        raise EmptyInput("no windows to featurize")
    vectors = [featurize_window(w) for w in windows]
    return Dataset(np.vstack([v.values for v in vectors]), [v.label.value for v in vectors])


class WindowFeaturizer(TransformerMixin, BaseEstimator):
    """Stateless transformer mapping a list of windows to the 60-column matrix."""

    def fit(self, windows, y=None):
        self.n_features_out_ = N_FEATURES
        return self

    def transform(self, windows):
        if not len(windows):
            raise EmptyInput("no windows to featurize")
        return np.vstack([featurize_window(w).values for w in windows])

    def get_feature_names_out(self, input_features=None):
        return np.asarray(FEATURE_NAMES, dtype=object)


def format_dataset_csv(data: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(data.feature_names) + ["label"])
    for x, lbl in zip(data.X.tolist(), data.y.tolist()):
        w.writerow([repr(v) for v in x] + [lbl])
    return buf.getvalue()


def parse_dataset_csv(text: str) -> Dataset:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][-1:] != ["label"]:
        raise MalformedRecord("row 1: dataset header must end with 'label'", line=1)
    names = tuple(rows[0][:-1])
    X, y = [], []
    for rowno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(names) + 1:
            raise MalformedRecord(f"row {rowno}: expected {len(names) + 1} columns", line=rowno)
        try:
            X.append([float(c) for c in row[:-1]])
        except ValueError:
            raise MalformedRecord(f"row {rowno}: non-numeric feature", line=rowno) from None
        y.append(as_label(row[-1]).value)
    if not y:
        raise EmptyInput("dataset CSV has no rows")
    return Dataset(np.array(X), y, names)
