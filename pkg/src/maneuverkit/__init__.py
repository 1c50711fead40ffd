"""Driving-maneuver classification from CAN and GPS telemetry."""

from .errors import ManeuverKitError
from .evaluation import EvalReport, evaluate, split_stratified
from .features import Dataset, FeatureVector, WindowFeaturizer, build_dataset, featurize_window
from .forest import RandomForestClassifier, gini_impurity, predict_forest, train_forest, train_tree
from .ingest import CanChannel, GpsChannel, GpsFix, SignalSeries, parse_can_trace, parse_gps_log, validate_series
from .svm import KernelSpec, SVMClassifier, kernel_eval, predict_svm, smo_solve, train_svm
from .sync import FrameTable, align_streams, resample_cubic, unwrap_angle
from .synth import GeneratorConfig, generate_dataset, generate_maneuver, generate_windows
from .windows import LabelEvent, ManeuverLabel, ManeuverWindow, extract_windows, read_subtrip, write_subtrip

__version__ = "0.1.0"

__all__ = [
    "CanChannel",
    "Dataset",
    "EvalReport",
    "FeatureVector",
    "FrameTable",
    "GeneratorConfig",
    "GpsChannel",
    "GpsFix",
    "KernelSpec",
    "LabelEvent",
    "ManeuverKitError",
    "ManeuverLabel",
    "ManeuverWindow",
    "RandomForestClassifier",
    "SVMClassifier",
    "SignalSeries",
    "WindowFeaturizer",
    "align_streams",
    "build_dataset",
    "evaluate",
    "extract_windows",
    "featurize_window",
    "generate_dataset",
    "generate_maneuver",
    "generate_windows",
    "gini_impurity",
    "kernel_eval",
    "parse_can_trace",
    "parse_gps_log",
    "predict_forest",
    "predict_svm",
    "read_subtrip",
    "resample_cubic",
    "smo_solve",
    "split_stratified",
    "train_forest",
    "train_svm",
    "train_tree",
    "unwrap_angle",
    "validate_series",
    "write_subtrip",
]
