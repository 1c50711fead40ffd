"""JSON persistence for fitted classifiers."""

import json
from pathlib import Path

from .errors import IoFailure, MalformedRecord, MissingFile
from .forest import RandomForestClassifier
from .svm import SVMClassifier

_KINDS = {"forest": RandomForestClassifier, "svm": SVMClassifier}


def model_to_json(model) -> str:
    return json.dumps(model.to_dict(), separators=(",", ":")) + "\n"


def model_from_json(text: str):
    try:
        doc = json.loads(text)
        cls = _KINDS[doc["kind"]]
        return cls.from_dict(doc)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise MalformedRecord(f"not a model document: {exc}") from None


def save_model(model, path) -> None:
    try:
        Path(path).write_text(model_to_json(model), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc.strerror}", path=str(path)) from None


def load_model(path):
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"{path} does not exist", path=str(path))
    return model_from_json(path.read_text(encoding="utf-8"))
