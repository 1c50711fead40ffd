"""Labelled +/-10 s maneuver windows and the per-maneuver sub-trip layout."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import List, NamedTuple, Sequence, Tuple

from .errors import IoFailure, LabelUnknown, MalformedRecord, MissingFile
from .sync import TICKS_PER_SECOND, FrameTable, format_frame_csv, parse_frame_csv

HALF_WIDTH_S = 10
HALF_WIDTH_TICKS = HALF_WIDTH_S * TICKS_PER_SECOND
WINDOW_ROWS = 2 * HALF_WIDTH_TICKS + 1


class ManeuverLabel(str, Enum):
    U_TURN = "u_turn"
    LEFT_TURN = "left_turn"
    RIGHT_TURN = "right_turn"
    HARD_BRAKE = "hard_brake"
    LANE_CHANGE_LEFT = "lane_change_left"
    LANE_CHANGE_RIGHT = "lane_change_right"
    APPROACH_INTERSECTION = "approach_intersection"

    def __str__(self):
        return self.value


CLASS_LIST: Tuple[str, ...] = tuple(m.value for m in ManeuverLabel)


def as_label(name) -> ManeuverLabel:
    try:
        return ManeuverLabel(str(name))
    except ValueError:
        raise LabelUnknown(f"unknown maneuver label {name!r}", label=str(name)) from None


@dataclass(frozen=True)
class LabelEvent:
    t_label: float
    label: ManeuverLabel

    def __post_init__(self):
        if not math.isfinite(self.t_label):
            raise ValueError("t_label must be finite")
        object.__setattr__(self, "label", as_label(self.label))


@dataclass(frozen=True)
class ManeuverWindow:
    label: ManeuverLabel
    t_label: float
    frames: FrameTable


class Skip(NamedTuple):
    event: LabelEvent
    reason: str


def extract_windows(
    table: FrameTable, events: Sequence[LabelEvent]
) -> Tuple[List[ManeuverWindow], List[Skip]]:
    """Cut a 201-row window around each event.

    The window is centred on the grid tick nearest the label time. Events
    whose full span does not fit inside the table are skipped with reason
    ``"left edge"`` or ``"right edge"``.
    """
    windows, skipped = [], []
    n = table.n_rows
    for ev in sorted(events, key=lambda e: e.t_label):
        center = round((ev.t_label - table.t0) * TICKS_PER_SECOND)
        lo, hi = center - HALF_WIDTH_TICKS, center + HALF_WIDTH_TICKS
        if lo < 0:
            skipped.append(Skip(ev, "left edge"))
        elif hi > n - 1:
            skipped.append(Skip(ev, "right edge"))
        else:
            windows.append(ManeuverWindow(ev.label, ev.t_label, table.slice_rows(lo, hi + 1)))
    return windows, skipped


def subtrip_name(window: ManeuverWindow) -> str:
    return f"{window.label.value}_{window.t_label!r}"


def write_subtrip(window: ManeuverWindow, directory) -> Path:
    """Write ``<label>_<t_label>/{data.csv,meta.json}`` under ``directory``."""
    target = Path(directory) / subtrip_name(window)
    try:
        target.mkdir(parents=True, exist_ok=True)
        (target / "data.csv").write_text(format_frame_csv(window.frames), encoding="utf-8")
        meta = {"label": window.label.value, "t_label": window.t_label}
        (target / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write sub-trip {target}: {exc.strerror}", path=str(target)) from None
    return target


def read_subtrip(directory) -> ManeuverWindow:
    directory = Path(directory)
    data_path, meta_path = directory / "data.csv", directory / "meta.json"
    for p in (data_path, meta_path):
        if not p.is_file():
            raise MissingFile(f"{p} does not exist", path=str(p))
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"{meta_path}: invalid JSON ({exc.msg})") from None
    if not isinstance(meta, dict) or "label" not in meta or "t_label" not in meta:
        raise MalformedRecord(f"{meta_path}: requires 'label' and 't_label'")
    label = as_label(meta["label"])
    t_label = meta["t_label"]
    if not isinstance(t_label, (int, float)) or isinstance(t_label, bool) or not math.isfinite(t_label):
        raise MalformedRecord(f"{meta_path}: 't_label' must be a finite number")
    frames = parse_frame_csv(data_path.read_text(encoding="utf-8"))
    ts = frames.timestamps
    if not (ts[0] - 0.05 <= t_label <= ts[-1] + 0.05) or ts[-1] - ts[0] > 2 * HALF_WIDTH_S + 0.1:
        raise MalformedRecord(f"{directory}: frames do not form a window around t_label")
    return ManeuverWindow(label, float(t_label), frames)


def list_subtrips(root) -> List[Path]:
    root = Path(root)
    if not root.is_dir():
        raise MissingFile(f"{root} is not a directory", path=str(root))
    return sorted(p for p in root.iterdir() if (p / "meta.json").is_file())


def parse_events_csv(text: str) -> List[LabelEvent]:
    """Read a ``timestamp,label`` events file."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != ["timestamp", "label"]:
        raise MalformedRecord("row 1: events header must be 'timestamp,label'", line=1)
    events = []
    for rowno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise MalformedRecord(f"row {rowno}: expected 2 columns", line=rowno)
        try:
            t = float(row[0])
        except ValueError:
            raise MalformedRecord(f"row {rowno}: non-numeric timestamp", line=rowno) from None
        events.append(LabelEvent(t, as_label(row[1].strip())))
    return events


def format_events_csv(events: Sequence[LabelEvent]) -> str:
    lines = ["timestamp,label"] + [f"{e.t_label!r},{e.label.value}" for e in events]
    return "\n".join(lines) + "\n"
