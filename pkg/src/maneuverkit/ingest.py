"""Parsing of raw CAN traces (OpenXC-style JSON lines) and GPS CSV logs."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np

from .errors import (
    EmptyInput,
    EmptySeries,
    MalformedRecord,
    NonFiniteValue,
    NonMonotonicTime,
    RangeViolation,
)

Source = Union[bytes, str, Iterable[bytes], Iterable[str]]


class CanChannel(str, Enum):
    ENGINE_SPEED = "engine_speed"
    FUEL_CONSUMED_SINCE_RESTART = "fuel_consumed_since_restart"
    ODOMETER = "odometer"
    ACCELERATOR_PEDAL_POSITION = "accelerator_pedal_position"
    TORQUE_AT_TRANSMISSION = "torque_at_transmission"
    STEERING_WHEEL_ANGLE = "steering_wheel_angle"
    VEHICLE_SPEED = "vehicle_speed"
    FUEL_LEVEL = "fuel_level"

    @property
    def unit(self) -> str:
        return CAN_UNITS[self]


class GpsChannel(str, Enum):
    LATITUDE = "latitude"
    LONGITUDE = "longitude"
    GROUND_SPEED = "ground_speed"
    HEADING = "heading"

    @property
    def unit(self) -> str:
        return GPS_UNITS[self]


CAN_UNITS = {
    CanChannel.ENGINE_SPEED: "rpm",
    CanChannel.FUEL_CONSUMED_SINCE_RESTART: "L",
    CanChannel.ODOMETER: "km",
    CanChannel.ACCELERATOR_PEDAL_POSITION: "%",
    CanChannel.TORQUE_AT_TRANSMISSION: "N*m",
    # signed, left positive
    CanChannel.STEERING_WHEEL_ANGLE: "deg",
    CanChannel.VEHICLE_SPEED: "km/h",
    CanChannel.FUEL_LEVEL: "%",
}

GPS_UNITS = {
    GpsChannel.LATITUDE: "deg",
    GpsChannel.LONGITUDE: "deg",
    GpsChannel.GROUND_SPEED: "m/s",
    GpsChannel.HEADING: "deg",
}

CAN_CHANNELS: Tuple[str, ...] = tuple(c.value for c in CanChannel)
GPS_CHANNELS: Tuple[str, ...] = tuple(c.value for c in GpsChannel)
GPS_HEADER = ("timestamp", "latitude", "longitude", "ground_speed", "heading")


@dataclass(frozen=True)
class SignalSample:
    t: float
    value: float


@dataclass(frozen=True)
class SignalSeries:
    """One named channel as ascending timestamps with matching values."""

    name: str
    unit: str
    t: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError("t and values must be 1-D arrays of equal length")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", v)

    @property
    def samples(self) -> List[SignalSample]:
        return [SignalSample(float(a), float(b)) for a, b in zip(self.t, self.values)]

    def __len__(self):
        return len(self.t)

    def __eq__(self, other):
        if not isinstance(other, SignalSeries):
            return NotImplemented
        return (
            self.name == other.name
            and self.unit == other.unit
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


@dataclass(frozen=True)
class GpsFix:
    t: float
    latitude: float
    longitude: float
    ground_speed: float
    heading: float


def _lines(source: Source) -> List[str]:
    if isinstance(source, bytes):
        return source.decode("utf-8").splitlines()
    if isinstance(source, str):
        return source.splitlines()
    out = []
    for line in source:
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        out.append(line.rstrip("\r\n"))
    return out


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def parse_can_trace(source: Source, *, stats: dict | None = None) -> List[SignalSeries]:
    """Parse newline-delimited ``{"name", "value", "timestamp"}`` records.

    Returns one series per recognised CAN channel, in enumeration order.
    Duplicate timestamps keep the last value seen. If ``stats`` is given it
    receives ``skipped_unknown`` (count of records with unrecognised names).
    """
    per_channel = {}
    skipped = 0
    for lineno, line in enumerate(_lines(source), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"line {lineno}: invalid JSON ({exc.msg})", line=lineno) from None
        if not isinstance(rec, dict):
            raise MalformedRecord(f"line {lineno}: record is not an object", line=lineno)
        name, value, ts = rec.get("name"), rec.get("value"), rec.get("timestamp")
        if not isinstance(name, str) or not _is_number(value) or not _is_number(ts):
            raise MalformedRecord(
                f"line {lineno}: requires string 'name', numeric 'value' and 'timestamp'",
                line=lineno,
            )
        if name not in CAN_CHANNELS:
            skipped += 1
            continue
        # dict insertion keeps the last-seen value for a repeated timestamp
        per_channel.setdefault(name, {})[float(ts)] = float(value)

    if stats is not None:
        stats["skipped_unknown"] = skipped
    if not per_channel:
        raise EmptyInput("no recognised CAN samples")

    out = []
    for channel in CanChannel:
        samples = per_channel.get(channel.value)
        if not samples:
            continue
        t = np.fromiter(samples.keys(), dtype=float, count=len(samples))
        v = np.fromiter(samples.values(), dtype=float, count=len(samples))
        order = np.argsort(t, kind="stable")
        out.append(validate_series(SignalSeries(channel.value, channel.unit, t[order], v[order])))
    return out


def format_can_trace(series: Sequence[SignalSeries]) -> bytes:
    """Serialize series to the JSON-lines trace format, time-major."""
    records = []
    for s in series:
        for t, v in zip(s.t.tolist(), s.values.tolist()):
            records.append((t, s.name, v))
    records.sort(key=lambda r: r[0])
    lines = [json.dumps({"name": n, "value": v, "timestamp": t}) for t, n, v in records]
    return ("\n".join(lines) + "\n").encode("utf-8")


def normalize_heading(h: float) -> float:
    h = math.fmod(h, 360.0)
    if h < 0:
        h += 360.0
    if h >= 360.0:
        h = 0.0
    return h


def parse_gps_log(source: Source) -> List[GpsFix]:
    """Parse a ``timestamp,latitude,longitude,ground_speed,heading`` CSV.

    A header of ``ground_speed_kmh`` marks speeds in km/h; they are converted
    to m/s. Fixes are returned in ascending time order.
    """
    lines = _lines(source)
    reader = csv.reader(lines)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise EmptyInput("GPS log is empty") from None
    kmh = False
    expected = list(GPS_HEADER)
    if header == expected:
        pass
    elif header == expected[:3] + ["ground_speed_kmh"] + expected[4:]:
        kmh = True
    else:
        raise MalformedRecord(f"row 1: unexpected header {','.join(header)!r}", line=1)

    fixes = []
    for rowno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 5:
            raise MalformedRecord(f"row {rowno}: expected 5 columns, got {len(row)}", line=rowno)
        try:
            t, lat, lon, speed, heading = (float(c) for c in row)
        except ValueError:
            raise MalformedRecord(f"row {rowno}: non-numeric cell", line=rowno) from None
        if not all(math.isfinite(x) for x in (t, lat, lon, speed, heading)):
            raise MalformedRecord(f"row {rowno}: non-finite cell", line=rowno)
        if not -90.0 <= lat <= 90.0:
            raise RangeViolation(f"row {rowno}: latitude {lat} outside [-90, 90]", line=rowno)
        if not -180.0 <= lon <= 180.0:
            raise RangeViolation(f"row {rowno}: longitude {lon} outside [-180, 180]", line=rowno)
        if kmh:
            speed /= 3.6
        if speed < 0:
            raise RangeViolation(f"row {rowno}: negative ground speed", line=rowno)
        fixes.append(GpsFix(t, lat, lon, speed, normalize_heading(heading)))

    if not fixes:
        raise EmptyInput("GPS log has no rows")
    fixes.sort(key=lambda f: f.t)
    return fixes


def format_gps_log(fixes: Sequence[GpsFix]) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(GPS_HEADER)
    for f in fixes:
        w.writerow([repr(f.t), repr(f.latitude), repr(f.longitude), repr(f.ground_speed), repr(f.heading)])
    return buf.getvalue().encode("utf-8")


def gps_series(fixes: Sequence[GpsFix]) -> List[SignalSeries]:
    """Split GPS fixes into one series per GPS channel."""
    t = np.array([f.t for f in fixes], dtype=float)
    out = []
    for ch in GpsChannel:
        v = np.array([getattr(f, ch.value) for f in fixes], dtype=float)
        out.append(SignalSeries(ch.value, ch.unit, t, v))
    return out


def validate_series(series: SignalSeries) -> SignalSeries:
    if len(series.t) == 0:
        raise EmptySeries(f"series {series.name!r} is empty")
    bad = np.flatnonzero(~np.isfinite(series.t) | ~np.isfinite(series.values))
    if bad.size:
        i = int(bad[0])
        raise NonFiniteValue(f"series {series.name!r}: non-finite sample at index {i}", index=i)
    steps = np.flatnonzero(np.diff(series.t) <= 0)
    if steps.size:
        i = int(steps[0]) + 1
        raise NonMonotonicTime(f"series {series.name!r}: time not ascending at index {i}", index=i)
    return series
