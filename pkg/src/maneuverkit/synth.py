"""Seeded generator of synthetic CAN + GPS trips around labelled maneuvers.

Each trip is simulated kinematically on the 10 Hz tick grid: a speed profile
and a heading profile per class, steering derived from yaw rate through a
bicycle model, and GPS position integrated from speed and heading. All
instance-to-instance variation is multiplied by ``noise_scale``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import IoFailure
from .ingest import CAN_CHANNELS, parse_can_trace, parse_gps_log
from .sync import TICKS_PER_SECOND, align_streams
from .windows import CLASS_LIST, LabelEvent, ManeuverLabel, ManeuverWindow, as_label, extract_windows, write_subtrip

DEFAULT_PROPORTIONS = {
    "u_turn": 25,
    "left_turn": 20,
    "right_turn": 20,
    "hard_brake": 15,
    "lane_change_left": 8,
    "lane_change_right": 7,
    "approach_intersection": 5,
}

WHEELBASE_M = 2.7
STEERING_RATIO = 15.0
METERS_PER_DEG_LAT = 111_320.0


def class_counts_for(n_windows: int, proportions: Dict[str, float] = DEFAULT_PROPORTIONS) -> Dict[str, int]:
    """Split ``n_windows`` by proportion using largest remainders."""
    total = sum(proportions.values())
    raw = {c: n_windows * proportions.get(c, 0) / total for c in CLASS_LIST}
    counts = {c: int(math.floor(v)) for c, v in raw.items()}
    short = n_windows - sum(counts.values())
    for c in sorted(CLASS_LIST, key=lambda c: (counts[c] - raw[c], CLASS_LIST.index(c)))[:short]:
        counts[c] += 1
    return counts


@dataclass
class GeneratorConfig:
    seed: int = 42
    class_counts: Dict[str, int] = field(default_factory=lambda: class_counts_for(700))
    noise_scale: float = 1.0
    gps_rate_hz: float = 1.0
    gps_jitter_s: float = 0.2
    can_rate_hz: float = 10.0
    can_jitter_s: float = 0.004
    trip_seconds: float = 50.0
    start_epoch: float = 1_600_000_000.0
    initial_heading: Optional[float] = None

    def __post_init__(self):
        self.class_counts = {as_label(k).value: int(v) for k, v in self.class_counts.items()}
        if any(v < 0 for v in self.class_counts.values()):
            raise ValueError("class counts must be non-negative")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be non-negative")
        if self.gps_rate_hz <= 0 or self.can_rate_hz <= 0:
            raise ValueError("rates must be positive")
        if self.trip_seconds < 40:
            raise ValueError("trips must last at least 40 s")

    @classmethod
    def from_json(cls, text: str) -> "GeneratorConfig":
        doc = json.loads(text)
        if "n_windows" in doc:
            doc["class_counts"] = class_counts_for(int(doc.pop("n_windows")))
        return cls(**doc)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"

    @property
    def n_windows(self) -> int:
        return sum(self.class_counts.values())


def _blend(s, s0, s1, v0, v1):
    """Cosine ramp from v0 (s <= s0) to v1 (s >= s1)."""
    u = np.clip((s - s0) / max(s1 - s0, 1e-9), 0.0, 1.0)
    return v0 + (v1 - v0) * (1.0 - np.cos(np.pi * u)) / 2.0


def _pulse(s, center, width):
    """Raised-cosine pulse with unit integral."""
    u = (s - center) / width
    return np.where(np.abs(u) <= 0.5, (1.0 + np.cos(2.0 * np.pi * u)) / width, 0.0)


def _s_pulse(s, center, width):
    """One full sine period over ``width``; integrates to zero."""
    u = (s - center) / width
    return np.where(np.abs(u) <= 0.5, np.sin(2.0 * np.pi * (u + 0.5)), 0.0)


@dataclass
class _Trip:
    s: np.ndarray
    speed: np.ndarray  # m/s
    yaw_rate: np.ndarray  # deg/s, clockwise positive
    braking: np.ndarray  # bool mask where the pedal is released


def _profile(label: ManeuverLabel, s, center, jit, rng, ns) -> _Trip:
    braking = np.zeros_like(s, dtype=bool)
    yaw = np.zeros_like(s)
    if label in (ManeuverLabel.U_TURN, ManeuverLabel.LEFT_TURN, ManeuverLabel.RIGHT_TURN):
        # right turns are tighter and quicker; left turns sweep a wider radius
        v0, vt, dur, net = {
            ManeuverLabel.U_TURN: (12.0, 4.0, 10.0, -180.0),
            ManeuverLabel.LEFT_TURN: (13.0, 7.5, 7.0, -90.0),
            ManeuverLabel.RIGHT_TURN: (13.0, 5.5, 4.5, 90.0),
        }[label]
        v0, vt, dur, net = v0 * jit(0.08), vt * jit(0.08), dur * jit(0.08), net * jit(0.04)
        before = _blend(s, center - 9.0, center - dur / 2, v0, vt)
        after = _blend(s, center + dur / 2, center + dur / 2 + 6.0, vt, v0)
        speed = np.where(s < center, before, after)
        yaw = net * _pulse(s, center, dur)
    elif label is ManeuverLabel.HARD_BRAKE:
        v0 = 16.0 * jit(0.1)
        decel = 7.0 * jit(0.1)
        s_brake = center - 1.0
        s_stop = s_brake + v0 / decel
        s_go = s_stop + 4.0 * jit(0.2)
        speed = np.where(
            s < s_brake,
            v0,
            np.where(s < s_stop, v0 - decel * (s - s_brake), np.minimum(1.5 * np.maximum(s - s_go, 0.0), 9.0)),
        )
        braking = (s >= s_brake) & (s < s_go)
    elif label in (ManeuverLabel.LANE_CHANGE_LEFT, ManeuverLabel.LANE_CHANGE_RIGHT):
        speed = np.full_like(s, 14.0 * jit(0.08))
        dur = 4.0 * jit(0.1)
        # ~3.5 m lateral shift over 4 s at 14 m/s
        peak = 7.0 * jit(0.2)  # largest heading deviation, degrees
        sign = -1.0 if label is ManeuverLabel.LANE_CHANGE_LEFT else 1.0
        yaw = sign * peak * np.pi / dur * _s_pulse(s, center, dur)
    elif label is ManeuverLabel.APPROACH_INTERSECTION:
        v0, v1 = 14.0 * jit(0.08), 3.0 * jit(0.2)
        speed = _blend(s, center - 7.0, center + 5.0, v0, v1)
        yaw = ns * rng.normal(0.0, 4.0) * _pulse(s, center, 8.0)
    else:  # pragma: no cover
        raise ValueError(label)
    # lane-keeping wander, roughly +/-0.3 m lateral at cruising speed
    f = 0.05 + 0.05 * rng.random()
    yaw = yaw + ns * 0.3 * np.sin(2.0 * np.pi * f * s + 2.0 * np.pi * rng.random())
    return _Trip(s, np.maximum(speed, 0.0), yaw, braking)


def _steering_from_yaw(yaw_rate, speed):
    curvature = np.radians(yaw_rate) / np.maximum(speed, 1.0)
    road_wheel = np.arctan(WHEELBASE_M * curvature)
    # wheel angle is left positive; yaw rate is clockwise positive
    return -STEERING_RATIO * np.degrees(road_wheel)


def generate_maneuver(
    label,
    config: GeneratorConfig,
    rng: np.random.Generator,
    t_start: Optional[float] = None,
) -> Tuple[bytes, bytes, LabelEvent]:
    """Simulate one trip realising ``label`` and emit (CAN trace, GPS log, event)."""
    label = as_label(label)
    ns = config.noise_scale
    if t_start is None:
        t_start = config.start_epoch
    start_tick = round(t_start * TICKS_PER_SECOND)
    n_ticks = int(round(config.trip_seconds * TICKS_PER_SECOND)) + 1
    s = np.arange(n_ticks) / TICKS_PER_SECOND
    label_tick = n_ticks // 2
    s_label = label_tick / TICKS_PER_SECOND

    def jit(sd):
        return 1.0 + ns * float(np.clip(rng.normal(0.0, sd), -3 * sd, 3 * sd))

    center = s_label + 1.0 + ns * float(np.clip(rng.normal(0.0, 0.7), -2.0, 2.0))
    trip = _profile(label, s, center, jit, rng, ns)
    dt = 1.0 / TICKS_PER_SECOND
    speed = trip.speed
    accel = np.gradient(speed, dt)

    if config.initial_heading is not None:
        heading0 = float(config.initial_heading)
    else:
        heading0 = 360.0 * rng.random()
    heading = heading0 + np.concatenate([[0.0], np.cumsum((trip.yaw_rate[1:] + trip.yaw_rate[:-1]) / 2 * dt)])

    def noise(sd, size=n_ticks):
        return ns * rng.normal(0.0, sd, size)

    steering = _steering_from_yaw(trip.yaw_rate, speed) + noise(1.0)
    pedal = 6.0 + 0.9 * speed + 14.0 * accel + noise(0.8)
    pedal[trip.braking | ((speed < 0.5) & (accel <= 0))] = 0.0
    pedal = np.clip(pedal, 0.0, 100.0)
    rpm = 750.0 + 105.0 * speed + 40.0 * np.maximum(accel, 0.0) + noise(15.0)
    torque = 3.2 * pedal - 20.0 + 12.0 * np.maximum(accel, 0.0) + noise(3.0)
    fuel_rate = 0.00025 + 0.00003 * pedal * np.maximum(speed, 1.0) / 10.0
    fuel_used = 1.5 + ns * rng.uniform(-1.0, 1.0) + np.cumsum(fuel_rate) * dt
    odometer = 12_000.0 + ns * rng.uniform(-5_000.0, 5_000.0) + np.cumsum(speed) * dt / 1000.0
    fuel_level = 60.0 + ns * rng.uniform(-30.0, 30.0) - (fuel_used - fuel_used[0]) / 50.0 * 100.0

    channels = {
        "engine_speed": (rpm, 1),
        "fuel_consumed_since_restart": (fuel_used, 6),
        "odometer": (odometer, 4),
        "accelerator_pedal_position": (pedal, 2),
        "torque_at_transmission": (torque, 2),
        "steering_wheel_angle": (steering, 2),
        "vehicle_speed": (speed * 3.6 + noise(0.3), 2),
        "fuel_level": (fuel_level, 4),
    }
    can_step = max(1, round(TICKS_PER_SECOND / config.can_rate_hz))
    ticks = np.arange(0, n_ticks, can_step)
    jitter = config.can_jitter_s * ns
    lines = []
    rounded = {name: np.round(values, digits).tolist() for name, (values, digits) in channels.items()}
    for k in ticks.tolist():
        t_tick = (start_tick + k) / TICKS_PER_SECOND
        for name in CAN_CHANNELS:
            t = t_tick if jitter == 0 else round(t_tick + rng.uniform(-jitter, jitter), 4)
            lines.append(f'{{"name": "{name}", "value": {rounded[name][k]!r}, "timestamp": {t!r}}}')
    can_bytes = ("\n".join(lines) + "\n").encode("utf-8")

    # position integrated from speed and heading, in metres east/north
    rad = np.radians(heading)
    east = np.concatenate([[0.0], np.cumsum((speed[1:] * np.sin(rad[1:]) + speed[:-1] * np.sin(rad[:-1])) / 2 * dt)])
    north = np.concatenate([[0.0], np.cumsum((speed[1:] * np.cos(rad[1:]) + speed[:-1] * np.cos(rad[:-1])) / 2 * dt)])
    lat0 = 28.60 + ns * rng.uniform(-0.02, 0.02)
    lon0 = -81.20 + ns * rng.uniform(-0.02, 0.02)

    period = 1.0 / config.gps_rate_hz
    n_fix = int(math.floor(config.trip_seconds / period)) + 1
    t_rel = np.arange(n_fix) * period + config.gps_jitter_s * rng.uniform(-1.0, 1.0, n_fix)
    t_rel = np.clip(t_rel, 0.0, s[-1])
    t_rel = np.unique(np.round(t_rel, 3))
    m = len(t_rel)
    fix_east = np.interp(t_rel, s, east) + noise(0.3, m)
    fix_north = np.interp(t_rel, s, north) + noise(0.3, m)
    fix_lat = lat0 + fix_north / METERS_PER_DEG_LAT
    fix_lon = lon0 + fix_east / (METERS_PER_DEG_LAT * math.cos(math.radians(lat0)))
    fix_speed = np.maximum(np.interp(t_rel, s, speed) + noise(0.15, m), 0.0)
    fix_heading = np.mod(np.interp(t_rel, s, heading) + noise(0.8, m), 360.0)
    fix_heading[fix_heading >= 360.0] = 0.0

    rows = ["timestamp,latitude,longitude,ground_speed,heading"]
    base = start_tick / TICKS_PER_SECOND
    fixes = zip(t_rel.tolist(), fix_lat.tolist(), fix_lon.tolist(), fix_speed.tolist(), fix_heading.tolist())
    for t, lat, lon, spd, hdg in fixes:
        rows.append(
            f"{round(base + t, 3)!r},{round(lat, 7)!r},{round(lon, 7)!r},{round(spd, 3)!r},{round(hdg, 2) % 360.0!r}"
        )
    gps_bytes = ("\n".join(rows) + "\n").encode("utf-8")
    event = LabelEvent((start_tick + label_tick) / TICKS_PER_SECOND, label)
    return can_bytes, gps_bytes, event


def instance_plan(config: GeneratorConfig) -> List[Tuple[int, str]]:
    plan = []
    for label in CLASS_LIST:
        for _ in range(config.class_counts.get(label, 0)):
            plan.append((len(plan), label))
    return plan


def instance_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(index)])


def trip_start(config: GeneratorConfig, index: int) -> float:
    # trips sit 1000 s apart on the tick grid so timestamps never collide
    return (round(config.start_epoch * TICKS_PER_SECOND) + index * 1000 * TICKS_PER_SECOND) / TICKS_PER_SECOND


def generate_window(config: GeneratorConfig, index: int, label) -> ManeuverWindow:
    """Generate one trip and push it through ingest, sync and windowing."""
    can, gps, event = generate_maneuver(label, config, instance_rng(config.seed, index), trip_start(config, index))
    table = align_streams(parse_can_trace(can), parse_gps_log(gps))
    windows, skipped = extract_windows(table, [event])
    if skipped:  # pragma: no cover - trips are built to contain their window
        raise RuntimeError(f"generated trip lost its window: {skipped[0].reason}")
    return windows[0]


def generate_windows(config: GeneratorConfig) -> List[ManeuverWindow]:
    return [generate_window(config, i, label) for i, label in instance_plan(config)]


def generate_dataset(config: GeneratorConfig, directory) -> List[Path]:
    """Write one sub-trip directory per requested maneuver instance."""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {directory}: {exc.strerror}", path=str(directory)) from None
    return [write_subtrip(w, directory) for w in generate_windows(config)]
