"""Resampling of multi-rate CAN and GPS streams onto one 10 Hz grid."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Dict, Mapping, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .errors import (
    GridOutOfRange,
    InsufficientOverlap,
    MalformedRecord,
    MissingChannel,
    NonFiniteValue,
    TooFewSamples,
)
from .ingest import CAN_CHANNELS, GPS_CHANNELS, GpsFix, SignalSeries, gps_series

TICKS_PER_SECOND = 10
DT = 1.0 / TICKS_PER_SECOND
FRAME_COLUMNS = CAN_CHANNELS + GPS_CHANNELS
KNOT_TOL = 1e-9


def _tick_at_or_after(t: float) -> int:
    k = round(t * TICKS_PER_SECOND)
    if k / TICKS_PER_SECOND < t:
        k += 1
    return k


def _tick_at_or_before(t: float) -> int:
    k = round(t * TICKS_PER_SECOND)
    if k / TICKS_PER_SECOND > t:
        k -= 1
    return k


def tick_grid(first_tick: int, n: int) -> np.ndarray:
    # k / 10 is the correctly rounded value of the decimal, so it matches parsed text
    return np.arange(first_tick, first_tick + n, dtype=float) / TICKS_PER_SECOND


@dataclass(frozen=True)
class FrameTable:
    """All channels on a shared uniform 10 Hz grid starting at ``t0``."""

    t0: float
    columns: Mapping[str, np.ndarray]
    dt: float = field(default=DT, init=False)

    def __post_init__(self):
        cols = {}
        n = None
        for name, values in self.columns.items():
            v = np.asarray(values, dtype=float)
            if n is None:
                n = len(v)
            elif len(v) != n:
                raise ValueError(f"column {name!r} has {len(v)} rows, expected {n}")
            if not np.all(np.isfinite(v)):
                raise NonFiniteValue(f"column {name!r} has non-finite values")
            v.setflags(write=False)
            cols[name] = v
        object.__setattr__(self, "columns", cols)

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    @property
    def first_tick(self) -> int:
        return round(self.t0 * TICKS_PER_SECOND)

    @property
    def timestamps(self) -> np.ndarray:
        return tick_grid(self.first_tick, self.n_rows)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def slice_rows(self, start: int, stop: int) -> "FrameTable":
        return FrameTable(
            (self.first_tick + start) / TICKS_PER_SECOND,
            {k: v[start:stop] for k, v in self.columns.items()},
        )


def spline_second_derivatives(x: np.ndarray, y: np.ndarray, bc: str = "not-a-knot") -> np.ndarray:
    """Knot second derivatives of the cubic spline through (x, y).

    ``bc`` is ``"not-a-knot"`` (third derivative continuous at the second and
    penultimate knots; reproduces any cubic exactly) or ``"natural"`` (zero
    curvature at both ends). Needs at least 4 knots for not-a-knot.
    """
    n = len(x)
    h = np.diff(x)
    slopes = np.diff(y) / h
    m = np.zeros(n)
    if n < 3:
        return m
    # tridiagonal system in the interior unknowns m[1:-1]
    diag = 2.0 * (h[:-1] + h[1:])
    upper = h[1:-1].copy()
    lower = h[1:-1].copy()
    rhs = 6.0 * np.diff(slopes)
    if bc == "not-a-knot":
        if n < 4:
            raise TooFewSamples("not-a-knot spline needs at least 4 knots")
        # eliminate m[0] and m[-1] through the continuity of the third derivative
        diag[0] += h[0] * (h[0] + h[1]) / h[1]
        upper[0] -= h[0] ** 2 / h[1]
        diag[-1] += h[-1] * (h[-1] + h[-2]) / h[-2]
        lower[-1] -= h[-1] ** 2 / h[-2]
    elif bc != "natural":
        raise ValueError(f"unknown boundary condition {bc!r}")
    ab = np.zeros((3, n - 2))
    ab[0, 1:] = upper
    ab[1, :] = diag
    ab[2, :-1] = lower
    m[1:-1] = solve_banded((1, 1), ab, rhs)
    if bc == "not-a-knot":
        m[0] = ((h[0] + h[1]) * m[1] - h[0] * m[2]) / h[1]
        m[-1] = ((h[-1] + h[-2]) * m[-2] - h[-1] * m[-3]) / h[-2]
    return m


def resample_cubic(series: SignalSeries, grid: np.ndarray, bc: str = "not-a-knot") -> np.ndarray:
    """Evaluate the cubic spline through ``series`` at ``grid``.

    Grid points within 1e-9 s of a knot return that knot's value exactly.
    """
    x = np.asarray(series.t, dtype=float)
    y = np.asarray(series.values, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if len(x) < 4:
        raise TooFewSamples(f"series {series.name!r} has {len(x)} samples, need at least 4")
    outside = np.flatnonzero((grid < x[0] - KNOT_TOL) | (grid > x[-1] + KNOT_TOL))
    if outside.size:
        g = float(grid[outside[0]])
        raise GridOutOfRange(
            f"grid point {g!r} outside [{x[0]!r}, {x[-1]!r}] of {series.name!r}", point=g
        )

    origin = x[0]
    xs = x - origin
    gs = grid - origin
    m = spline_second_derivatives(xs, y, bc)

    idx = np.clip(np.searchsorted(xs, gs, side="right") - 1, 0, len(xs) - 2)
    x_lo, x_hi = xs[idx], xs[idx + 1]
    h = x_hi - x_lo
    a = x_hi - gs
    b = gs - x_lo
    out = (
        m[idx] * a**3 / (6.0 * h)
        + m[idx + 1] * b**3 / (6.0 * h)
        + (y[idx] / h - m[idx] * h / 6.0) * a
        + (y[idx + 1] / h - m[idx + 1] * h / 6.0) * b
    )

    nearest = np.clip(np.searchsorted(xs, gs), 0, len(xs) - 1)
    for cand in (nearest, np.maximum(nearest - 1, 0)):
        hit = np.abs(grid - x[cand]) <= KNOT_TOL
        out[hit] = y[cand[hit]]
    return out


def unwrap_angle(values: Sequence[float]) -> np.ndarray:
    """Lift degrees in [0, 360) to a continuous sequence.

    Each step is taken in (-180, 180]; the first value is kept as is.
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("unwrap_angle needs at least one value")
    d = np.diff(v)
    step = d - 360.0 * np.ceil((d - 180.0) / 360.0)
    turns = np.concatenate([[0.0], np.cumsum(np.round((step - d) / 360.0))])
    return v + 360.0 * turns


def wrap_angle(values) -> np.ndarray:
    w = np.mod(np.asarray(values, dtype=float), 360.0)
    w[w >= 360.0] = 0.0
    return w


def align_streams(can: Sequence[SignalSeries], gps: Sequence[GpsFix]) -> FrameTable:
    """Resample CAN and GPS data onto the 10 Hz grid over their common span."""
    by_name = {s.name: s for s in can}
    for name in CAN_CHANNELS:
        if name not in by_name:
            raise MissingChannel(f"CAN channel {name!r} missing", channel=name)
    if len(gps) < 4:
        raise TooFewSamples(f"{len(gps)} GPS fixes, need at least 4")

    gps_by_name = {s.name: s for s in gps_series(gps)}
    streams = [by_name[n] for n in CAN_CHANNELS] + [gps_by_name["latitude"]]
    start = max(float(s.t[0]) for s in streams)
    end = min(float(s.t[-1]) for s in streams)
    if end - start < 1.0:
        raise InsufficientOverlap(f"streams overlap for {max(end - start, 0.0):.3f} s, need 1 s")

    first = _tick_at_or_after(start)
    last = _tick_at_or_before(end)
    grid = tick_grid(first, last - first + 1)

    cols: Dict[str, np.ndarray] = {}
    for name in CAN_CHANNELS:
        cols[name] = resample_cubic(by_name[name], grid)
    # the pedal cannot go below released; splines overshoot right after a release
    cols["accelerator_pedal_position"] = np.maximum(cols["accelerator_pedal_position"], 0.0)
    for name in ("latitude", "longitude", "ground_speed"):
        cols[name] = resample_cubic(gps_by_name[name], grid)
    cols["ground_speed"] = np.maximum(cols["ground_speed"], 0.0)
    heading = gps_by_name["heading"]
    lifted = SignalSeries("heading", heading.unit, heading.t, unwrap_angle(heading.values))
    cols["heading"] = wrap_angle(resample_cubic(lifted, grid))
    return FrameTable(first / TICKS_PER_SECOND, cols)


def format_frame_csv(table: FrameTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = [n for n in FRAME_COLUMNS if n in table.columns]
    w.writerow(["timestamp"] + names)
    cols = [table.columns[n].tolist() for n in names]
    for i, t in enumerate(table.timestamps.tolist()):
        w.writerow([f"{t:.1f}"] + [repr(c[i]) for c in cols])
    return buf.getvalue()


def parse_frame_csv(text: str) -> FrameTable:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][:1] != ["timestamp"]:
        raise MalformedRecord("row 1: frame CSV must start with a 'timestamp' column", line=1)
    names = rows[0][1:]
    if not rows[1:]:
        raise MalformedRecord("frame CSV has no data rows", line=1)
    try:
        data = np.array([[float(c) for c in r] for r in rows[1:] if r], dtype=float)
    except ValueError:
        raise MalformedRecord("frame CSV contains a non-numeric cell") from None
    if data.shape[1] != len(names) + 1:
        raise MalformedRecord("frame CSV rows do not match header width")
    ticks = np.round(data[:, 0] * TICKS_PER_SECOND).astype(np.int64)
    bad = np.flatnonzero(np.diff(ticks) != 1)
    if bad.size:
        row = int(bad[0]) + 3
        raise MalformedRecord(f"row {row}: timestamps are not on a contiguous 0.1 s grid", line=row)
    return FrameTable(int(ticks[0]) / TICKS_PER_SECOND, {n: data[:, i + 1] for i, n in enumerate(names)})
