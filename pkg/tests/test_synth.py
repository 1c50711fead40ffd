import itertools
import math

import numpy as np
import pytest

from maneuverkit.features import build_dataset
from maneuverkit.forest import RandomForestClassifier
from maneuverkit.ingest import gps_series, parse_can_trace, parse_gps_log
from maneuverkit.sync import align_streams, unwrap_angle
from maneuverkit.synth import (
    DEFAULT_PROPORTIONS,
    GeneratorConfig,
    class_counts_for,
    generate_dataset,
    generate_maneuver,
    generate_window,
    generate_windows,
    instance_rng,
)
from maneuverkit.windows import CLASS_LIST, read_subtrip

SEEDS = range(8)


def trip(label, seed, **cfg):
    config = GeneratorConfig(seed=seed, **cfg)
    can, gps, event = generate_maneuver(label, config, instance_rng(seed, 0))
    return parse_can_trace(can), parse_gps_log(gps), event


def by_name(series):
    return {s.name: s for s in series}


def test_default_counts():
    counts = class_counts_for(700)
    assert [counts[c] for c in CLASS_LIST] == [175, 140, 140, 105, 56, 49, 35]
    assert sum(class_counts_for(123).values()) == 123
    assert list(DEFAULT_PROPORTIONS) == list(CLASS_LIST)


def test_config_json_round_trip():
    cfg = GeneratorConfig(seed=5, noise_scale=0.5)
    assert GeneratorConfig.from_json(cfg.to_json()) == cfg
    assert GeneratorConfig.from_json('{"seed": 1, "n_windows": 70}').n_windows == 70


@pytest.mark.parametrize("bad", [{"noise_scale": -1}, {"gps_rate_hz": 0}, {"class_counts": {"u_turn": -1}}])
def test_config_rejects(bad):
    with pytest.raises(ValueError):
        GeneratorConfig(**bad)


@pytest.mark.parametrize("label", CLASS_LIST)
def test_trip_is_long_and_ingestible(label):
    can, gps, event = trip(label, 11)
    engine = by_name(can)["engine_speed"]
    assert len(can) == 8
    assert engine.t[-1] - engine.t[0] >= 40
    assert event.label == label
    table = align_streams(can, gps)
    assert table.timestamps[0] <= event.t_label - 10 and table.timestamps[-1] >= event.t_label + 10


@pytest.mark.parametrize("seed", SEEDS)
def test_hard_brake_trace_releases_pedal(seed):
    can, _, event = trip("hard_brake", seed)
    pedal = by_name(can)["accelerator_pedal_position"]
    inside = np.abs(pedal.t - event.t_label) <= 10
    assert pedal.values[inside].min() == 0.0
    assert pedal.values[inside].max() > 10.0


@pytest.mark.parametrize("seed", SEEDS)
def test_hard_brake_signature(seed):
    window = generate_window(GeneratorConfig(seed=seed), 0, "hard_brake")
    pedal = window.frames["accelerator_pedal_position"]
    speed = window.frames["vehicle_speed"]
    assert pedal.min() == 0.0
    assert speed[-1] - speed[0] < -20.0


@pytest.mark.parametrize("seed", SEEDS)
def test_u_turn_heading(seed):
    window = generate_window(GeneratorConfig(seed=seed), 0, "u_turn")
    heading = unwrap_angle(window.frames["heading"])
    assert 150 <= abs(heading[-1] - heading[0]) <= 210


@pytest.mark.parametrize("label,lo,hi", [("left_turn", 60, 120), ("right_turn", 60, 120)])
def test_turn_heading(label, lo, hi):
    for seed in SEEDS:
        heading = unwrap_angle(generate_window(GeneratorConfig(seed=seed), 0, label).frames["heading"])
        assert lo <= abs(heading[-1] - heading[0]) <= hi


@pytest.mark.parametrize("label", ["lane_change_left", "lane_change_right"])
def test_lane_change_keeps_heading(label):
    for seed in SEEDS:
        heading = unwrap_angle(generate_window(GeneratorConfig(seed=seed), 0, label).frames["heading"])
        assert abs(heading[-1] - heading[0]) < 15


def steering_shape(window):
    steer = np.abs(window.frames["steering_wheel_angle"])
    peak = steer.max()
    return peak, np.count_nonzero(steer > peak / 2) / 10.0


@pytest.mark.parametrize("seed", SEEDS)
def test_left_turn_wider_than_right(seed):
    cfg = GeneratorConfig(seed=seed)
    left_peak, left_dur = steering_shape(generate_window(cfg, 0, "left_turn"))
    right_peak, right_dur = steering_shape(generate_window(cfg, 0, "right_turn"))
    assert left_peak < right_peak
    assert left_dur > right_dur


def test_steering_sign_convention():
    cfg = GeneratorConfig(seed=0, noise_scale=0.0)
    left = generate_window(cfg, 0, "left_turn").frames["steering_wheel_angle"]
    right = generate_window(cfg, 0, "right_turn").frames["steering_wheel_angle"]
    assert left.max() > 100 and right.min() < -100


@pytest.mark.parametrize("label", ["approach_intersection", "lane_change_left", "hard_brake"])
def test_kinematic_consistency(label):
    # before the maneuver the car cruises, so fix-to-fix displacement tracks ground speed
    _, fixes, event = trip(label, 4)
    gps = by_name(gps_series(fixes))
    t, lat, lon = gps["latitude"].t, gps["latitude"].values, gps["longitude"].values
    speed = gps["ground_speed"].values
    keep = t < event.t_label - 8
    t, lat, lon, speed = t[keep], lat[keep], lon[keep], speed[keep]
    north = np.diff(lat) * 111_320.0
    east = np.diff(lon) * 111_320.0 * math.cos(math.radians(lat[0]))
    derived = np.hypot(north, east) / np.diff(t)
    reported = (speed[1:] + speed[:-1]) / 2
    assert len(derived) >= 8
    np.testing.assert_allclose(derived, reported, rtol=0.10)


def test_dataset_directory(tmp_path):
    cfg = GeneratorConfig(seed=1, class_counts={"u_turn": 2, "hard_brake": 1, "lane_change_right": 3})
    paths = generate_dataset(cfg, tmp_path)
    assert len(paths) == 6 == len(list(tmp_path.iterdir()))
    names = sorted(p.name.rsplit("_", 1)[0] for p in paths)
    assert names == sorted(["u_turn"] * 2 + ["hard_brake"] + ["lane_change_right"] * 3)
    assert sorted(read_subtrip(p).label.value for p in paths) == names


def test_same_seed_same_bytes(tmp_path):
    cfg = GeneratorConfig(seed=9, class_counts={"u_turn": 2, "left_turn": 2})
    a = generate_dataset(cfg, tmp_path / "a")
    b = generate_dataset(cfg, tmp_path / "b")
    for p, q in zip(a, b):
        assert (p / "data.csv").read_bytes() == (q / "data.csv").read_bytes()
    c = generate_dataset(GeneratorConfig(seed=10, class_counts=cfg.class_counts), tmp_path / "c")
    assert (a[0] / "data.csv").read_bytes() != (c[0] / "data.csv").read_bytes()


def test_zero_noise_is_a_template():
    cfg = GeneratorConfig(seed=3, noise_scale=0.0, class_counts={"u_turn": 4})
    traces = [w.frames["steering_wheel_angle"] for w in generate_windows(cfg)]
    for other in traces[1:]:
        assert np.array_equal(traces[0], other)


def test_classes_pairwise_separable_by_shallow_tree():
    cfg = GeneratorConfig(seed=21, class_counts={c: 40 for c in CLASS_LIST})
    data = build_dataset(generate_windows(cfg))
    for a, b in itertools.combinations(CLASS_LIST, 2):
        rows = np.isin(data.y, [a, b])
        tree = RandomForestClassifier(n_trees=1, max_depth=3, max_features=None, bootstrap=False, seed=0)
        tree.fit(data.X[rows], data.y[rows])
        assert np.mean(tree.predict(data.X[rows]) == data.y[rows]) >= 0.90, (a, b)
