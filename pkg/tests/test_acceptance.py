"""Acceptance gate: one test per criterion, each recording a pass/fail line."""
import json
import subprocess
import sys
import time
from contextlib import contextmanager
from itertools import product

import numpy as np
import pytest

from conftest import ACCEPTANCE_RESULTS
from oracles import exhaustive_stump, naive_report
from maneuverkit.evaluation import EvalReport, evaluate, evaluate_predictions, split_stratified
from maneuverkit.features import build_dataset, parse_dataset_csv
from maneuverkit.forest import Leaf, RandomForestClassifier, Split, train_tree
from maneuverkit.ingest import SignalSeries, parse_can_trace, parse_gps_log
from maneuverkit.persistence import load_model
from maneuverkit.svm import KernelSpec, SVMClassifier, smo_solve
from maneuverkit.sync import align_streams, resample_cubic, tick_grid
from maneuverkit.synth import GeneratorConfig, generate_maneuver, generate_windows, instance_rng
from maneuverkit.windows import CLASS_LIST, LabelEvent, extract_windows, read_subtrip, write_subtrip

pytestmark = pytest.mark.slow

SEED = 42
ORDERING_SEEDS = (42, 7, 2024)
LANE_CHANGES = ("lane_change_left", "lane_change_right")
KKT_TOL = 1e-3


@contextmanager
def criterion(number, title):
    notes = []
    try:
        yield notes
    except BaseException:
        ACCEPTANCE_RESULTS.append(f"criterion {number:2d} FAIL: {title} | {'; '.join(notes)}")
        raise
    ACCEPTANCE_RESULTS.append(f"criterion {number:2d} PASS: {title} | {'; '.join(notes)}")


def run_pipeline(kind, workdir, seed=SEED):
    start = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-m", "maneuverkit", "pipeline", "--seed", str(seed), "--model", kind,
         "--workdir", str(workdir)],
        capture_output=True, text=True,
    )
    elapsed = time.perf_counter() - start
    assert proc.returncode == 0, proc.stderr
    return elapsed


@pytest.fixture(scope="session")
def pipeline_runs(tmp_path_factory):
    """Default pipeline, both model kinds, each run twice into separate directories."""
    root = tmp_path_factory.mktemp("pipeline")
    runs = {}
    for kind, rep in product(("forest", "svm"), ("a", "b")):
        work = root / f"{kind}_{rep}"
        runs[kind, rep] = (work, run_pipeline(kind, work))
    return runs


def report_of(runs, kind):
    work, _ = runs[kind, "a"]
    return EvalReport.from_dict(json.loads((work / "report.json").read_text()))


def lane_change_f1(report):
    f1 = report.per_class("f1")
    return float(np.mean([f1[c] for c in LANE_CHANGES]))


@pytest.fixture(scope="session")
def ordering_reports(pipeline_runs):
    out = {SEED: (report_of(pipeline_runs, "forest"), report_of(pipeline_runs, "svm"))}
    for seed in ORDERING_SEEDS:
        if seed in out:
            continue
        data = build_dataset(generate_windows(GeneratorConfig(seed=seed)))
        train, test = split_stratified(data, 0.2, seed)
        forest = RandomForestClassifier(seed=seed, class_order=data.class_list).fit(train.X, train.y)
        svm = SVMClassifier(seed=seed, class_order=data.class_list).fit(train.X, train.y)
        out[seed] = (evaluate(forest, test), evaluate(svm, test))
    return out


def test_criterion_01_forest_headline(pipeline_runs):
    with criterion(1, "forest per-class F1/precision/recall >= 0.80, pipeline < 60 s") as notes:
        report = report_of(pipeline_runs, "forest")
        worst = float(min(report.precision.min(), report.recall.min(), report.f1.min()))
        elapsed = pipeline_runs["forest", "a"][1]
        notes.append(f"worst per-class metric {worst:.3f}, runtime {elapsed:.1f} s")
        assert tuple(report.class_list) == tuple(CLASS_LIST) and report.support.min() > 0
        assert worst >= 0.80
        assert elapsed < 60.0


def test_criterion_02_hard_brake_recall(pipeline_runs):
    with criterion(2, "hard_brake recall >= 0.95 for forest and svm") as notes:
        recalls = {kind: report_of(pipeline_runs, kind).per_class("recall")["hard_brake"] for kind in ("forest", "svm")}
        notes.append(", ".join(f"{k} {v:.3f}" for k, v in recalls.items()))
        assert all(r >= 0.95 for r in recalls.values())


def test_criterion_03_classifier_ordering(ordering_reports):
    with criterion(3, "forest >= svm on macro-F1 and lane-change F1, >= 2 of 3 seeds") as notes:
        holds = 0
        for seed in ORDERING_SEEDS:
            forest, svm = ordering_reports[seed]
            ok = forest.macro_f1 >= svm.macro_f1 and lane_change_f1(forest) >= lane_change_f1(svm)
            holds += ok
            notes.append(
                f"seed {seed}: macro {forest.macro_f1:.3f}/{svm.macro_f1:.3f} "
                f"lane {lane_change_f1(forest):.3f}/{lane_change_f1(svm):.3f}"
            )
        assert holds >= 2


def test_criterion_04_spline():
    with criterion(4, "spline: cubic interior rel err < 1e-6, affine < 1e-9, knots exact") as notes:
        def p(t):
            return t**3 - 2 * t**2 + t

        knots = np.arange(7) * 0.5
        series = SignalSeries("x", "u", knots, p(knots))
        grid = np.linspace(0.5, 2.5, 2001)
        got = resample_cubic(series, grid)
        expected = p(grid)
        rel = np.abs(got - expected) / np.maximum(np.abs(expected), 1.0)
        notes.append(f"cubic max rel err {rel.max():.1e}")
        assert rel.max() < 1e-6

        t = np.array([0.0, 1.0, 2.0, 3.0])
        affine = resample_cubic(SignalSeries("x", "u", t, 2 * t + 1), np.linspace(0, 3, 301))
        err = np.max(np.abs(affine - (2 * np.linspace(0, 3, 301) + 1)))
        notes.append(f"affine max err {err:.1e}")
        assert resample_cubic(SignalSeries("x", "u", t, 2 * t + 1), np.array([0.5]))[0] == pytest.approx(2.0, abs=1e-9)
        assert err < 1e-9

        rng = np.random.default_rng(0)
        ticks = np.sort(rng.choice(400, 30, replace=False))
        kt = tick_grid(0, 400)[ticks]
        kv = rng.normal(size=30)
        on_knots = resample_cubic(SignalSeries("x", "u", kt, kv), tick_grid(int(ticks[0]), int(ticks[-1] - ticks[0]) + 1))
        assert np.array_equal(on_knots[ticks - ticks[0]], kv)
        notes.append("30 knots exact")


def kkt_report(Z, target, machine, C):
    alpha = np.zeros(len(Z))
    for sv, a in zip(machine.support_vectors, machine.alphas):
        alpha[np.flatnonzero(np.all(Z == sv, axis=1))[0]] = a
    margins = target * machine.decision_function(Z)
    free = (alpha > 0) & (alpha < C)
    violation = max(
        np.max(1 - margins[alpha == 0], initial=0.0),
        np.max(np.abs(margins[free] - 1), initial=0.0),
        np.max(margins[alpha == C] - 1, initial=0.0),
    )
    signed = alpha[alpha > 0] * target[alpha > 0]
    return bool(np.all((machine.alphas >= 0) & (machine.alphas <= C))), abs(float(signed.sum())), float(violation)


def test_criterion_05_smo(pipeline_runs):
    with criterion(5, "SMO box/equality/KKT on converged models, 2-point midpoint, XOR") as notes:
        checked, worst_eq, worst_kkt = 0, 0.0, 0.0
        rng = np.random.default_rng(5)
        for i in range(24):
            X = rng.normal(size=(40, 3))
            y = np.where(X[:, 0] + 0.5 * rng.normal(size=40) > 0, 1.0, -1.0)
            C = (0.1, 1.0, 10.0)[i % 3]
            kernel = KernelSpec("rbf", 0.5) if i % 2 else KernelSpec("linear")
            m = smo_solve(X, y, kernel, C=C, rng=rng)
            if not m.converged:
                continue
            box, eq, kkt = kkt_report(X, y, m, C)
            assert box
            checked, worst_eq, worst_kkt = checked + 1, max(worst_eq, eq), max(worst_kkt, kkt)

        # the default synthetic model, one machine per class
        work, _ = pipeline_runs["svm", "a"]
        model = load_model(work / "model.json")
        data = parse_dataset_csv((work / "dataset.csv").read_text())
        train, _ = split_stratified(data, 0.2, SEED)
        Z = (train.X - model.mean_) / model.scale_
        for cls, m in zip(model.classes_, model.machines_):
            box, eq, kkt = kkt_report(Z, np.where(train.y == cls, 1.0, -1.0), m, model.C)
            assert box and m.converged
            checked, worst_eq, worst_kkt = checked + 1, max(worst_eq, eq), max(worst_kkt, kkt)
        notes.append(f"{checked} models, max |sum a*y| {worst_eq:.1e}, max KKT violation {worst_kkt:.1e}")
        assert checked >= 24
        assert worst_eq <= 1e-6
        assert worst_kkt <= KKT_TOL

        two = smo_solve(np.array([[-1.0], [1.0]]), np.array([-1.0, 1.0]), KernelSpec("linear"), C=10.0)
        mid = abs(two.decision_function([[0.0]])[0])
        notes.append(f"2-point boundary offset {mid:.1e}")
        assert mid <= 1e-3

        X = np.array([[0, 0], [1, 1], [0, 1], [1, 0]], dtype=float)
        y = np.array([-1, -1, 1, 1], dtype=float)
        xor = smo_solve(X, y, KernelSpec("rbf", 1.0), C=10.0)
        assert np.array_equal(np.sign(xor.decision_function(X)), y)


def test_criterion_06_forest(pipeline_runs):
    with criterion(6, "stump oracle on 20 datasets, bootstrap fraction, same-seed predictions") as notes:
        for seed in range(20):
            rng = np.random.default_rng(seed)
            X = rng.normal(size=(30, 4)).round(2)
            y = rng.integers(0, 3, 30)
            f, thr, a, b = exhaustive_stump(X.tolist(), y.tolist(), 3)
            assert train_tree(X, y, 3, rng, max_features=4, max_depth=1) == Split(f, thr, Leaf(a), Leaf(b))
        notes.append("20/20 stumps match")

        work, _ = pipeline_runs["forest", "a"]
        data = parse_dataset_csv((work / "dataset.csv").read_text())
        train, _ = split_stratified(data, 0.2, SEED)
        forest = RandomForestClassifier(seed=SEED, class_order=data.class_list).fit(train.X, train.y)
        fractions = [np.unique(idx).size / len(train) for idx in forest.bootstrap_indices_]
        notes.append(f"mean distinct-row fraction {np.mean(fractions):.4f}")
        assert 0.60 <= np.mean(fractions) <= 0.66

        rng = np.random.default_rng(1)
        probe = train.X.mean(0) + rng.normal(size=(100, train.X.shape[1])) * train.X.std(0)
        again = RandomForestClassifier(seed=SEED, class_order=data.class_list).fit(train.X, train.y)
        assert np.array_equal(forest.predict(probe), again.predict(probe))
        # the pipeline's saved forest is the same model
        assert forest.to_dict() == load_model(work / "model.json").to_dict()


def test_criterion_07_metrics_oracle():
    with criterion(7, "metrics equal a naive recount on 50 lists; closed forms") as notes:
        classes = list(CLASS_LIST)
        worst = 0.0
        for seed in range(50):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(1, 200))
            y_true = rng.choice(classes, n).tolist()
            y_pred = np.where(rng.random(n) < 0.6, y_true, rng.choice(classes, n)).tolist()
            got = evaluate_predictions(y_true, y_pred, CLASS_LIST)
            ref = naive_report(y_true, y_pred, classes)
            assert got.confusion.tolist() == ref["confusion"]
            for key in ("precision", "recall", "f1"):
                worst = max(worst, float(np.max(np.abs(getattr(got, key) - ref[key]))))
            worst = max(worst, abs(got.macro_f1 - ref["macro_f1"]))
        notes.append(f"max ratio error {worst:.1e}")
        assert worst <= 1e-12

        perfect = evaluate_predictions(classes, classes, CLASS_LIST)
        assert perfect.macro_f1 == perfect.macro_precision == perfect.macro_recall == 1.0
        const = evaluate_predictions(["u_turn", "hard_brake"] * 5, ["u_turn"] * 10, ("u_turn", "hard_brake"))
        assert const.recall.tolist() == [1.0, 0.0]
        assert const.precision.tolist() == [0.5, 0.0]
        assert const.f1[0] == 2 / 3 and const.macro_f1 == 1 / 3


def test_criterion_08_windowing(tmp_path):
    with criterion(8, "201-row interior windows, edge skips, sub-trip round trip") as notes:
        config = GeneratorConfig(seed=SEED)
        can, gps, event = generate_maneuver("left_turn", config, instance_rng(SEED, 0))
        table = align_streams(parse_can_trace(can), parse_gps_log(gps))
        first, last = table.timestamps[0], table.timestamps[-1]
        events = [
            event,
            LabelEvent(first + 10.0, "u_turn"),
            LabelEvent(last - 10.0, "hard_brake"),
            LabelEvent(first + 3.0, "lane_change_left"),
            LabelEvent(last - 2.0, "right_turn"),
        ]
        windows, skipped = extract_windows(table, events)
        assert [w.frames.n_rows for w in windows] == [201, 201, 201]
        assert sorted(s.reason for s in skipped) == ["left edge", "right edge"]
        for w in windows:
            back = read_subtrip(write_subtrip(w, tmp_path))
            assert back.label == w.label and back.t_label == w.t_label
            for name, column in w.frames.columns.items():
                assert np.array_equal(back.frames[name], column)
        notes.append(f"{len(windows)} windows, {len(skipped)} skipped")


def test_criterion_09_determinism(pipeline_runs):
    with criterion(9, "pipeline twice gives byte-identical model and report") as notes:
        for kind in ("forest", "svm"):
            a, _ = pipeline_runs[kind, "a"]
            b, _ = pipeline_runs[kind, "b"]
            for name in ("model.json", "report.json"):
                assert (a / name).read_bytes() == (b / name).read_bytes(), (kind, name)
        notes.append("forest and svm identical")


def test_criterion_10_heading_seam():
    with criterion(10, "north-crossing trips keep interpolated heading near the seam") as notes:
        worst, segments = 0.0, 0
        for i, (label, h0) in enumerate(product(("right_turn", "left_turn", "u_turn"), (300.0, 330.0, 20.0, 60.0))):
            config = GeneratorConfig(seed=SEED, initial_heading=h0)
            can, gps_bytes, _ = generate_maneuver(label, config, instance_rng(SEED, i))
            fixes = parse_gps_log(gps_bytes)
            table = align_streams(parse_can_trace(can), fixes)
            fix_t = np.array([f.t for f in fixes])
            fix_h = np.array([f.heading for f in fixes])
            ts = table.timestamps
            for k in np.flatnonzero(np.abs(np.diff(fix_h)) > 180):
                inside = (ts >= fix_t[k]) & (ts <= fix_t[k + 1])
                h = table["heading"][inside]
                gaps = [np.minimum(np.abs(h - e), 360 - np.abs(h - e)) for e in (fix_h[k], fix_h[k + 1])]
                worst = max(worst, float(np.max(np.minimum(*gaps), initial=0.0)))
                segments += 1
        notes.append(f"{segments} crossing segments, max deviation {worst:.2f} deg")
        assert segments >= 6
        assert worst < 30.0
