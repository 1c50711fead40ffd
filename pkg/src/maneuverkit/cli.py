"""``maneuverkit`` command line: synth, ingest, sync, parse, featurize, train, eval, pipeline."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import IoFailure, ManeuverKitError, MissingFile

SEED_ENV = "MANEUVERKIT_SEED"


def _read(path, binary=False):
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"{path} does not exist", path=str(path))
    return path.read_bytes() if binary else path.read_text(encoding="utf-8")


def _write(path, text):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc.strerror}", path=str(path)) from None


def _max_depth(value):
    return None if value.lower() == "none" else int(value)


def _max_features(value):
    if value in ("sqrt", "log2"):
        return value
    if value.lower() == "none":
        return None
    return float(value) if "." in value else int(value)


def _add_seed(p):
    p.add_argument("--seed", type=int, default=None, help=f"random seed (falls back to ${SEED_ENV})")


def _add_model_params(p):
    g = p.add_argument_group("forest hyperparameters")
    g.add_argument("--n-trees", type=int, default=100, help="number of trees (default 100)")
    g.add_argument("--max-depth", type=_max_depth, default=None, help="tree depth limit (default none)")
    g.add_argument("--min-samples-split", type=int, default=2, help="minimum rows to split a node (default 2)")
    g.add_argument(
        "--max-features", type=_max_features, default="sqrt",
        help="features tried per split: int, fraction, sqrt, log2 or none (default sqrt)",
    )
    g = p.add_argument_group("svm hyperparameters")
    g.add_argument("--kernel", choices=("rbf", "linear"), default="rbf", help="kernel (default rbf)")
    g.add_argument("--gamma", type=float, default=None, help="rbf width (default 1/n_features)")
    g.add_argument("--C", type=float, default=1.0, dest="C", help="soft-margin penalty (default 1.0)")
    g.add_argument("--tol", type=float, default=1e-3, help="KKT tolerance (default 1e-3)")
    g.add_argument("--max-passes", type=int, default=5, help="idle full sweeps before stopping (default 5)")
    g.add_argument("--max-sweeps", type=int, default=5000, help="sweep budget per machine (default 5000)")


def _add_split(p):
    p.add_argument(
        "--test-fraction", type=float, default=0.2,
        help="stratified hold-out fraction; 0 uses every row (default 0.2)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maneuverkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic sub-trip dataset")
    p.add_argument("--out", required=True, help="destination directory")
    _add_seed(p)
    p.add_argument("--n-windows", type=int, default=None, help="total windows, default mix (default 700)")
    p.add_argument("--noise-scale", type=float, default=None, help="noise multiplier (default 1.0)")
    p.add_argument("--config", default=None, help="generator config JSON file")

    p = sub.add_parser("ingest", help="validate raw CAN and GPS logs")
    p.add_argument("--can", help="CAN trace (JSON lines)")
    p.add_argument("--gps", help="GPS log (CSV)")

    p = sub.add_parser("sync", help="resample logs onto the 10 Hz frame table")
    p.add_argument("--can", required=True)
    p.add_argument("--gps", required=True)
    p.add_argument("--out", required=True, help="frame table CSV")

    p = sub.add_parser("parse", help="cut labelled windows into sub-trip directories")
    p.add_argument("--frame", required=True, help="frame table CSV")
    p.add_argument("--events", required=True, help="timestamp,label CSV")
    p.add_argument("--out", required=True, help="destination directory")
    p.add_argument("--emit-plots", action="store_true", help="also write signals.svg per sub-trip")

    p = sub.add_parser("featurize", help="turn sub-trips into a feature dataset CSV")
    p.add_argument("--subtrips", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="fit a classifier on a dataset CSV")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", choices=("forest", "svm"), required=True)
    p.add_argument("--out", required=True, help="model JSON")
    _add_seed(p)
    _add_split(p)
    _add_model_params(p)

    p = sub.add_parser("eval", help="score a model on a dataset CSV")
    p.add_argument("--model-file", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="report JSON")
    p.add_argument("--text", default=None, help="also write a text table here")
    p.add_argument("--confusion-csv", default=None, help="also write the confusion matrix here")
    _add_seed(p)
    _add_split(p)

    p = sub.add_parser("pipeline", help="synth, featurize, split, train and eval in one go")
    p.add_argument("--model", choices=("forest", "svm"), required=True)
    p.add_argument("--workdir", default="maneuverkit-run", help="output directory (default ./maneuverkit-run)")
    _add_seed(p)
    p.add_argument("--n-windows", type=int, default=700)
    p.add_argument("--noise-scale", type=float, default=1.0)
    _add_split(p)
    _add_model_params(p)
    return parser


def _resolve_seed(parser, args, required=True):
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            parser.error(f"${SEED_ENV} must be an integer, got {env!r}")
    if required:
        parser.error(f"{args.command} requires --seed or ${SEED_ENV}")
    return None


def _make_model(args, seed, class_order):
    from .forest import RandomForestClassifier
    from .svm import SVMClassifier

    if args.model == "forest":
        return RandomForestClassifier(
            n_trees=args.n_trees,
            max_depth=args.max_depth,
            min_samples_split=args.min_samples_split,
            max_features=args.max_features,
            seed=seed,
            class_order=tuple(class_order),
        )
    return SVMClassifier(
        kernel=args.kernel,
        gamma=args.gamma,
        C=args.C,
        tol=args.tol,
        max_passes=args.max_passes,
        max_sweeps=args.max_sweeps,
        seed=seed,
        class_order=tuple(class_order),
    )


def _split(data, fraction, seed):
    from .evaluation import split_stratified

    if fraction == 0:
        return data, data
    return split_stratified(data, fraction, seed)


def _featurize_dir(root):
    from .features import build_dataset
    from .windows import list_subtrips, read_subtrip

    return build_dataset([read_subtrip(p) for p in list_subtrips(root)])


def _report_files(report, out, text=None, confusion=None):
    _write(out, report.to_json())
    if text:
        _write(text, report.to_text())
    if confusion:
        _write(confusion, report.confusion_csv())


def cmd_synth(parser, args):
    from .synth import GeneratorConfig, class_counts_for, generate_dataset

    doc = json.loads(_read(args.config)) if args.config else {}
    seed = args.seed if args.seed is not None else doc.get("seed")
    if seed is None:
        seed = _resolve_seed(parser, args)
    doc["seed"] = seed
    if args.n_windows is not None:
        doc.pop("n_windows", None)
        doc["class_counts"] = class_counts_for(args.n_windows)
    if args.noise_scale is not None:
        doc["noise_scale"] = args.noise_scale
    config = GeneratorConfig.from_json(json.dumps(doc))
    paths = generate_dataset(config, args.out)
    print(f"wrote {len(paths)} sub-trips to {args.out}")


def cmd_ingest(parser, args):
    from .ingest import parse_can_trace, parse_gps_log

    if not args.can and not args.gps:
        parser.error("ingest needs --can and/or --gps")
    summary = {}
    if args.can:
        stats = {}
        series = parse_can_trace(_read(args.can, binary=True), stats=stats)
        summary["can"] = {
            "channels": {s.name: len(s) for s in series},
            "skipped_unknown": stats["skipped_unknown"],
        }
    if args.gps:
        fixes = parse_gps_log(_read(args.gps, binary=True))
        summary["gps"] = {"fixes": len(fixes), "start": fixes[0].t, "end": fixes[-1].t}
    print(json.dumps(summary, indent=2))


def cmd_sync(parser, args):
    from .ingest import parse_can_trace, parse_gps_log
    from .sync import align_streams, format_frame_csv

    table = align_streams(
        parse_can_trace(_read(args.can, binary=True)), parse_gps_log(_read(args.gps, binary=True))
    )
    _write(args.out, format_frame_csv(table))
    print(f"wrote {table.n_rows} rows to {args.out}")


def cmd_parse(parser, args):
    from .sync import parse_frame_csv
    from .windows import extract_windows, parse_events_csv, write_subtrip

    table = parse_frame_csv(_read(args.frame))
    windows, skipped = extract_windows(table, parse_events_csv(_read(args.events)))
    for w in windows:
        target = write_subtrip(w, args.out)
        if args.emit_plots:
            try:
                from .plotting import plot_window

                plot_window(w, target / "signals.svg")
            except ImportError:
                print("warning: matplotlib unavailable, plots skipped", file=sys.stderr)
    for s in skipped:
        print(f"skipped {s.event.label.value} at {s.event.t_label!r}: {s.reason}", file=sys.stderr)
    print(f"wrote {len(windows)} sub-trips, skipped {len(skipped)}")


def cmd_featurize(parser, args):
    from .features import format_dataset_csv

    data = _featurize_dir(args.subtrips)
    _write(args.out, format_dataset_csv(data))
    print(f"wrote {len(data)} rows to {args.out}")


def cmd_train(parser, args):
    from .features import parse_dataset_csv
    from .persistence import save_model

    seed = _resolve_seed(parser, args)
    data = parse_dataset_csv(_read(args.dataset))
    train, _ = _split(data, args.test_fraction, seed)
    model = _make_model(args, seed, data.class_list).fit(train.X, train.y)
    save_model(model, args.out)
    print(f"trained {args.model} on {len(train)} rows -> {args.out}")


def cmd_eval(parser, args):
    from .evaluation import evaluate
    from .features import parse_dataset_csv
    from .persistence import load_model

    seed = _resolve_seed(parser, args, required=args.test_fraction != 0)
    model = load_model(args.model_file)
    data = parse_dataset_csv(_read(args.dataset))
    _, test = _split(data, args.test_fraction, seed)
    report = evaluate(model, test)
    _report_files(report, args.out, args.text, args.confusion_csv)
    print(f"macro F1 {report.macro_f1:.4f} on {len(test)} rows -> {args.out}")


def cmd_pipeline(parser, args):
    from .evaluation import evaluate
    from .features import format_dataset_csv
    from .persistence import save_model
    from .synth import GeneratorConfig, class_counts_for, generate_dataset

    seed = _resolve_seed(parser, args)
    work = Path(args.workdir)
    config = GeneratorConfig(
        seed=seed, class_counts=class_counts_for(args.n_windows), noise_scale=args.noise_scale
    )
    generate_dataset(config, work / "subtrips")
    data = _featurize_dir(work / "subtrips")
    _write(work / "dataset.csv", format_dataset_csv(data))
    train, test = _split(data, args.test_fraction, seed)
    model = _make_model(args, seed, data.class_list).fit(train.X, train.y)
    save_model(model, work / "model.json")
    report = evaluate(model, test)
    _report_files(report, work / "report.json", work / "report.txt", work / "confusion.csv")
    print(report.to_text(), end="")


COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "sync": cmd_sync,
    "parse": cmd_parse,
    "featurize": cmd_featurize,
    "train": cmd_train,
    "eval": cmd_eval,
    "pipeline": cmd_pipeline,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        COMMANDS[args.command](parser, args)
    except ManeuverKitError as exc:
        message = " ".join(str(exc).split())
        print(f"error: {exc.code}: {message}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
