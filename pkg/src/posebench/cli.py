"""Command-line entry point: ``posebench {synth,featurize,train,eval,report}``.

Every subcommand accepts ``--config FILE.json``; keys are the long option
names with dashes replaced by underscores, and flags given on the command
line override them. Exit codes: 0 success, 1 usage or configuration error,
2 data error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .classify import ForestParams, GBTParams, load_model, save_model
from .dataset import Dataset
from .errors import DataError, InvariantError
from .evaluate import (camera_splits, check_leakage, compute_metrics, confusion_csv, confusion_matrix,
                       frame_folds, render_table, report_json, run_cv, subject_folds)
from .features import feature_csv
from .ingest import assemble_dataset, read_hierarchy, read_manifest
from .synth import SynthConfig, write_synthetic
from .trainers import MODEL_KINDS, fit_model, make_trainer

log = logging.getLogger("posebench")

SEED_ENV = "POSEBENCH_SEED"
# keys left out of the echoed run configuration: they do not change results
NOT_ECHOED = {"command", "config", "threads", "out", "table", "confusion_csv", "quiet"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _csv_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _common(seed_default: int) -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    p.add_argument("--config", type=Path, help="JSON file of option values; flags override it")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                   help="worker threads (results do not depend on this; default: all cores)")
    p.add_argument("--seed", type=int, default=seed_default,
                   help=f"random seed (default: ${SEED_ENV} or 0)")
    p.add_argument("--quiet", action="store_true", help="only print errors")
    return p


def _model_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("classifier")
    g.add_argument("--model", choices=MODEL_KINDS, default="forest")
    g.add_argument("--trees", type=int, default=500, help="forest size")
    g.add_argument("--mtry", type=int, default=None, help="features tried per split (default floor(sqrt(d)))")
    g.add_argument("--min-leaf", type=int, default=1, help="minimum samples per leaf")
    g.add_argument("--max-depth", type=int, default=None, help="forest depth limit (default: grow to purity)")
    g.add_argument("--voting", choices=("soft", "hard"), default="soft")
    g.add_argument("--rounds", type=int, default=100, help="boosting rounds")
    g.add_argument("--learning-rate", type=float, default=0.1)
    g.add_argument("--gbt-depth", type=int, default=3, help="boosted tree depth")
    g.add_argument("--max-bins", type=int, default=None, help="histogram bins for boosting splits")
    g.add_argument("--members", type=_csv_list, default=["forest", "gbt"], help="ensemble members")
    g.add_argument("--weights", type=_float_list, default=None, help="ensemble weights")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    common = _common(_default_seed())
    parser = _Parser(prog="posebench", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"posebench {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    subs = {}

    p = sub.add_parser("synth", parents=[common], help="write a synthetic pose dataset + manifest")
    p.add_argument("--classes", type=int, default=12)
    p.add_argument("--subjects", type=int, default=20)
    p.add_argument("--cameras", type=int, default=4)
    p.add_argument("--frames", type=int, default=60, help="frames per video")
    p.add_argument("--separation", type=float, default=SynthConfig.class_separation)
    p.add_argument("--subject-noise", type=float, default=SynthConfig.subject_noise)
    p.add_argument("--temporal-noise", type=float, default=SynthConfig.temporal_noise)
    p.add_argument("--angles", type=_float_list, default=None, help="camera yaw angles in radians")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    subs["synth"] = p

    p = sub.add_parser("featurize", parents=[common], help="manifest -> features.csv + dataset.json")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--buffer", type=float, default=1.0, help="seconds trimmed from each segment end")
    p.add_argument("--max-frames", type=int, default=200, help="frame cap per segment")
    p.add_argument("--include-still", action="store_true", help="add a 'still' class from pre-roll frames")
    p.add_argument("--hierarchy", type=Path, default=None, help="CSV label,level2,level1")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    subs["featurize"] = p

    p = sub.add_parser("train", parents=[common], help="fit a classifier on dataset.json")
    p.add_argument("--dataset", type=Path, required=True)
    _model_options(p)
    p.add_argument("--out", type=Path, required=True, help="model file")
    subs["train"] = p

    p = sub.add_parser("eval", parents=[common], help="cross-validate a classifier or score a model file")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--strategy", choices=("frame", "subject", "camera"), default="subject")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--train-cameras", type=int, default=3)
    p.add_argument("--stratify", action="store_true", help="class-stratified frame folds")
    p.add_argument("--aggregate", choices=("pooled", "mean"), default="pooled")
    p.add_argument("--model-file", type=Path, default=None,
                   help="score this trained model on the whole dataset instead of cross-validating")
    _model_options(p)
    p.add_argument("--out", type=Path, default=None, help="report JSON")
    p.add_argument("--table", type=Path, default=None, help="also write the text table here")
    subs["eval"] = p

    p = sub.add_parser("report", parents=[common], help="render a report JSON as a text table")
    p.add_argument("report", type=Path)
    p.add_argument("--confusion-csv", type=Path, default=None)
    subs["report"] = p
    return parser, subs


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser, subs = build_parser()
    # required flags may come from the config file, so check them on the second pass
    required = [(name, a) for name, sub in subs.items() for a in sub._actions
                if a.required and a.option_strings]
    for _, action in required:
        action.required = False
    args = parser.parse_args(argv)
    values: dict = {}
    if args.config is not None:
        values = _read_config(args.config, subs[args.command], args.command)
    for name, action in required:
        action.required = not (name == args.command and action.dest in values)
    args = parser.parse_args(argv)
    if args.threads < 1:
        raise UsageError("--threads must be >= 1")
    return args


def _read_config(path: Path, sub: argparse.ArgumentParser, command: str) -> dict:
    try:
        values = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(values, dict):
        raise UsageError("config file must hold a JSON object")
    known = {a.dest for a in sub._actions} - {"help", "config"}
    unknown = sorted(set(values) - known)
    if unknown:
        raise UsageError(f"unknown config keys for {command}: {', '.join(unknown)}")
    # file values become defaults, so explicit flags still win
    sub.set_defaults(**{k: Path(v) if isinstance(v, str) and _is_path(sub, k) else v
                        for k, v in values.items()})
    return values


def _is_path(sub: argparse.ArgumentParser, dest: str) -> bool:
    return any(a.dest == dest and a.type is Path for a in sub._actions)


def resolved_config(args: argparse.Namespace) -> dict:
    out = {}
    for key, value in sorted(vars(args).items()):
        if key in NOT_ECHOED:
            continue
        out[key] = str(value) if isinstance(value, Path) else value
    return {"command": args.command, **out}


def _forest_params(args) -> ForestParams:
    return ForestParams(n_trees=args.trees, mtry=args.mtry, min_leaf_samples=args.min_leaf,
                        max_depth=args.max_depth, seed=args.seed, voting=args.voting)


def _gbt_params(args) -> GBTParams:
    return GBTParams(n_rounds=args.rounds, learning_rate=args.learning_rate, max_depth=args.gbt_depth,
                     min_leaf_samples=args.min_leaf, max_bins=args.max_bins, seed=args.seed)


def _model_kwargs(args) -> dict:
    return dict(forest=_forest_params(args), gbt=_gbt_params(args), members=args.members,
                weights=args.weights, n_jobs=args.threads)


def _load_dataset(path: Path) -> Dataset:
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise DataError(f"dataset not found: {path}") from None
    return Dataset.from_json(raw)


def _write(path: Path, data: bytes | str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    path.write_bytes(data)


def cmd_synth(args) -> int:
    cfg = SynthConfig(n_classes=args.classes, n_subjects=args.subjects, n_cameras=args.cameras,
                      frames_per_video=args.frames, class_separation=args.separation,
                      subject_noise=args.subject_noise, temporal_noise=args.temporal_noise,
                      camera_angles=args.angles, seed=args.seed)
    manifest = write_synthetic(cfg, args.out)
    log.info("wrote %s", manifest)
    return 0


def cmd_featurize(args) -> int:
    hierarchy = read_hierarchy(args.hierarchy) if args.hierarchy else None
    ds = assemble_dataset(read_manifest(args.manifest), still_buffer_s=args.buffer,
                          include_still=args.include_still, max_frames=args.max_frames,
                          hierarchy=hierarchy)
    _write(args.out / "features.csv", feature_csv(ds))
    _write(args.out / "dataset.json", ds.to_json())
    log.info("%d samples, %d classes -> %s", len(ds), len(ds.labels), args.out)
    return 0


def cmd_train(args) -> int:
    ds = _load_dataset(args.dataset)
    model = fit_model(args.model, ds.X, ds.y, ds.labels, args.seed, **_model_kwargs(args))
    _write(args.out, save_model(model))
    log.info("trained %s on %d samples -> %s", args.model, len(ds), args.out)
    if args.model == "forest":
        log.info("n_trees=%d mtry=%d", model.params.n_trees, model.params.mtry)
    return 0


def _plan(args, ds: Dataset):
    if args.strategy == "frame":
        return frame_folds(ds, args.folds, args.seed, stratify=args.stratify)
    if args.strategy == "subject":
        return subject_folds(ds, args.folds, args.seed)
    return camera_splits(ds, args.train_cameras)


def cmd_eval(args) -> int:
    ds = _load_dataset(args.dataset)
    if args.model_file is not None:
        try:
            model = load_model(args.model_file.read_bytes())
        except FileNotFoundError:
            raise DataError(f"model file not found: {args.model_file}") from None
        if list(model.labels) != ds.labels:
            raise DataError("model label vocabulary differs from the dataset's")
        pred = model.predict(ds.X)
        report = compute_metrics(confusion_matrix(ds.y, pred, len(ds.labels)), ds.labels)
        report.strategy = "holdout"
        report.params = {"model_file": str(args.model_file)}
    else:
        plan = _plan(args, ds)
        report = run_cv(ds, plan, make_trainer(args.model, **_model_kwargs(args)),
                        seed=args.seed, aggregate=args.aggregate)
        _check_report(report, plan, ds)
    doc = report.to_dict()
    doc["config"] = resolved_config(args)
    doc["version"] = __version__
    table = render_table(doc)
    if args.out is not None:
        _write(args.out, report_json(doc))
    if args.table is not None:
        _write(args.table, table)
    if not args.quiet:
        sys.stdout.write(table)
    return 0


def _check_report(report, plan, ds) -> None:
    n_test = sum(len(te) for _, te in plan.folds)
    if int(report.confusion.sum()) != n_test:
        raise InvariantError(f"confusion counts {int(report.confusion.sum())} test samples, plan has {n_test}")
    if plan.grouping != "frame" and check_leakage(plan, ds).leaky:
        raise InvariantError(f"{plan.grouping}-wise plan shares videos between train and test")


def cmd_report(args) -> int:
    try:
        doc = json.loads(args.report.read_bytes())
    except FileNotFoundError:
        raise DataError(f"report not found: {args.report}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"report is not valid JSON: {exc}") from None
    try:
        table = render_table(doc)
        csv_text = confusion_csv(doc) if args.confusion_csv else None
    except (KeyError, TypeError) as exc:
        raise DataError(f"report is missing field {exc}") from None
    if csv_text is not None:
        _write(args.confusion_csv, csv_text)
    sys.stdout.write(table)
    return 0


COMMANDS = {"synth": cmd_synth, "featurize": cmd_featurize, "train": cmd_train,
            "eval": cmd_eval, "report": cmd_report}


def main(argv: list[str] | None = None) -> int:
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except InvariantError as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
