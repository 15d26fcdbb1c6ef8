"""Frame-, subject- and camera-wise cross-validation with leakage checks.

Frame-wise folds ignore video membership, so consecutive frames of one
video land on both sides of a split; :func:`check_leakage` reports every
such video. Subject- and camera-wise plans hold out whole groups and can
never leak.
"""

from __future__ import annotations

import itertools
import json
import logging
import warnings
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset

log = logging.getLogger(__name__)

GROUPING_KEYS = {"frame": "video_id", "subject": "subject_id", "camera": "camera_id"}
MAX_LISTED_VIOLATIONS = 20


@dataclass
class SplitPlan:
    folds: list[tuple[np.ndarray, np.ndarray]]
    grouping: str
    params: dict = field(default_factory=dict)
    fold_names: list[str] = field(default_factory=list)

    @property
    def train_test_ratio(self) -> list[tuple[int, int]]:
        """(m, n) train/test sizes per fold."""
        return [(len(tr), len(te)) for tr, te in self.folds]


@dataclass
class LeakageVerdict:
    violations: list[tuple[int, str, str]]  # (fold, video_id, group key)

    @property
    def leaky(self) -> bool:
        return bool(self.violations)

    def to_dict(self, limit: int | None = MAX_LISTED_VIOLATIONS) -> dict:
        shown = self.violations if limit is None else self.violations[:limit]
        return {
            "leaky": self.leaky,
            "n_violations": len(self.violations),
            "violations": [{"fold": f, "video_id": v, "group": g} for f, v, g in shown],
        }


@dataclass
class EvalReport:
    labels: list[str]
    confusion: np.ndarray
    per_class: dict[str, dict[str, float]]
    macro: dict[str, float]
    accuracy: float
    per_level_accuracy: dict[str, float] | None = None
    strategy: str | None = None
    params: dict = field(default_factory=dict)
    leakage: LeakageVerdict | None = None
    folds: list[dict] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "params": self.params,
            "leakage": None if self.leakage is None else self.leakage.to_dict(),
            "labels": list(self.labels),
            "per_class": self.per_class,
            "macro": self.macro,
            "accuracy": self.accuracy,
            "per_level_accuracy": self.per_level_accuracy,
            "confusion": self.confusion.tolist(),
            "folds": self.folds,
            "warnings": self.warnings,
        }

    def to_text(self) -> str:
        return render_table(self.to_dict())


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, 0x5EED]))


def _near_equal_chunks(items: np.ndarray, k: int) -> list[np.ndarray]:
    return [np.asarray(c) for c in np.array_split(items, k)]


def frame_folds(dataset: Dataset, k: int = 10, seed: int = 0, stratify: bool = False) -> SplitPlan:
    """Shuffle samples and cut them into ``k`` folds of near-equal size.

    With ``stratify`` each class is dealt round-robin across folds.
    """
    n = len(dataset)
    if k < 2:
        raise ValueError("k must be >= 2")
    if n < k:
        raise ValueError(f"dataset has {n} samples, fewer than k={k}")
    rng = _rng(seed)
    if stratify:
        order = np.concatenate([rng.permutation(np.flatnonzero(dataset.y == c))
                                for c in range(len(dataset.labels))])
        assign = np.empty(n, dtype=np.int64)
        assign[order] = np.arange(n) % k
        tests = [np.flatnonzero(assign == i) for i in range(k)]
    else:
        tests = [np.sort(c) for c in _near_equal_chunks(rng.permutation(n), k)]
    everything = np.arange(n)
    folds = [(np.setdiff1d(everything, te), te) for te in tests]
    return SplitPlan(folds, "frame", {"k": k, "seed": seed, "stratify": stratify},
                     [f"fold{i}" for i in range(k)])


def subject_folds(dataset: Dataset, k: int = 10, seed: int = 0) -> SplitPlan:
    """Each subject is tested in exactly one of ``k`` folds."""
    subjects = np.array(sorted(set(dataset.column("subject_id"))), dtype=object)
    if k < 2:
        raise ValueError("k must be >= 2")
    if len(subjects) < k:
        raise ValueError(f"{len(subjects)} distinct subjects, fewer than k={k}")
    groups = _near_equal_chunks(subjects[_rng(seed).permutation(len(subjects))], k)
    subj = dataset.column("subject_id")
    folds = []
    for g in groups:
        mask = np.isin(subj, g)
        folds.append((np.flatnonzero(~mask), np.flatnonzero(mask)))
    names = [",".join(sorted(g)) for g in groups]
    return SplitPlan(folds, "subject", {"k": k, "seed": seed}, names)


def camera_splits(dataset: Dataset, n_train_cameras: int) -> SplitPlan:
    """One fold per ``n_train_cameras``-subset; the other cameras form the test set."""
    cameras = sorted(set(dataset.column("camera_id")))
    if not 1 <= n_train_cameras < len(cameras):
        raise ValueError(f"n_train_cameras must be in [1, {len(cameras) - 1}], got {n_train_cameras}")
    cam = dataset.column("camera_id")
    folds, names = [], []
    for subset in itertools.combinations(cameras, n_train_cameras):
        mask = np.isin(cam, subset)
        folds.append((np.flatnonzero(mask), np.flatnonzero(~mask)))
        names.append("+".join(subset))
    return SplitPlan(folds, "camera", {"n_train_cameras": n_train_cameras}, names)


def check_leakage(plan: SplitPlan, dataset: Dataset) -> LeakageVerdict:
    """List every (fold, video) whose frames sit on both sides of the split."""
    video = dataset.column("video_id")
    group = dataset.column(GROUPING_KEYS[plan.grouping])
    violations = []
    for f, (train, test) in enumerate(plan.folds):
        shared = set(video[train]) & set(video[test])
        if not shared:
            continue
        key_of = {v: g for v, g in zip(video[test], group[test])}
        violations.extend((f, v, key_of[v]) for v in sorted(shared))
    return LeakageVerdict(violations)


def confusion_matrix(truth, pred, n_classes: int) -> np.ndarray:
    truth = np.asarray(truth, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    return np.bincount(truth * n_classes + pred, minlength=n_classes * n_classes).reshape(n_classes, n_classes)


def _ratio(num: float, den: float) -> float:
    return float(num / den) if den > 0 else 0.0


def compute_metrics(confusion, labels) -> EvalReport:
    """Per-class and macro precision/recall/F1 plus accuracy from a confusion matrix.

    Rows are truth, columns predictions. Undefined ratios are reported as 0.
    """
    M = np.asarray(confusion)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] != len(labels):
        raise ValueError("confusion must be a square matrix matching the labels")
    if (M < 0).any():
        raise ValueError("confusion counts must be nonnegative")
    total = M.sum()
    if total == 0:
        raise ValueError("confusion matrix is all zeros")
    per_class = {}
    for j, lab in enumerate(labels):
        p = _ratio(M[j, j], M[:, j].sum())
        r = _ratio(M[j, j], M[j, :].sum())
        f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
        per_class[lab] = {"precision": p, "recall": r, "f1": f1, "support": int(M[j, :].sum())}
    macro = {key: float(np.mean([per_class[lab][key] for lab in labels]))
             for key in ("precision", "recall", "f1")}
    return EvalReport(labels=list(labels), confusion=M.astype(np.int64), per_class=per_class,
                      macro=macro, accuracy=float(np.trace(M) / total))


def hierarchy_rollup(predictions, truths, hierarchy: dict) -> dict[str, float]:
    """Top-1 accuracy at the leaf level and after mapping both sides upward.

    ``hierarchy[leaf] = (level2, level1)``; level 1 is the coarsest.
    """
    predictions = list(predictions)
    truths = list(truths)
    if len(predictions) != len(truths) or not truths:
        raise ValueError("predictions and truths must be nonempty and of equal length")
    for lab in set(predictions) | set(truths):
        if lab not in hierarchy:
            raise KeyError(f"label {lab!r} missing from hierarchy")
    n = len(truths)
    out = {"level_3": sum(p == t for p, t in zip(predictions, truths)) / n}
    for name, depth in (("level_2", 0), ("level_1", 1)):
        out[name] = sum(hierarchy[p][depth] == hierarchy[t][depth]
                        for p, t in zip(predictions, truths)) / n
    return {k: out[k] for k in ("level_1", "level_2", "level_3")}


def fold_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([seed, fold]).generate_state(1, np.uint32)[0])


Trainer = Callable[..., object]


def run_cv(dataset: Dataset, plan: SplitPlan, trainer: Trainer, seed: int = 0,
           n_jobs: int = 1, aggregate: str = "pooled") -> EvalReport:
    """Train/test every fold and score the pooled predictions.

    ``trainer(X, y, labels, seed)`` must return a model with ``predict``.
    With ``aggregate="mean"`` the headline metrics are unweighted means of
    the per-fold metrics instead of pooled ones.
    """
    if aggregate not in ("pooled", "mean"):
        raise ValueError(f"unknown aggregate mode {aggregate!r}")
    X, y, labels = dataset.X, dataset.y, dataset.labels
    C = len(labels)
    notes: list[str] = []
    for f, (train, test) in enumerate(plan.folds):
        if len(test) == 0:
            raise ValueError(f"fold {f} has an empty test set")
        present = set(np.unique(y[train]))
        if len(present) < 2:
            raise ValueError(f"fold {f} trains on fewer than 2 classes")
        missing = sorted(set(np.unique(y[test])) - present)
        if missing:
            msg = (f"fold {f}: test classes absent from training: "
                   f"{', '.join(labels[c] for c in missing)}")
            notes.append(msg)
            warnings.warn(msg, stacklevel=2)

    def one(f: int) -> np.ndarray:
        train, test = plan.folds[f]
        model = trainer(X[train], y[train], labels, fold_seed(seed, f))
        return np.asarray(model.predict(X[test]), dtype=np.int64)

    if n_jobs == 1:
        preds = [one(f) for f in range(len(plan.folds))]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            preds = list(pool.map(one, range(len(plan.folds))))

    pooled = np.zeros((C, C), dtype=np.int64)
    fold_rows = []
    fold_reports = []
    for f, ((train, test), pred) in enumerate(zip(plan.folds, preds)):
        cm = confusion_matrix(y[test], pred, C)
        pooled += cm
        rep = compute_metrics(cm, labels)
        fold_reports.append(rep)
        fold_rows.append({
            "fold": f,
            "name": plan.fold_names[f] if f < len(plan.fold_names) else str(f),
            "n_train": int(len(train)),
            "n_test": int(len(test)),
            "accuracy": rep.accuracy,
            "macro_f1": rep.macro["f1"],
        })

    report = compute_metrics(pooled, labels)
    if aggregate == "mean":
        for key in ("precision", "recall", "f1"):
            report.macro[key] = float(np.mean([r.macro[key] for r in fold_reports]))
            for lab in labels:
                report.per_class[lab][key] = float(np.mean([r.per_class[lab][key] for r in fold_reports]))
        report.accuracy = float(np.mean([r.accuracy for r in fold_reports]))

    if dataset.hierarchy is not None:
        idx = np.concatenate([test for _, test in plan.folds])
        pred = np.concatenate(preds)
        report.per_level_accuracy = hierarchy_rollup(
            [labels[p] for p in pred], [labels[t] for t in y[idx]], dataset.hierarchy)

    report.strategy = plan.grouping
    report.params = dict(plan.params, aggregate=aggregate, seed=seed)
    report.leakage = check_leakage(plan, dataset)
    report.folds = fold_rows
    report.warnings = notes
    if report.leakage.leaky:
        log.warning("target leakage: %d video(s) span train and test",
                    len(report.leakage.violations))
    return report


def render_table(report: dict) -> str:
    """Aligned text table: ID, class, precision, recall, F1 and an average row."""
    labels = report["labels"]
    width = max([len("Average")] + [len(lab) for lab in labels])
    lines = []
    leak = report.get("leakage")
    if leak and leak.get("leaky"):
        lines.append(f"WARNING: TARGET LEAKAGE - {leak['n_violations']} video(s) appear in both "
                     "train and test; these scores overstate generalisation.")
    if report.get("strategy"):
        lines.append(f"strategy: {report['strategy']}")
    header = f"{'ID':>3}  {'Class':<{width}}  {'Precision':>9}  {'Recall':>9}  {'F1':>9}"
    lines += [header, "-" * len(header)]
    for i, lab in enumerate(labels):
        pc = report["per_class"][lab]
        lines.append(f"{i:>3}  {lab:<{width}}  {100 * pc['precision']:>9.2f}  "
                     f"{100 * pc['recall']:>9.2f}  {100 * pc['f1']:>9.2f}")
    lines.append("-" * len(header))
    m = report["macro"]
    lines.append(f"{'':>3}  {'Average':<{width}}  {100 * m['precision']:>9.2f}  "
                 f"{100 * m['recall']:>9.2f}  {100 * m['f1']:>9.2f}")
    lines.append(f"accuracy: {100 * report['accuracy']:.2f}")
    levels = report.get("per_level_accuracy")
    if levels:
        lines.append("hierarchy top-1: " + ", ".join(f"{k} {100 * v:.2f}" for k, v in levels.items()))
    return "\n".join(lines) + "\n"


def confusion_csv(report: dict) -> str:
    labels = report["labels"]
    rows = [",".join(["truth\\pred"] + labels)]
    for lab, row in zip(labels, report["confusion"]):
        rows.append(",".join([lab] + [str(v) for v in row]))
    return "\n".join(rows) + "\n"


def report_json(report: dict) -> bytes:
    return json.dumps(report, indent=2, sort_keys=False).encode("utf-8")
