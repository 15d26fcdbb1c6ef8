"""Acceptance gate: every criterion prints one PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s``. The large
synthetic dataset and the forest cross-validations are computed once per
module and shared by the trend criteria.
"""

import os
import time
from pathlib import Path

import numpy as np
import pytest

from posebench.classify import ForestParams, GBTParams, best_split, gini_impurity
from posebench.cli import main as cli_main
from posebench.evaluate import (camera_splits, check_leakage, compute_metrics, confusion_matrix,
                                frame_folds, hierarchy_rollup, run_cv, subject_folds)
from posebench.features import N_FEATURES, featurize
from posebench.pose import N_KEYPOINTS, BoundingBox, PoseDetection
from posebench.synth import SynthConfig, generate_dataset
from posebench.trainers import make_trainer

from oracles import counting_metrics, exhaustive_split, gini_direct, random_split_dataset

MODULE_START = time.perf_counter()
N_JOBS = os.cpu_count() or 1
TRENDS = SynthConfig(n_classes=12, n_subjects=20, n_cameras=4, frames_per_video=60, seed=0)


@pytest.fixture
def verdict(capsys, request):
    """Call with (ok, detail); prints the criterion line even when output is captured."""
    number = request.node.get_closest_marker("criterion").args[0]

    def report(ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[criterion {number:>2}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail

    return report


def timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


@pytest.fixture(scope="module")
def trend_data():
    return generate_dataset(TRENDS)


@pytest.fixture(scope="module")
def forest_trainer():
    return make_trainer("forest", forest=ForestParams(n_trees=100), n_jobs=N_JOBS)


@pytest.fixture(scope="module")
def leakage_runs(trend_data, forest_trainer):
    ds = trend_data
    t0 = time.perf_counter()
    frame_plan, subject_plan = frame_folds(ds, 10, seed=0), subject_folds(ds, 10, seed=0)
    frame = run_cv(ds, frame_plan, forest_trainer, seed=0)
    subject = run_cv(ds, subject_plan, forest_trainer, seed=0)
    return frame, subject, check_leakage(frame_plan, ds), check_leakage(subject_plan, ds), \
        time.perf_counter() - t0


@pytest.fixture(scope="module")
def camera_runs(trend_data, forest_trainer):
    t0 = time.perf_counter()
    out = {m: run_cv(trend_data, camera_splits(trend_data, m), forest_trainer, seed=0, aggregate="mean")
           for m in (3, 2, 1)}
    return out, time.perf_counter() - t0


@pytest.mark.criterion(1)
def test_gini_oracle(verdict):
    rng = np.random.default_rng(1)
    vectors = []
    while len(vectors) < 1000:
        v = rng.integers(0, 1000, int(rng.integers(1, 13)))
        if v.sum() > 0:
            vectors.append(v.tolist())
    worst, elapsed = timed(lambda: max(abs(gini_impurity(v) - gini_direct(v)) for v in vectors))
    verdict(worst <= 1e-12 and elapsed < 1.0,
            f"1000 count vectors, max |error| {worst:.2e} (<= 1e-12), {elapsed:.3f} s (< 1 s)")


@pytest.mark.criterion(2)
def test_split_oracle(verdict):
    best_split(np.array([[0.0], [1.0]]), np.array([0, 1]))  # compile kernels outside the clock

    def run():
        rng = np.random.default_rng(2)
        bad = 0
        for _ in range(200):
            X, y, c = random_split_dataset(rng)
            got, want = best_split(X, y, n_classes=c), exhaustive_split(X, y, c)
            if (got is None) != (want is None):
                bad += 1
            elif got is not None and (got[:2] != want[:2] or abs(got[2] - want[2]) > 1e-12):
                bad += 1
        return bad

    bad, elapsed = timed(run)
    verdict(bad == 0 and elapsed < 10.0,
            f"200 random datasets, {bad} mismatches vs exhaustive enumeration, {elapsed:.2f} s (< 10 s)")


def _random_detection(rng) -> PoseDetection:
    kps = np.column_stack([rng.uniform(-500, 2000, (N_KEYPOINTS, 2)), rng.uniform(0, 1, N_KEYPOINTS)])
    box = BoundingBox(*rng.uniform(-100, 1000, 2), *rng.uniform(1, 800, 2))
    return PoseDetection("f.jpg", kps, box, 1.0)


def _moved(det: PoseDetection, shift, scale) -> PoseDetection:
    kps = det.keypoints.copy()
    kps[:, :2] = kps[:, :2] * scale + shift
    b = det.box
    box = BoundingBox(b.x * scale + shift[0], b.y * scale + shift[1], b.w * scale, b.h * scale)
    return PoseDetection(det.frame_id, kps, box, det.score)


@pytest.mark.criterion(3)
def test_feature_contract(verdict):
    def run():
        rng = np.random.default_rng(3)
        worst, ok = 0.0, True
        for _ in range(500):
            det = _random_detection(rng)
            f = featurize(det)
            ok &= f.shape == (N_FEATURES,) and bool(np.isfinite(f).all())
            g = featurize(_moved(det, rng.uniform(-1e3, 1e3, 2), float(np.exp(rng.uniform(-3, 3)))))
            worst = max(worst, float(np.abs(f - g).max()))
        return ok, worst

    (ok, worst), elapsed = timed(run)
    verdict(ok and worst <= 1e-9 and elapsed < 5.0,
            f"500 detections: length 71 and finite={ok}, max change under translation+scaling "
            f"{worst:.2e} (<= 1e-9), {elapsed:.2f} s (< 5 s)")


@pytest.mark.criterion(4)
def test_leakage_ordering(verdict, leakage_runs):
    frame, subject, frame_leak, subject_leak, elapsed = leakage_runs
    f, s = 100 * frame.macro["f1"], 100 * subject.macro["f1"]
    ok = f - s >= 5 and frame_leak.leaky and not subject_leak.leaky and elapsed < 180
    verdict(ok, f"frame-wise macro-F1 {f:.2f} vs subject-wise {s:.2f} (gap {f - s:.2f} >= 5); "
                f"frame plan leaky={frame_leak.leaky}, subject plan leaky={subject_leak.leaky}; "
                f"{elapsed:.0f} s (< 180 s)")


@pytest.mark.criterion(5)
def test_camera_count_trend(verdict, camera_runs):
    runs, elapsed = camera_runs
    f1 = {m: 100 * r.macro["f1"] for m, r in runs.items()}
    ok = f1[3] >= f1[2] >= f1[1] and f1[3] - f1[1] >= 5 and elapsed < 180
    verdict(ok, f"mean macro-F1 with 3/2/1 training cameras: {f1[3]:.2f} / {f1[2]:.2f} / {f1[1]:.2f} "
                f"(non-increasing, 3-1 gap {f1[3] - f1[1]:.2f} >= 5); {elapsed:.0f} s (< 180 s)")


@pytest.mark.criterion(6)
def test_camera_below_subject(verdict, leakage_runs, camera_runs):
    s = 100 * leakage_runs[1].macro["f1"]
    c = 100 * camera_runs[0][3].macro["f1"]
    verdict(s - c >= 3, f"3-camera macro-F1 {c:.2f} is {s - c:.2f} points below subject-wise {s:.2f} (>= 3)")


@pytest.mark.criterion(7)
def test_separable_competence(verdict):
    cfg = SynthConfig(n_classes=12, n_subjects=20, n_cameras=1, frames_per_video=10,
                      subject_noise=0.0, temporal_noise=0.0, seed=7)
    ds = generate_dataset(cfg)
    plan = subject_folds(ds, 10, seed=0)
    forest = run_cv(ds, plan, make_trainer("forest", forest=ForestParams(n_trees=100), n_jobs=N_JOBS))
    gbt = run_cv(ds, plan, make_trainer("gbt", gbt=GBTParams(n_rounds=30), n_jobs=N_JOBS))
    ff, gf = forest.macro["f1"], gbt.macro["f1"]
    verdict(ff == 1.0 and gf >= 0.99,
            f"zero-noise single camera, subject folds: forest macro-F1 {ff:.4f} (= 1), GBT {gf:.4f} (>= 0.99)")


@pytest.mark.criterion(8)
def test_metrics_oracle(verdict):
    rep = compute_metrics(np.array([[3, 1], [2, 4]]), ["a", "b"])
    fixture_ok = (np.allclose([rep.per_class["a"]["precision"], rep.per_class["b"]["precision"]], [0.6, 0.8],
                              atol=1e-12)
                  and np.allclose([rep.per_class["a"]["recall"], rep.per_class["b"]["recall"]], [0.75, 2 / 3],
                                  atol=1e-12)
                  and abs(rep.accuracy - 0.7) <= 1e-12)
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(100):
        C = int(rng.integers(2, 8))
        truth = rng.integers(0, C, int(rng.integers(1, 200)))
        pred = np.where(rng.random(truth.size) < 0.6, truth, rng.integers(0, C, truth.size))
        got = compute_metrics(confusion_matrix(truth, pred, C), [str(i) for i in range(C)])
        want, acc = counting_metrics(truth.tolist(), pred.tolist(), C)
        worst = max(worst, abs(got.accuracy - acc))
        for c, triple in enumerate(want):
            pc = got.per_class[str(c)]
            worst = max(worst, *(abs(pc[k] - v) for k, v in zip(("precision", "recall", "f1"), triple)))
    verdict(fixture_ok and worst <= 1e-12,
            f"fixture [[3,1],[2,4]] matches={fixture_ok}; 100 random matrices, max |error| {worst:.1e}")


@pytest.mark.criterion(9)
def test_hierarchy_monotone(verdict):
    rng = np.random.default_rng(9)
    broken = 0
    for _ in range(1000):
        n_leaf = int(rng.integers(2, 12))
        n2 = int(rng.integers(1, n_leaf + 1))
        n1 = int(rng.integers(1, n2 + 1))
        up2 = rng.integers(0, n1, n2)  # level-2 group -> level-1 group
        hierarchy = {}
        for leaf in range(n_leaf):
            g2 = int(rng.integers(0, n2))
            hierarchy[f"l{leaf}"] = (f"m{g2}", f"t{up2[g2]}")
        n = int(rng.integers(1, 60))
        preds = [f"l{i}" for i in rng.integers(0, n_leaf, n)]
        truths = [f"l{i}" for i in rng.integers(0, n_leaf, n)]
        acc = hierarchy_rollup(preds, truths, hierarchy)
        broken += not (acc["level_1"] >= acc["level_2"] >= acc["level_3"])
    verdict(broken == 0, f"1000 random hierarchies: {broken} violate level-1 >= level-2 >= level-3")


def _pipeline(root: Path, threads: int, monkeypatch) -> tuple[bytes, bytes]:
    monkeypatch.chdir(root)
    t = str(threads)
    steps = [
        ["synth", "--classes", "4", "--subjects", "5", "--cameras", "2", "--frames", "12",
         "--seed", "11", "--out", "synth", "--threads", t],
        ["featurize", "--manifest", "synth/manifest.csv", "--out", "feat", "--threads", t],
        ["train", "--dataset", "feat/dataset.json", "--model", "ensemble", "--trees", "30",
         "--rounds", "10", "--seed", "3", "--out", "model.json", "--threads", t],
        ["eval", "--dataset", "feat/dataset.json", "--strategy", "subject", "--folds", "5",
         "--model", "ensemble", "--trees", "30", "--rounds", "10", "--seed", "3",
         "--out", "report.json", "--quiet", "--threads", t],
    ]
    for argv in steps:
        assert cli_main(argv) == 0, argv
    return (root / "model.json").read_bytes(), (root / "report.json").read_bytes()


@pytest.mark.criterion(10)
def test_pipeline_determinism(verdict, tmp_path, monkeypatch):
    outputs = {}
    for threads in (1, 8):
        for rep in (0, 1):
            # identical relative paths, so the echoed configuration matches too
            root = tmp_path / f"t{threads}" / f"r{rep}" / "work"
            root.mkdir(parents=True)
            outputs[(threads, rep)] = _pipeline(root, threads, monkeypatch)
    first = outputs[(1, 0)]
    same = {k: v == first for k, v in outputs.items()}
    verdict(all(same.values()),
            "synth -> featurize -> train -> eval twice each at 1 and 8 threads: "
            f"model and report bytes identical={all(same.values())}")


@pytest.mark.criterion(11)
def test_total_runtime(verdict):
    elapsed = time.perf_counter() - MODULE_START
    verdict(elapsed < 600, f"acceptance suite ran in {elapsed:.0f} s (< 600 s) on {N_JOBS} core(s)")
