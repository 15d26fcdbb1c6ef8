"""71-dimension pose features.

Layout (all coordinates relative to the detection box, ``(p - box.xy) / box.wh``):

====== =====================================================
index  content
====== =====================================================
0-51   body keypoints 0..25 as (x, y) pairs
52-57  face: mean (x, y), min (x, y), max (x, y)
58-63  left hand: mean, min, max
64-69  right hand: mean, min, max
70     box aspect ratio w / h
====== =====================================================

Face and hand aggregates use the 10 most confident points of their set,
reduced componentwise.
"""

from __future__ import annotations

import csv
import io

import numpy as np

from .errors import FeatureError
from .pose import BODY, FACE, LEFT_HAND, RIGHT_HAND, N_BODY, BoundingBox, PoseDetection

TOP_K = 10
N_FEATURES = 2 * N_BODY + 3 * 6 + 1
FEATURE_COLUMNS = [f"f{i:02d}" for i in range(N_FEATURES)]
META_COLUMNS = ["video_id", "subject_id", "camera_id", "frame_index", "label"]


def _layout() -> list[str]:
    names = []
    for i in range(N_BODY):
        names += [f"body{i:02d}.x", f"body{i:02d}.y"]
    for part in ("face", "lhand", "rhand"):
        for stat in ("mean", "min", "max"):
            names += [f"{part}.{stat}.x", f"{part}.{stat}.y"]
    names.append("box.aspect")
    return names


FEATURE_LAYOUT = _layout()


def top_k_indices(confidence, k: int = TOP_K) -> np.ndarray:
    """Indices of the ``k`` highest confidences in ascending index order.

    Equal confidences prefer the lower index.
    """
    confidence = np.asarray(confidence, dtype=np.float64)
    if confidence.size == 0:
        raise ValueError("keypoint set is empty")
    if k < 1:
        raise ValueError("k must be >= 1")
    order = np.argsort(-confidence, kind="stable")[:k]
    return np.sort(order)


def top_k_by_confidence(keypoints, k: int = TOP_K) -> np.ndarray:
    """Rows of an (n, 3) keypoint array with the ``k`` highest confidences."""
    keypoints = np.asarray(keypoints, dtype=np.float64)
    return keypoints[top_k_indices(keypoints[:, 2], k)]


def aggregate_keypoint_set(keypoints, k: int = TOP_K) -> np.ndarray:
    """(3, 2) array of mean, min and max (x, y) over the top-``k`` subset."""
    sel = top_k_by_confidence(keypoints, k)[:, :2]
    return np.stack([sel.mean(axis=0), sel.min(axis=0), sel.max(axis=0)])


def normalize_to_bbox(point, box: BoundingBox) -> np.ndarray:
    """Map pixel coordinates into box units; nothing is clamped."""
    point = np.asarray(point, dtype=np.float64)
    return (point - np.array([box.x, box.y])) / np.array([box.w, box.h])


def _check_finite(keypoints: np.ndarray, labels) -> None:
    bad = ~np.isfinite(keypoints[..., :2]).all(axis=-1)
    if bad.any():
        row, kp = np.argwhere(np.atleast_2d(bad))[0]
        where = f" ({labels[row]})" if labels is not None else ""
        raise FeatureError(f"non-finite coordinate at keypoint {int(kp)}{where}")


def featurize_arrays(keypoints: np.ndarray, boxes: np.ndarray, frame_ids=None) -> np.ndarray:
    """Vectorised featurization of (n, 136, 3) keypoints and (n, 4) boxes."""
    keypoints = np.asarray(keypoints, dtype=np.float64)
    boxes = np.asarray(boxes, dtype=np.float64)
    n = keypoints.shape[0]
    _check_finite(keypoints, frame_ids)
    origin = boxes[:, None, :2]
    extent = boxes[:, None, 2:]
    out = np.empty((n, N_FEATURES))
    out[:, : 2 * N_BODY] = ((keypoints[:, BODY, :2] - origin) / extent).reshape(n, -1)
    col = 2 * N_BODY
    rows = np.arange(n)[:, None]
    for part in (FACE, LEFT_HAND, RIGHT_HAND):
        pts = keypoints[:, part]
        order = np.argsort(-pts[:, :, 2], axis=1, kind="stable")[:, :TOP_K]
        sel = pts[rows, np.sort(order, axis=1), :2]
        agg = np.stack([sel.mean(axis=1), sel.min(axis=1), sel.max(axis=1)], axis=1)
        out[:, col: col + 6] = ((agg - origin) / extent).reshape(n, -1)
        col += 6
    out[:, col] = boxes[:, 2] / boxes[:, 3]
    return out


def featurize(detection: PoseDetection) -> np.ndarray:
    """71-value feature vector for one detection."""
    return featurize_many([detection])[0]


def featurize_many(detections) -> np.ndarray:
    detections = list(detections)
    if not detections:
        return np.zeros((0, N_FEATURES))
    kps = np.stack([d.keypoints for d in detections])
    boxes = np.array([[d.box.x, d.box.y, d.box.w, d.box.h] for d in detections])
    ids = [f"frame {d.frame_id!r}" for d in detections]
    return featurize_arrays(kps, boxes, ids)


def feature_csv(dataset) -> str:
    """Feature matrix as CSV: ``f00..f70`` then the sample metadata columns."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FEATURE_COLUMNS + META_COLUMNS)
    for m, row in zip(dataset.meta, dataset.X):
        writer.writerow([repr(float(v)) for v in row]
                        + [m.video_id, m.subject_id, m.camera_id, m.frame_index, m.label])
    return buf.getvalue()
