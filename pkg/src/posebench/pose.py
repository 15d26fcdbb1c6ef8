"""Whole-body pose detections and the estimator's JSON output format.

Each detection carries 136 keypoints laid out as 26 body, 68 face,
21 left-hand and 21 right-hand points. On disk a file is a JSON array of
objects::

    {"image_id": "42.jpg", "keypoints": [x0, y0, c0, x1, ...],  # 408 numbers
     "box": [x, y, w, h], "score": 0.97}
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import PoseParseError, StructuralError

log = logging.getLogger(__name__)

N_BODY, N_FACE, N_HAND = 26, 68, 21
N_KEYPOINTS = N_BODY + N_FACE + 2 * N_HAND

BODY = slice(0, N_BODY)
FACE = slice(N_BODY, N_BODY + N_FACE)
LEFT_HAND = slice(FACE.stop, FACE.stop + N_HAND)
RIGHT_HAND = slice(LEFT_HAND.stop, LEFT_HAND.stop + N_HAND)


class Keypoint(NamedTuple):
    x: float
    y: float
    confidence: float


@dataclass(frozen=True)
class BoundingBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise StructuralError(f"bounding box needs positive extent, got w={self.w}, h={self.h}")


@dataclass(eq=False)
class PoseDetection:
    """One person in one frame. ``keypoints`` is a (136, 3) array of x, y, confidence."""

    frame_id: str
    keypoints: np.ndarray
    box: BoundingBox
    score: float

    def __post_init__(self):
        self.keypoints = np.asarray(self.keypoints, dtype=np.float64)
        if self.keypoints.shape != (N_KEYPOINTS, 3):
            raise StructuralError(
                f"frame {self.frame_id!r}: expected {N_KEYPOINTS}x3 keypoints, got {self.keypoints.shape}")

    def keypoint(self, i: int) -> Keypoint:
        return Keypoint(*(float(v) for v in self.keypoints[i]))

    def __eq__(self, other):
        if not isinstance(other, PoseDetection):
            return NotImplemented
        return (self.frame_id == other.frame_id and self.box == other.box
                and self.score == other.score
                and np.array_equal(self.keypoints, other.keypoints))

    def to_dict(self) -> dict:
        return {
            "image_id": self.frame_id,
            "keypoints": [float(v) for v in self.keypoints.ravel()],
            "box": [self.box.x, self.box.y, self.box.w, self.box.h],
            "score": self.score,
        }


def _byte_offset(text: str, char_pos: int) -> int:
    return len(text[:char_pos].encode("utf-8"))


def parse_pose_json(raw: bytes | str) -> list[PoseDetection]:
    """Decode an estimator output file into detections, in file order.

    Confidences outside [0, 1] are accepted; they are logged as warnings
    (see :func:`confidence_diagnostics`).
    """
    text = raw.decode("utf-8") if isinstance(raw, (bytes, bytearray)) else raw
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = _byte_offset(text, exc.pos)
        raise PoseParseError(f"malformed pose JSON at byte {offset}: {exc.msg}", offset) from exc
    if not isinstance(doc, list):
        raise StructuralError("pose JSON must be an array of detection objects")
    detections = []
    for pos, obj in enumerate(doc):
        if not isinstance(obj, dict):
            raise StructuralError(f"entry {pos} is not an object")
        frame = obj.get("image_id")
        if frame is None:
            raise StructuralError(f"entry {pos} has no image_id")
        frame = str(frame)
        kps = obj.get("keypoints")
        if not isinstance(kps, list) or len(kps) != 3 * N_KEYPOINTS:
            n = len(kps) if isinstance(kps, list) else "no"
            raise StructuralError(
                f"frame {frame!r}: keypoints array has {n} values, expected {3 * N_KEYPOINTS}")
        box = obj.get("box")
        if not isinstance(box, list) or len(box) != 4:
            raise StructuralError(f"frame {frame!r}: box must be [x, y, w, h]")
        try:
            bbox = BoundingBox(*(float(v) for v in box))
        except StructuralError as exc:
            raise StructuralError(f"frame {frame!r}: {exc}") from None
        try:
            keypoints = np.asarray(kps, dtype=np.float64).reshape(N_KEYPOINTS, 3)
            score = float(obj.get("score", 0.0))
        except (TypeError, ValueError) as exc:
            raise StructuralError(f"frame {frame!r}: non-numeric value ({exc})") from None
        detections.append(PoseDetection(frame, keypoints, bbox, score))
    for msg in confidence_diagnostics(detections):
        log.warning(msg)
    return detections


def confidence_diagnostics(detections) -> list[str]:
    """One message per detection holding confidences outside [0, 1]."""
    out = []
    for det in detections:
        conf = det.keypoints[:, 2]
        bad = np.flatnonzero((conf < 0) | (conf > 1))
        if bad.size:
            out.append(f"frame {det.frame_id!r}: {bad.size} confidence value(s) outside [0, 1] "
                       f"(first at keypoint {int(bad[0])}: {conf[bad[0]]!r})")
    return out


def dump_pose_json(detections) -> bytes:
    return json.dumps([d.to_dict() for d in detections], separators=(",", ":")).encode("utf-8")


def resolve_detections(detections) -> dict[str, PoseDetection]:
    """Keep the highest-scoring detection per frame; earlier entries win ties."""
    best: dict[str, PoseDetection] = {}
    for det in detections:
        cur = best.get(det.frame_id)
        if cur is None or det.score > cur.score:
            best[det.frame_id] = det
    return best


def frame_index_of(frame_id: str) -> int:
    """Last digit run of the image id's stem, e.g. ``"000123.jpg" -> 123``."""
    stem = frame_id.rsplit("/", 1)[-1].split(".", 1)[0]
    runs = re.findall(r"\d+", stem)
    if not runs:
        raise StructuralError(f"cannot derive a frame number from image id {frame_id!r}")
    return int(runs[-1])
