"""Labelled samples with grouping metadata (video, subject, camera).

Dataset JSON layout::

    {
      "format": "posebench-dataset",
      "version": 1,
      "labels": ["class_a", ...],            # sorted vocabulary
      "hierarchy": {"leaf": ["level2", "level1"], ...} | null,
      "feature_names": ["f00", ..., "f70"],
      "samples": [
        {"video_id": ..., "subject_id": ..., "camera_id": ...,
         "frame_index": 0, "label": ..., "features": [71 floats]},
        ...
      ]
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import IngestError
from .pose import PoseDetection

DATASET_FORMAT = "posebench-dataset"
DATASET_VERSION = 1
GROUP_KEYS = ("video_id", "subject_id", "camera_id")


@dataclass(frozen=True)
class SampleMeta:
    video_id: str
    subject_id: str
    camera_id: str
    frame_index: int
    label: str


@dataclass(eq=False)
class Dataset:
    """Samples in a fixed order; row ``i`` of ``features`` belongs to ``meta[i]``.

    Either ``features`` (n x 71) or ``detections`` (raw poses) must be set.
    """

    meta: list[SampleMeta]
    labels: list[str]
    features: np.ndarray | None = None
    detections: list[PoseDetection] | None = None
    hierarchy: dict[str, tuple[str, str]] | None = None
    _codes: np.ndarray | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.labels = list(self.labels)
        if self.features is None and self.detections is None:
            raise IngestError("dataset needs features or detections")
        n = len(self.meta)
        if self.features is not None:
            self.features = np.asarray(self.features, dtype=np.float64)
            if self.features.ndim != 2 or self.features.shape[0] != n:
                raise IngestError(f"feature matrix shape {self.features.shape} does not match {n} samples")
        if self.detections is not None and len(self.detections) != n:
            raise IngestError("detections and metadata lengths differ")
        vocab = set(self.labels)
        if len(vocab) != len(self.labels):
            raise IngestError("label vocabulary has duplicates")
        seen = set()
        owner: dict[str, tuple[str, str]] = {}
        for m in self.meta:
            if m.label not in vocab:
                raise IngestError(f"label {m.label!r} missing from vocabulary")
            key = (m.video_id, m.frame_index)
            if key in seen:
                raise IngestError(f"duplicate sample for video {m.video_id!r} frame {m.frame_index}")
            seen.add(key)
            prev = owner.setdefault(m.video_id, (m.subject_id, m.camera_id))
            if prev != (m.subject_id, m.camera_id):
                raise IngestError(
                    f"video {m.video_id!r} maps to more than one subject/camera: "
                    f"{prev} vs {(m.subject_id, m.camera_id)}")
        if self.hierarchy is not None:
            self.hierarchy = {k: tuple(v) for k, v in self.hierarchy.items()}
            missing = [lab for lab in self.labels if lab not in self.hierarchy]
            if missing:
                raise IngestError(f"hierarchy does not cover labels {missing}")

    def __len__(self) -> int:
        return len(self.meta)

    @property
    def y(self) -> np.ndarray:
        """Integer class codes indexing ``labels``."""
        if self._codes is None:
            index = {lab: i for i, lab in enumerate(self.labels)}
            self._codes = np.array([index[m.label] for m in self.meta], dtype=np.int64)
        return self._codes

    @property
    def X(self) -> np.ndarray:
        if self.features is None:
            from .features import featurize_many

            self.features = featurize_many(self.detections)
        return self.features

    def column(self, key: str) -> np.ndarray:
        return np.array([getattr(m, key) for m in self.meta], dtype=object)

    def subset(self, indices) -> Dataset:
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(
            meta=[self.meta[i] for i in indices],
            labels=self.labels,
            features=None if self.features is None else self.features[indices],
            detections=None if self.detections is None else [self.detections[i] for i in indices],
            hierarchy=self.hierarchy,
        )

    def to_dict(self) -> dict:
        X = self.X
        samples = []
        for m, row in zip(self.meta, X):
            samples.append({
                "video_id": m.video_id,
                "subject_id": m.subject_id,
                "camera_id": m.camera_id,
                "frame_index": m.frame_index,
                "label": m.label,
                "features": [float(v) for v in row],
            })
        return {
            "format": DATASET_FORMAT,
            "version": DATASET_VERSION,
            "labels": self.labels,
            "hierarchy": None if self.hierarchy is None
            else {k: list(v) for k, v in sorted(self.hierarchy.items())},
            "feature_names": [f"f{i:02d}" for i in range(X.shape[1])],
            "samples": samples,
        }

    def to_json(self) -> bytes:
        return json.dumps(self.to_dict(), separators=(",", ":")).encode("utf-8")

    @classmethod
    def from_dict(cls, doc: dict) -> Dataset:
        if doc.get("format") != DATASET_FORMAT or doc.get("version") != DATASET_VERSION:
            raise IngestError("not a posebench dataset document (format/version mismatch)")
        try:
            meta = [SampleMeta(s["video_id"], s["subject_id"], s["camera_id"],
                               int(s["frame_index"]), s["label"]) for s in doc["samples"]]
            features = np.array([s["features"] for s in doc["samples"]], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise IngestError(f"malformed dataset sample: {exc}") from exc
        if not meta:
            features = np.zeros((0, len(doc.get("feature_names", []))))
        return cls(meta=meta, labels=doc["labels"], features=features,
                   hierarchy=doc.get("hierarchy"))

    @classmethod
    def from_json(cls, raw: bytes) -> Dataset:
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise IngestError(f"dataset JSON is malformed: {exc}") from exc
        return cls.from_dict(doc)
