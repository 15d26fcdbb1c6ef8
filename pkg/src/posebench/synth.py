"""Synthetic multi-view, multi-subject keypoint videos.

Every class owns a 3-D skeleton of 136 points: a shared base body plus a
class-specific deformation scaled by ``class_separation``. A subject
performs a class as that prototype plus a per-(class, subject) offset.
Each camera sees the pose rotated by its yaw and projected orthographically;
every (class, subject, camera) triple is one video whose frames drift by a
2-D random walk. Box and pixel placement differ per camera so the
normalised features carry no trivial camera signature beyond the view.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Dataset, SampleMeta
from .ingest import ManifestEntry, format_manifest
from .pose import BODY, FACE, LEFT_HAND, N_KEYPOINTS, RIGHT_HAND, BoundingBox, PoseDetection, dump_pose_json

# body points that anchor the face and hand clusters
HEAD, LEFT_WRIST, RIGHT_WRIST = 0, 9, 10
BOX_MARGIN = 0.05
# Per-axis (x, y, z) scale of class deformations and subject offsets. Classes
# differ mostly sideways, so their projections depend on the yaw; the
# vertical axis, which every camera sees alike, carries little class signal.
DEFORM_SCALE = np.array([0.5, 0.05, 0.15])
SUBJECT_SCALE = np.array([1.0, 0.25, 1.0])
SYNTH_FPS = 30.0


def default_angles(n_cameras: int) -> list[float]:
    """Cameras evenly spaced around the subject, starting at 45 degrees."""
    return [math.pi / 4 + 2 * math.pi * i / n_cameras for i in range(n_cameras)]


@dataclass
class SynthConfig:
    n_classes: int = 12
    n_subjects: int = 20
    n_cameras: int = 4
    frames_per_video: int = 60
    class_separation: float = 1.0
    subject_noise: float = 0.35
    temporal_noise: float = 0.01
    camera_angles: list[float] | None = None
    seed: int = 0

    def __post_init__(self):
        for name in ("n_classes", "n_subjects", "n_cameras", "frames_per_video"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("class_separation", "subject_noise", "temporal_noise"):
            if not float(getattr(self, name)) >= 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.camera_angles is None:
            self.camera_angles = default_angles(self.n_cameras)
        self.camera_angles = [float(a) for a in self.camera_angles]
        if len(self.camera_angles) != self.n_cameras:
            raise ValueError(f"camera_angles has {len(self.camera_angles)} entries for {self.n_cameras} cameras")


@dataclass
class SynthVideo:
    video_id: str
    subject_id: str
    camera_id: str
    label: str
    detections: list[PoseDetection] = field(repr=False)


def class_label(c: int) -> str:
    return f"pose_{c:02d}"


def _base_skeleton(rng: np.random.Generator) -> np.ndarray:
    pts = np.empty((N_KEYPOINTS, 3))
    pts[BODY] = rng.normal(0.0, 1.0, (BODY.stop, 3)) * np.array([0.5, 1.0, 0.3])
    return _attach_clusters(pts, rng, spread=0.08)


def _attach_clusters(pts: np.ndarray, rng: np.random.Generator, spread: float) -> np.ndarray:
    for part, anchor in ((FACE, HEAD), (LEFT_HAND, LEFT_WRIST), (RIGHT_HAND, RIGHT_WRIST)):
        n = part.stop - part.start
        pts[part] = pts[anchor] + rng.normal(0.0, spread, (n, 3))
    return pts


def _prototypes(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    base = _base_skeleton(rng)
    protos = np.empty((cfg.n_classes, N_KEYPOINTS, 3))
    for c in range(cfg.n_classes):
        p = base.copy()
        p[BODY] += cfg.class_separation * rng.normal(0.0, 1.0, (BODY.stop, 3)) * DEFORM_SCALE
        # clusters follow their anchors, keeping their own shape jitter
        for part, anchor in ((FACE, HEAD), (LEFT_HAND, LEFT_WRIST), (RIGHT_HAND, RIGHT_WRIST)):
            p[part] += p[anchor] - base[anchor]
        protos[c] = p
    return protos


def _project(points3d: np.ndarray, yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    u = c * points3d[:, 0] + s * points3d[:, 2]
    v = -points3d[:, 1]
    return np.stack([u, v], axis=1)


def _box(xy: np.ndarray) -> BoundingBox:
    body = xy[BODY]
    lo, hi = body.min(axis=0), body.max(axis=0)
    ext = np.maximum(hi - lo, 1.0)
    x0, y0 = lo - BOX_MARGIN * ext
    w, h = ext * (1 + 2 * BOX_MARGIN)
    return BoundingBox(float(x0), float(y0), float(w), float(h))


def generate_videos(cfg: SynthConfig) -> list[SynthVideo]:
    """All videos in (class, subject, camera) order."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    protos = _prototypes(cfg, rng)
    conf = 1.0 - rng.random((cfg.n_classes, N_KEYPOINTS))  # in (0, 1]
    offsets = rng.normal(0.0, 1.0, (cfg.n_classes, cfg.n_subjects, N_KEYPOINTS, 3))
    cam_scale = 120.0 + 25.0 * np.arange(cfg.n_cameras)
    cam_center = np.stack([640.0 + 40.0 * np.arange(cfg.n_cameras),
                           360.0 - 15.0 * np.arange(cfg.n_cameras)], axis=1)

    videos = []
    for c in range(cfg.n_classes):
        for s in range(cfg.n_subjects):
            pose3d = protos[c] + cfg.subject_noise * offsets[c, s] * SUBJECT_SCALE
            for k, yaw in enumerate(cfg.camera_angles):
                vrng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 2, c, s, k]))
                base2d = _project(pose3d, yaw)
                steps = cfg.temporal_noise * vrng.normal(0.0, 1.0, (cfg.frames_per_video, N_KEYPOINTS, 2))
                steps[0] = 0.0
                walk = np.cumsum(steps, axis=0)
                dets = []
                for t in range(cfg.frames_per_video):
                    xy = cam_center[k] + cam_scale[k] * (base2d + walk[t])
                    kps = np.column_stack([xy, conf[c]])
                    frame = int(SYNTH_FPS) + t
                    dets.append(PoseDetection(f"{frame:06d}.jpg", kps, _box(xy), 1.0))
                videos.append(SynthVideo(f"c{c:02d}_s{s:03d}_k{k}", f"subj_{s:03d}",
                                         f"cam_{k}", class_label(c), dets))
    return videos


def generate_dataset(cfg: SynthConfig) -> Dataset:
    """Raw-detection dataset; call ``.X`` for the feature matrix."""
    meta, dets = [], []
    for v in generate_videos(cfg):
        for d in v.detections:
            meta.append(SampleMeta(v.video_id, v.subject_id, v.camera_id,
                                   int(d.frame_id.split(".")[0]), v.label))
            dets.append(d)
    labels = sorted({class_label(c) for c in range(cfg.n_classes)})
    return Dataset(meta=meta, labels=labels, detections=dets)


def write_synthetic(cfg: SynthConfig, out_dir: Path | str) -> Path:
    """Write one pose JSON per video plus ``manifest.csv``; returns the manifest path.

    Frames sit at indices ``fps .. fps + frames - 1`` and the segment spans
    ``[0, (2 * fps + frames - 1) / fps]`` s, so the default 1 s buffer on
    both ends keeps exactly the generated frames.
    """
    out = Path(out_dir)
    (out / "poses").mkdir(parents=True, exist_ok=True)
    entries = []
    for v in generate_videos(cfg):
        path = out / "poses" / f"{v.video_id}.json"
        path.write_bytes(dump_pose_json(v.detections))
        end = (2 * SYNTH_FPS + cfg.frames_per_video - 1) / SYNTH_FPS
        entries.append(ManifestEntry(path, v.video_id, v.subject_id, v.camera_id, v.label,
                                     0.0, end, SYNTH_FPS))
    manifest = out / "manifest.csv"
    manifest.write_text(format_manifest(entries, out), encoding="utf-8")
    return manifest
