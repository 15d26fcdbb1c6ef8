"""Manifest-driven dataset assembly from per-video pose JSON files.

Manifest CSV header::

    path,video_id,subject_id,camera_id,label,start_s,end_s,fps

``path`` is resolved relative to the manifest's directory. Each row is one
labelled segment of one video; a video may have several rows (e.g. the
left and right sides of a bilateral pose).
"""

from __future__ import annotations

import csv
import io
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import Dataset, SampleMeta
from .errors import IngestError, StructuralError
from .features import featurize_many
from .pose import PoseDetection, frame_index_of, parse_pose_json, resolve_detections

log = logging.getLogger(__name__)

MANIFEST_COLUMNS = ["path", "video_id", "subject_id", "camera_id", "label", "start_s", "end_s", "fps"]
STILL_LABEL = "still"
MAX_FRAMES_PER_SEGMENT = 200
STILL_BUFFER_S = 1.0
# slack when comparing frame timestamps against segment bounds
_TIME_EPS = 1e-9


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    video_id: str
    subject_id: str
    camera_id: str
    label: str
    start_s: float
    end_s: float
    fps: float

    def __post_init__(self):
        if not self.start_s < self.end_s:
            raise IngestError(f"{self.video_id}: start_s {self.start_s} must be < end_s {self.end_s}")
        if not self.fps > 0:
            raise IngestError(f"{self.video_id}: fps must be positive, got {self.fps}")


def parse_manifest(text: str, base_dir: Path | str = ".") -> list[ManifestEntry]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or list(reader.fieldnames) != MANIFEST_COLUMNS:
        raise IngestError(f"manifest header must be {','.join(MANIFEST_COLUMNS)}, got {reader.fieldnames}")
    base = Path(base_dir)
    entries = []
    for lineno, row in enumerate(reader, start=2):
        try:
            entries.append(ManifestEntry(
                path=base / row["path"],
                video_id=row["video_id"],
                subject_id=row["subject_id"],
                camera_id=row["camera_id"],
                label=row["label"],
                start_s=float(row["start_s"]),
                end_s=float(row["end_s"]),
                fps=float(row["fps"]),
            ))
        except (TypeError, ValueError) as exc:
            raise IngestError(f"manifest line {lineno}: {exc}") from exc
    return entries


def read_manifest(path: Path | str) -> list[ManifestEntry]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise IngestError(f"manifest not found: {path}") from None
    return parse_manifest(text, path.parent)


def format_manifest(entries: Sequence[ManifestEntry], base_dir: Path | str | None = None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(MANIFEST_COLUMNS)
    for e in entries:
        path = e.path if base_dir is None else e.path.relative_to(base_dir)
        writer.writerow([path.as_posix(), e.video_id, e.subject_id, e.camera_id, e.label,
                         repr(e.start_s), repr(e.end_s), repr(e.fps)])
    return buf.getvalue()


def sample_frames(frame_indices, start_s: float, end_s: float, fps: float,
                  max_n: int = MAX_FRAMES_PER_SEGMENT) -> list[int]:
    """Frames timed inside ``[start_s, end_s]``, thinned to at most ``max_n``.

    Frame ``i`` is at ``i / fps`` seconds. When thinning, the kept frames are
    evenly spaced over the qualifying ones and include the first and last.
    """
    if not start_s < end_s:
        raise ValueError("start_s must be < end_s")
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    eligible = [int(i) for i in frame_indices
                if start_s - _TIME_EPS <= i / fps <= end_s + _TIME_EPS]
    if len(eligible) <= max_n:
        return eligible
    if max_n == 1:
        return [eligible[0]]
    pos = np.floor(np.linspace(0, len(eligible) - 1, max_n) + 0.5).astype(np.int64)
    return [eligible[p] for p in pos]


def read_hierarchy(path: Path | str) -> dict[str, tuple[str, str]]:
    """Label hierarchy CSV with header ``label,level2,level1``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["label", "level2", "level1"]:
            raise IngestError("hierarchy header must be label,level2,level1")
        return {row["label"]: (row["level2"], row["level1"]) for row in reader}


def _load_frames(entry: ManifestEntry, cache: dict) -> dict[int, PoseDetection]:
    if entry.path in cache:
        return cache[entry.path]
    try:
        raw = entry.path.read_bytes()
    except FileNotFoundError:
        raise IngestError(f"pose file not found: {entry.path}") from None
    by_id = resolve_detections(parse_pose_json(raw))
    frames: dict[int, PoseDetection] = {}
    for frame_id, det in by_id.items():
        idx = frame_index_of(frame_id)
        if idx in frames:
            raise StructuralError(f"{entry.path}: two image ids map to frame {idx}")
        frames[idx] = det
    cache[entry.path] = frames
    return frames


def _window_frames(frames: dict[int, PoseDetection], start: float, end: float, fps: float,
                   max_n: int, where: str) -> list[int]:
    expected = math.floor(end * fps + _TIME_EPS) - math.ceil(start * fps - _TIME_EPS) + 1
    picked = sample_frames(sorted(frames), start, end, fps, max_n)
    available = len(sample_frames(sorted(frames), start, end, fps, 10**12))
    if available < expected:
        log.warning("%s: %d of %d frames in [%.3f, %.3f] s have no detection; dropped",
                    where, expected - available, expected, start, end)
    return picked


def assemble_dataset(manifest: Sequence[ManifestEntry], still_buffer_s: float = STILL_BUFFER_S,
                     include_still: bool = False, max_frames: int = MAX_FRAMES_PER_SEGMENT,
                     hierarchy: dict[str, tuple[str, str]] | None = None,
                     featurize: bool = True) -> Dataset:
    """Build a labelled dataset from manifest segments.

    Each segment contributes frames from ``[start + buffer, end - buffer]``.
    With ``include_still``, every video also contributes frames from
    ``[0, first_start - buffer]`` labelled ``"still"``. Segments whose
    buffered window is empty are skipped with a warning.
    """
    owner: dict[str, tuple[str, str]] = {}
    for e in manifest:
        prev = owner.setdefault(e.video_id, (e.subject_id, e.camera_id))
        if prev != (e.subject_id, e.camera_id):
            raise IngestError(f"video {e.video_id!r} is listed with subject/camera {prev} "
                              f"and {(e.subject_id, e.camera_id)}")
    first_start: dict[str, float] = {}
    for e in manifest:
        first_start[e.video_id] = min(first_start.get(e.video_id, math.inf), e.start_s)

    cache: dict = {}
    meta: list[SampleMeta] = []
    dets: list[PoseDetection] = []
    still_done: set[str] = set()
    for e in manifest:
        frames = _load_frames(e, cache)
        if include_still and e.video_id not in still_done:
            still_done.add(e.video_id)
            still_end = first_start[e.video_id] - still_buffer_s
            if still_end > 0:
                for i in _window_frames(frames, 0.0, still_end, e.fps, max_frames,
                                        f"{e.video_id} (still)"):
                    meta.append(SampleMeta(e.video_id, e.subject_id, e.camera_id, i, STILL_LABEL))
                    dets.append(frames[i])
        lo, hi = e.start_s + still_buffer_s, e.end_s - still_buffer_s
        if lo >= hi:
            log.warning("%s: segment [%s, %s] s is empty after a %s s buffer; skipped",
                        e.video_id, e.start_s, e.end_s, still_buffer_s)
            continue
        for i in _window_frames(frames, lo, hi, e.fps, max_frames, f"{e.video_id} ({e.label})"):
            meta.append(SampleMeta(e.video_id, e.subject_id, e.camera_id, i, e.label))
            dets.append(frames[i])

    labels = sorted({m.label for m in meta})
    return Dataset(meta=meta, labels=labels, detections=dets,
                   features=featurize_many(dets) if featurize else None,
                   hierarchy=hierarchy)
