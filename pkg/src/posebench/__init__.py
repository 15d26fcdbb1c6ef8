"""Pose-keypoint classification benchmark: ingest, features, tree ensembles, leakage-aware evaluation."""

__version__ = "0.1.0"

from .dataset import Dataset, SampleMeta
from .evaluate import (EvalReport, SplitPlan, camera_splits, check_leakage, compute_metrics,
                       frame_folds, hierarchy_rollup, run_cv, subject_folds)
from .features import N_FEATURES, featurize, featurize_many
from .ingest import assemble_dataset, read_manifest, sample_frames
from .pose import PoseDetection, parse_pose_json
from .synth import SynthConfig, generate_dataset, write_synthetic
from .trainers import fit_model, make_trainer

__all__ = [
    "Dataset",
    "EvalReport",
    "N_FEATURES",
    "PoseDetection",
    "SampleMeta",
    "SplitPlan",
    "SynthConfig",
    "__version__",
    "assemble_dataset",
    "camera_splits",
    "check_leakage",
    "compute_metrics",
    "featurize",
    "featurize_many",
    "fit_model",
    "frame_folds",
    "generate_dataset",
    "hierarchy_rollup",
    "make_trainer",
    "parse_pose_json",
    "read_manifest",
    "run_cv",
    "sample_frames",
    "subject_folds",
    "write_synthetic",
]
