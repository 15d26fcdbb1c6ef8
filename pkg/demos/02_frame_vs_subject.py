"""
Why frame-wise cross-validation flatters a classifier
=====================================================

Consecutive frames of a video are nearly identical, so shuffling frames
into folds puts near-copies of each test frame in the training set.
"""

from posebench.classify import ForestParams
from posebench.evaluate import check_leakage, frame_folds, run_cv, subject_folds
from posebench.synth import SynthConfig, generate_dataset
from posebench.trainers import make_trainer

ds = generate_dataset(SynthConfig(n_classes=6, n_subjects=10, n_cameras=2, frames_per_video=20, seed=1))
print(len(ds), "frames from", len(set(ds.column("video_id"))), "videos")

train = make_trainer("forest", forest=ForestParams(n_trees=50))

frame_plan = frame_folds(ds, k=5, seed=0)
subject_plan = subject_folds(ds, k=5, seed=0)

# the leakage check needs no model at all
print("frame plan leaky:  ", check_leakage(frame_plan, ds).leaky)
print("subject plan leaky:", check_leakage(subject_plan, ds).leaky)

frame = run_cv(ds, frame_plan, train)
subject = run_cv(ds, subject_plan, train)
print(f"macro-F1  frame-wise {frame.macro['f1']:.3f}   subject-wise {subject.macro['f1']:.3f}")

# the frame-wise table opens with a warning
print(frame.to_text())
