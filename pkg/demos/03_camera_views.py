"""
Fewer training viewpoints, lower scores
=======================================

Each camera sees the same poses from a different yaw. Training on some
cameras and testing on the others measures how well the features carry
across viewpoints.
"""

from posebench.classify import ForestParams
from posebench.evaluate import camera_splits, run_cv
from posebench.synth import SynthConfig, generate_dataset
from posebench.trainers import make_trainer

ds = generate_dataset(SynthConfig(n_classes=6, n_subjects=8, n_cameras=4, frames_per_video=10, seed=2))
train = make_trainer("forest", forest=ForestParams(n_trees=50))

for n_train in (3, 2, 1):
    plan = camera_splits(ds, n_train)
    rep = run_cv(ds, plan, train, aggregate="mean")
    print(f"{n_train} training camera(s), {len(plan.folds)} folds: macro-F1 {rep.macro['f1']:.3f}")
