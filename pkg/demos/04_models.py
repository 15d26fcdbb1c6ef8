"""
Forest, boosting and a soft-voting ensemble
===========================================

"""

import numpy as np

from posebench.classify import (EnsembleModel, ForestParams, GBTParams, fit_forest, fit_gbt,
                                load_model, save_model)
from posebench.evaluate import subject_folds
from posebench.synth import SynthConfig, generate_dataset

ds = generate_dataset(SynthConfig(n_classes=5, n_subjects=8, n_cameras=1, frames_per_video=10, seed=3))
train, test = subject_folds(ds, k=4).folds[0]
X, y = ds.X, ds.y

forest = fit_forest(X[train], y[train], ds.labels, ForestParams(n_trees=100), compute_oob=True)
gbt = fit_gbt(X[train], y[train], ds.labels, GBTParams(n_rounds=30))
print("forest OOB accuracy", forest.oob_score)
print("boosting training loss", [round(v, 3) for v in gbt.train_loss[::10]])

# only two subjects are held out, so these single-split numbers are noisy
ens = EnsembleModel([(forest, 1.0), (gbt, 1.0)])
for name, model in (("forest", forest), ("gbt", gbt), ("ensemble", ens)):
    print(f"{name:>9} held-out accuracy {np.mean(model.predict(X[test]) == y[test]):.3f}")

# models are plain JSON; loading gives back the same predictions
payload = save_model(ens)
print(len(payload), "bytes")
assert np.array_equal(load_model(payload).predict_proba(X[test]), ens.predict_proba(X[test]))
