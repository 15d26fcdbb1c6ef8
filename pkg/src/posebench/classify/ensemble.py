"""Weighted soft-voting ensembles of trained classifiers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class EnsembleModel:
    members: list  # [(model, weight)]

    def __post_init__(self):
        if not self.members:
            raise ValueError("ensemble needs at least one member")
        weights = [w for _, w in self.members]
        if any(w < 0 for w in weights) or sum(weights) <= 0:
            raise ValueError("ensemble weights must be nonnegative and not all zero")
        first = self.members[0][0]
        for model, _ in self.members[1:]:
            if list(model.labels) != list(first.labels):
                raise ValueError("ensemble members disagree on the label vocabulary")
            if model.n_features != first.n_features:
                raise ValueError("ensemble members disagree on the feature dimension")

    @property
    def labels(self) -> list[str]:
        return list(self.members[0][0].labels)

    @property
    def n_features(self) -> int:
        return self.members[0][0].n_features

    def predict_proba(self, X) -> np.ndarray:
        return ensemble_predict(self, X)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=-1)


def ensemble_predict(ensemble: EnsembleModel, X) -> np.ndarray:
    """Weighted mean of member probabilities, renormalised per row.

    Zero-weight members are skipped entirely; a single active member is
    passed through unchanged.
    """
    active = [(m, w) for m, w in ensemble.members if w > 0]
    if len(active) == 1:
        return np.asarray(active[0][0].predict_proba(X), dtype=np.float64)
    total = None
    for model, weight in active:
        part = weight * np.asarray(model.predict_proba(X), dtype=np.float64)
        total = part if total is None else total + part
    return total / total.sum(axis=-1, keepdims=True)
