"""Named training recipes used by cross-validation and the CLI."""

from __future__ import annotations

from dataclasses import replace

from .classify import EnsembleModel, ForestParams, GBTParams, fit_forest, fit_gbt

MODEL_KINDS = ("forest", "gbt", "ensemble")


def fit_model(kind: str, X, y, labels, seed: int, forest: ForestParams | None = None,
              gbt: GBTParams | None = None, members=("forest", "gbt"), weights=None,
              n_jobs: int = 1):
    """Fit one model of ``kind``; ``seed`` overrides the seed in the params."""
    forest = replace(forest or ForestParams(), seed=seed)
    gbt = replace(gbt or GBTParams(), seed=seed)
    if kind == "forest":
        return fit_forest(X, y, labels, forest, n_jobs=n_jobs)
    if kind == "gbt":
        return fit_gbt(X, y, labels, gbt, n_jobs=n_jobs)
    if kind == "ensemble":
        members = list(members)
        weights = [1.0] * len(members) if weights is None else list(weights)
        if len(weights) != len(members):
            raise ValueError("one weight per ensemble member required")
        fitted = []
        for name, w in zip(members, weights):
            if name not in ("forest", "gbt"):
                raise ValueError(f"unknown ensemble member {name!r}")
            fitted.append((fit_model(name, X, y, labels, seed, forest, gbt, n_jobs=n_jobs), float(w)))
        return EnsembleModel(fitted)
    raise ValueError(f"unknown model kind {kind!r}; choose from {MODEL_KINDS}")


def make_trainer(kind: str = "forest", **kwargs):
    """Trainer callable ``(X, y, labels, seed) -> model`` for :func:`run_cv`."""
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}; choose from {MODEL_KINDS}")

    def train(X, y, labels, seed):
        return fit_model(kind, X, y, labels, seed, **kwargs)

    return train
