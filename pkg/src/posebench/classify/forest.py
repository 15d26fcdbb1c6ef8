"""Bootstrap random forest of Gini CART trees."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .tree import Tree, encode_features, fit_tree


@dataclass
class ForestParams:
    n_trees: int = 500
    mtry: int | None = None  # None -> floor(sqrt(n_features)) at fit time
    min_leaf_samples: int = 1
    max_depth: int | None = None
    seed: int = 0
    bootstrap: bool = True
    voting: str = "soft"  # or "hard"


@dataclass
class ForestModel:
    trees: list[Tree]
    params: ForestParams
    labels: list[str]
    n_features: int
    oob_score: float | None = field(default=None, compare=False)

    def predict_proba(self, X) -> np.ndarray:
        return forest_predict_proba(self, X)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=-1)


def tree_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator for tree ``index`` of a forest seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def check_training_labels(y: np.ndarray, labels) -> None:
    if len(labels) < 2:
        raise ValueError("need at least 2 classes in the label vocabulary")
    if y.size and (y.min() < 0 or y.max() >= len(labels)):
        raise ValueError("label codes outside the vocabulary")
    if len(np.unique(y)) < 2:
        raise ValueError("training data contains a single class; classifier would be degenerate")


def fit_forest(X, y, labels, params: ForestParams | None = None, n_jobs: int = 1,
               compute_oob: bool = False) -> ForestModel:
    """Train ``params.n_trees`` trees, each on its own bootstrap resample.

    Tree ``i`` draws its resample and its per-node feature choices from a
    generator seeded by ``(params.seed, i)``, so the result does not depend
    on ``n_jobs``.
    """
    params = ForestParams() if params is None else ForestParams(**vars(params))
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    labels = list(labels)
    check_training_labels(y, labels)
    n, d = X.shape
    if params.mtry is None:
        params.mtry = max(1, math.isqrt(d))
    if params.voting not in ("soft", "hard"):
        raise ValueError(f"unknown voting mode {params.voting!r}")
    n_classes = len(labels)
    encoded = encode_features(X)

    def grow(i: int) -> tuple[Tree, np.ndarray]:
        rng = tree_rng(params.seed, i)
        if params.bootstrap:
            w = np.bincount(rng.integers(0, n, n), minlength=n).astype(np.float64)
        else:
            w = np.ones(n)
        tree = fit_tree(X, y, n_classes, mtry=params.mtry,
                        min_leaf_samples=params.min_leaf_samples,
                        max_depth=params.max_depth,
                        seed=int(rng.integers(0, 2**63)),
                        sample_weight=w, encoded=encoded)
        return tree, w

    if n_jobs == 1:
        grown = [grow(i) for i in range(params.n_trees)]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            grown = list(pool.map(grow, range(params.n_trees)))

    model = ForestModel([t for t, _ in grown], params, labels, d)
    if compute_oob and params.bootstrap:
        votes = np.zeros((n, n_classes))
        for tree, w in grown:
            out = w == 0
            if out.any():
                votes[out] += _tree_votes(tree, X[out], params.voting)
        seen = votes.sum(axis=1) > 0
        if seen.any():
            model.oob_score = float(np.mean(np.argmax(votes[seen], axis=1) == y[seen]))
    return model


def _tree_votes(tree: Tree, X: np.ndarray, voting: str) -> np.ndarray:
    counts = tree.value[tree.apply(X)]
    proba = counts / counts.sum(axis=1, keepdims=True)
    if voting == "soft":
        return proba
    hard = np.zeros_like(proba)
    hard[np.arange(len(proba)), np.argmax(proba, axis=1)] = 1.0
    return hard


def forest_predict_proba(model: ForestModel, X) -> np.ndarray:
    """Mean of per-tree class-probability vectors (or one-hot votes in hard mode)."""
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    X2 = np.ascontiguousarray(np.atleast_2d(X))
    if X2.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {X2.shape[1]}")
    total = np.zeros((X2.shape[0], len(model.labels)))
    for tree in model.trees:
        total += _tree_votes(tree, X2, model.params.voting)
    proba = total / len(model.trees)
    return proba[0] if single else proba
