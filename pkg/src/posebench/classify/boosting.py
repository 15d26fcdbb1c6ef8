"""Multiclass gradient-boosted regression trees on the softmax log-loss."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .forest import check_training_labels
from .tree import Tree, encode_features

# floor for class priors so that absent classes keep a finite initial score
PRIOR_FLOOR = 1e-9


@dataclass
class GBTParams:
    n_rounds: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3
    min_leaf_samples: int = 1
    max_bins: int | None = None  # e.g. 256 to split on histogram bins
    seed: int = 0


@dataclass
class BoostedModel:
    init_scores: np.ndarray
    trees: list[list[Tree]]  # [round][class]
    params: GBTParams
    labels: list[str]
    n_features: int
    train_loss: list[float] = field(default_factory=list, compare=False)

    def decision_function(self, X) -> np.ndarray:
        X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=np.float64)))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        scores = np.tile(self.init_scores, (X.shape[0], 1))
        lr = self.params.learning_rate
        for round_trees in self.trees:
            for k, tree in enumerate(round_trees):
                scores[:, k] += lr * tree.value[tree.apply(X), 0]
        return scores

    def predict_proba(self, X) -> np.ndarray:
        single = np.ndim(X) == 1
        proba = softmax(self.decision_function(X))
        return proba[0] if single else proba

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=-1)


def softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def log_loss(proba: np.ndarray, y: np.ndarray) -> float:
    p = proba[np.arange(len(y)), y]
    return float(-np.mean(np.log(np.clip(p, 1e-300, None))))


def fit_gbt(X, y, labels, params: GBTParams | None = None, n_jobs: int = 1) -> BoostedModel:
    """Fit one regression tree per class per round to ``onehot - softmax``.

    Splits minimise squared error; each leaf takes a one-step Newton value
    ``(K-1)/K * sum(r) / sum(p(1-p))``. Initial scores are log class priors.
    """
    params = GBTParams() if params is None else GBTParams(**vars(params))
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    labels = list(labels)
    check_training_labels(y, labels)
    n, d = X.shape
    K = len(labels)
    prior = np.bincount(y, minlength=K) / n
    init = np.log(np.maximum(prior, PRIOR_FLOOR))
    onehot = np.zeros((n, K))
    onehot[np.arange(n), y] = 1.0
    enc = encode_features(X, params.max_bins)
    scale = (K - 1) / K
    max_depth = -1 if params.max_depth is None else int(params.max_depth)

    def grow(k: int, proba: np.ndarray) -> Tree:
        p = proba[:, k]
        target = onehot[:, k] - p
        hess = p * (1.0 - p)
        arrays = _kernels.build_regression_tree(
            enc.codes, enc.n_codes, enc.lo, enc.hi, enc.offsets,
            np.ascontiguousarray(target), np.ascontiguousarray(hess), scale,
            int(params.min_leaf_samples), max_depth)
        return Tree(*arrays, n_features=d)

    scores = np.tile(init, (n, 1))
    proba = softmax(scores)
    losses = [log_loss(proba, y)]
    trees: list[list[Tree]] = []
    pool = ThreadPoolExecutor(max_workers=n_jobs) if n_jobs > 1 else None
    try:
        for _ in range(params.n_rounds):
            if pool is None:
                round_trees = [grow(k, proba) for k in range(K)]
            else:
                round_trees = list(pool.map(lambda k: grow(k, proba), range(K)))
            for k, tree in enumerate(round_trees):
                scores[:, k] += params.learning_rate * tree.value[tree.apply(X), 0]
            trees.append(round_trees)
            proba = softmax(scores)
            losses.append(log_loss(proba, y))
    finally:
        if pool is not None:
            pool.shutdown()
    return BoostedModel(init, trees, params, labels, d, losses)
