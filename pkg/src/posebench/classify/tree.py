"""CART decision trees with Gini impurity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels


@dataclass
class Tree:
    """Flat-array binary tree.

    Node ``i`` is a leaf when ``feature[i] == -1``; otherwise samples with
    ``x[feature[i]] <= threshold[i]`` go to ``left[i]`` and the rest to
    ``right[i]``. ``value[i]`` holds the (weighted) class counts for
    classification trees and a single leaf output for regression trees.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_features: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[i] + 1
                depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return _kernels.apply_tree(self.feature, self.threshold, self.left, self.right, X)


@dataclass
class EncodedFeatures:
    """Integer codes per feature plus the value range each code spans.

    ``codes[f, i]`` is the code of sample ``i`` on feature ``f``. For code
    ``k`` of feature ``f`` the covered raw values lie in
    ``[lo[offsets[f] + k], hi[offsets[f] + k]]``.
    """

    codes: np.ndarray
    n_codes: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    offsets: np.ndarray

    @property
    def n_features(self) -> int:
        return self.codes.shape[0]


def encode_features(X: np.ndarray, max_bins: int | None = None) -> EncodedFeatures:
    """Dense-rank each column, or bin it into at most ``max_bins`` quantile bins."""
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    codes = np.empty((d, n), dtype=np.int32)
    n_codes = np.empty(d, dtype=np.int64)
    los, his = [], []
    for f in range(d):
        vals, inv = np.unique(X[:, f], return_inverse=True)
        if max_bins is None or len(vals) <= max_bins:
            codes[f] = inv
            los.append(vals)
            his.append(vals)
            n_codes[f] = len(vals)
            continue
        edges = np.unique(np.quantile(X[:, f], np.linspace(0, 1, max_bins + 1)[1:-1]))
        bins = np.searchsorted(edges, vals, side="left")
        used, first, dense = np.unique(bins, return_index=True, return_inverse=True)
        last = np.r_[first[1:] - 1, len(vals) - 1]
        codes[f] = dense[inv]
        los.append(vals[first])
        his.append(vals[last])
        n_codes[f] = len(used)
    offsets = np.r_[0, np.cumsum(n_codes)[:-1]].astype(np.int64)
    return EncodedFeatures(codes, n_codes, np.concatenate(los), np.concatenate(his), offsets)


def gini_impurity(counts) -> float:
    """Gini impurity ``1 - sum_j p_j**2`` of a class-count vector."""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise ValueError("Gini impurity is undefined for an empty distribution")
    p = counts / total
    return float(1.0 - np.dot(p, p))


def best_split(X, y, candidate_features=None, n_classes: int | None = None,
               sample_weight=None, min_leaf_samples: float = 1):
    """Best Gini split of one node.

    Scans every candidate feature and every midpoint between consecutive
    distinct values. Returns ``(feature_index, threshold, gain)`` where gain
    is the impurity decrease, or ``None`` when no split separates the
    samples. Ties go to the lower feature index, then the lower threshold.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.int64)
    if len(y) < 2:
        raise ValueError("best_split needs at least 2 samples")
    if candidate_features is None:
        candidate_features = range(X.shape[1])
    features = np.unique(np.asarray(list(candidate_features), dtype=np.int64))
    if len(features) == 0:
        raise ValueError("candidate_features must be nonempty")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    w = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    enc = encode_features(X)
    f, thr, gain = _kernels.node_best_split(
        enc.codes, enc.n_codes, enc.lo, enc.hi, enc.offsets, y, w, n_classes,
        np.arange(len(y), dtype=np.int64), features, float(min_leaf_samples))
    if f < 0:
        return None
    return int(f), float(thr), float(gain)


def seed_state(seed: int) -> np.ndarray:
    return np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)


def fit_tree(X, y, n_classes: int | None = None, mtry: int | None = None,
             min_leaf_samples: float = 1, max_depth: int | None = None,
             seed: int = 0, sample_weight=None, encoded: EncodedFeatures | None = None) -> Tree:
    """Grow a classification tree until leaves are pure (or a stop rule fires).

    ``mtry`` candidate features are drawn per node (default: all). Rows with
    zero ``sample_weight`` are excluded; positive weights act as repeat counts.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(y) == 0:
        raise ValueError("fit_tree needs at least one sample")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    d = X.shape[1]
    if mtry is None:
        mtry = d
    if not 1 <= mtry <= d:
        raise ValueError(f"mtry must be in [1, {d}], got {mtry}")
    w = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    if encoded is None:
        encoded = encode_features(X)
    in_bag = np.flatnonzero(w > 0).astype(np.int64)
    arrays = _kernels.build_class_tree(
        encoded.codes, encoded.n_codes, encoded.lo, encoded.hi, encoded.offsets,
        y, w, n_classes, in_bag, int(mtry), float(min_leaf_samples),
        -1 if max_depth is None else int(max_depth), seed_state(seed))
    return Tree(*arrays, n_features=d)


def tree_predict(tree: Tree, X) -> np.ndarray:
    """Class-probability rows from the leaf distributions reached by ``X``.

    Accepts one feature vector or a matrix; output shape follows the input.
    """
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    X2 = np.atleast_2d(X)
    if X2.shape[1] != tree.n_features:
        raise ValueError(f"expected {tree.n_features} features, got {X2.shape[1]}")
    counts = tree.value[tree.apply(X2)]
    proba = counts / counts.sum(axis=1, keepdims=True)
    return proba[0] if single else proba
