"""Versioned JSON model files.

Top-level document::

    {"format_version": "1", "model_kind": "forest" | "gbt" | "ensemble",
     "params": {...}, "labels": [...], "n_features": 71, "trees": [...]}

A tree is ``{"feature", "threshold", "left", "right", "value"}`` with one
entry per node; ``value`` is ``null`` for internal nodes, the class-count
list for forest leaves and a single float for boosting leaves. Boosted
models store ``trees`` as ``[round][class]`` and add ``init_scores``.
Ensembles store ``members: [{"weight": w, "model": <document>}]`` and an
empty ``trees`` list.
"""

from __future__ import annotations

import json

import numpy as np

from ..errors import ModelFormatError
from .boosting import BoostedModel, GBTParams
from .ensemble import EnsembleModel
from .forest import ForestModel, ForestParams
from .tree import Tree

FORMAT_VERSION = "1"


def _tree_to_dict(tree: Tree, regression: bool) -> dict:
    values = []
    for i in range(tree.n_nodes):
        if tree.feature[i] >= 0:
            values.append(None)
        elif regression:
            values.append(float(tree.value[i, 0]))
        else:
            values.append([float(v) for v in tree.value[i]])
    return {
        "feature": tree.feature.tolist(),
        "threshold": [float(t) for t in tree.threshold],
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
        "value": values,
    }


def _tree_from_dict(doc: dict, n_out: int, n_features: int) -> Tree:
    feature = np.asarray(doc["feature"], dtype=np.int32)
    n = len(feature)
    value = np.zeros((n, n_out))
    for i, v in enumerate(doc["value"]):
        if v is None:
            continue
        value[i] = v
    arrays = (
        feature,
        np.asarray(doc["threshold"], dtype=np.float64),
        np.asarray(doc["left"], dtype=np.int32),
        np.asarray(doc["right"], dtype=np.int32),
    )
    if any(len(a) != n for a in arrays[1:]) or len(doc["value"]) != n:
        raise ModelFormatError("tree arrays have inconsistent lengths")
    return Tree(*arrays, value, n_features=n_features)


def model_to_dict(model) -> dict:
    if isinstance(model, ForestModel):
        return {
            "format_version": FORMAT_VERSION,
            "model_kind": "forest",
            "params": dict(vars(model.params)),
            "labels": list(model.labels),
            "n_features": model.n_features,
            "trees": [_tree_to_dict(t, regression=False) for t in model.trees],
        }
    if isinstance(model, BoostedModel):
        return {
            "format_version": FORMAT_VERSION,
            "model_kind": "gbt",
            "params": dict(vars(model.params)),
            "labels": list(model.labels),
            "n_features": model.n_features,
            "init_scores": [float(s) for s in model.init_scores],
            "trees": [[_tree_to_dict(t, regression=True) for t in rnd] for rnd in model.trees],
        }
    if isinstance(model, EnsembleModel):
        return {
            "format_version": FORMAT_VERSION,
            "model_kind": "ensemble",
            "params": {"weights": [w for _, w in model.members]},
            "labels": model.labels,
            "n_features": model.n_features,
            "members": [{"weight": w, "model": model_to_dict(m)} for m, w in model.members],
            "trees": [],
        }
    raise TypeError(f"cannot serialize {type(model).__name__}")


def model_from_dict(doc: dict):
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format_version {version!r} (expected {FORMAT_VERSION!r})")
    try:
        kind = doc["model_kind"]
        labels = list(doc["labels"])
        d = int(doc["n_features"])
        if kind == "forest":
            trees = [_tree_from_dict(t, len(labels), d) for t in doc["trees"]]
            return ForestModel(trees, ForestParams(**doc["params"]), labels, d)
        if kind == "gbt":
            trees = [[_tree_from_dict(t, 1, d) for t in rnd] for rnd in doc["trees"]]
            return BoostedModel(np.asarray(doc["init_scores"], dtype=np.float64), trees,
                                GBTParams(**doc["params"]), labels, d)
        if kind == "ensemble":
            members = [(model_from_dict(m["model"]), m["weight"]) for m in doc["members"]]
            return EnsembleModel(members)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed model document: {exc}") from exc
    raise ModelFormatError(f"unknown model_kind {kind!r}")


def save_model(model) -> bytes:
    return json.dumps(model_to_dict(model), separators=(",", ":")).encode("utf-8")


def load_model(payload: bytes):
    try:
        doc = json.loads(payload)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"model payload is not valid JSON (truncated?): {exc}") from exc
    return model_from_dict(doc)
