"""Decision-tree ensembles: CART, random forest, gradient boosting, soft voting."""

from .boosting import BoostedModel, GBTParams, fit_gbt
from .ensemble import EnsembleModel, ensemble_predict
from .forest import ForestModel, ForestParams, fit_forest, forest_predict_proba
from .serialize import load_model, save_model
from .tree import Tree, best_split, encode_features, fit_tree, gini_impurity, tree_predict

__all__ = [
    "BoostedModel",
    "EnsembleModel",
    "ForestModel",
    "ForestParams",
    "GBTParams",
    "Tree",
    "best_split",
    "encode_features",
    "ensemble_predict",
    "fit_forest",
    "fit_gbt",
    "fit_tree",
    "forest_predict_proba",
    "gini_impurity",
    "load_model",
    "save_model",
    "tree_predict",
]
