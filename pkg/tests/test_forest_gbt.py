import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from posebench.classify import (EnsembleModel, ForestParams, GBTParams, fit_forest, fit_gbt,
                                fit_tree, load_model, save_model, tree_predict)
from posebench.classify.boosting import log_loss
from posebench.errors import ModelFormatError


def blobs(n_classes=4, per_class=30, d=6, spread=0.3, seed=0):
    rng = np.random.default_rng(seed)
    centers = rng.normal(0, 3, (n_classes, d))
    X = np.concatenate([c + spread * rng.normal(size=(per_class, d)) for c in centers])
    y = np.repeat(np.arange(n_classes), per_class)
    return X, y, [f"c{i}" for i in range(n_classes)]


def same_trees(a, b):
    return all(np.array_equal(getattr(s, k), getattr(t, k))
               for s, t in zip(a, b) for k in ("feature", "threshold", "left", "right", "value"))


class TestForest:
    def test_single_tree_without_bootstrap_is_a_tree(self):
        X, y, labels = blobs()
        params = ForestParams(n_trees=1, bootstrap=False, mtry=X.shape[1])
        model = fit_forest(X, y, labels, params)
        tree = fit_tree(X, y, len(labels), mtry=X.shape[1])
        Xt = np.random.default_rng(5).normal(0, 3, (50, X.shape[1]))
        assert np.array_equal(model.predict_proba(Xt), tree_predict(tree, Xt))

    def test_default_mtry_is_floor_sqrt(self):
        X, y, labels = blobs(d=71, per_class=5)
        assert fit_forest(X, y, labels, ForestParams(n_trees=2)).params.mtry == 8

    def test_deterministic_given_seed(self):
        X, y, labels = blobs()
        a = fit_forest(X, y, labels, ForestParams(n_trees=5, seed=3))
        b = fit_forest(X, y, labels, ForestParams(n_trees=5, seed=3))
        c = fit_forest(X, y, labels, ForestParams(n_trees=5, seed=4))
        assert same_trees(a.trees, b.trees)
        assert not same_trees(c.trees, a.trees)

    def test_thread_count_does_not_change_model(self):
        X, y, labels = blobs()
        a = fit_forest(X, y, labels, ForestParams(n_trees=6, seed=1), n_jobs=1)
        b = fit_forest(X, y, labels, ForestParams(n_trees=6, seed=1), n_jobs=3)
        assert same_trees(a.trees, b.trees)

    def test_oob_on_separable_twelve_classes(self):
        X, y, labels = blobs(n_classes=12, per_class=25, d=10, spread=0.2, seed=2)
        model = fit_forest(X, y, labels, ForestParams(n_trees=40), compute_oob=True)
        assert model.oob_score >= 0.95

    def test_probabilities_sum_to_one(self):
        X, y, labels = blobs(seed=9)
        model = fit_forest(X, y, labels, ForestParams(n_trees=7))
        proba = model.predict_proba(np.random.default_rng(0).normal(0, 3, (100, X.shape[1])))
        assert np.allclose(proba.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(proba >= 0)

    def test_soft_vote_tie_goes_to_first_class(self):
        X = np.array([[0.0], [1.0]])
        y = np.array([0, 1])
        model = fit_forest(X, y, ["a", "b"], ForestParams(n_trees=2, bootstrap=False, mtry=1))
        # swap the second tree's leaves so the two trees disagree everywhere
        t = model.trees[1]
        t.value[[1, 2]] = t.value[[2, 1]]
        assert model.predict_proba(np.array([0.0])).tolist() == [0.5, 0.5]
        assert model.predict(np.array([0.0])) == 0

    def test_hard_voting_counts_trees(self):
        X, y, labels = blobs()
        model = fit_forest(X, y, labels, ForestParams(n_trees=9, voting="hard"))
        proba = model.predict_proba(X[:20])
        assert np.allclose(proba * 9, np.round(proba * 9))

    def test_row_permutation_only_permutes_predictions(self):
        X, y, labels = blobs()
        model = fit_forest(X, y, labels, ForestParams(n_trees=5))
        perm = np.random.default_rng(0).permutation(len(X))
        assert np.array_equal(model.predict(X)[perm], model.predict(X[perm]))

    def test_single_class_rejected(self):
        with pytest.raises(ValueError, match="single class"):
            fit_forest(np.zeros((4, 2)), np.zeros(4, dtype=int), ["a", "b"])

    def test_dimension_mismatch(self):
        X, y, labels = blobs()
        model = fit_forest(X, y, labels, ForestParams(n_trees=2))
        with pytest.raises(ValueError):
            model.predict(np.zeros((3, X.shape[1] + 1)))


class TestBoosting:
    def test_zero_rounds_predicts_priors(self):
        X, y, labels = blobs(n_classes=3)
        y = y.copy()
        y[:10] = 1  # 20/40/30 priors
        model = fit_gbt(X, y, labels, GBTParams(n_rounds=0))
        prior = np.bincount(y, minlength=3) / len(y)
        assert np.allclose(model.predict_proba(X[:5]), prior, atol=1e-12)

    def test_threshold_data_is_learned(self):
        rng = np.random.default_rng(0)
        X = rng.uniform(-1, 1, (200, 3))
        y = (X[:, 1] > 0.2).astype(int)
        model = fit_gbt(X, y, ["lo", "hi"], GBTParams(n_rounds=10, learning_rate=0.3, max_depth=2))
        assert np.mean(model.predict(X) == y) == 1.0

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_training_loss_never_increases(self, seed):
        X, y, labels = blobs(n_classes=3, per_class=20, spread=1.5, seed=seed)
        model = fit_gbt(X, y, labels, GBTParams(n_rounds=15, learning_rate=0.1, max_depth=2))
        assert np.all(np.diff(model.train_loss) <= 1e-12)
        assert model.train_loss[-1] == pytest.approx(log_loss(model.predict_proba(X), y), abs=1e-12)

    def test_absent_class_keeps_finite_scores(self):
        X, y, _ = blobs(n_classes=2)
        model = fit_gbt(X, y, ["a", "b", "never"], GBTParams(n_rounds=3))
        scores = model.decision_function(X)
        assert np.all(np.isfinite(scores))
        assert np.all(model.predict(X) != 2)

    def test_binned_matches_exact_when_bins_exceed_values(self):
        X, y, labels = blobs(per_class=10)
        a = fit_gbt(X, y, labels, GBTParams(n_rounds=4))
        b = fit_gbt(X, y, labels, GBTParams(n_rounds=4, max_bins=1000))
        assert np.array_equal(a.predict_proba(X), b.predict_proba(X))

    def test_thread_count_does_not_change_model(self):
        X, y, labels = blobs()
        a = fit_gbt(X, y, labels, GBTParams(n_rounds=4), n_jobs=1)
        b = fit_gbt(X, y, labels, GBTParams(n_rounds=4), n_jobs=2)
        assert np.array_equal(a.decision_function(X), b.decision_function(X))


@pytest.fixture(scope="module")
def fitted():
    X, y, labels = blobs(n_classes=3, spread=1.0)
    return X, fit_forest(X, y, labels, ForestParams(n_trees=5)), fit_gbt(X, y, labels, GBTParams(n_rounds=5))


class TestEnsemble:
    def test_zero_weight_member_is_ignored(self, fitted):
        X, forest, gbt = fitted
        ens = EnsembleModel([(forest, 1.0), (gbt, 0.0)])
        assert np.array_equal(ens.predict_proba(X), forest.predict_proba(X))

    def test_weighted_mean(self, fitted):
        X, forest, gbt = fitted
        ens = EnsembleModel([(forest, 3.0), (gbt, 1.0)])
        want = 0.75 * forest.predict_proba(X) + 0.25 * gbt.predict_proba(X)
        assert np.allclose(ens.predict_proba(X), want, atol=1e-12)

    def test_scaling_weights_is_harmless(self, fitted):
        X, forest, gbt = fitted
        a = EnsembleModel([(forest, 1.0), (gbt, 2.0)]).predict_proba(X)
        b = EnsembleModel([(forest, 10.0), (gbt, 20.0)]).predict_proba(X)
        assert np.allclose(a, b, atol=1e-12)

    @pytest.mark.parametrize("weights", [(0.0, 0.0), (-1.0, 2.0)])
    def test_bad_weights(self, fitted, weights):
        _, forest, gbt = fitted
        with pytest.raises(ValueError):
            EnsembleModel([(forest, weights[0]), (gbt, weights[1])])

    def test_vocabulary_mismatch(self, fitted):
        X, forest, _ = fitted
        other = fit_forest(X, np.arange(len(X)) % 2, ["p", "q"], ForestParams(n_trees=1))
        with pytest.raises(ValueError, match="vocabulary"):
            EnsembleModel([(forest, 1.0), (other, 1.0)])


class TestSerialization:
    @pytest.mark.parametrize("kind", ["forest", "gbt", "ensemble"])
    def test_round_trip_is_exact(self, fitted, kind):
        X, forest, gbt = fitted
        model = {"forest": forest, "gbt": gbt,
                 "ensemble": EnsembleModel([(forest, 0.4), (gbt, 0.6)])}[kind]
        loaded = load_model(save_model(model))
        assert type(loaded) is type(model)
        assert np.array_equal(loaded.predict_proba(X), model.predict_proba(X))
        assert save_model(loaded) == save_model(model)

    def test_unknown_version(self, fitted):
        doc = json.loads(save_model(fitted[1]))
        doc["format_version"] = "99"
        with pytest.raises(ModelFormatError, match="99"):
            load_model(json.dumps(doc).encode())

    def test_truncated_payload(self, fitted):
        payload = save_model(fitted[1])
        with pytest.raises(ModelFormatError):
            load_model(payload[: len(payload) // 2])

    def test_inconsistent_tree_arrays(self, fitted):
        doc = json.loads(save_model(fitted[1]))
        doc["trees"][0]["left"].pop()
        with pytest.raises(ModelFormatError):
            load_model(json.dumps(doc).encode())

    def test_missing_key(self, fitted):
        doc = json.loads(save_model(fitted[2]))
        del doc["init_scores"]
        with pytest.raises(ModelFormatError):
            load_model(json.dumps(doc).encode())
