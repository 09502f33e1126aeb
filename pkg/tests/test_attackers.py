import math
import warnings

import numpy as np
import pytest

from helpers import knn_oracle
from tpbench import attackers
from tpbench.attackers import SplitSpec, split
from tpbench.attackers.adaboost import fit_adaboost
from tpbench.attackers.mlp import TrainingDivergedError, _init_params, loss_and_gradients


def blobs(rng, n_per_class, centers, spread=1.0, dims=12):
    X, y = [], []
    for label, center in centers:
        X.append(rng.normal(center, spread, size=(n_per_class, dims)))
        y += [label] * n_per_class
    return np.vstack(X), np.array(y, dtype=object)


# --- split --------------------------------------------------------------------

def test_split_balanced_two_class():
    y = ["a"] * 50 + ["b"] * 50
    train_idx, test_idx = split(y, SplitSpec(0.7, seed=1))
    labels = np.array(y, dtype=object)
    assert sorted(np.concatenate([train_idx, test_idx])) == list(range(100))
    assert (labels[train_idx] == "a").sum() == 35
    assert (labels[train_idx] == "b").sum() == 35
    assert test_idx.size == 30


def test_split_three_class_arithmetic():
    y = ["a"] * 30 + ["b"] * 30 + ["c"] * 30
    train_idx, _ = split(y, SplitSpec(0.7, seed=5))
    labels = np.array(y, dtype=object)
    for cls in "abc":
        assert (labels[train_idx] == cls).sum() == 21


def test_split_deterministic():
    y = ["a"] * 20 + ["b"] * 20
    first = split(y, SplitSpec(0.7, seed=9))
    second = split(y, SplitSpec(0.7, seed=9))
    assert np.array_equal(first[0], second[0])
    assert np.array_equal(first[1], second[1])


def test_split_small_class_named_in_error():
    with pytest.raises(ValueError, match="'tiny'"):
        split(["big"] * 10 + ["tiny"], SplitSpec(0.7, seed=0))


def test_split_keeps_every_class_in_both_sides():
    y = ["a"] * 3 + ["b"] * 97
    train_idx, test_idx = split(y, SplitSpec(0.9, seed=2))
    labels = np.array(y, dtype=object)
    for side in (train_idx, test_idx):
        assert {"a", "b"} <= set(labels[side])


# --- kNN ----------------------------------------------------------------------

def test_knn_training_row_is_its_own_neighbor():
    rng = np.random.default_rng(1)
    X, y = blobs(rng, 10, [("a", 0.0), ("b", 5.0)])
    model = attackers.train_knn(X, y, k=1)
    assert attackers.predict(model, X[3]) == y[3]


def test_knn_two_clusters():
    rng = np.random.default_rng(2)
    X, y = blobs(rng, 20, [("origin", 0.0), ("far", 10.0)], spread=0.5)
    model = attackers.train_knn(X, y, k=5)
    assert attackers.predict(model, np.full(12, 0.2)) == "origin"


def test_knn_matches_exhaustive_oracle():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(30, 6))
    y = np.array(list("abc"), dtype=object)[rng.integers(0, 3, size=30)]
    model = attackers.train_knn(np.hstack([X, np.zeros((30, 6))]), y, k=5)
    queries = rng.normal(size=(25, 6))
    queries_full = np.hstack([queries, np.zeros((25, 6))])
    got = attackers.predict(model, queries_full)
    Xs = model.standardizer.transform(np.hstack([X, np.zeros((30, 6))]))
    Qs = model.standardizer.transform(queries_full)
    for q, predicted in zip(Qs, got):
        assert predicted == knn_oracle(Xs, y, model.classes, 5, q)


def test_knn_rejects_bad_k():
    rng = np.random.default_rng(4)
    X, y = blobs(rng, 5, [("a", 0.0), ("b", 3.0)])
    with pytest.raises(ValueError):
        attackers.train_knn(X, y, k=0)
    with pytest.raises(ValueError):
        attackers.train_knn(X, y, k=11)


# --- decision tree ---------------------------------------------------------------

def test_tree_pure_class_single_leaf():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(12, 12))
    model = attackers.train_tree(X, ["only"] * 12)
    assert model.params.root.is_leaf
    assert all(attackers.predict(model, rng.normal(size=(5, 12))) == "only")


def test_tree_separable_1d_threshold():
    X = np.zeros((4, 12))
    X[:, 0] = [0.0, 1.0, 10.0, 11.0]
    y = ["a", "a", "b", "b"]
    model = attackers.train_tree(X, y)
    root = model.params.root
    assert root.feature == 0
    # threshold lives strictly between the clusters (standardized space)
    standardized = model.standardizer.transform(X)[:, 0]
    assert standardized[1] <= root.threshold < standardized[2]
    assert attackers.evaluate(model, X, y) == 1.0


def test_tree_unlimited_depth_memorizes_consistent_data():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(20, 4))
    y = np.array(list("ab"), dtype=object)[rng.integers(0, 2, size=20)]
    assert len(np.unique(X, axis=0)) == 20  # check label consistency first
    model = attackers.train_tree(np.hstack([X, np.zeros((20, 8))]), y)
    assert attackers.evaluate(model, np.hstack([X, np.zeros((20, 8))]), y) == 1.0


def test_tree_max_depth_and_min_leaf_limit_growth():
    rng = np.random.default_rng(7)
    X, y = blobs(rng, 30, [("a", 0.0), ("b", 1.0)], spread=2.0)
    stump = attackers.train_tree(X, y, max_depth=1)
    root = stump.params.root
    assert root.left.is_leaf and root.right.is_leaf
    chunky = attackers.train_tree(X, y, min_leaf=25)
    # no split may produce a child smaller than min_leaf = 25 of the 60 rows
    def leaf_sizes(node, idx, X):
        if node.is_leaf:
            return [idx.size]
        mask = X[idx, node.feature] <= node.threshold
        return leaf_sizes(node.left, idx[mask], X) + leaf_sizes(
            node.right, idx[~mask], X
        )
    sizes = leaf_sizes(
        chunky.params.root, np.arange(60), chunky.standardizer.transform(X)
    )
    assert min(sizes) >= 25


# --- random forest ----------------------------------------------------------------

def test_forest_single_tree_no_bootstrap_reduces_to_cart():
    rng = np.random.default_rng(8)
    X, y = blobs(rng, 25, [("a", 0.0), ("b", 2.0)], spread=1.5)
    queries = rng.normal(1.0, 1.5, size=(40, 12))
    forest = attackers.train_forest(
        X, y, n_trees=1, bootstrap=False, features_per_split=12, seed=3
    )
    tree = attackers.train_tree(X, y)
    assert np.array_equal(attackers.predict(forest, queries), attackers.predict(tree, queries))


def test_forest_deterministic_per_seed():
    rng = np.random.default_rng(9)
    X, y = blobs(rng, 30, [("a", 0.0), ("b", 1.5)], spread=1.2)
    queries = rng.normal(0.7, 1.0, size=(50, 12))
    a = attackers.train_forest(X, y, n_trees=15, seed=21)
    b = attackers.train_forest(X, y, n_trees=15, seed=21)
    c = attackers.train_forest(X, y, n_trees=15, seed=22)
    assert np.array_equal(attackers.predict(a, queries), attackers.predict(b, queries))
    assert not np.array_equal(
        attackers.predict(a, queries), attackers.predict(c, queries)
    ) or True  # different seed may coincide; only the equality above is required


def test_forest_separable_accuracy():
    rng = np.random.default_rng(10)
    X, y = blobs(rng, 40, [("a", 0.0), ("b", 8.0)], spread=0.8)
    Xt, yt = blobs(np.random.default_rng(11), 20, [("a", 0.0), ("b", 8.0)], spread=0.8)
    model = attackers.train_forest(X, y, n_trees=30, seed=1)
    assert attackers.evaluate(model, Xt, yt) == 1.0


# --- AdaBoost ----------------------------------------------------------------------

def test_adaboost_perfect_stump_halts_after_one_round():
    X = np.zeros((4, 12))
    X[:, 2] = [0.0, 1.0, 10.0, 11.0]
    y = ["a", "a", "b", "b"]
    model = attackers.train_adaboost(X, y, rounds=50)
    assert len(model.params.stumps) == 1
    assert attackers.evaluate(model, X, y) == 1.0


def test_adaboost_two_class_alpha_reduces_to_classic():
    # best stump errs on exactly one of four uniformly weighted rows:
    # eps = 1/4, so alpha = ln((1-eps)/eps) + ln(K-1) = ln 3 for K=2
    X = np.zeros((4, 12))
    X[:, 0] = [0.0, 1.0, 2.0, 3.0]
    y = ["a", "b", "a", "a"]
    model = attackers.train_adaboost(X, y, rounds=1)
    assert model.params.alphas[0] == pytest.approx(math.log(3.0), rel=1e-12)


def test_adaboost_xor_like_needs_multiple_rounds():
    X = np.zeros((4, 12))
    X[:, 0] = [0.0, 1.0, 2.0, 3.0]
    y = ["a", "b", "b", "a"]  # no single threshold separates this
    model = attackers.train_adaboost(X, y, rounds=30)
    assert len(model.params.stumps) >= 2
    single = model.params.train_errors[0]
    assert single >= 0.25  # one stump must err somewhere
    assert model.params.train_errors[-1] < single


def test_adaboost_training_error_non_increasing_on_fixed_data():
    X = np.zeros((4, 12))
    X[:, 0] = [0.0, 1.0, 2.0, 3.0]
    y = ["a", "b", "b", "a"]
    model = attackers.train_adaboost(X, y, rounds=30)
    errors = model.params.train_errors
    assert all(b <= a + 1e-12 for a, b in zip(errors, errors[1:]))


def test_adaboost_three_class_runs():
    rng = np.random.default_rng(13)
    X, y = blobs(rng, 30, [("a", 0.0), ("b", 4.0), ("c", 8.0)], spread=0.8)
    model = attackers.train_adaboost(X, y, rounds=30)
    assert attackers.evaluate(model, X, y) >= 0.95


def test_adaboost_requires_two_classes():
    with pytest.raises(ValueError):
        fit_adaboost(np.zeros((3, 2)), np.zeros(3, dtype=int), n_classes=1)


# --- MLP -----------------------------------------------------------------------------

def test_mlp_separable_blobs_high_train_accuracy():
    rng = np.random.default_rng(14)
    X, y = blobs(rng, 100, [("a", 0.0), ("b", 3.0)], spread=1.0)
    model = attackers.train_mlp(X, y, epochs=200, seed=0)
    assert attackers.evaluate(model, X, y) >= 0.98
    assert len(model.params.loss_curve) == 200


def test_mlp_gradients_match_finite_differences():
    rng = np.random.default_rng(3)
    weights, biases = _init_params(rng, [12, 8, 8, 3])
    X = rng.normal(size=(3, 12))
    targets = np.zeros((3, 3))
    targets[np.arange(3), [0, 1, 2]] = 1.0
    _, grad_w, grad_b = loss_and_gradients(weights, biases, X, targets)
    h = 1e-5
    worst = 0.0
    for arrays, grads in ((weights, grad_w), (biases, grad_b)):
        for array, grad in zip(arrays, grads):
            it = np.nditer(array, flags=["multi_index"])
            for _ in it:
                index = it.multi_index
                saved = array[index]
                array[index] = saved + h
                up, _, _ = loss_and_gradients(weights, biases, X, targets)
                array[index] = saved - h
                down, _, _ = loss_and_gradients(weights, biases, X, targets)
                array[index] = saved
                numeric = (up - down) / (2 * h)
                analytic = grad[index]
                if max(abs(numeric), abs(analytic)) >= 1e-7:
                    worst = max(
                        worst,
                        abs(numeric - analytic) / max(abs(numeric), abs(analytic)),
                    )
    assert worst < 1e-4


def test_mlp_loss_curve_deterministic():
    rng = np.random.default_rng(15)
    X, y = blobs(rng, 40, [("a", 0.0), ("b", 2.0)])
    a = attackers.train_mlp(X, y, epochs=20, seed=7)
    b = attackers.train_mlp(X, y, epochs=20, seed=7)
    assert a.params.loss_curve == b.params.loss_curve


def test_mlp_divergence_names_epoch():
    rng = np.random.default_rng(16)
    X, y = blobs(rng, 10, [("a", 0.0), ("b", 1.0)])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(TrainingDivergedError, match="epoch"):
            attackers.train_mlp(X, y, epochs=5, learning_rate=1e200, seed=1)


# --- evaluation and shared contract -------------------------------------------------

def test_evaluate_constant_model_hits_coin_toss_baselines():
    rng = np.random.default_rng(17)
    single = attackers.train_tree(rng.normal(size=(10, 12)), ["only"] * 10)
    test2 = rng.normal(size=(40, 12))
    labels2 = np.array(["only"] * 20 + ["other"] * 20, dtype=object)
    assert attackers.evaluate(single, test2, labels2) == 0.5
    test3 = rng.normal(size=(30, 12))
    labels3 = np.array(["only"] * 10 + ["b"] * 10 + ["c"] * 10, dtype=object)
    assert attackers.evaluate(single, test3, labels3) == pytest.approx(1.0 / 3.0)


def test_evaluate_perfect_model():
    rng = np.random.default_rng(18)
    X, y = blobs(rng, 20, [("a", 0.0), ("b", 6.0)], spread=0.5)
    model = attackers.train_knn(X, y, k=1)
    assert attackers.evaluate(model, X, y) == 1.0


def test_standardization_absorbs_affine_rescaling():
    rng = np.random.default_rng(12)
    X = rng.normal(size=(80, 12))
    y = np.where(X[:, 0] + 0.3 * rng.normal(size=80) > 0, "p", "q")
    queries = rng.normal(size=(30, 12))
    scaled_X, scaled_queries = X.copy(), queries.copy()
    scaled_X[:, 4] = 1000.0 * scaled_X[:, 4] - 7.0
    scaled_queries[:, 4] = 1000.0 * scaled_queries[:, 4] - 7.0
    for trainer in (
        lambda X_, y_: attackers.train_knn(X_, y_, k=5),
        lambda X_, y_: attackers.train_mlp(X_, y_, epochs=30, seed=5),
    ):
        plain = attackers.predict(trainer(X, y), queries)
        rescaled = attackers.predict(trainer(scaled_X, y), scaled_queries)
        assert np.array_equal(plain, rescaled)


def test_all_classifiers_deterministic():
    rng = np.random.default_rng(19)
    X, y = blobs(rng, 30, [("a", 0.0), ("b", 1.2)], spread=1.5)
    queries = rng.normal(0.6, 1.0, size=(40, 12))
    trainers = {
        "knn": lambda: attackers.train_knn(X, y),
        "tree": lambda: attackers.train_tree(X, y),
        "forest": lambda: attackers.train_forest(X, y, n_trees=10, seed=4),
        "adaboost": lambda: attackers.train_adaboost(X, y, rounds=10),
        "mlp": lambda: attackers.train_mlp(X, y, epochs=15, seed=4),
    }
    for kind, make in trainers.items():
        first = attackers.predict(make(), queries)
        second = attackers.predict(make(), queries)
        assert np.array_equal(first, second), kind


def test_model_json_round_trip_all_kinds(tmp_path):
    rng = np.random.default_rng(20)
    X, y = blobs(rng, 25, [("a", 0.0), ("b", 2.0), ("c", 4.0)], spread=1.0)
    queries = rng.normal(2.0, 1.5, size=(30, 12))
    models = [
        attackers.train_knn(X, y, k=3),
        attackers.train_tree(X, y, max_depth=4),
        attackers.train_forest(X, y, n_trees=8, seed=2),
        attackers.train_adaboost(X, y, rounds=8),
        attackers.train_mlp(X, y, epochs=10, seed=2),
    ]
    for model in models:
        path = tmp_path / f"{model.kind}.json"
        attackers.save_model(model, path)
        back = attackers.load_model(path)
        assert back.kind == model.kind
        assert back.classes == model.classes
        assert np.array_equal(
            attackers.predict(back, queries), attackers.predict(model, queries)
        )


def test_model_json_rejects_unknown_version():
    with pytest.raises(ValueError, match="version"):
        attackers.model_from_json('{"format_version": 99}')


def test_train_dispatch_rejects_unknown_kind():
    with pytest.raises(ValueError, match="unknown classifier kind"):
        attackers.train("svm", np.zeros((4, 12)), ["a", "a", "b", "b"])


def test_per_kind_predictors_check_model_kind():
    rng = np.random.default_rng(21)
    X, y = blobs(rng, 10, [("a", 0.0), ("b", 4.0)], spread=0.5)
    knn = attackers.train_knn(X, y, k=1)
    assert attackers.predict_knn(knn, X[0]) == y[0]
    with pytest.raises(ValueError, match="expected a tree model"):
        attackers.predict_tree(knn, X[0])
