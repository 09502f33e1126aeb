"""Random forest: bagged CART trees with per-split random feature subsets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from tpbench.attackers.tree import TreeParams, fit_tree, predict_tree
from tpbench.seeding import derive_seed


@dataclass
class ForestParams:
    trees: list[TreeParams]
    n_classes: int


def fit_forest(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    n_trees: int = 100,
    features_per_split: int | None = None,
    seed: int = 0,
    bootstrap: bool = True,
    max_depth: int | None = None,
    min_leaf: int = 1,
) -> ForestParams:
    """Each tree gets a derived seed for its bootstrap resample and feature
    subsets, so the forest is reproducible and trees are order-independent.
    bootstrap=False is a test hook: one tree on the full sample reduces to
    plain CART."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if y.size == 0:
        raise ValueError("training set must be non-empty")
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    if features_per_split is None:
        features_per_split = int(np.ceil(np.sqrt(X.shape[1])))
    trees = []
    for t in range(n_trees):
        rng = np.random.default_rng(derive_seed(seed, "tree", t))
        if bootstrap:
            rows = rng.integers(0, y.size, size=y.size)
        else:
            rows = np.arange(y.size)
        trees.append(
            fit_tree(
                X[rows],
                y[rows],
                n_classes,
                max_depth=max_depth,
                min_leaf=min_leaf,
                rng=rng,
                features_per_split=features_per_split,
            )
        )
    return ForestParams(trees=trees, n_classes=n_classes)


def predict_forest(params: ForestParams, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    votes = np.zeros((X.shape[0], params.n_classes), dtype=np.int64)
    for tree in params.trees:
        pred = predict_tree(tree, X)
        votes[np.arange(X.shape[0]), pred] += 1
    return np.argmax(votes, axis=1)  # vote ties go to the lowest class index
