"""CART decision tree: binary axis-aligned splits maximizing Gini decrease.

Candidate thresholds are midpoints of sorted distinct feature values. All
ties break deterministically: lowest feature index, then lowest threshold,
and leaf majorities fall back to the lowest class index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MIN_GAIN = 1e-12  # guards against float-noise splits


@dataclass
class TreeNode:
    feature: int = -1  # -1 marks a leaf
    threshold: float = 0.0
    klass: int = -1
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


@dataclass
class TreeParams:
    root: TreeNode
    n_classes: int


def _best_split(X, y, parent_counts, feature_ids, min_leaf):
    """Best (gain, feature, threshold) over the candidate features, or None."""
    n = y.size
    n_classes = parent_counts.size
    parent_gini = 1.0 - float(np.sum((parent_counts / n) ** 2))
    best_gain = _MIN_GAIN
    best = None
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0
    for f in feature_ids:
        x = X[:, f]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        positions = np.nonzero(xs[1:] > xs[:-1])[0] + 1
        positions = positions[(positions >= min_leaf) & (n - positions >= min_leaf)]
        if positions.size == 0:
            continue
        cum = np.cumsum(onehot[order], axis=0)
        left_counts = cum[positions - 1]
        n_left = positions.astype(np.float64)
        n_right = n - n_left
        gini_left = 1.0 - np.sum((left_counts / n_left[:, None]) ** 2, axis=1)
        gini_right = 1.0 - np.sum(
            ((parent_counts - left_counts) / n_right[:, None]) ** 2, axis=1
        )
        gains = parent_gini - (n_left * gini_left + n_right * gini_right) / n
        j = int(np.argmax(gains))  # first max = lowest threshold
        if gains[j] > best_gain:
            low = xs[positions[j] - 1]
            high = xs[positions[j]]
            threshold = (low + high) / 2.0
            if threshold >= high:  # float midpoint collapsed onto the upper value
                threshold = low
            best_gain = float(gains[j])
            best = (best_gain, int(f), float(threshold))
    return best


def fit_tree(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    max_depth: int | None = None,
    min_leaf: int = 1,
    rng: np.random.Generator | None = None,
    features_per_split: int | None = None,
) -> TreeParams:
    """Grow a tree on encoded labels. rng/features_per_split enable the
    per-split random feature subsets used by the forest."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if y.size == 0:
        raise ValueError("training set must be non-empty")
    n_features = X.shape[1]
    root = TreeNode()
    stack = [(root, np.arange(y.size), 0)]
    while stack:
        node, idx, depth = stack.pop()
        counts = np.bincount(y[idx], minlength=n_classes)
        majority = int(np.argmax(counts))
        if (
            counts[majority] == idx.size  # pure
            or (max_depth is not None and depth >= max_depth)
            or idx.size < 2 * min_leaf
        ):
            node.klass = majority
            continue
        if rng is not None and features_per_split and features_per_split < n_features:
            feature_ids = np.sort(rng.choice(n_features, size=features_per_split, replace=False))
        else:
            feature_ids = np.arange(n_features)
        found = _best_split(X[idx], y[idx], counts.astype(np.float64), feature_ids, min_leaf)
        if found is None:
            node.klass = majority
            continue
        _, node.feature, node.threshold = found
        goes_left = X[idx, node.feature] <= node.threshold
        node.left = TreeNode()
        node.right = TreeNode()
        # push right first so the left child is expanded first (keeps the
        # rng consumption order deterministic for forest trees)
        stack.append((node.right, idx[~goes_left], depth + 1))
        stack.append((node.left, idx[goes_left], depth + 1))
    return TreeParams(root=root, n_classes=n_classes)


def predict_tree(params: TreeParams, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    out = np.empty(X.shape[0], dtype=np.int64)
    stack = [(params.root, np.arange(X.shape[0]))]
    while stack:
        node, idx = stack.pop()
        if idx.size == 0:
            continue
        if node.is_leaf:
            out[idx] = node.klass
            continue
        goes_left = X[idx, node.feature] <= node.threshold
        stack.append((node.left, idx[goes_left]))
        stack.append((node.right, idx[~goes_left]))
    return out
