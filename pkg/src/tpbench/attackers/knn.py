"""k-nearest-neighbors on standardized features.

Majority vote among the k nearest training rows by Euclidean distance;
vote ties go to the class with the smaller summed distance, then to the
lowest class index. Distance ties at the k-boundary resolve by training-row
order (stable sort), matching the brute-force oracle used in tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class KnnParams:
    train_x: np.ndarray
    train_y: np.ndarray
    k: int


def fit_knn(X: np.ndarray, y: np.ndarray, k: int) -> KnnParams:
    if k <= 0:
        raise ValueError("k must be positive")
    if k > X.shape[0]:
        raise ValueError(f"k={k} exceeds training size {X.shape[0]}")
    return KnnParams(
        train_x=np.asarray(X, dtype=np.float64),
        train_y=np.asarray(y, dtype=np.int64),
        k=k,
    )


def predict_knn(params: KnnParams, X: np.ndarray, n_classes: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    out = np.empty(X.shape[0], dtype=np.int64)
    for row, query in enumerate(X):
        sq = np.sum((params.train_x - query) ** 2, axis=1)
        nearest = np.argsort(sq, kind="stable")[: params.k]
        votes = np.bincount(params.train_y[nearest], minlength=n_classes)
        top = votes.max()
        tied = np.nonzero(votes == top)[0]
        if tied.size == 1:
            out[row] = tied[0]
            continue
        dists = np.sqrt(sq[nearest])
        sums = np.full(n_classes, np.inf)
        for cls in tied:
            sums[cls] = float(np.sum(dists[params.train_y[nearest] == cls]))
        out[row] = int(np.argmin(sums))  # first min = lowest class index
    return out
