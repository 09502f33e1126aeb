"""Multi-class AdaBoost (SAMME) over depth-1 decision stumps.

Round weight alpha = ln((1 - eps) / eps) + ln(K - 1); with K = 2 this is the
classic two-class AdaBoost weight. eps is floored at 1e-10 and boosting
halts early when the best stump is no better than random guessing
(eps >= 1 - 1/K).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EPS_FLOOR = 1e-10


@dataclass
class Stump:
    feature: int  # -1 means a constant stump (no usable split existed)
    threshold: float
    left_class: int  # prediction for x[feature] <= threshold; also the
    right_class: int  # constant prediction when feature == -1


@dataclass
class AdaBoostParams:
    stumps: list[Stump]
    alphas: list[float]
    fallback_class: int
    n_classes: int
    train_errors: list[float] = field(default_factory=list)


def _predict_stump(stump: Stump, X: np.ndarray) -> np.ndarray:
    if stump.feature < 0:
        return np.full(X.shape[0], stump.left_class, dtype=np.int64)
    goes_left = X[:, stump.feature] <= stump.threshold
    return np.where(goes_left, stump.left_class, stump.right_class).astype(np.int64)


def _best_stump(X: np.ndarray, y: np.ndarray, w: np.ndarray, n_classes: int) -> Stump:
    """Stump minimizing weighted 0-1 error; ties break on lowest feature
    index, then lowest threshold. Leaf classes are weighted majorities."""
    n = y.size
    totals = np.bincount(y, weights=w, minlength=n_classes)
    best_err = np.inf
    best: Stump | None = None
    weighted = np.zeros((n, n_classes))
    weighted[np.arange(n), y] = w
    for f in range(X.shape[1]):
        x = X[:, f]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        positions = np.nonzero(xs[1:] > xs[:-1])[0] + 1
        if positions.size == 0:
            continue
        cum = np.cumsum(weighted[order], axis=0)
        left = cum[positions - 1]  # (P, K)
        right = totals - left
        err = totals.sum() - left.max(axis=1) - right.max(axis=1)
        j = int(np.argmin(err))  # first min = lowest threshold
        if err[j] < best_err - 1e-15:
            low, high = xs[positions[j] - 1], xs[positions[j]]
            threshold = (low + high) / 2.0
            if threshold >= high:
                threshold = low
            best_err = float(err[j])
            best = Stump(
                feature=f,
                threshold=float(threshold),
                left_class=int(np.argmax(left[j])),
                right_class=int(np.argmax(right[j])),
            )
    if best is None:  # every feature constant: predict the weighted majority
        majority = int(np.argmax(totals))
        best = Stump(feature=-1, threshold=0.0, left_class=majority, right_class=majority)
    return best


def fit_adaboost(
    X: np.ndarray, y: np.ndarray, n_classes: int, rounds: int = 50
) -> AdaBoostParams:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if y.size == 0:
        raise ValueError("training set must be non-empty")
    if n_classes < 2:
        raise ValueError("boosting needs at least 2 classes")
    if rounds < 1:
        raise ValueError("rounds must be >= 1")

    n = y.size
    w = np.full(n, 1.0 / n)
    fallback = int(np.argmax(np.bincount(y, minlength=n_classes)))
    params = AdaBoostParams(
        stumps=[], alphas=[], fallback_class=fallback, n_classes=n_classes
    )
    scores = np.zeros((n, n_classes))
    for _ in range(rounds):
        stump = _best_stump(X, y, w, n_classes)
        pred = _predict_stump(stump, X)
        incorrect = pred != y
        eps = float(w @ incorrect)
        if eps >= 1.0 - 1.0 / n_classes - 1e-12:
            break  # no better than random: halt without recording
        eps_floored = max(eps, EPS_FLOOR)
        alpha = float(np.log((1.0 - eps_floored) / eps_floored) + np.log(n_classes - 1))
        params.stumps.append(stump)
        params.alphas.append(alpha)
        scores[np.arange(n), pred] += alpha
        params.train_errors.append(float(np.mean(np.argmax(scores, axis=1) != y)))
        if eps <= EPS_FLOOR:
            break  # perfect stump: nothing left to reweight
        w = w * np.exp(alpha * incorrect)
        w /= w.sum()
    return params


def predict_adaboost(params: AdaBoostParams, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if not params.stumps:
        return np.full(X.shape[0], params.fallback_class, dtype=np.int64)
    scores = np.zeros((X.shape[0], params.n_classes))
    for stump, alpha in zip(params.stumps, params.alphas):
        pred = _predict_stump(stump, X)
        scores[np.arange(X.shape[0]), pred] += alpha
    return np.argmax(scores, axis=1)
