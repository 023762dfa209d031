"""Distance-weighted k-NN and the k-FP leaf-vector Hamming classifier."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .forest import DecisionForest

EPS = 1e-12


class Vote(NamedTuple):
    label: int
    score: float


def knn_classify(train_features, train_labels, query, k: int = 2, eps: float = EPS) -> Vote:
    """Euclidean k nearest neighbours voting with weight 1/(distance + eps).

    Equal distances are broken by training order; equal class weights by the
    lowest label.
    """
    X = np.asarray(train_features, dtype=np.float64)
    y = np.asarray(train_labels, dtype=np.int64)
    if not 1 <= k <= len(y):
        raise ValueError(f"k must lie in [1, {len(y)}]")
    d = np.sqrt(np.sum((X - np.asarray(query, dtype=np.float64)) ** 2, axis=1))
    nearest = np.argsort(d, kind="stable")[:k]
    weights = np.zeros(int(y.max()) + 1)
    np.add.at(weights, y[nearest], 1.0 / (d[nearest] + eps))
    best = int(np.argmax(weights))
    return Vote(best, float(weights[best]))


def knn_predict(train_features, train_labels, queries, k: int = 2, eps: float = EPS) -> np.ndarray:
    X = np.asarray(train_features, dtype=np.float64)
    y = np.asarray(train_labels, dtype=np.int64)
    Q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if not 1 <= k <= len(y):
        raise ValueError(f"k must lie in [1, {len(y)}]")
    sq = np.sum(Q * Q, 1)[:, None] + np.sum(X * X, 1)[None, :] - 2 * Q @ X.T
    d = np.sqrt(np.maximum(sq, 0.0))
    nearest = np.argsort(d, axis=1, kind="stable")[:, :k]
    rows = np.arange(len(Q))[:, None]
    w = 1.0 / (d[rows, nearest] + eps)
    votes = np.zeros((len(Q), int(y.max()) + 1))
    np.add.at(votes, (np.broadcast_to(rows, nearest.shape), y[nearest]), w)
    return np.argmax(votes, axis=1)


def hamming(a, b) -> np.ndarray:
    """Number of differing positions between ``a`` and each row of ``b``."""
    return np.count_nonzero(np.atleast_2d(b) != np.asarray(a), axis=-1)


def kfp_classify(forest: DecisionForest, train_leafvectors, train_labels, query, k: int = 3) -> int:
    """Majority label among the k training fingerprints nearest in Hamming distance.

    Label ties go to the smaller summed distance, then the lowest ordinal.
    """
    leaves = np.asarray(train_leafvectors)
    y = np.asarray(train_labels, dtype=np.int64)
    if not 1 <= k <= len(y):
        raise ValueError(f"k must lie in [1, {len(y)}]")
    qv = forest.apply(np.asarray(query, dtype=np.float64)[None, :])[0]
    d = hamming(qv, leaves)
    nearest = np.argsort(d, kind="stable")[:k]
    labels = np.unique(y[nearest])
    counts = np.array([np.sum(y[nearest] == c) for c in labels])
    dist = np.array([d[nearest][y[nearest] == c].sum() for c in labels])
    order = np.lexsort((labels, dist, -counts))
    return int(labels[order[0]])
