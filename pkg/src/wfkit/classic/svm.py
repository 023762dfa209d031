"""One-vs-rest linear SVM trained by stochastic hinge-loss subgradient steps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.asarray(X, dtype=np.float64)
        std = X.std(axis=0)
        return cls(X.mean(axis=0), np.where(std > 0, std, 1.0))

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.scale


@dataclass
class LinearSVM:
    """Rows of ``weights`` are per-class hyperplanes; the last column is the bias."""

    weights: np.ndarray
    classes: np.ndarray
    standardizer: Standardizer

    def decision_function(self, X) -> np.ndarray:
        Z = self.standardizer.transform(np.atleast_2d(X))
        return Z @ self.weights[:, :-1].T + self.weights[:, -1]

    def predict(self, X) -> np.ndarray:
        return self.classes[np.argmax(self.decision_function(X), axis=1)]


def _pegasos(Z, target, lam, epochs, rng, batch):
    """Minimise lam/2 |w|^2 + mean hinge; bias rides along as a constant feature.

    Returns the average of the iterates over the second half of the epochs.
    """
    n, d = Z.shape
    Zb = np.hstack([Z, np.ones((n, 1))])
    w = np.zeros(d + 1)
    avg = np.zeros(d + 1)
    n_avg = 0
    radius = 1.0 / np.sqrt(lam)
    t = 0
    for epoch in range(epochs):
        order = rng.permutation(n)
        for s in range(0, n, batch):
            t += 1
            idx = order[s:s + batch]
            margin = target[idx] * (Zb[idx] @ w)
            viol = margin < 1
            eta = 1.0 / (lam * t)
            w *= 1.0 - eta * lam
            if viol.any():
                w += eta / len(idx) * (target[idx][viol, None] * Zb[idx][viol]).sum(axis=0)
            norm = np.linalg.norm(w)
            if norm > radius:
                w *= radius / norm
            if 2 * epoch >= epochs:
                avg += w
                n_avg += 1
    return avg / n_avg


def train_linear_svm(features, labels, C: float = 1.0, epochs: int = 50, seed: int = 0,
                     batch: int = 16) -> LinearSVM:
    """Standardise with training statistics, then fit one hinge model per class.

    Minimises 1/2 |w|^2 + C * sum(hinge), i.e. lambda = 1/(C n) per sample.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    classes = np.unique(y)
    if classes.size < 2:
        raise ValueError("linear SVM needs at least two classes")
    if C <= 0:
        raise ValueError("C must be positive")
    std = Standardizer.fit(X)
    Z = std.transform(X)
    rng = np.random.default_rng(seed)
    W = np.stack([_pegasos(Z, np.where(y == c, 1.0, -1.0), 1.0 / (C * len(y)), epochs, rng, batch) for c in classes])
    return LinearSVM(W, classes, std)
