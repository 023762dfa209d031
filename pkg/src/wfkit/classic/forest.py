"""Random forest with Gini splits, Gini importance and leaf-id fingerprints."""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FORMAT = "wfkit.forest"
FORMAT_VERSION = 1


@dataclass
class DecisionTree:
    """Array-backed binary tree; node ids double as leaf ids.

    ``left[i] == -1`` marks a leaf. ``value[i]`` is the class histogram of the
    training samples reaching node ``i``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    importance: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    @property
    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.left < 0)

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.left[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.left[node] >= 0
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.value[self.apply(X)], axis=1)

    def to_json(self) -> dict:
        return {k: getattr(self, k).tolist() for k in
                ("feature", "threshold", "left", "right", "value", "importance")}

    @classmethod
    def from_json(cls, obj) -> "DecisionTree":
        return cls(np.array(obj["feature"], dtype=np.int64), np.array(obj["threshold"], dtype=np.float64),
                   np.array(obj["left"], dtype=np.int64), np.array(obj["right"], dtype=np.int64),
                   np.array(obj["value"], dtype=np.float64).reshape(len(obj["feature"]), -1),
                   np.array(obj["importance"], dtype=np.float64))


def gini(counts: np.ndarray) -> np.ndarray:
    """Gini impurity of class-count rows."""
    counts = np.asarray(counts, dtype=np.float64)
    n = counts.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = counts / n[..., None]
        out = 1.0 - np.sum(p * p, axis=-1)
    return np.where(n > 0, out, 0.0)


def _best_split(X, y1h, rng, max_features):
    """Best (feature, threshold, impurity decrease) over sampled features.

    Features are visited in random order until ``max_features`` non-constant
    ones have been scored, so constant candidates never block a split.
    """
    n, d = X.shape
    parent = y1h.sum(axis=0)
    parent_imp = float(gini(parent))
    best = (None, None, -np.inf)
    visited = 0
    for f in rng.permutation(d):
        if visited >= max_features:
            break
        col = X[:, f]
        order = np.argsort(col, kind="stable")
        xs = col[order]
        if xs[0] == xs[-1]:
            continue
        visited += 1
        left = np.cumsum(y1h[order], axis=0)[:-1]
        right = parent - left
        valid = xs[1:] > xs[:-1]
        nl = np.arange(1, n)
        child = (nl * gini(left) + (n - nl) * gini(right)) / n
        child = np.where(valid, child, np.inf)
        k = int(np.argmin(child))
        decrease = parent_imp - float(child[k])
        if decrease > best[2]:
            best = (int(f), float((xs[k] + xs[k + 1]) / 2), decrease)
    return best


def build_tree(X: np.ndarray, y: np.ndarray, n_classes: int, rng: np.random.Generator,
               max_features: int, max_depth: int | None = None, min_samples_split: int = 2) -> DecisionTree:
    n_features = X.shape[1]
    feature, threshold, left, right, value = [], [], [], [], []
    importance = np.zeros(n_features)
    y1h = np.eye(n_classes)[y]
    n_root = len(y)

    def new_node(counts):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(counts)
        return len(feature) - 1

    stack = [(np.arange(n_root), 0, new_node(y1h.sum(axis=0)))]
    while stack:
        idx, depth, node = stack.pop()
        counts = value[node]
        if (len(idx) < min_samples_split or np.count_nonzero(counts) <= 1
                or (max_depth is not None and depth >= max_depth)):
            continue
        f, thr, dec = _best_split(X[idx], y1h[idx], rng, max_features)
        if f is None:
            continue
        mask = X[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        importance[f] += max(dec, 0.0) * len(idx) / n_root
        feature[node], threshold[node] = f, thr
        ln = new_node(y1h[li].sum(axis=0))
        rn = new_node(y1h[ri].sum(axis=0))
        left[node], right[node] = ln, rn
        stack.append((ri, depth + 1, rn))
        stack.append((li, depth + 1, ln))
    return DecisionTree(np.array(feature, dtype=np.int64), np.array(threshold), np.array(left, dtype=np.int64),
                        np.array(right, dtype=np.int64), np.array(value).reshape(-1, n_classes), importance)


@dataclass
class DecisionForest:
    trees: list[DecisionTree]
    n_classes: int
    n_features: int
    max_depth: int | None
    seed: int
    oob_indices: list[np.ndarray] | None = None

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def tree_predictions(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.stack([t.predict(X) for t in self.trees], axis=1)

    def predict(self, X) -> np.ndarray:
        """Majority vote over trees; ties go to the lowest class ordinal."""
        votes = self.tree_predictions(X)
        counts = np.zeros((votes.shape[0], self.n_classes), dtype=np.int64)
        for j in range(votes.shape[1]):
            counts[np.arange(votes.shape[0]), votes[:, j]] += 1
        return np.argmax(counts, axis=1)

    def predict_proba(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        acc = np.zeros((X.shape[0], self.n_classes))
        for t in self.trees:
            v = t.value[t.apply(X)]
            acc += v / v.sum(axis=1, keepdims=True)
        return acc / self.n_trees

    def apply(self, X) -> np.ndarray:
        """Leaf ids, one column per tree (the k-FP fingerprint)."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.stack([t.apply(X) for t in self.trees], axis=1)

    def oob_score(self, X, y) -> float:
        if self.oob_indices is None:
            raise ValueError("forest was loaded without out-of-bag bookkeeping")
        X = np.asarray(X, dtype=np.float64)
        votes = np.zeros((X.shape[0], self.n_classes))
        for t, oob in zip(self.trees, self.oob_indices):
            if oob.size:
                votes[oob, t.predict(X[oob])] += 1
        seen = votes.sum(axis=1) > 0
        if not seen.any():
            raise ValueError("no out-of-bag samples")
        return float(np.mean(np.argmax(votes[seen], axis=1) == np.asarray(y)[seen]))

    def to_json(self) -> dict:
        return {"format": FORMAT, "version": FORMAT_VERSION, "n_classes": self.n_classes,
                "n_features": self.n_features, "max_depth": self.max_depth, "seed": self.seed,
                "trees": [t.to_json() for t in self.trees]}

    @classmethod
    def from_json(cls, obj) -> "DecisionForest":
        if obj.get("format") != FORMAT or obj.get("version") != FORMAT_VERSION:
            raise ValueError("not a supported forest document")
        return cls([DecisionTree.from_json(t) for t in obj["trees"]], obj["n_classes"], obj["n_features"],
                   obj["max_depth"], obj["seed"])


def _fit_tree(args):
    X, y, n_classes, seed_seq, max_features, max_depth, min_samples_split = args
    rng = np.random.default_rng(seed_seq)
    n = len(y)
    boot = rng.integers(0, n, size=n)
    oob = np.setdiff1d(np.arange(n), boot)
    tree = build_tree(X[boot], y[boot], n_classes, rng, max_features, max_depth, min_samples_split)
    return tree, oob


def train_forest(features, labels, n_trees: int = 100, max_depth: int | None = None, seed: int = 0,
                 max_features: int | None = None, min_samples_split: int = 2,
                 n_classes: int | None = None, jobs: int = 1) -> DecisionForest:
    """Bootstrap-aggregated Gini trees with sqrt(d) candidate features per split.

    Per-tree seeds are spawned from ``seed``, so results do not depend on ``jobs``.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError("features must be (n, d) with one label per row")
    if n_classes is None:
        # constant labels still get a two-class model of single-leaf trees
        n_classes = max(2, int(y.max()) + 1)
    if n_classes < 2:
        raise ValueError("need at least 2 classes")
    if max_features is None:
        max_features = max(1, int(math.sqrt(X.shape[1])))
    seqs = np.random.SeedSequence(seed).spawn(n_trees)
    tasks = [(X, y, n_classes, s, max_features, max_depth, min_samples_split) for s in seqs]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            fitted = list(ex.map(_fit_tree, tasks))
    else:
        fitted = [_fit_tree(t) for t in tasks]
    return DecisionForest([t for t, _ in fitted], n_classes, X.shape[1], max_depth, seed,
                          [o for _, o in fitted])


def gini_importance(forest: DecisionForest) -> np.ndarray:
    """Sample-weighted impurity decrease per feature, averaged over trees, summing to 1."""
    raw = np.mean([t.importance for t in forest.trees], axis=0) if forest.trees else np.zeros(forest.n_features)
    total = raw.sum()
    return raw / total if total > 0 else np.zeros_like(raw)


def save_forest(forest: DecisionForest, path) -> None:
    Path(path).write_text(json.dumps(forest.to_json(), sort_keys=True) + "\n", encoding="utf-8")


def load_forest(path) -> DecisionForest:
    return DecisionForest.from_json(json.loads(Path(path).read_text(encoding="utf-8")))
