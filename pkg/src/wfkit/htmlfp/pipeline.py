"""Fingerprintability prediction: site accuracy, labels, rank features, MLP."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np

from ..evaluation import Policy, run_experiment, weighted_metrics
from ..features import Pipeline
from ..neural import TrainConfig, build_mlp, predict_proba, train
from ..trace import Dataset, split_iterations
from .dom import parse_html
from .features import extract_features, rank_transform
from .labeling import DEFAULT_THRESHOLDS, fp_labels


@dataclass(frozen=True)
class FpResult:
    threshold: float
    weighted_accuracy: float
    weighted_mse: float
    n_less: int
    n_greater: int

    def to_dict(self) -> dict:
        return asdict(self)


def trace_site_accuracy(traces: Dataset, dim: int = 256, n_iters: int = 10, seed: int = 0,
                        train_config: TrainConfig = TrainConfig(epochs=15)) -> dict[str, float]:
    """Per-site TP fraction of an MLP attack pooled over split iterations."""
    plan = split_iterations(traces, 0.6, n_iters, seed)
    result = run_experiment(traces, Pipeline.CELL_DIRECTION, dim, "mlp", plan, Policy(),
                            train_config, seed=seed)
    return result.site_accuracy(traces)


def html_feature_matrix(documents: Sequence[bytes | str], metas: Sequence[Mapping],
                        page_urls: Sequence[str] | None = None) -> np.ndarray:
    rows = []
    for i, (doc, meta) in enumerate(zip(documents, metas)):
        url = page_urls[i] if page_urls else f"https://www.{meta.get('site', 'site')}.com/"
        rows.append(extract_features(parse_html(doc), meta, url).values)
    return np.array(rows)


def rank_inputs(features: np.ndarray) -> np.ndarray:
    """Ranks scaled by the row count into (0, 1]."""
    return rank_transform(features) / features.shape[0]


def split_sites(sites: Sequence[str], seed: int,
                accuracies: Mapping[str, float] | None = None) -> tuple[set[str], set[str]]:
    """Halve the site set. With ``accuracies``, sites are sorted by accuracy and
    each consecutive pair is split at random, so both halves span the range."""
    unique = sorted(set(sites))
    rng = np.random.default_rng([seed, 0x5175])
    if accuracies is None:
        perm = rng.permutation(len(unique))
        half = len(unique) // 2
        return {unique[i] for i in perm[:half]}, {unique[i] for i in perm[half:]}
    ordered = sorted(unique, key=lambda s: (accuracies[s], s))
    train, test = set(), set()
    for i in range(0, len(ordered), 2):
        pair = ordered[i:i + 2]
        if len(pair) == 2 and rng.random() < 0.5:
            pair.reverse()
        train.add(pair[0])
        if len(pair) == 2:
            test.add(pair[1])
    return train, test


def fp_experiment(inputs: np.ndarray, sites: Sequence[str], site_accuracies: Mapping[str, float],
                  thresholds: Sequence[float] = DEFAULT_THRESHOLDS, seed: int = 0,
                  train_sites: set[str] | None = None, hidden_units: Sequence[int] = (128, 128),
                  train_config: TrainConfig = TrainConfig(epochs=40)) -> list[FpResult]:
    """Train one MLP per threshold on the training sites; score the others with
    balanced class weights."""
    sites = np.asarray(sites)
    if train_sites is None:
        train_sites, _ = split_sites(sites.tolist(), seed, site_accuracies)
    tr = np.isin(sites, sorted(train_sites))
    te = ~tr
    if not tr.any() or not te.any():
        raise ValueError("both training and testing sites are required")
    results = []
    for thr in thresholds:
        lab = fp_labels(site_accuracies, sites.tolist(), thr)
        model = build_mlp(inputs.shape[1], 2, hidden_units, seed=seed)
        cfg = TrainConfig(train_config.optimizer, train_config.learning_rate, train_config.epochs,
                          min(train_config.batch_size, int(tr.sum())), seed)
        trained = train(model, inputs[tr], lab.labels[tr], cfg)
        p1 = predict_proba(trained, inputs[te])[:, 1]
        test_lab = fp_labels(site_accuracies, sites[te].tolist(), thr)
        acc, mse = weighted_metrics(p1, test_lab.labels, test_lab.class_weights)
        less, greater = lab.counts
        results.append(FpResult(float(thr), acc, mse, less, greater))
    return results
