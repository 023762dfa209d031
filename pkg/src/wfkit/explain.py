"""Layer-wise relevance propagation (w^2-rule) for dense classifiers."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .features import FeatureVector, Pipeline
from .neural.layers import LayerKind
from .neural.model import NeuralModel
from .neural.train import TrainedModel, logits

log = logging.getLogger(__name__)


class UnsupportedArchitectureError(ValueError):
    pass


@dataclass(frozen=True)
class RelevanceVector:
    scores: np.ndarray
    target: int
    output_relevance: float
    layer_totals: tuple[float, ...] = ()

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        s.setflags(write=False)
        object.__setattr__(self, "scores", s)


def w2_redistribute(W: np.ndarray, relevance: np.ndarray) -> np.ndarray:
    """Send each upper unit's relevance down in proportion to w_ij^2.

    Units whose incoming weights are all zero drop their relevance.
    """
    sq = W * W
    denom = sq.sum(axis=0)
    dead = denom == 0
    if dead.any():
        log.warning("%d unit(s) with all-zero incoming weights; their relevance is dropped", int(dead.sum()))
    frac = np.divide(sq, denom, out=np.zeros_like(sq), where=~dead)
    return frac @ relevance


def lrp_w2(model, x, target_class: int | None = None) -> RelevanceVector:
    """Decompose one class score onto the input features.

    The starting relevance is the pre-softmax score of ``target_class``
    (default: the predicted class). Biases do not take part.
    """
    net: NeuralModel = model.model if isinstance(model, TrainedModel) else model
    for spec in net.specs:
        if spec.kind not in (LayerKind.DENSE, LayerKind.DROPOUT, LayerKind.SOFTMAX_OUTPUT):
            raise UnsupportedArchitectureError(f"LRP w^2-rule supports dense models only, found {spec.kind.value}")
    values = x.values if isinstance(x, FeatureVector) else np.asarray(x, dtype=np.float64)
    scores = logits(net, values)[0]
    if target_class is None:
        target_class = int(np.argmax(scores))
    if not 0 <= target_class < scores.size:
        raise ValueError(f"target_class {target_class} out of range")
    R = np.zeros(scores.size)
    R[target_class] = scores[target_class]
    totals = [float(R.sum())]
    for layer in reversed(net.layers):
        if "W" not in layer.params:
            continue
        R = w2_redistribute(layer.params["W"], R)
        totals.append(float(R.sum()))
    return RelevanceVector(R, target_class, float(scores[target_class]), tuple(totals))


class AggregatedRelevance(NamedTuple):
    scores: np.ndarray
    ranking: np.ndarray


def aggregate_relevance(runs: Sequence[RelevanceVector | np.ndarray]) -> AggregatedRelevance:
    """Element-wise sum over runs plus feature indices ordered by summed score."""
    arrays = [np.asarray(r.scores if isinstance(r, RelevanceVector) else r, dtype=np.float64) for r in runs]
    if not arrays:
        raise ValueError("no relevance runs given")
    dims = {a.shape for a in arrays}
    if len(dims) != 1:
        raise ValueError(f"relevance runs have different shapes: {sorted(dims)}")
    total = np.sum(arrays, axis=0)
    ranking = np.argsort(-total, kind="stable")
    return AggregatedRelevance(total, ranking)


class GroupStats(NamedTuple):
    count: int
    mean: float
    std: float


def relevance_by_direction(relevance, feature_vector: FeatureVector) -> dict[int, GroupStats]:
    """Relevance statistics grouped by direction value (-1, 0 padding, +1)."""
    if not isinstance(feature_vector, FeatureVector) or feature_vector.pipeline not in (
            Pipeline.CELL_DIRECTION, Pipeline.TLS_DIRECTION):
        raise ValueError("relevance_by_direction needs a direction feature vector")
    scores = relevance.scores if isinstance(relevance, RelevanceVector) else np.asarray(relevance, dtype=np.float64)
    if scores.shape != feature_vector.values.shape:
        raise ValueError("relevance and feature vector lengths differ")
    out = {}
    for v in (-1, 0, 1):
        sel = scores[feature_vector.values == v]
        if sel.size:
            out[v] = GroupStats(int(sel.size), float(sel.mean()), float(sel.std()))
    return out


def write_relevance_csv(path, scores: np.ndarray, comment: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature_index", "summed_score"])
        for i, s in enumerate(np.asarray(scores).tolist()):
            w.writerow([i, repr(float(s))])
