"""Open/closed-world scoring, confidence and top-k policies, and experiment runs."""

from __future__ import annotations

import csv
import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .features import Pipeline, feature_matrix
from .trace import Dataset, SplitPlan

OTHERS = -1
REPORT_METRICS = ("tpr", "fpr", "bdr", "wmacc", "accuracy")


class Outcome(str, enum.Enum):
    TP = "TP"
    FP = "FP"
    TN = "TN"
    FN = "FN"


class Mode(str, enum.Enum):
    MULTICLASS = "multiclass"
    BINARY = "binary"


@dataclass(frozen=True)
class PredictionOutcome:
    true_label: int
    probs: np.ndarray
    decided: int
    outcome: Outcome


def decide_with_confidence(probs, threshold: float, background: int | None = None) -> int:
    """Argmax label, or "others" when the top probability is below ``threshold``.

    "Others" is the background class when there is one, else ``OTHERS``.
    """
    if not 0.0 <= threshold < 1.0:
        raise ValueError("threshold must lie in [0, 1)")
    p = np.asarray(probs, dtype=np.float64)
    best = int(np.argmax(p))
    if p[best] >= threshold:
        return best
    return OTHERS if background is None else background


def decide_batch(probs: np.ndarray, threshold: float, background: int | None = None) -> np.ndarray:
    if not 0.0 <= threshold < 1.0:
        raise ValueError("threshold must lie in [0, 1)")
    P = np.atleast_2d(probs)
    best = np.argmax(P, axis=1)
    keep = P[np.arange(P.shape[0]), best] >= threshold
    return np.where(keep, best, OTHERS if background is None else background)


def _monitored(label: int, background: int | None) -> bool:
    return label != OTHERS and label != background


def classify_outcome(true_label: int, decided: int, background: int | None = None,
                     mode: Mode | str = Mode.MULTICLASS) -> Outcome:
    """Multiclass mode needs the exact site for a TP; binary mode only needs
    "some monitored site". Background samples are FP iff decided monitored."""
    mode = Mode(mode)
    if _monitored(true_label, background):
        if mode is Mode.MULTICLASS:
            return Outcome.TP if decided == true_label else Outcome.FN
        return Outcome.TP if _monitored(decided, background) else Outcome.FN
    return Outcome.FP if _monitored(decided, background) else Outcome.TN


def topk_outcome(probs, k: int, true_label: int, background: int | None = None) -> Outcome:
    """Top-k rule: background anywhere in the top k makes a monitored sample FN.

    Background samples are judged on their argmax alone.
    """
    p = np.asarray(probs, dtype=np.float64)
    if not 1 <= k <= p.size:
        raise ValueError(f"k must lie in [1, {p.size}]")
    top = np.argsort(-p, kind="stable")[:k]
    if _monitored(true_label, background):
        if background is not None and background in top:
            return Outcome.FN
        return Outcome.TP if true_label in top else Outcome.FN
    return Outcome.FP if _monitored(int(top[0]), background) else Outcome.TN


def bdr(tpr: float, fpr: float, n_monitored: int, n_background: int) -> float:
    """Posterior that a positive call is truly monitored, with the prior taken
    from instance counts."""
    if n_monitored <= 0 or n_background <= 0:
        raise ValueError("instance counts must be positive")
    pm = n_monitored / (n_monitored + n_background)
    num = tpr * pm
    den = num + fpr * (1.0 - pm)
    if den == 0:
        raise ValueError("BDR undefined when both tpr and fpr are 0")
    return num / den if num else 0.0


def wmacc(outcomes: Sequence[Outcome | PredictionOutcome]) -> float:
    """True positives over monitored samples (TP + FN)."""
    kinds = [o.outcome if isinstance(o, PredictionOutcome) else Outcome(o) for o in outcomes]
    tp = sum(k is Outcome.TP for k in kinds)
    monitored = tp + sum(k is Outcome.FN for k in kinds)
    if monitored == 0:
        raise ValueError("no monitored samples")
    return tp / monitored


def weighted_metrics(predictions, labels, class_weights) -> tuple[float, float]:
    """(weighted accuracy, weighted MSE) for binary labels.

    ``predictions`` are probabilities of class 1: accuracy thresholds them at
    0.5, MSE uses them raw. Each instance is weighted by its true class.
    """
    p = np.asarray(predictions, dtype=np.float64).reshape(-1)
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if p.size != y.size:
        raise ValueError("predictions and labels differ in length")
    if p.size == 0:
        raise ValueError("no instances")
    w = np.asarray([class_weights[int(c)] for c in y], dtype=np.float64)
    if np.any(w <= 0):
        raise ValueError("class weights must be positive")
    n = y.size
    acc = float(np.sum(w * ((p >= 0.5).astype(np.int64) == y)) / n)
    mse = float(np.sum(w * (y - p) ** 2) / n)
    return acc, mse


def balanced_class_weights(labels, n_classes: int | None = None) -> dict[int, float]:
    """w_c = N / (K n_c) over the K classes present, so instance weights sum to N."""
    y = np.asarray(labels, dtype=np.int64)
    classes, counts = np.unique(y, return_counts=True)
    k = classes.size
    out = {int(c): y.size / (k * int(n)) for c, n in zip(classes, counts)}
    for c in range(n_classes or 0):
        out.setdefault(c, 1.0)
    return out


def site_accuracy(pairs: Iterable[tuple[str, Outcome]]) -> dict[str, float]:
    """TP fraction per site, pooled over everything passed in."""
    tp: dict[str, int] = {}
    total: dict[str, int] = {}
    for site, out in pairs:
        total[site] = total.get(site, 0) + 1
        tp[site] = tp.get(site, 0) + (Outcome(out) is Outcome.TP)
    return {s: tp[s] / total[s] for s in sorted(total)}


# ---------------------------------------------------------------------------
# reports

@dataclass
class MetricsReport:
    tp: int
    fp: int
    tn: int
    fn: int
    tpr: float
    fpr: float | None
    bdr: float | None
    wmacc: float
    accuracy: float
    per_class_accuracy: dict[int, float] = field(default_factory=dict)
    weighted_accuracy: float | None = None
    weighted_mse: float | None = None

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_class_accuracy"] = {str(k): v for k, v in self.per_class_accuracy.items()}
        return d


def build_report(true_labels, decided, background: int | None = None,
                 mode: Mode | str = Mode.MULTICLASS, outcomes: Sequence[Outcome] | None = None) -> MetricsReport:
    """Confusion counts and rates; fpr and bdr are None in a closed world."""
    y = np.asarray(true_labels, dtype=np.int64)
    d = np.asarray(decided, dtype=np.int64)
    if outcomes is None:
        outcomes = [classify_outcome(int(a), int(b), background, mode) for a, b in zip(y, d)]
    counts = {k: 0 for k in Outcome}
    for o in outcomes:
        counts[Outcome(o)] += 1
    tp, fp, tn, fn = counts[Outcome.TP], counts[Outcome.FP], counts[Outcome.TN], counts[Outcome.FN]
    tpr = tp / (tp + fn) if tp + fn else 0.0
    mon = np.array([_monitored(int(v), background) for v in y], dtype=bool)
    within = float(np.mean(d[mon] == y[mon])) if mon.any() else 0.0
    if background is None or tn + fp == 0:
        fpr = rate = None
    else:
        fpr = fp / (fp + tn)
        try:
            rate = bdr(tpr, fpr, int(mon.sum()), int((~mon).sum()))
        except ValueError:
            rate = 0.0
    per_class = {int(c): float(np.mean(d[y == c] == c)) for c in np.unique(y)}
    return MetricsReport(tp, fp, tn, fn, tpr, fpr, rate, within, (tp + tn) / max(1, len(outcomes)), per_class)


def threshold_sweep(probs: np.ndarray, true_labels, thresholds: Sequence[float],
                    background: int | None = None, mode: Mode | str = Mode.MULTICLASS) -> list[dict]:
    rows = []
    for t in thresholds:
        rep = build_report(true_labels, decide_batch(probs, t, background), background, mode)
        rows.append({"threshold": float(t), "tp": rep.tp, "fp": rep.fp, "tn": rep.tn, "fn": rep.fn,
                     "tpr": rep.tpr, "fpr": rep.fpr, "bdr": rep.bdr, "wmacc": rep.wmacc})
    return rows


SWEEP_COLUMNS = ("threshold", "tp", "fp", "tn", "fn", "tpr", "fpr", "bdr", "wmacc")


def write_sweep_csv(rows: Sequence[Mapping], fh, comment: str | None = None) -> None:
    if comment:
        fh.write(f"# {comment}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow(["N/A" if r[c] is None else (repr(float(r[c])) if isinstance(r[c], float) else r[c])
                    for c in SWEEP_COLUMNS])


def format_report(rep: MetricsReport) -> str:
    """Aligned two-column text table."""
    def fmt(v):
        return "N/A" if v is None else (f"{v:.4f}" if isinstance(v, float) else str(v))
    rows = [(k, fmt(getattr(rep, k))) for k in ("tp", "fp", "tn", "fn", "tpr", "fpr", "bdr", "wmacc", "accuracy")]
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k:<{width}}  {v:>10}" for k, v in rows)


# ---------------------------------------------------------------------------
# experiments

@dataclass(frozen=True)
class Policy:
    threshold: float = 0.0
    top_k: int | None = None
    mode: Mode = Mode.MULTICLASS

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if not 0.0 <= self.threshold < 1.0:
            raise ValueError("threshold must lie in [0, 1)")
        if self.top_k is not None and self.top_k < 1:
            raise ValueError("top_k must be >= 1")


@dataclass
class IterationResult:
    report: MetricsReport
    test_indices: np.ndarray
    probs: np.ndarray
    outcomes: list[Outcome]


@dataclass
class ExperimentResult:
    iterations: list[IterationResult]
    mean: dict[str, float | None]
    std: dict[str, float | None]

    @property
    def reports(self) -> list[MetricsReport]:
        return [it.report for it in self.iterations]

    def site_accuracy(self, dataset: Dataset) -> dict[str, float]:
        names = dataset.class_names
        bg = dataset.background_index
        pairs = []
        for it in self.iterations:
            for i, o in zip(it.test_indices, it.outcomes):
                lab = int(dataset.labels[i])
                if lab != bg:
                    pairs.append((names[lab], o))
        return site_accuracy(pairs)

    def to_dict(self) -> dict:
        return {"iterations": [it.report.to_dict() for it in self.iterations],
                "mean": self.mean, "std": self.std}


def aggregate(reports: Sequence[MetricsReport]) -> tuple[dict, dict]:
    mean, std = {}, {}
    for k in REPORT_METRICS:
        vals = [getattr(r, k) for r in reports]
        if any(v is None for v in vals):
            mean[k] = std[k] = None
        else:
            mean[k] = float(np.mean(vals))
            std[k] = float(np.std(vals))
    return mean, std


def _fit_predict(kind, Xtr, ytr, Xte, n_classes, model_params, train_config, seed):
    if kind in ("mlp", "cnn"):
        from .neural import TrainConfig, build_cnn, build_mlp, predict_proba, train

        params = dict(model_params or {})
        builder = build_mlp if kind == "mlp" else build_cnn
        model = builder(Xtr.shape[1], n_classes, seed=seed, **params)
        cfg = train_config or TrainConfig()
        cfg = TrainConfig(cfg.optimizer, cfg.learning_rate, cfg.epochs, min(cfg.batch_size, len(ytr)), seed)
        return predict_proba(train(model, Xtr, ytr, cfg), Xte)
    if kind == "forest":
        from .classic import train_forest

        forest = train_forest(Xtr, ytr, seed=seed, n_classes=n_classes, **(model_params or {}))
        return forest.predict_proba(Xte)
    raise ValueError(f"unknown model kind {kind!r}")


def _run_iteration(args) -> IterationResult:
    X, y, n_classes, background, tr, te, kind, model_params, train_config, policy, seed = args
    probs = _fit_predict(kind, X[tr], y[tr], X[te], n_classes, model_params, train_config, seed)
    yt = y[te]
    if policy.top_k is not None:
        outcomes = [topk_outcome(p, min(policy.top_k, n_classes), int(t), background) for p, t in zip(probs, yt)]
        decided = np.argmax(probs, axis=1)
    else:
        decided = decide_batch(probs, policy.threshold, background)
        outcomes = [classify_outcome(int(a), int(b), background, policy.mode) for a, b in zip(yt, decided)]
    report = build_report(yt, decided, background, policy.mode, outcomes)
    return IterationResult(report, np.asarray(te), probs, outcomes)


def run_experiment(dataset: Dataset, pipeline: Pipeline | str, dim: int, model_kind: str,
                   split_plan: SplitPlan, policy: Policy = Policy(), train_config=None,
                   model_params: Mapping | None = None, seed: int = 0, jobs: int = 1,
                   features: np.ndarray | None = None) -> ExperimentResult:
    """Train and score one model per split iteration.

    Each iteration gets its own seed spawned from ``seed``; results do not
    depend on ``jobs``. Pass ``features`` to skip extraction.
    """
    if features is None:
        X, y = feature_matrix(dataset, pipeline, dim)
    else:
        X, y = np.asarray(features, dtype=np.float64), dataset.labels
        if X.shape[0] != len(dataset):
            raise ValueError("feature rows do not match the dataset")
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(len(split_plan))]
    tasks = [(X, y, dataset.n_classes, dataset.background_index, tr, te, model_kind, model_params,
              train_config, policy, s) for (tr, te), s in zip(split_plan, seeds)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            results = list(ex.map(_run_iteration, tasks))
    else:
        results = [_run_iteration(t) for t in tasks]
    mean, std = aggregate([r.report for r in results])
    return ExperimentResult(results, mean, std)


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        return math.nan, math.nan
    return float(v.mean()), float(v.std())
