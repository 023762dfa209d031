"""Tree-of-Parzen-Estimators search with a random-search baseline."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy.special import ndtr

log = logging.getLogger(__name__)

N_STARTUP = 10
GAMMA = 0.25
N_CANDIDATES = 24


@dataclass(frozen=True)
class Continuous:
    name: str
    lo: float
    hi: float
    log: bool = False

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"{self.name}: lo must be < hi")
        if self.log and self.lo <= 0:
            raise ValueError(f"{self.name}: log scale needs lo > 0")

    def to_unit(self, v: float) -> float:
        return math.log(v) if self.log else float(v)

    def from_unit(self, u: float) -> float:
        # clamp: exp(log(hi)) can overshoot hi by an ulp
        return min(self.hi, max(self.lo, math.exp(u) if self.log else float(u)))

    @property
    def bounds(self) -> tuple[float, float]:
        return (self.to_unit(self.lo), self.to_unit(self.hi))


@dataclass(frozen=True)
class IntRange:
    name: str
    lo: int
    hi: int

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"{self.name}: lo must be < hi")

    def to_unit(self, v) -> float:
        return float(v)

    def from_unit(self, u: float) -> int:
        return int(min(self.hi, max(self.lo, math.floor(u + 0.5))))

    @property
    def bounds(self) -> tuple[float, float]:
        # widen by half a step so the end points get their fair share after rounding
        return (self.lo - 0.5, self.hi + 0.5)


@dataclass(frozen=True)
class Categorical:
    name: str
    options: tuple

    def __post_init__(self):
        object.__setattr__(self, "options", tuple(self.options))
        if not self.options:
            raise ValueError(f"{self.name}: options must be non-empty")


Dimension = Continuous | IntRange | Categorical


@dataclass(frozen=True)
class SearchSpace:
    dims: tuple[Dimension, ...]

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(self.dims))
        names = [d.name for d in self.dims]
        if len(set(names)) != len(names):
            raise ValueError("dimension names must be unique")

    def contains(self, params: Mapping[str, Any]) -> bool:
        if set(params) != {d.name for d in self.dims}:
            return False
        for d in self.dims:
            v = params[d.name]
            if isinstance(d, Categorical):
                if v not in d.options:
                    return False
            elif not d.lo <= v <= d.hi:
                return False
        return True

    def to_dict(self) -> dict:
        out = []
        for d in self.dims:
            if isinstance(d, Categorical):
                out.append({"name": d.name, "type": "categorical", "options": list(d.options)})
            elif isinstance(d, IntRange):
                out.append({"name": d.name, "type": "int", "lo": d.lo, "hi": d.hi})
            else:
                out.append({"name": d.name, "type": "continuous", "lo": d.lo, "hi": d.hi, "log": d.log})
        return {"dims": out}

    @classmethod
    def from_dict(cls, obj: Mapping) -> "SearchSpace":
        dims = []
        for i, d in enumerate(obj["dims"]):
            kind = d.get("type")
            if kind == "categorical":
                dims.append(Categorical(d["name"], tuple(d["options"])))
            elif kind == "int":
                dims.append(IntRange(d["name"], int(d["lo"]), int(d["hi"])))
            elif kind == "continuous":
                dims.append(Continuous(d["name"], float(d["lo"]), float(d["hi"]), bool(d.get("log", False))))
            else:
                raise ValueError(f"space.dims[{i}].type: unknown dimension type {kind!r}")
        return cls(tuple(dims))


@dataclass
class Trial:
    params: dict
    objective: float
    status: str = "ok"
    error: str | None = None

    def to_json(self) -> dict:
        d = {"params": self.params, "objective": self.objective if self.status == "ok" else None,
             "status": self.status}
        if self.error:
            d["error"] = self.error
        return d

    @classmethod
    def from_json(cls, obj: Mapping) -> "Trial":
        obj_val = obj.get("objective")
        return cls(dict(obj["params"]), float("nan") if obj_val is None else float(obj_val),
                   obj.get("status", "ok"), obj.get("error"))


class AllTrialsFailedError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# search spaces

def mlp_space() -> SearchSpace:
    return SearchSpace((
        IntRange("input_dim", 1, 10_000),
        Categorical("optimizer", ("SGD", "Adam")),
        Continuous("learning_rate", 0.001, 0.1, log=True),
        IntRange("epochs", 10, 1000),
        IntRange("batch_size", 10, 100),
        IntRange("n_layers", 3, 5),
        IntRange("hidden_units", 10, 1000),
        Continuous("keep_prob", 0.2, 0.9),
        Categorical("activation", ("Tanh", "Relu", "Sigmoid")),
    ))


def ae_space() -> SearchSpace:
    return SearchSpace((
        IntRange("input_dim", 1, 5000),
        Categorical("optimizer", ("SGD", "Adam")),
        Continuous("learning_rate", 0.001, 0.1, log=True),
        IntRange("epochs", 10, 1000),
        IntRange("batch_size", 10, 300),
        IntRange("n_layers", 3, 5),
        IntRange("hidden_units", 10, 1000),
        Categorical("activation", ("Tanh", "Relu")),
    ))


def cnn_space() -> SearchSpace:
    return SearchSpace((
        IntRange("input_dim", 700, 5000),
        Categorical("optimizer", ("SGD", "Adam", "RMSProp")),
        Continuous("learning_rate", 0.001, 0.1, log=True),
        IntRange("epochs", 10, 1000),
        IntRange("batch_size", 28, 128),
        IntRange("n_layers", 3, 7),
        IntRange("hidden_units", 10, 1000),
        Continuous("keep_prob", 0.2, 0.9),
        Categorical("activation", ("Tanh", "LeakyRelu", "Elu")),
        IntRange("n_filters", 4, 128),
        IntRange("filter_width", 2, 16),
        IntRange("pool_width", 2, 50),
    ))


# ---------------------------------------------------------------------------
# densities

def sample_uniform(space: SearchSpace, rng: np.random.Generator) -> dict:
    out = {}
    for d in space.dims:
        if isinstance(d, Categorical):
            out[d.name] = d.options[int(rng.integers(len(d.options)))]
        else:
            lo, hi = d.bounds
            out[d.name] = d.from_unit(float(rng.uniform(lo, hi)))
    return out


class _Parzen:
    """Truncated Gaussian mixture with per-point bandwidths.

    Each observation's bandwidth is the larger gap to its sorted neighbours
    (bounds act as neighbours at the ends); a broad prior kernel centred on the
    range keeps the density non-zero everywhere.
    """

    def __init__(self, points: np.ndarray, lo: float, hi: float):
        self.lo, self.hi = lo, hi
        span = hi - lo
        pts = np.sort(np.asarray(points, dtype=np.float64))
        n = pts.size
        if n:
            ext = np.concatenate([[lo], pts, [hi]])
            gaps = np.maximum(ext[1:-1] - ext[:-2], ext[2:] - ext[1:-1])
            sig = np.clip(gaps, span / min(100.0, 1.0 + n), span)
        else:
            sig = np.empty(0)
        self.mu = np.concatenate([pts, [lo + span / 2]])
        self.sigma = np.concatenate([sig, [span]])
        self.weight = np.full(self.mu.size, 1.0 / self.mu.size)
        self.mass = ndtr((hi - self.mu) / self.sigma) - ndtr((lo - self.mu) / self.sigma)

    def sample(self, rng: np.random.Generator) -> float:
        k = int(rng.choice(self.mu.size, p=self.weight))
        for _ in range(100):
            v = rng.normal(self.mu[k], self.sigma[k])
            if self.lo <= v <= self.hi:
                return float(v)
        return float(np.clip(self.mu[k], self.lo, self.hi))

    def logpdf(self, x: float) -> float:
        z = (x - self.mu) / self.sigma
        kern = np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2 * math.pi) * self.mass)
        return math.log(max(float(np.dot(self.weight, kern)), 1e-300))


class _Counts:
    """Laplace-smoothed category frequencies."""

    def __init__(self, values: Sequence, options: tuple):
        self.options = options
        counts = np.ones(len(options))
        for v in values:
            counts[options.index(v)] += 1
        self.p = counts / counts.sum()

    def sample(self, rng: np.random.Generator):
        return self.options[int(rng.choice(len(self.options), p=self.p))]

    def logpdf(self, v) -> float:
        return math.log(self.p[self.options.index(v)])


def split_good_bad(trials: Sequence[Trial], gamma: float = GAMMA) -> tuple[list[Trial], list[Trial]]:
    """Best ``max(1, ceil(gamma * n))`` trials versus the rest (stable on ties)."""
    order = sorted(range(len(trials)), key=lambda i: trials[i].objective)
    n_good = max(1, math.ceil(gamma * len(trials)))
    return [trials[i] for i in order[:n_good]], [trials[i] for i in order[n_good:]]


def _fit(dim: Dimension, trials: Sequence[Trial]):
    if isinstance(dim, Categorical):
        return _Counts([t.params[dim.name] for t in trials], dim.options)
    lo, hi = dim.bounds
    return _Parzen(np.array([dim.to_unit(t.params[dim.name]) for t in trials]), lo, hi)


def suggest(history: Sequence[Trial], space: SearchSpace, seed, n_startup: int = N_STARTUP,
            gamma: float = GAMMA, n_candidates: int = N_CANDIDATES) -> dict:
    """Next point to evaluate; uniform until ``n_startup`` successful trials exist."""
    rng = np.random.default_rng(seed)
    ok = [t for t in history if t.status == "ok" and np.isfinite(t.objective)]
    if len(ok) < n_startup:
        return sample_uniform(space, rng)
    good, bad = split_good_bad(ok, gamma)
    models = [(d, _fit(d, good), _fit(d, bad)) for d in space.dims]
    best, best_score = None, -math.inf
    for _ in range(n_candidates):
        cand, score = {}, 0.0
        for d, l_model, g_model in models:
            if isinstance(d, Categorical):
                v = l_model.sample(rng)
                score += l_model.logpdf(v) - g_model.logpdf(v)
                cand[d.name] = v
            else:
                u = l_model.sample(rng)
                value = d.from_unit(u)
                # score the value actually returned (after rounding for ints)
                u = d.to_unit(value)
                score += l_model.logpdf(u) - g_model.logpdf(u)
                cand[d.name] = value
        if score > best_score:
            best, best_score = cand, score
    return best


def optimize(objective_fn: Callable[[dict], float], space: SearchSpace, budget: int, seed: int,
             strategy: str = "tpe", history: Sequence[Trial] | None = None,
             on_trial: Callable[[Trial], None] | None = None) -> tuple[Trial, list[Trial]]:
    """Run ``budget`` new trials; returns (best trial, full history).

    Objective exceptions are recorded as failed trials. Passing a previous
    ``history`` resumes the search.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    strategy = strategy.lower()
    if strategy not in ("tpe", "random"):
        raise ValueError(f"unknown strategy {strategy!r}")
    trials = list(history or [])
    start = len(trials)
    for k in range(start, start + budget):
        trial_seed = np.random.default_rng([seed, k]).integers(2**63)
        if strategy == "tpe":
            params = suggest(trials, space, trial_seed)
        else:
            params = sample_uniform(space, np.random.default_rng(trial_seed))
        try:
            value = float(objective_fn(params))
            if not np.isfinite(value):
                raise ValueError(f"objective returned {value}")
            trial = Trial(params, value)
        except Exception as exc:  # noqa: BLE001 - any objective failure is recorded
            log.warning("trial %d failed: %s", k, exc)
            trial = Trial(params, float("nan"), "failed", f"{type(exc).__name__}: {exc}")
        trials.append(trial)
        if on_trial is not None:
            on_trial(trial)
    ok = [t for t in trials if t.status == "ok"]
    if not ok:
        raise AllTrialsFailedError(f"all {len(trials)} trials failed")
    best = min(ok, key=lambda t: t.objective)
    return best, trials


def best_so_far(trials: Sequence[Trial]) -> list[float]:
    out, cur = [], math.inf
    for t in trials:
        if t.status == "ok":
            cur = min(cur, t.objective)
        out.append(cur)
    return out


def save_history(trials: Sequence[Trial], path) -> None:
    Path(path).write_text("".join(json.dumps(t.to_json(), sort_keys=True) + "\n" for t in trials),
                          encoding="utf-8")


def load_history(path) -> list[Trial]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                if "_meta" not in obj:
                    out.append(Trial.from_json(obj))
    return out


def holdout_error_objective(X: np.ndarray, y: np.ndarray, kind: str, n_classes: int, seed: int,
                            holdout: float = 0.2, max_epochs: int | None = None) -> Callable[[dict], float]:
    """Objective mapping hyperparameters to multiclass error on a held-out slice.

    ``input_dim`` (when present) truncates the feature columns; ``n_layers``
    counts input and output layers, so an MLP with ``n_layers=4`` has two
    hidden layers. ``max_epochs`` caps training for desk-scale runs.
    """
    from .neural import TrainConfig, build_cnn, build_mlp, predict, train

    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(y))
    n_val = max(1, int(round(holdout * len(y))))
    val, fit = perm[:n_val], perm[n_val:]

    def objective(params: dict) -> float:
        dim = min(int(params.get("input_dim", X.shape[1])), X.shape[1])
        Xf, Xv = X[fit][:, :dim], X[val][:, :dim]
        act = params.get("activation", "Tanh")
        units = int(params.get("hidden_units", 650))
        if kind == "mlp":
            n_hidden = max(1, int(params.get("n_layers", 4)) - 2)
            model = build_mlp(dim, n_classes, [units] * n_hidden, act,
                              keep_prob=float(params.get("keep_prob", 0.8)), seed=seed)
        elif kind == "cnn":
            model = build_cnn(dim, n_classes, int(params.get("n_filters", 32)), int(params.get("filter_width", 3)),
                              int(params.get("pool_width", 2)), units, act, seed=seed)
        else:
            raise ValueError(f"unknown model kind {kind!r}")
        epochs = int(params.get("epochs", 10))
        if max_epochs is not None:
            epochs = min(epochs, max_epochs)
        cfg = TrainConfig(params.get("optimizer", "SGD"), float(params.get("learning_rate", 0.01)), epochs,
                          min(int(params.get("batch_size", 32)), len(fit)), seed)
        trained = train(model, Xf, y[fit], cfg)
        return float(np.mean(predict(trained, Xv) != y[val]))

    return objective
