"""Mini-batch training, prediction, encoding and gradient checking."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from ..features import FeatureVector, Pipeline
from .layers import softmax
from .model import Loss, NeuralModel, ShapeError

log = logging.getLogger(__name__)


class Optimizer(str, enum.Enum):
    SGD = "SGD"
    ADAM = "Adam"
    RMSPROP = "RMSProp"


class TrainingDivergedError(RuntimeError):
    pass


class UntrainedModelError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    optimizer: Optimizer = Optimizer.SGD
    learning_rate: float = 0.085
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "optimizer", Optimizer(self.optimizer))
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


AE_TRAIN_CONFIG = TrainConfig(Optimizer.ADAM, 0.001, 10, 256)


@dataclass
class TrainedModel:
    model: NeuralModel
    history: list[float] = field(default_factory=list)
    config: TrainConfig | None = None


class _Sgd:
    def __init__(self, lr):
        self.lr = lr

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.lr * g


class _Adam:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = self.v = None

    def step(self, params, grads):
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1 - self.b1 ** self.t
        c2 = 1 - self.b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class _RmsProp:
    def __init__(self, lr, decay=0.9, eps=1e-8):
        self.lr, self.decay, self.eps = lr, decay, eps
        self.s = None

    def step(self, params, grads):
        if self.s is None:
            self.s = [np.zeros_like(p) for p in params]
        for p, g, s in zip(params, grads, self.s):
            s *= self.decay
            s += (1 - self.decay) * g * g
            p -= self.lr * g / (np.sqrt(s) + self.eps)


def make_optimizer(kind: Optimizer, lr: float):
    return {Optimizer.SGD: _Sgd, Optimizer.ADAM: _Adam, Optimizer.RMSPROP: _RmsProp}[Optimizer(kind)](lr)


def one_hot(labels, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValueError(f"labels must lie in [0, {n_classes})")
    out = np.zeros((labels.size, n_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def _targets(model: NeuralModel, y) -> np.ndarray:
    y = np.asarray(y)
    if model.loss is Loss.CROSS_ENTROPY:
        if y.ndim == 1:
            return one_hot(y, model.n_outputs)
        if y.shape[1] != model.n_outputs:
            raise ShapeError(f"targets have {y.shape[1]} columns, model outputs {model.n_outputs}")
        return y.astype(np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        y = y[None, :]
    if y.shape[1] != model.n_outputs:
        raise ShapeError(f"targets have {y.shape[1]} columns, model outputs {model.n_outputs}")
    return y


def train(model: NeuralModel, features, targets, config: TrainConfig = TrainConfig()) -> TrainedModel:
    """Train a copy of ``model``; the input model is left untouched.

    Classification targets may be integer labels or one-hot rows; autoencoder
    targets are reconstruction rows (usually ``features`` itself).
    """
    X = model.check_input(features)
    Y = _targets(model, targets)
    n = X.shape[0]
    if Y.shape[0] != n:
        raise ShapeError(f"{n} feature rows but {Y.shape[0]} targets")
    if config.batch_size > n:
        raise ValueError(f"batch_size {config.batch_size} exceeds training set size {n}")

    net = model.copy()
    rng = np.random.default_rng(config.seed)
    opt = make_optimizer(config.optimizer, config.learning_rate)
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            loss = net.loss_and_grads(X[idx], Y[idx], training=True, rng=rng)
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"loss became {loss} at epoch {epoch + 1}, batch starting {start} "
                    f"(optimizer={config.optimizer.value}, lr={config.learning_rate})")
            total += loss * idx.size
            params, grads = [], []
            for layer in net.layers:
                for k in sorted(layer.params):
                    params.append(layer.params[k])
                    grads.append(layer.grads[k])
            opt.step(params, grads)
        history.append(total / n)
        log.debug("epoch %d loss %.6f", epoch + 1, history[-1])
    net.trained = True
    return TrainedModel(net, history, config)


def _unwrap(model) -> NeuralModel:
    return model.model if isinstance(model, TrainedModel) else model


def _as_matrix(x):
    if isinstance(x, FeatureVector):
        return x.values
    return x


def predict_proba(model, features) -> np.ndarray:
    """Class probabilities (dropout off). 1-D input gives a 1-D result."""
    net = _unwrap(model)
    if net.loss is not Loss.CROSS_ENTROPY:
        raise ShapeError("predict_proba needs a classification model")
    raw = _as_matrix(features)
    X = net.check_input(raw)
    p = softmax(net.forward(X, training=False))
    return p[0] if np.ndim(raw) == 1 else p


def predict(model, features) -> np.ndarray:
    return np.argmax(np.atleast_2d(predict_proba(model, features)), axis=1)


def logits(model, features) -> np.ndarray:
    net = _unwrap(model)
    return net.forward(net.check_input(_as_matrix(features)), training=False)


def reconstruct(model, features) -> np.ndarray:
    net = _unwrap(model)
    return net.forward(net.check_input(_as_matrix(features)), training=False)


def encode_matrix(model, features) -> np.ndarray:
    net = _unwrap(model)
    if net.encoder_depth is None:
        raise ShapeError("model has no encoder")
    if not net.trained:
        raise UntrainedModelError("encode needs a trained autoencoder")
    return net.forward(net.check_input(_as_matrix(features)), training=False, upto=net.encoder_depth)


def encode(model, feature_vector) -> FeatureVector:
    """Bottleneck activations for one input."""
    code = encode_matrix(model, feature_vector)[0]
    return FeatureVector(code, Pipeline.AE_ENCODED, code.size)


def numeric_gradient_check(model, sample, epsilon: float = 1e-5, n_checks: int = 40,
                           seed: int = 0) -> float:
    """Max relative error between backprop and central differences.

    ``sample`` is ``(x, target)``; a random subset of ``n_checks`` parameter
    entries per tensor is probed with dropout disabled.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    net = _unwrap(model).copy()
    x, t = sample
    X = net.check_input(x)
    T = _targets(net, np.atleast_1d(t) if net.loss is Loss.CROSS_ENTROPY and np.ndim(t) == 0 else t)
    net.loss_and_grads(X, T, training=False)
    analytic = {(i, k): layer.grads[k].copy() for i, layer in enumerate(net.layers) for k in layer.params}

    def loss_at() -> float:
        out = net.forward(X, training=False)
        if net.loss is Loss.CROSS_ENTROPY:
            p = softmax(out)
            data = -np.sum(T * np.log(np.clip(p, 1e-300, None))) / X.shape[0]
        else:
            data = np.mean((out - T) ** 2)
        return float(data) + net.l2_penalty()

    rng = np.random.default_rng(seed)
    worst = 0.0
    for i, name, arr in net.parameters():
        flat = arr.reshape(-1)
        picks = rng.choice(flat.size, size=min(n_checks, flat.size), replace=False)
        ga = analytic[(i, name)].reshape(-1)
        for j in picks:
            old = flat[j]
            flat[j] = old + epsilon
            up = loss_at()
            flat[j] = old - epsilon
            down = loss_at()
            flat[j] = old
            num = (up - down) / (2 * epsilon)
            a = ga[j]
            scale = max(abs(a), abs(num))
            # below 1e-8 both are numerically zero
            if scale > 1e-8:
                worst = max(worst, abs(a - num) / scale)
    return worst
