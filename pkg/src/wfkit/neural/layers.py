"""Layer specs and their numpy forward/backward passes (float64 throughout)."""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class LayerKind(str, enum.Enum):
    DENSE = "Dense"
    CONV1D = "Conv1D"
    MAXPOOL1D = "MaxPool1D"
    DROPOUT = "Dropout"
    SOFTMAX_OUTPUT = "SoftmaxOutput"


class Activation(str, enum.Enum):
    TANH = "Tanh"
    RELU = "Relu"
    SIGMOID = "Sigmoid"
    LEAKY_RELU = "LeakyRelu"
    ELU = "Elu"
    LINEAR = "Linear"


LEAKY_ALPHA = 0.1


@dataclass(frozen=True)
class LayerSpec:
    kind: LayerKind
    units: int = 0
    filter_width: int = 0
    pool_width: int = 0
    activation: Activation = Activation.LINEAR
    l2: float = 0.0
    keep_prob: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", LayerKind(self.kind))
        object.__setattr__(self, "activation", Activation(self.activation))
        if self.l2 < 0:
            raise ValueError("l2 must be non-negative")
        if not 0.0 < self.keep_prob <= 1.0:
            raise ValueError("keep_prob must lie in (0, 1]")
        if self.kind in (LayerKind.DENSE, LayerKind.CONV1D, LayerKind.SOFTMAX_OUTPUT) and self.units < 1:
            raise ValueError(f"{self.kind.value} needs units >= 1")
        if self.kind is LayerKind.CONV1D and self.filter_width < 1:
            raise ValueError("Conv1D needs filter_width >= 1")
        if self.kind is LayerKind.MAXPOOL1D and self.pool_width < 1:
            raise ValueError("MaxPool1D needs pool_width >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        d["activation"] = self.activation.value
        return d


def activate(z: np.ndarray, act: Activation) -> np.ndarray:
    if act is Activation.TANH:
        return np.tanh(z)
    if act is Activation.RELU:
        return np.maximum(z, 0.0)
    if act is Activation.SIGMOID:
        return 0.5 * (1.0 + np.tanh(0.5 * z))
    if act is Activation.LEAKY_RELU:
        return np.where(z > 0, z, LEAKY_ALPHA * z)
    if act is Activation.ELU:
        return np.where(z > 0, z, np.expm1(np.minimum(z, 0.0)))
    return z


def activate_grad(z: np.ndarray, a: np.ndarray, act: Activation) -> np.ndarray:
    """d activation / d z, given pre-activation ``z`` and output ``a``."""
    if act is Activation.TANH:
        return 1.0 - a * a
    if act is Activation.RELU:
        return (z > 0).astype(np.float64)
    if act is Activation.SIGMOID:
        return a * (1.0 - a)
    if act is Activation.LEAKY_RELU:
        return np.where(z > 0, 1.0, LEAKY_ALPHA)
    if act is Activation.ELU:
        return np.where(z > 0, 1.0, a + 1.0)
    return np.ones_like(z)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _uniform_init(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    # variance 1/fan_in
    limit = np.sqrt(3.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    """Base class; ``params`` and ``grads`` share keys."""

    has_weights = False

    def __init__(self, spec: LayerSpec, in_shape: tuple[int, ...]):
        self.spec = spec
        self.in_shape = in_shape
        self.out_shape = in_shape
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self._cache = None

    def init_params(self, rng: np.random.Generator) -> None:
        pass

    def forward(self, x, training=False, rng=None):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    def l2_penalty(self) -> float:
        if self.spec.l2 and "W" in self.params:
            return 0.5 * self.spec.l2 * float(np.sum(self.params["W"] ** 2))
        return 0.0


class Dense(Layer):
    has_weights = True

    def __init__(self, spec, in_shape):
        super().__init__(spec, in_shape)
        self.fan_in = int(np.prod(in_shape))
        self.out_shape = (spec.units,)

    def init_params(self, rng):
        self.params = {
            "W": _uniform_init(rng, self.fan_in, (self.fan_in, self.spec.units)),
            "b": np.zeros(self.spec.units),
        }

    @property
    def activation(self) -> Activation:
        return self.spec.activation

    def forward(self, x, training=False, rng=None):
        x2 = x.reshape(x.shape[0], -1)
        z = x2 @ self.params["W"] + self.params["b"]
        a = activate(z, self.activation)
        self._cache = (x.shape, x2, z, a)
        return a

    def backward(self, grad):
        shape, x2, z, a = self._cache
        dz = grad * activate_grad(z, a, self.activation)
        W = self.params["W"]
        self.grads = {"W": x2.T @ dz + self.spec.l2 * W, "b": dz.sum(axis=0)}
        return (dz @ W.T).reshape(shape)


class SoftmaxOutput(Dense):
    """Linear logits; softmax is applied by the loss / prediction code."""

    @property
    def activation(self) -> Activation:
        return Activation.LINEAR


class Conv1D(Layer):
    """Valid 1-D convolution over (batch, length, channels)."""

    has_weights = True

    def __init__(self, spec, in_shape):
        super().__init__(spec, in_shape)
        length, channels = in_shape if len(in_shape) == 2 else (in_shape[0], 1)
        if spec.filter_width > length:
            raise ValueError(f"filter width {spec.filter_width} exceeds input width {length}")
        self.length, self.channels = length, channels
        self.out_shape = (length - spec.filter_width + 1, spec.units)

    def init_params(self, rng):
        fan_in = self.channels * self.spec.filter_width
        self.params = {
            "W": _uniform_init(rng, fan_in, (fan_in, self.spec.units)),
            "b": np.zeros(self.spec.units),
        }

    def forward(self, x, training=False, rng=None):
        x3 = x.reshape(x.shape[0], self.length, self.channels)
        w = self.spec.filter_width
        # (N, L', C, w) -> (N, L', C*w), channel-major to match W's row order
        cols = sliding_window_view(x3, w, axis=1).reshape(x.shape[0], self.out_shape[0], -1)
        z = cols @ self.params["W"] + self.params["b"]
        a = activate(z, self.spec.activation)
        self._cache = (x.shape, cols, z, a)
        return a

    def backward(self, grad):
        shape, cols, z, a = self._cache
        n, lout, f = grad.shape
        dz = grad * activate_grad(z, a, self.spec.activation)
        W = self.params["W"]
        self.grads = {
            "W": cols.reshape(n * lout, -1).T @ dz.reshape(n * lout, f) + self.spec.l2 * W,
            "b": dz.sum(axis=(0, 1)),
        }
        w = self.spec.filter_width
        dcols = (dz @ W.T).reshape(n, lout, self.channels, w)
        dx = np.zeros((n, self.length, self.channels))
        for k in range(w):
            dx[:, k:k + lout, :] += dcols[:, :, :, k]
        return dx.reshape(shape)


class MaxPool1D(Layer):
    def __init__(self, spec, in_shape):
        super().__init__(spec, in_shape)
        length, channels = in_shape if len(in_shape) == 2 else (in_shape[0], 1)
        if spec.pool_width > length:
            raise ValueError(f"pool width {spec.pool_width} exceeds input width {length}")
        self.length, self.channels = length, channels
        self.out_shape = (length // spec.pool_width, channels)

    def forward(self, x, training=False, rng=None):
        p = self.spec.pool_width
        n = x.shape[0]
        lp = self.out_shape[0]
        xr = x.reshape(n, self.length, self.channels)[:, : lp * p].reshape(n, lp, p, self.channels)
        idx = xr.argmax(axis=2)
        self._cache = (x.shape, idx)
        return np.take_along_axis(xr, idx[:, :, None, :], axis=2)[:, :, 0, :]

    def backward(self, grad):
        shape, idx = self._cache
        p = self.spec.pool_width
        n, lp, c = grad.shape
        mask = np.arange(p)[None, None, :, None] == idx[:, :, None, :]
        dx = np.zeros((n, self.length, self.channels))
        dx[:, : lp * p] = (mask * grad[:, :, None, :]).reshape(n, lp * p, c)
        return dx.reshape(shape)


class Dropout(Layer):
    """Inverted dropout: kept units are scaled by 1/keep_prob at train time."""

    def forward(self, x, training=False, rng=None):
        keep = self.spec.keep_prob
        if not training or keep >= 1.0:
            self._cache = None
            return x
        mask = (rng.random(x.shape) < keep) / keep
        self._cache = mask
        return x * mask

    def backward(self, grad):
        return grad if self._cache is None else grad * self._cache


LAYER_TYPES = {
    LayerKind.DENSE: Dense,
    LayerKind.CONV1D: Conv1D,
    LayerKind.MAXPOOL1D: MaxPool1D,
    LayerKind.DROPOUT: Dropout,
    LayerKind.SOFTMAX_OUTPUT: SoftmaxOutput,
}


def make_layer(spec: LayerSpec, in_shape: tuple[int, ...]) -> Layer:
    return LAYER_TYPES[spec.kind](spec, in_shape)
