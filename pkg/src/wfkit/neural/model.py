"""Layered model container, the three architectures, and JSON persistence."""

from __future__ import annotations

import base64
import copy
import enum
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .layers import Activation, Layer, LayerKind, LayerSpec, make_layer, softmax

FORMAT = "wfkit.neural-model"
FORMAT_VERSION = 1


class Loss(str, enum.Enum):
    CROSS_ENTROPY = "CategoricalCrossEntropy"
    MSE = "MeanSquaredError"


class ShapeError(ValueError):
    pass


class NeuralModel:
    """An ordered stack of layers plus the loss it is trained against.

    ``encoder_depth`` is set for autoencoders: the number of leading layers
    whose output is the bottleneck code.
    """

    def __init__(self, specs: Sequence[LayerSpec], input_dim: int, loss: Loss | str,
                 seed: int = 0, encoder_depth: int | None = None):
        if input_dim < 1:
            raise ShapeError("input_dim must be >= 1")
        self.specs = tuple(specs)
        self.input_dim = int(input_dim)
        self.loss = Loss(loss)
        self.seed = int(seed)
        self.encoder_depth = encoder_depth
        self.trained = False
        self.layers: list[Layer] = []
        shape: tuple[int, ...] = (self.input_dim,)
        rng = np.random.default_rng(self.seed)
        for spec in self.specs:
            if spec.kind in (LayerKind.CONV1D, LayerKind.MAXPOOL1D) and len(shape) == 1:
                shape = (shape[0], 1)
            try:
                layer = make_layer(spec, shape)
            except ValueError as exc:
                raise ShapeError(str(exc)) from None
            layer.init_params(rng)
            self.layers.append(layer)
            shape = layer.out_shape
        self.output_shape = shape
        if self.loss is Loss.CROSS_ENTROPY and (not self.specs or self.specs[-1].kind is not LayerKind.SOFTMAX_OUTPUT):
            raise ShapeError("cross-entropy models must end in a SoftmaxOutput layer")

    @property
    def n_outputs(self) -> int:
        return int(np.prod(self.output_shape))

    @property
    def n_classes(self) -> int | None:
        return self.n_outputs if self.loss is Loss.CROSS_ENTROPY else None

    @property
    def n_layers(self) -> int:
        """Input layer plus every non-dropout layer."""
        return 1 + sum(s.kind is not LayerKind.DROPOUT for s in self.specs)

    def check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ShapeError(f"model expects {self.input_dim} features, got shape {x.shape}")
        return x

    def forward(self, x: np.ndarray, training: bool = False, rng=None, upto: int | None = None) -> np.ndarray:
        out = x
        for layer in self.layers[:upto]:
            out = layer.forward(out, training, rng)
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def loss_and_grads(self, x, targets, training=False, rng=None) -> float:
        """Forward + backward on one batch; gradients land in ``layer.grads``."""
        out = self.forward(x, training, rng)
        n = x.shape[0]
        if self.loss is Loss.CROSS_ENTROPY:
            p = softmax(out)
            data_loss = -np.sum(targets * np.log(np.clip(p, 1e-300, None))) / n
            grad = (p - targets) / n
        else:
            diff = out - targets
            data_loss = float(np.mean(diff ** 2))
            grad = 2.0 * diff / diff.size
        self.backward(grad)
        return float(data_loss) + self.l2_penalty()

    def l2_penalty(self) -> float:
        return sum(layer.l2_penalty() for layer in self.layers)

    def parameters(self):
        """Yield (layer index, name, array) for every trainable tensor."""
        for i, layer in enumerate(self.layers):
            for name in sorted(layer.params):
                yield i, name, layer.params[name]

    def copy(self) -> "NeuralModel":
        new = copy.copy(self)
        new.layers = [copy.copy(layer) for layer in self.layers]
        for layer in new.layers:
            layer.params = {k: v.copy() for k, v in layer.params.items()}
            layer.grads = {}
            layer._cache = None
        return new

    def __repr__(self) -> str:
        kinds = "->".join(s.kind.value for s in self.specs)
        return f"NeuralModel({kinds}, input_dim={self.input_dim}, loss={self.loss.value})"


def build_mlp(input_dim: int, n_classes: int, hidden_units: Sequence[int] = (650, 650),
              activation: Activation | str = Activation.TANH, l2: float = 1e-4,
              keep_prob: float = 0.8, seed: int = 0) -> NeuralModel:
    """Dense -> Dropout -> Dense -> softmax, L2 on the hidden layers."""
    if n_classes < 2:
        raise ShapeError("n_classes must be >= 2")
    hidden_units = list(hidden_units)
    if len(hidden_units) < 1:
        raise ShapeError("need at least one hidden layer")
    specs = []
    for i, h in enumerate(hidden_units):
        if i:
            specs.append(LayerSpec(LayerKind.DROPOUT, keep_prob=keep_prob))
        specs.append(LayerSpec(LayerKind.DENSE, units=h, activation=activation, l2=l2))
    specs.append(LayerSpec(LayerKind.SOFTMAX_OUTPUT, units=n_classes))
    return NeuralModel(specs, input_dim, Loss.CROSS_ENTROPY, seed)


def build_cnn(input_dim: int, n_classes: int, n_filters: int = 32, filter_width: int = 3,
              pool_width: int = 2, hidden_units: int = 256,
              activation: Activation | str = Activation.TANH, l2: float = 1e-4,
              seed: int = 0) -> NeuralModel:
    """Conv1D -> MaxPool1D -> Dense -> softmax, L2 on the convolution."""
    if n_classes < 2:
        raise ShapeError("n_classes must be >= 2")
    if input_dim < filter_width:
        raise ShapeError(f"input_dim {input_dim} is smaller than filter width {filter_width}")
    specs = [
        LayerSpec(LayerKind.CONV1D, units=n_filters, filter_width=filter_width, activation=activation, l2=l2),
        LayerSpec(LayerKind.MAXPOOL1D, pool_width=pool_width),
        LayerSpec(LayerKind.DENSE, units=hidden_units, activation=activation),
        LayerSpec(LayerKind.SOFTMAX_OUTPUT, units=n_classes),
    ]
    return NeuralModel(specs, input_dim, Loss.CROSS_ENTROPY, seed)


def build_ae(input_dim: int, bottleneck: int = 20, hidden_units: int = 256,
             activation: Activation | str = Activation.TANH,
             output_activation: Activation | str = Activation.TANH, seed: int = 0) -> NeuralModel:
    """Two-layer encoder and two-layer decoder; the code is the second layer's output."""
    if not 1 <= bottleneck < input_dim:
        raise ShapeError(f"bottleneck must satisfy 1 <= bottleneck < input_dim ({input_dim})")
    specs = [
        LayerSpec(LayerKind.DENSE, units=hidden_units, activation=activation),
        LayerSpec(LayerKind.DENSE, units=bottleneck, activation=activation),
        LayerSpec(LayerKind.DENSE, units=hidden_units, activation=activation),
        LayerSpec(LayerKind.DENSE, units=input_dim, activation=output_activation),
    ]
    return NeuralModel(specs, input_dim, Loss.MSE, seed, encoder_depth=2)


# ---------------------------------------------------------------------------
# persistence

def _encode_array(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "dtype": "<f8", "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _decode_array(obj: dict) -> np.ndarray:
    raw = base64.b64decode(obj["data"])
    return np.frombuffer(raw, dtype=obj.get("dtype", "<f8")).astype(np.float64).reshape(obj["shape"])


def model_to_dict(model: NeuralModel, extra: dict | None = None) -> dict:
    out = {
        "format": FORMAT,
        "version": FORMAT_VERSION,
        "input_dim": model.input_dim,
        "loss": model.loss.value,
        "seed": model.seed,
        "encoder_depth": model.encoder_depth,
        "trained": model.trained,
        "layers": [
            {"spec": layer.spec.to_dict(), "params": {k: _encode_array(v) for k, v in sorted(layer.params.items())}}
            for layer in model.layers
        ],
    }
    if extra:
        out["extra"] = extra
    return out


def model_from_dict(obj: dict) -> NeuralModel:
    if obj.get("format") != FORMAT:
        raise ValueError(f"not a {FORMAT} document")
    if obj.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model version {obj.get('version')}")
    specs = [LayerSpec(**entry["spec"]) for entry in obj["layers"]]
    model = NeuralModel(specs, obj["input_dim"], obj["loss"], obj.get("seed", 0), obj.get("encoder_depth"))
    for layer, entry in zip(model.layers, obj["layers"]):
        params = {k: _decode_array(v) for k, v in entry["params"].items()}
        if set(params) != set(layer.params):
            raise ValueError("parameter names do not match layer spec")
        for k, v in params.items():
            if v.shape != layer.params[k].shape:
                raise ValueError(f"parameter {k} has shape {v.shape}, expected {layer.params[k].shape}")
        layer.params = params
    model.trained = bool(obj.get("trained", False))
    return model


def dumps_model(model: NeuralModel, extra: dict | None = None) -> str:
    return json.dumps(model_to_dict(model, extra), sort_keys=True, indent=1) + "\n"


def save_model(model: NeuralModel, path, extra: dict | None = None) -> None:
    Path(path).write_text(dumps_model(model, extra), encoding="utf-8")


def load_model(path) -> NeuralModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
