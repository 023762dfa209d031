"""From-scratch dense/convolutional networks: MLP, CNN and autoencoder."""

from .layers import Activation, LayerKind, LayerSpec, softmax
from .model import (
    Loss,
    NeuralModel,
    ShapeError,
    build_ae,
    build_cnn,
    build_mlp,
    dumps_model,
    load_model,
    model_from_dict,
    model_to_dict,
    save_model,
)
from .train import (
    AE_TRAIN_CONFIG,
    Optimizer,
    TrainConfig,
    TrainedModel,
    TrainingDivergedError,
    UntrainedModelError,
    encode,
    encode_matrix,
    logits,
    numeric_gradient_check,
    one_hot,
    predict,
    predict_proba,
    reconstruct,
    train,
)
