from .layers import (BatchNorm, Conv2D, Dense, Flatten, MaxPool, ReLU,
                     softmax, softmax_crossentropy)
from .model import (Architecture, Model, ModelFormatError, LABEL_BAD,
                    LABEL_GOOD, init_model, load_model, predict, save_model)
from .train import CurvePoint, Metrics, TrainConfig, evaluate, sgdm_step, train

__all__ = [
    "Architecture", "BatchNorm", "Conv2D", "CurvePoint", "Dense", "Flatten",
    "LABEL_BAD", "LABEL_GOOD", "MaxPool", "Metrics", "Model",
    "ModelFormatError", "ReLU", "TrainConfig", "evaluate", "init_model",
    "load_model", "predict", "save_model", "sgdm_step", "softmax",
    "softmax_crossentropy", "train",
]
