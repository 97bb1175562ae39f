"""SGD-with-momentum training loop and evaluation.

Training is single-threaded and bit-reproducible: the epoch shuffle comes
from the config seed's own PCG32 stream and every floating-point operation
is ordered identically run to run.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..core import Rng
from .layers import softmax_crossentropy
from .model import Model

SHUFFLE_STREAM = 3


@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    momentum: float = 0.1
    l2: float = 1e-4
    minibatch: int = 256
    epochs: int = 10
    validation_every: int = 50
    seed: int = 1

    def __post_init__(self):
        if self.learning_rate <= 0 or self.minibatch <= 0:
            raise ValueError("learning_rate and minibatch must be positive")
        if self.momentum < 0 or self.l2 < 0 or self.epochs < 0:
            raise ValueError("momentum, l2 and epochs must be non-negative")
        if self.validation_every <= 0:
            raise ValueError("validation_every must be positive")


@dataclass
class Metrics:
    accuracy: float
    confusion: np.ndarray          # 2x2 counts, rows = true, cols = predicted
    misclassified: list[int]
    loss: float

    def as_dict(self) -> dict:
        return {
            "accuracy": round(self.accuracy, 4),
            "confusion": self.confusion.tolist(),
            "misclassified": list(self.misclassified),
            "loss": self.loss,
            "count": int(self.confusion.sum()),
        }


@dataclass
class CurvePoint:
    iteration: int
    train_loss: float
    val_accuracy: float


def sgdm_step(param: np.ndarray, grad: np.ndarray, velocity: np.ndarray,
              cfg: TrainConfig, decay: bool) -> None:
    """v <- m*v - lr*(g + l2*p); p <- p + v. L2 applies to weights only."""
    g = grad
    if decay and cfg.l2 > 0:
        g = grad + cfg.l2 * param
    velocity *= cfg.momentum
    velocity -= cfg.learning_rate * g
    param += velocity


def _forward_batches(model: Model, images: np.ndarray, batch: int) -> np.ndarray:
    logits = np.empty((images.shape[0], 2), dtype=np.float32)
    for lo in range(0, images.shape[0], batch):
        hi = min(lo + batch, images.shape[0])
        logits[lo:hi] = model.forward(images[lo:hi], train=False)
    model.release_caches()
    return logits


def evaluate(model: Model, images: np.ndarray, labels: np.ndarray,
             ids: np.ndarray | None = None, batch: int = 256) -> Metrics:
    """Inference-mode metrics: accuracy, confusion matrix, misclassified ids."""
    if images.shape[0] == 0:
        raise ValueError("cannot evaluate an empty dataset")
    labels = np.asarray(labels, dtype=np.int64)
    if ids is None:
        ids = np.arange(images.shape[0])
    logits = _forward_batches(model, images, batch)
    loss, _ = softmax_crossentropy(logits, labels)
    pred = np.argmax(logits, axis=1)
    confusion = np.zeros((2, 2), dtype=np.int64)
    np.add.at(confusion, (labels, pred), 1)
    wrong = np.flatnonzero(pred != labels)
    return Metrics(
        accuracy=float((pred == labels).mean()),
        confusion=confusion,
        misclassified=[int(ids[i]) for i in wrong],
        loss=loss,
    )


def train(model: Model, train_images: np.ndarray, train_labels: np.ndarray,
          val_images: np.ndarray, val_labels: np.ndarray, cfg: TrainConfig,
          log=None) -> tuple[Model, list[CurvePoint]]:
    """Run the full regimen; returns the model and the validation curve.

    Inputs are standardized by the training-set mean image, which is
    stored on the model and applied by every forward pass from then on
    (training, validation, and later inference all see centered data).
    Epochs are shuffled with the seeded generator; every minibatch (the
    final partial one included) takes one forward/backward/update step.
    Validation accuracy is recorded every cfg.validation_every iterations
    and once more after the last step.
    """
    n = train_images.shape[0]
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    train_labels = np.asarray(train_labels, dtype=np.int64)
    if cfg.epochs > 0:
        model.input_mean[:] = train_images.mean(axis=0, dtype=np.float64)
    rng = Rng(cfg.seed, stream=SHUFFLE_STREAM)
    velocities = {name: np.zeros_like(p) for name, p, _, _ in model.params()}
    curve: list[CurvePoint] = []
    iteration = 0
    loss = float("nan")

    def validate() -> float:
        return evaluate(model, val_images, val_labels, batch=cfg.minibatch).accuracy

    for epoch in range(cfg.epochs):
        order = np.arange(n)
        rng.shuffle(order)
        epoch_start = time.time()
        for lo in range(0, n, cfg.minibatch):
            batch_idx = order[lo:lo + cfg.minibatch]
            x = train_images[batch_idx]
            y = train_labels[batch_idx]
            logits = model.forward(x, train=True)
            loss, dlogits = softmax_crossentropy(logits, y)
            model.backward(dlogits)
            for name, param, grad, decay in model.params():
                sgdm_step(param, grad, velocities[name], cfg, decay)
            iteration += 1
            if iteration % cfg.validation_every == 0:
                curve.append(CurvePoint(iteration, loss, validate()))
        if log:
            log(f"epoch {epoch + 1}/{cfg.epochs}: loss {loss:.4f} "
                f"({time.time() - epoch_start:.1f}s)")
    model.release_caches()
    if cfg.epochs > 0 and (not curve or curve[-1].iteration != iteration):
        curve.append(CurvePoint(iteration, loss, validate()))
    return model, curve
