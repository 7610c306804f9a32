"""Multinomial logistic regression as flat parameter vectors.

The global model is a single weight matrix plus bias, flattened to one
vector of length features*classes + classes so gradients can be encoded,
encrypted and aggregated coordinate-wise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class GlobalModel:
    weights: np.ndarray  # [features, classes]
    bias: np.ndarray  # [classes]
    lr: float
    round_index: int = 0

    @property
    def dims(self) -> int:
        return self.weights.size + self.bias.size

    def flat(self) -> np.ndarray:
        return np.concatenate([self.weights.ravel(), self.bias])

    def set_flat(self, flat: np.ndarray) -> None:
        w_size = self.weights.size
        self.weights = flat[:w_size].reshape(self.weights.shape).copy()
        self.bias = flat[w_size:].copy()

    def apply_gradient(self, flat_gradient: np.ndarray) -> None:
        self.set_flat(self.flat() - self.lr * flat_gradient)
        self.round_index += 1


def init_model(features: int, classes: int, lr: float, rng: np.random.Generator) -> GlobalModel:
    weights = rng.normal(0.0, 0.01, size=(features, classes))
    return GlobalModel(weights, np.zeros(classes), lr)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def cross_entropy_gradient(
    flat_params: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    features: int,
    classes: int,
) -> np.ndarray:
    """Mean gradient of softmax cross-entropy over the batch, flattened."""
    w = flat_params[: features * classes].reshape(features, classes)
    b = flat_params[features * classes :]
    probs = softmax(x @ w + b)
    probs[np.arange(len(y)), y] -= 1.0
    probs /= len(y)
    grad_w = x.T @ probs
    grad_b = probs.sum(axis=0)
    return np.concatenate([grad_w.ravel(), grad_b])


def cross_entropy_loss(
    flat_params: np.ndarray, x: np.ndarray, y: np.ndarray, features: int, classes: int
) -> float:
    w = flat_params[: features * classes].reshape(features, classes)
    b = flat_params[features * classes :]
    probs = softmax(x @ w + b)
    return float(-np.log(probs[np.arange(len(y)), y] + 1e-300).mean())


def accuracy(model: GlobalModel, x: np.ndarray, y: np.ndarray) -> float:
    preds = np.argmax(x @ model.weights + model.bias, axis=1)
    return float((preds == y).mean())


def class_accuracy(model: GlobalModel, x: np.ndarray, y: np.ndarray, label: int) -> float:
    mask = y == label
    if not mask.any():
        return float("nan")
    preds = np.argmax(x[mask] @ model.weights + model.bias, axis=1)
    return float((preds == label).mean())
