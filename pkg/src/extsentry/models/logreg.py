"""L1-regularized logistic regression trained by proximal gradient descent.

Objective: mean cross-entropy + lambda * ||w||_1 (bias unpenalized).  Each
step takes a full-batch gradient step on the smooth part followed by the
soft-threshold proximal map, so large lambda drives weights exactly to zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, NonFiniteLoss
from .common import bce_from_logits, check_binary_labels, params_from_json, params_to_json, sigmoid


@dataclass(frozen=True)
class LogRegModel:
    weights: np.ndarray
    bias: float
    l1_lambda: float

    def to_json(self, fingerprint_text: str = "") -> str:
        return params_to_json(
            "lr",
            {"l1_lambda": self.l1_lambda},
            {"weights": self.weights, "bias": np.array([self.bias])},
            fingerprint_text,
        )

    @classmethod
    def from_json(cls, text: str) -> "LogRegModel":
        hp, params = params_from_json(text, "lr")
        return cls(weights=params["weights"], bias=float(params["bias"][0]),
                   l1_lambda=hp["l1_lambda"])


def lr_gradient(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    """Gradient of the smooth part (mean cross-entropy) at (w, b)."""
    p = sigmoid(X @ w + b)
    err = (p - y) / len(y)
    return X.T @ err, float(err.sum())


def _soft_threshold(w: np.ndarray, thresh: float) -> np.ndarray:
    return np.sign(w) * np.maximum(np.abs(w) - thresh, 0.0)


def lr_train(
    X: np.ndarray,
    y: np.ndarray,
    l1_lambda: float = 1e-3,
    epochs: int = 500,
    lr_rate: float = 0.1,
    seed: int = 0,
) -> tuple[LogRegModel, list[float]]:
    """Full-batch proximal gradient descent from zero init; returns loss curve.

    Deterministic given the seed (init is zeros, so the seed only fixes the
    contract with the other trainers).
    """
    X = np.asarray(X, dtype=np.float64)
    y = check_binary_labels(y)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] < 2:
        raise DimensionMismatch(f"X {X.shape} incompatible with y {y.shape}")
    w = np.zeros(X.shape[1])
    b = 0.0
    losses: list[float] = []
    for epoch in range(epochs):
        gw, gb = lr_gradient(w, b, X, y)
        w = _soft_threshold(w - lr_rate * gw, lr_rate * l1_lambda)
        b -= lr_rate * gb
        loss = bce_from_logits(X @ w + b, y) + l1_lambda * np.abs(w).sum()
        if not np.isfinite(loss):
            raise NonFiniteLoss(epoch)
        losses.append(loss)
    return LogRegModel(weights=w, bias=b, l1_lambda=l1_lambda), losses


def lr_predict(model: LogRegModel, x: np.ndarray) -> float | np.ndarray:
    """sigmoid(w . x + b); accepts a single vector or a matrix of rows."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.weights.shape[0]:
        raise DimensionMismatch(
            f"x has {x.shape[-1]} features, model has {model.weights.shape[0]}")
    z = x @ model.weights + model.bias
    return sigmoid(z)
