"""Single-hidden-layer perceptron (reLU, sigmoid head) trained with minibatch SGD.

Objective: mean cross-entropy over the dataset plus L2 weight decay
alpha * (||W1||^2 + ||W2||^2) / (2 n); biases are not penalized.  Gradients
are hand-derived and finite-difference-checked by the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, NonFiniteLoss
from .common import bce_from_logits, check_binary_labels, params_from_json, params_to_json, sigmoid


@dataclass(frozen=True)
class MlpModel:
    W1: np.ndarray  # (hidden, d)
    b1: np.ndarray  # (hidden,)
    W2: np.ndarray  # (1, hidden)
    b2: float
    l2_alpha: float

    def to_json(self, fingerprint_text: str = "") -> str:
        return params_to_json(
            "mlp",
            {"hidden": int(self.W1.shape[0]), "l2_alpha": self.l2_alpha},
            {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": np.array([self.b2])},
            fingerprint_text,
        )

    @classmethod
    def from_json(cls, text: str) -> "MlpModel":
        hp, p = params_from_json(text, "mlp")
        return cls(W1=p["W1"], b1=p["b1"], W2=p["W2"], b2=float(p["b2"][0]),
                   l2_alpha=hp["l2_alpha"])


def _glorot(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    r = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-r, r, size=(fan_out, fan_in))


def _forward(model: MlpModel, X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    pre = X @ model.W1.T + model.b1
    hidden = np.maximum(pre, 0.0)
    logits = hidden @ model.W2.ravel() + model.b2
    return pre, hidden, logits


def mlp_predict(model: MlpModel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.W1.shape[1]:
        raise DimensionMismatch(f"X has {X.shape[1]} features, model has {model.W1.shape[1]}")
    _, _, logits = _forward(model, X)
    return sigmoid(logits)


def mlp_loss_and_grads(
    model: MlpModel, X: np.ndarray, y: np.ndarray, n_total: int | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and exact gradients on one batch; n_total scales the L2 term."""
    n_total = n_total if n_total is not None else len(y)
    pre, hidden, logits = _forward(model, X)
    p = sigmoid(logits)
    loss = bce_from_logits(logits, y)
    loss += model.l2_alpha * (np.sum(model.W1**2) + np.sum(model.W2**2)) / (2.0 * n_total)

    dlogits = (p - y) / len(y)
    gW2 = (dlogits @ hidden)[None, :] + model.l2_alpha * model.W2 / n_total
    gb2 = float(dlogits.sum())
    dhidden = np.outer(dlogits, model.W2.ravel())
    dpre = dhidden * (pre > 0.0)
    gW1 = dpre.T @ X + model.l2_alpha * model.W1 / n_total
    gb1 = dpre.sum(axis=0)
    return float(loss), {"W1": gW1, "b1": gb1, "W2": gW2, "b2": np.array([gb2])}


def mlp_train(
    X: np.ndarray,
    y: np.ndarray,
    hidden: int = 100,
    l2_alpha: float = 1.0,
    epochs: int = 500,
    lr_rate: float = 0.01,
    batch_size: int = 32,
    seed: int = 0,
) -> tuple[MlpModel, list[float]]:
    """Minibatch SGD with seed-derived shuffling; returns (model, loss curve)."""
    X = np.asarray(X, dtype=np.float64)
    y = check_binary_labels(y)
    if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] < 2:
        raise DimensionMismatch(f"X {X.shape} incompatible with y {y.shape}")
    n, d = X.shape
    rng = np.random.default_rng(seed)
    model = MlpModel(
        W1=_glorot(rng, hidden, d),
        b1=np.zeros(hidden),
        W2=_glorot(rng, 1, hidden),
        b2=0.0,
        l2_alpha=l2_alpha,
    )
    losses: list[float] = []
    for epoch in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            _, grads = mlp_loss_and_grads(model, X[idx], y[idx], n_total=n)
            model = MlpModel(
                W1=model.W1 - lr_rate * grads["W1"],
                b1=model.b1 - lr_rate * grads["b1"],
                W2=model.W2 - lr_rate * grads["W2"],
                b2=model.b2 - lr_rate * float(grads["b2"][0]),
                l2_alpha=l2_alpha,
            )
        epoch_loss, _ = mlp_loss_and_grads(model, X, y, n_total=n)
        if not np.isfinite(epoch_loss):
            raise NonFiniteLoss(epoch)
        losses.append(epoch_loss)
    return model, losses
