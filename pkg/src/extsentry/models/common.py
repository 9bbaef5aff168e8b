"""Shared numerics and model-file helpers for the from-scratch classifiers."""

from __future__ import annotations

import hashlib
import json

import numpy as np

from ..errors import DegenerateLabels
from ..io_util import canon_json

MODEL_FILE_VERSION = 1


def sigmoid(z: np.ndarray | float) -> np.ndarray | float:
    """Numerically stable logistic function."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


def bce_from_logits(logits: np.ndarray, y: np.ndarray) -> float:
    """Mean binary cross-entropy computed from logits (no overflow)."""
    logits = np.asarray(logits, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return float(np.mean(np.logaddexp(0.0, logits) - y * logits))


def check_binary_labels(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64).ravel()
    classes = np.unique(y)
    if not np.all(np.isin(classes, (0.0, 1.0))):
        raise ValueError(f"labels must be 0/1, got {classes}")
    if classes.size < 2:
        raise DegenerateLabels("training labels contain a single class")
    return y


def fingerprint(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def params_to_json(kind: str, hyperparams: dict, parameters: dict[str, np.ndarray],
                   fingerprint_text: str = "") -> str:
    """Versioned JSON model file: parameters stored as nested lists."""
    payload = {
        "kind": kind,
        "version": MODEL_FILE_VERSION,
        "hyperparams": hyperparams,
        "parameters": {k: np.asarray(v, dtype=np.float64).tolist() for k, v in parameters.items()},
        "fingerprint": fingerprint(fingerprint_text) if fingerprint_text else "",
    }
    return canon_json(payload)


def params_from_json(text: str, expect_kind: str) -> tuple[dict, dict[str, np.ndarray]]:
    obj = json.loads(text)
    if obj.get("kind") != expect_kind:
        raise ValueError(f"model file kind {obj.get('kind')!r}, expected {expect_kind!r}")
    params = {k: np.asarray(v, dtype=np.float64) for k, v in obj["parameters"].items()}
    return obj["hyperparams"], params
