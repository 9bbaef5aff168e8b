"""Two-layer LSTM sequence classifier with hand-written backpropagation through time.

Architecture: embedding -> LSTM layer 1 -> dropout -> LSTM layer 2 -> sigmoid
head reading the last timestep's hidden state.  Gate blocks are stacked in
the order [input, forget, output, candidate] along the 4H axis; the forget
gate bias is initialized to +1.  Training uses RMSprop with global-norm
gradient clipping and is bitwise deterministic for a fixed seed.

Batches are padded with PAD=0 and masked so that a padded step carries the
hidden and cell state through unchanged; the state at the last timestep then
equals the state at each sequence's own final step, and gradients flow
through the pass-through exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from ..errors import DegenerateLabels, EmptySequence, IdOutOfRange, NonFiniteLoss
from ..io_util import pack_arrays, unpack_arrays
from .common import bce_from_logits, sigmoid

PARAM_NAMES = ("emb", "W1", "U1", "b1", "W2", "U2", "b2", "w_out", "b_out")


@dataclass
class TrainConfig:
    lr: float = 1e-3
    rho: float = 0.9
    eps: float = 1e-8
    batch_size: int = 16
    epochs: int = 20
    seed: int = 0
    bptt_truncation: int = 0  # 0 = full backpropagation through time
    clip_norm: float = 5.0

    def __post_init__(self):
        if self.lr <= 0 or not (0.0 < self.rho < 1.0):
            raise ValueError("lr must be positive and rho in (0,1)")


@dataclass
class LstmModel:
    params: dict[str, np.ndarray]
    vocab_size: int
    embed_dim: int
    hidden: int
    dropout_p: float = 0.2
    vocab_fingerprint: str = ""

    def save_bytes(self) -> bytes:
        meta = {
            "kind": "lstm", "version": 1,
            "vocab_size": self.vocab_size, "embed_dim": self.embed_dim,
            "hidden": self.hidden, "dropout_p": self.dropout_p,
            "gate_order": "ifog", "vocab_fingerprint": self.vocab_fingerprint,
        }
        return pack_arrays(meta, self.params)

    @classmethod
    def load_bytes(cls, data: bytes) -> "LstmModel":
        meta, params = unpack_arrays(data)
        if meta.get("kind") != "lstm":
            raise ValueError("not an lstm model file")
        return cls(params=params, vocab_size=meta["vocab_size"],
                   embed_dim=meta["embed_dim"], hidden=meta["hidden"],
                   dropout_p=meta["dropout_p"],
                   vocab_fingerprint=meta.get("vocab_fingerprint", ""))


def _glorot(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    fan_out, fan_in = shape if len(shape) == 2 else (shape[0], 1)
    r = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-r, r, size=shape)


def init_lstm(vocab_size: int, embed_dim: int = 32, hidden: int = 200,
              dropout_p: float = 0.2, seed: int = 0,
              vocab_fingerprint: str = "") -> LstmModel:
    rng = np.random.default_rng(seed)
    H = hidden
    params = {
        "emb": _glorot(rng, (vocab_size, embed_dim)),
        "W1": _glorot(rng, (4 * H, embed_dim)),
        "U1": _glorot(rng, (4 * H, H)),
        "b1": np.zeros(4 * H),
        "W2": _glorot(rng, (4 * H, H)),
        "U2": _glorot(rng, (4 * H, H)),
        "b2": np.zeros(4 * H),
        "w_out": _glorot(rng, (H,)),
        "b_out": np.zeros(1),
    }
    params["b1"][H:2 * H] = 1.0  # forget-gate stabilizer
    params["b2"][H:2 * H] = 1.0
    return LstmModel(params=params, vocab_size=vocab_size, embed_dim=embed_dim,
                     hidden=H, dropout_p=dropout_p, vocab_fingerprint=vocab_fingerprint)


def pad_batch(sequences: list[NDArray[np.int64]]) -> tuple[np.ndarray, np.ndarray]:
    lengths = np.array([len(s) for s in sequences], dtype=np.int64)
    obs = np.zeros((len(sequences), int(lengths.max())), dtype=np.int64)
    for i, s in enumerate(sequences):
        obs[i, :len(s)] = s
    return obs, lengths


class _Cache:
    """Per-timestep activations kept for the backward pass."""

    def __init__(self):
        self.gates1: list[np.ndarray] = []
        self.gates2: list[np.ndarray] = []
        self.tanh_c1: list[np.ndarray] = []
        self.tanh_c2: list[np.ndarray] = []
        self.h1: list[np.ndarray] = []
        self.c1: list[np.ndarray] = []
        self.h2: list[np.ndarray] = []
        self.c2: list[np.ndarray] = []
        self.drop: list[np.ndarray] = []


def _step(params: dict, layer: int, x: np.ndarray, h_prev: np.ndarray,
          c_prev: np.ndarray, m: np.ndarray, H: int):
    W = params[f"W{layer}"]
    U = params[f"U{layer}"]
    b = params[f"b{layer}"]
    z = x @ W.T + h_prev @ U.T + b
    i = sigmoid(z[:, :H])
    f = sigmoid(z[:, H:2 * H])
    o = sigmoid(z[:, 2 * H:3 * H])
    g = np.tanh(z[:, 3 * H:])
    c_new = f * c_prev + i * g
    tanh_c = np.tanh(c_new)
    h_new = o * tanh_c
    h = m * h_new + (1.0 - m) * h_prev
    c = m * c_new + (1.0 - m) * c_prev
    gates = np.concatenate([i, f, o, g], axis=1)
    return gates, tanh_c, h, c


def forward_batch(model: LstmModel, obs: np.ndarray, lengths: np.ndarray,
                  train_mode: bool = False, rng: np.random.Generator | None = None,
                  want_cache: bool = False) -> tuple[np.ndarray, np.ndarray, _Cache | None]:
    """Probabilities and logits for a padded batch; caches activations on request."""
    if obs.min() < 0 or obs.max() >= model.vocab_size:
        raise IdOutOfRange(f"ids must be in [0, {model.vocab_size})")
    p = model.params
    B, T = obs.shape
    H = model.hidden
    keep = 1.0 - model.dropout_p
    cache = _Cache() if want_cache else None
    h1 = np.zeros((B, H)); c1 = np.zeros((B, H))
    h2 = np.zeros((B, H)); c2 = np.zeros((B, H))
    for t in range(T):
        m = (t < lengths).astype(np.float64)[:, None]
        x1 = p["emb"][obs[:, t]]
        gates1, tanh_c1, h1n, c1n = _step(p, 1, x1, h1, c1, m, H)
        if train_mode and model.dropout_p > 0.0:
            drop = (rng.random((B, H)) >= model.dropout_p) / keep
        else:
            drop = np.ones((B, H))
        x2 = h1n * drop
        gates2, tanh_c2, h2n, c2n = _step(p, 2, x2, h2, c2, m, H)
        if cache is not None:
            cache.gates1.append(gates1); cache.tanh_c1.append(tanh_c1)
            cache.h1.append(h1n); cache.c1.append(c1n)
            cache.gates2.append(gates2); cache.tanh_c2.append(tanh_c2)
            cache.h2.append(h2n); cache.c2.append(c2n)
            cache.drop.append(drop)
        h1, c1, h2, c2 = h1n, c1n, h2n, c2n
    logits = h2 @ p["w_out"] + p["b_out"][0]
    return sigmoid(logits), logits, cache


def _cell_backward(dz_parts, gates, H):
    di, df, do, dg = dz_parts
    i = gates[:, :H]; f = gates[:, H:2 * H]; o = gates[:, 2 * H:3 * H]; g = gates[:, 3 * H:]
    return np.concatenate([
        di * i * (1.0 - i),
        df * f * (1.0 - f),
        do * o * (1.0 - o),
        dg * (1.0 - g * g),
    ], axis=1)


def loss_and_grads(model: LstmModel, obs: np.ndarray, lengths: np.ndarray,
                   y: np.ndarray, train_mode: bool = False,
                   rng: np.random.Generator | None = None,
                   bptt_truncation: int = 0) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy loss and exact BPTT gradients for every parameter."""
    p = model.params
    B, T = obs.shape
    H = model.hidden
    probs, logits, cache = forward_batch(model, obs, lengths, train_mode=train_mode,
                                         rng=rng, want_cache=True)
    loss = bce_from_logits(logits, y)

    grads = {k: np.zeros_like(v) for k, v in p.items()}
    dlogit = (probs - y) / B
    h2_final = cache.h2[T - 1]
    grads["w_out"] = h2_final.T @ dlogit
    grads["b_out"] = np.array([dlogit.sum()])

    dh1 = np.zeros((B, H)); dc1 = np.zeros((B, H))
    dh2 = dlogit[:, None] * p["w_out"][None, :]
    dc2 = np.zeros((B, H))
    steps = T if bptt_truncation <= 0 else min(T, bptt_truncation)
    for t in range(T - 1, T - 1 - steps, -1):
        m = (t < lengths).astype(np.float64)[:, None]
        h1_prev = cache.h1[t - 1] if t > 0 else np.zeros((B, H))
        c1_prev = cache.c1[t - 1] if t > 0 else np.zeros((B, H))
        h2_prev = cache.h2[t - 1] if t > 0 else np.zeros((B, H))
        c2_prev = cache.c2[t - 1] if t > 0 else np.zeros((B, H))

        # layer 2
        gates2 = cache.gates2[t]; tanh_c2 = cache.tanh_c2[t]
        o2 = gates2[:, 2 * H:3 * H]; i2 = gates2[:, :H]
        f2 = gates2[:, H:2 * H]; g2 = gates2[:, 3 * H:]
        dh_new = m * dh2
        dc_new = m * dc2
        do = dh_new * tanh_c2
        dc_cell = dc_new + dh_new * o2 * (1.0 - tanh_c2 * tanh_c2)
        di = dc_cell * g2
        dg = dc_cell * i2
        df = dc_cell * c2_prev
        dz2 = _cell_backward((di, df, do, dg), gates2, H)
        x2 = cache.h1[t] * cache.drop[t]
        grads["W2"] += dz2.T @ x2
        grads["U2"] += dz2.T @ h2_prev
        grads["b2"] += dz2.sum(axis=0)
        dx2 = dz2 @ p["W2"]
        dh2 = dz2 @ p["U2"] + (1.0 - m) * dh2
        dc2 = dc_cell * f2 + (1.0 - m) * dc2

        # layer 1
        gates1 = cache.gates1[t]; tanh_c1 = cache.tanh_c1[t]
        o1 = gates1[:, 2 * H:3 * H]; i1 = gates1[:, :H]
        f1 = gates1[:, H:2 * H]; g1 = gates1[:, 3 * H:]
        dh1_total = dh1 + dx2 * cache.drop[t]
        dh_new = m * dh1_total
        dc_new = m * dc1
        do = dh_new * tanh_c1
        dc_cell = dc_new + dh_new * o1 * (1.0 - tanh_c1 * tanh_c1)
        di = dc_cell * g1
        dg = dc_cell * i1
        df = dc_cell * c1_prev
        dz1 = _cell_backward((di, df, do, dg), gates1, H)
        x1 = p["emb"][obs[:, t]]
        grads["W1"] += dz1.T @ x1
        grads["U1"] += dz1.T @ h1_prev
        grads["b1"] += dz1.sum(axis=0)
        dx1 = dz1 @ p["W1"]
        np.add.at(grads["emb"], obs[:, t], dx1)
        dh1 = dz1 @ p["U1"] + (1.0 - m) * dh1_total
        dc1 = dc_cell * f1 + (1.0 - m) * dc1
    return float(loss), grads


def lstm_forward(model: LstmModel, ids, train_mode: bool = False, seed: int = 0) -> float:
    """Classification probability for one sequence."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size == 0:
        raise EmptySequence("lstm_forward needs a nonempty sequence")
    rng = np.random.default_rng(seed) if train_mode else None
    probs, _, _ = forward_batch(model, ids[None, :], np.array([ids.size]),
                                train_mode=train_mode, rng=rng)
    return float(probs[0])


def lstm_train(
    sequences: list,
    labels: list[int] | np.ndarray,
    vocab_size: int,
    config: TrainConfig,
    embed_dim: int = 32,
    hidden: int = 200,
    dropout_p: float = 0.2,
    vocab_fingerprint: str = "",
) -> tuple[LstmModel, list[float]]:
    """Train with RMSprop; returns (model, per-epoch mean loss curve).

    Batches are assembled over length-sorted sequences to bound padding waste;
    the batch visit order is reshuffled each epoch from the seeded generator,
    so two runs with the same seed produce bitwise-identical parameters.
    """
    y_all = np.asarray(labels, dtype=np.float64)
    if y_all.size != len(sequences):
        raise ValueError("labels and sequences disagree in length")
    if len(set(y_all.tolist())) < 2:
        raise DegenerateLabels("both classes are required to train")
    keep = [i for i, s in enumerate(sequences) if len(s) > 0]
    arrs = [np.asarray(sequences[i], dtype=np.int64) for i in keep]
    y_all = y_all[keep]

    rng = np.random.default_rng(config.seed)
    model = init_lstm(vocab_size, embed_dim, hidden, dropout_p,
                      seed=config.seed, vocab_fingerprint=vocab_fingerprint)
    order = sorted(range(len(arrs)), key=lambda i: (len(arrs[i]), i))
    batches = [order[s:s + config.batch_size]
               for s in range(0, len(order), config.batch_size)]
    rms = {k: np.zeros_like(v) for k, v in model.params.items()}

    curve: list[float] = []
    for epoch in range(config.epochs):
        visit = rng.permutation(len(batches))
        epoch_loss = 0.0
        for bi in visit:
            idx = batches[bi]
            obs, lengths = pad_batch([arrs[i] for i in idx])
            loss, grads = loss_and_grads(model, obs, lengths, y_all[idx],
                                         train_mode=dropout_p > 0.0, rng=rng,
                                         bptt_truncation=config.bptt_truncation)
            if not np.isfinite(loss):
                raise NonFiniteLoss(epoch, int(bi))
            epoch_loss += loss * len(idx)
            norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
            scale = 1.0 if norm <= config.clip_norm else config.clip_norm / norm
            for k, g in grads.items():
                g = g * scale
                rms[k] = config.rho * rms[k] + (1.0 - config.rho) * g * g
                model.params[k] = model.params[k] - config.lr * g / (np.sqrt(rms[k]) + config.eps)
        curve.append(epoch_loss / len(arrs))
    return model, curve


def lstm_scores(model: LstmModel, sequences: list, batch_size: int = 256) -> np.ndarray:
    """Inference probabilities for many sequences (dropout-free, order-stable)."""
    out = np.zeros(len(sequences))
    nonempty = [i for i, s in enumerate(sequences) if len(s) > 0]
    if len(nonempty) != len(sequences):
        raise EmptySequence("cannot score empty sequences")
    order = sorted(nonempty, key=lambda i: (len(sequences[i]), i))
    for start in range(0, len(order), batch_size):
        chunk = order[start:start + batch_size]
        obs, lengths = pad_batch([np.asarray(sequences[i], dtype=np.int64) for i in chunk])
        probs, _, _ = forward_batch(model, obs, lengths)
        for pos, i in enumerate(chunk):
            out[i] = probs[pos]
    return out


def lstm_predict_batch(model: LstmModel, sequences: list,
                       threshold: float = 0.5) -> tuple[list[str], np.ndarray]:
    """Labels + probabilities; an item is "spying" iff its probability exceeds threshold."""
    probs = lstm_scores(model, sequences)
    labels = ["spying" if p > threshold else "benign" for p in probs]
    return labels, probs
