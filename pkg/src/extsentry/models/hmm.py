"""Class-conditional discrete HMMs trained per class with Baum-Welch.

One hidden Markov model is fitted per class (spying / benign); a sequence is
classified by comparing class log-likelihoods plus class log-priors.  All
recursions run in log space over padded sequence batches, so lengths up to
10^4 are safe.  Expected counts receive additive smoothing eps before row
normalization, which keeps every probability strictly positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from ..errors import EmptyClass
from .common import params_from_json, params_to_json

SMOOTHING_EPS = 1e-6

CLASSES = ("spying", "benign")


@dataclass(frozen=True)
class HmmModel:
    pi: np.ndarray  # (K,)
    A: np.ndarray   # (K, K) row-stochastic
    B: np.ndarray   # (K, V) row-stochastic


@dataclass(frozen=True)
class HmmPair:
    models: dict[str, HmmModel]
    log_prior: dict[str, float]
    n_states: int
    n_symbols: int

    def to_json(self, fingerprint_text: str = "") -> str:
        params = {}
        for cls, m in self.models.items():
            params[f"{cls}_pi"] = m.pi
            params[f"{cls}_A"] = m.A
            params[f"{cls}_B"] = m.B
        hp = {"n_states": self.n_states, "n_symbols": self.n_symbols,
              "log_prior": {c: self.log_prior[c] for c in CLASSES}}
        return params_to_json("hmm", hp, params, fingerprint_text)

    @classmethod
    def from_json(cls, text: str) -> "HmmPair":
        hp, p = params_from_json(text, "hmm")
        models = {c: HmmModel(pi=p[f"{c}_pi"], A=p[f"{c}_A"], B=p[f"{c}_B"]) for c in CLASSES}
        return cls(models=models, log_prior={c: float(hp["log_prior"][c]) for c in CLASSES},
                   n_states=hp["n_states"], n_symbols=hp["n_symbols"])


def _pad(sequences: list[NDArray[np.int64]]) -> tuple[np.ndarray, np.ndarray]:
    lengths = np.array([len(s) for s in sequences], dtype=np.int64)
    obs = np.zeros((len(sequences), int(lengths.max())), dtype=np.int64)
    for i, s in enumerate(sequences):
        obs[i, :len(s)] = s
    return obs, lengths


def _log_forward_batch(model: HmmModel, obs: np.ndarray, lengths: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """log alpha (B,T,K) and per-sequence log-likelihoods (B,)."""
    log_pi = np.log(model.pi)
    log_A = np.log(model.A)
    log_B = np.log(model.B)
    n_seq, T = obs.shape
    K = model.pi.shape[0]
    alpha = np.full((n_seq, T, K), -np.inf)
    alpha[:, 0, :] = log_pi[None, :] + log_B[:, obs[:, 0]].T
    for t in range(1, T):
        prev = alpha[:, t - 1, :, None] + log_A[None, :, :]  # (B,K,K)
        m = prev.max(axis=1)
        step = m + np.log(np.sum(np.exp(prev - m[:, None, :]), axis=1))
        step += log_B[:, obs[:, t]].T
        active = (t < lengths)
        alpha[active, t, :] = step[active]
        alpha[~active, t, :] = alpha[~active, t - 1, :]
    last = alpha[np.arange(n_seq), lengths - 1, :]
    mx = last.max(axis=1)
    ll = mx + np.log(np.sum(np.exp(last - mx[:, None]), axis=1))
    return alpha, ll


def _log_backward_batch(model: HmmModel, obs: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    log_A = np.log(model.A)
    log_B = np.log(model.B)
    n_seq, T = obs.shape
    K = model.pi.shape[0]
    beta = np.zeros((n_seq, T, K))
    for t in range(T - 2, -1, -1):
        nxt = log_A[None, :, :] + (log_B[:, obs[:, t + 1]].T + beta[:, t + 1, :])[:, None, :]
        m = nxt.max(axis=2)
        step = m + np.log(np.sum(np.exp(nxt - m[:, :, None]), axis=2))
        # positions at/after the end keep beta = 0 (log 1)
        active = (t + 1 < lengths)
        beta[active, t, :] = step[active]
    return beta


def hmm_loglik(model: HmmModel, ids: list[int] | NDArray[np.int64]) -> float:
    """Log-likelihood of one sequence under the model; empty sequences score 0."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size == 0:
        return 0.0
    if ids.min() < 0 or ids.max() >= model.B.shape[1]:
        raise ValueError(f"symbol out of range for V={model.B.shape[1]}")
    _, ll = _log_forward_batch(model, ids[None, :], np.array([ids.size]))
    return float(ll[0])


def _random_stochastic(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    raw = rng.random(shape) + 0.1
    return raw / raw.sum(axis=-1, keepdims=True)


def baum_welch(
    sequences: list[NDArray[np.int64]],
    n_states: int,
    n_symbols: int,
    iterations: int = 10,
    seed: int = 0,
    eps: float = SMOOTHING_EPS,
    batch_size: int = 512,
) -> tuple[HmmModel, list[float]]:
    """Fit one HMM; returns (model, per-iteration total log-likelihood curve).

    The log-likelihood recorded at iteration i is evaluated under the
    parameters entering that iteration, so the curve is non-decreasing.
    """
    sequences = [np.asarray(s, dtype=np.int64) for s in sequences if len(s) > 0]
    if not sequences:
        raise EmptyClass("no nonempty sequences for this class")
    rng = np.random.default_rng(seed)
    model = HmmModel(
        pi=_random_stochastic(rng, (n_states,)),
        A=_random_stochastic(rng, (n_states, n_states)),
        B=_random_stochastic(rng, (n_states, n_symbols)),
    )
    # batch sequences of similar length together to bound padding waste
    order = sorted(range(len(sequences)), key=lambda i: (len(sequences[i]), i))
    batches = [[sequences[i] for i in order[s:s + batch_size]]
               for s in range(0, len(order), batch_size)]

    history: list[float] = []
    for _ in range(iterations):
        pi_num = np.zeros(n_states)
        a_num = np.zeros((n_states, n_states))
        b_num_t = np.zeros((n_symbols, n_states))
        total_ll = 0.0
        log_A = np.log(model.A)
        log_B = np.log(model.B)
        for batch in batches:
            obs, lengths = _pad(batch)
            alpha, ll = _log_forward_batch(model, obs, lengths)
            beta = _log_backward_batch(model, obs, lengths)
            total_ll += float(ll.sum())
            n_seq, T = obs.shape
            t_idx = np.arange(T)[None, :]
            valid = t_idx < lengths[:, None]  # (B,T)
            log_gamma = alpha + beta - ll[:, None, None]
            gamma = np.exp(log_gamma) * valid[:, :, None]
            pi_num += gamma[:, 0, :].sum(axis=0)
            for t in range(T):
                np.add.at(b_num_t, obs[:, t], gamma[:, t, :] * valid[:, t, None])
            for t in range(T - 1):
                has_next = (t + 1 < lengths)
                if not has_next.any():
                    break
                log_xi = (alpha[:, t, :, None] + log_A[None, :, :]
                          + (log_B[:, obs[:, t + 1]].T + beta[:, t + 1, :])[:, None, :]
                          - ll[:, None, None])
                a_num += np.einsum("bij,b->ij", np.exp(log_xi), has_next.astype(np.float64))
        pi = (pi_num + eps) / (pi_num + eps).sum()
        A = (a_num + eps) / (a_num + eps).sum(axis=1, keepdims=True)
        B = (b_num_t.T + eps) / (b_num_t.T + eps).sum(axis=1, keepdims=True)
        model = HmmModel(pi=pi, A=A, B=B)
        history.append(total_ll)
    return model, history


def hmm_train(
    sequences_by_class: dict[str, list],
    n_states: int = 4,
    iterations: int = 10,
    seed: int = 0,
    n_symbols: int | None = None,
) -> HmmPair:
    """Fit one HMM per class; class priors come from training sequence counts."""
    for cls in CLASSES:
        if not any(len(s) > 0 for s in sequences_by_class.get(cls, [])):
            raise EmptyClass(f"class {cls!r} has no nonempty training sequences")
    if n_symbols is None:
        n_symbols = 1 + max(
            int(np.max(s)) for seqs in sequences_by_class.values() for s in seqs if len(s) > 0
        )
    models = {}
    counts = {}
    for offset, cls in enumerate(CLASSES):
        seqs = [np.asarray(s, dtype=np.int64) for s in sequences_by_class[cls]]
        models[cls], _ = baum_welch(seqs, n_states, n_symbols, iterations, seed + offset)
        counts[cls] = max(1, len(seqs))
    total = sum(counts.values())
    log_prior = {cls: float(np.log(counts[cls] / total)) for cls in CLASSES}
    return HmmPair(models=models, log_prior=log_prior,
                   n_states=n_states, n_symbols=n_symbols)


def hmm_classify(pair: HmmPair, ids: list[int] | NDArray[np.int64]) -> tuple[str, float]:
    """(class, log-likelihood ratio spying-vs-benign); ties go to benign."""
    scores = {
        cls: hmm_loglik(pair.models[cls], ids) + pair.log_prior[cls]
        for cls in CLASSES
    }
    llr = scores["spying"] - scores["benign"]
    return ("spying" if llr > 0 else "benign"), llr


def hmm_scores_batch(pair: HmmPair, sequences: list) -> np.ndarray:
    """Log-likelihood ratios for many sequences (batched for speed)."""
    nonempty = [i for i, s in enumerate(sequences) if len(s) > 0]
    out = np.zeros(len(sequences))
    out += pair.log_prior["spying"] - pair.log_prior["benign"]
    if nonempty:
        arrs = [np.asarray(sequences[i], dtype=np.int64) for i in nonempty]
        order = sorted(range(len(arrs)), key=lambda j: (len(arrs[j]), j))
        for start in range(0, len(order), 512):
            chunk = order[start:start + 512]
            obs, lengths = _pad([arrs[j] for j in chunk])
            _, ll_spy = _log_forward_batch(pair.models["spying"], obs, lengths)
            _, ll_ben = _log_forward_batch(pair.models["benign"], obs, lengths)
            for pos, j in enumerate(chunk):
                out[nonempty[j]] += float(ll_spy[pos] - ll_ben[pos])
    return out
