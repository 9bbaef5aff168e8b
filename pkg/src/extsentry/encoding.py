"""Integer encoding of API-call sequences for the sequence classifiers.

Each call name maps to a unique id assigned in order of first appearance
across the training stream.  Id 0 is PAD (batch assembly only, never stored
in a sequence), id 1 is the out-of-vocabulary bucket.  Web-API calls (xhr.*,
fetch.*) are merged into the stream by timestamp when requested.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .corpus import BehaviorTrace
from .errors import EmptyCorpus
from .io_util import canon_json

PAD = 0
OOV = 1
FIRST_ID = 2

# consecutive duplicate calls are kept as-is; no collapsing is applied
MAX_SEQUENCE_LEN = 4096


@dataclass
class Vocabulary:
    call_to_id: dict[str, int] = field(default_factory=dict)
    frozen: bool = False

    @property
    def size(self) -> int:
        return FIRST_ID + len(self.call_to_id)

    def add(self, call: str) -> int:
        if self.frozen:
            raise ValueError("vocabulary is frozen")
        if call not in self.call_to_id:
            self.call_to_id[call] = FIRST_ID + len(self.call_to_id)
        return self.call_to_id[call]

    def lookup(self, call: str) -> int:
        return self.call_to_id.get(call, OOV)

    def id_to_call(self) -> dict[int, str]:
        return {i: c for c, i in self.call_to_id.items()}

    def freeze(self) -> "Vocabulary":
        self.frozen = True
        return self

    def to_json(self) -> str:
        ordered = sorted(self.call_to_id.items(), key=lambda kv: kv[1])
        return canon_json({"pad": PAD, "oov": OOV, "calls": [c for c, _ in ordered]})

    @classmethod
    def from_json(cls, text: str) -> "Vocabulary":
        obj = json.loads(text)
        vocab = cls()
        for call in obj["calls"]:
            vocab.add(call)
        return vocab.freeze()


@dataclass(frozen=True)
class EncodedSequence:
    ext_id: str
    run_id: int
    ids: tuple[int, ...]
    include_web_api: bool
    label: str | None = None  # spying | benign

    def __len__(self) -> int:
        return len(self.ids)


def fit_vocab(traces: list[BehaviorTrace], include_web_api: bool) -> Vocabulary:
    """Assign ids in first-appearance order over the concatenated training stream."""
    if not traces:
        raise EmptyCorpus("cannot fit a vocabulary on zero traces")
    vocab = Vocabulary()
    for trace in traces:
        for call in trace.calls(include_web_api):
            vocab.add(call)
    return vocab.freeze()


def encode(
    trace: BehaviorTrace,
    vocab: Vocabulary,
    include_web_api: bool,
    label: str | None = None,
    max_len: int = MAX_SEQUENCE_LEN,
) -> EncodedSequence:
    """Map the trace's call stream to vocabulary ids; unseen calls become OOV."""
    if not vocab.frozen:
        raise ValueError("vocabulary must be frozen before encoding")
    ids = tuple(vocab.lookup(c) for c in trace.calls(include_web_api))[:max_len]
    return EncodedSequence(
        ext_id=trace.ext_id,
        run_id=trace.run_id,
        ids=ids,
        include_web_api=include_web_api,
        label=label,
    )


def prefix(seq: EncodedSequence, k: int) -> EncodedSequence:
    """First min(k, len) ids; label and identity preserved."""
    if k < 1:
        raise ValueError(f"prefix length must be >= 1, got {k}")
    if k >= len(seq.ids):
        return seq
    return EncodedSequence(
        ext_id=seq.ext_id,
        run_id=seq.run_id,
        ids=seq.ids[:k],
        include_web_api=seq.include_web_api,
        label=seq.label,
    )


def sequence_to_json(seq: EncodedSequence) -> str:
    return canon_json({
        "ext_id": seq.ext_id,
        "run_id": seq.run_id,
        "ids": list(seq.ids),
        "include_web_api": seq.include_web_api,
        "label": seq.label,
    })


def sequence_from_json(line: str) -> EncodedSequence:
    obj = json.loads(line)
    return EncodedSequence(
        ext_id=obj["ext_id"],
        run_id=obj["run_id"],
        ids=tuple(obj["ids"]),
        include_web_api=obj.get("include_web_api", False),
        label=obj.get("label"),
    )
