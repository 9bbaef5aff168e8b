"""Static + dynamic feature families for hand-crafted-feature baselines.

Families:
  F1 manifest permissions (one-hot)       F4 client-side storage counts/flags
  F2 invoked Chrome API calls (one-hot)   F5 network log counts + WoT score
  F3 source obfuscation booleans          F6 suspicious filenames + store metadata
plus an optional n-gram count block over the API-call stream.

Vocabularies (permissions, calls, n-grams) are fitted on training data only,
with an out-of-vocabulary bucket, and frozen before transforming test data.
"""

from __future__ import annotations

import fnmatch
import re
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .corpus import BehaviorTrace, ExtensionRecord
from .domains import registered_domain
from .errors import UnfittedVocabulary
from .signatures import ReputationTable, default_globs, filename_filter


class CallCategory(Enum):
    ACCESS = "access"
    STORE = "store"
    TRANSMIT = "transmit"
    OTHER = "other"


ACCESS_ENDPOINTS = frozenset({"bookmarks", "cookies", "history", "storage", "tabs"})
STORE_ENDPOINTS = frozenset({"bookmarks", "cookies", "history", "storage"})
TRANSMIT_ENDPOINTS = frozenset({"webRequest"})
TRANSMIT_CALLS = frozenset({"xhr.send", "fetch.fetch"})

READ_METHODS = frozenset({"get", "getAll", "query", "search", "getSelected", "read"})
WRITE_METHODS = frozenset({"set", "add", "addUrl", "create", "update", "remove", "clear", "write"})


def categorize_call(call: str) -> CallCategory:
    """Annotate a dotted call name as access / store / transmit / other."""
    endpoint, _, method = call.partition(".")
    if endpoint in TRANSMIT_ENDPOINTS or call in TRANSMIT_CALLS:
        return CallCategory.TRANSMIT
    if endpoint in ACCESS_ENDPOINTS and method in READ_METHODS:
        return CallCategory.ACCESS
    if endpoint in STORE_ENDPOINTS and method in WRITE_METHODS:
        return CallCategory.STORE
    return CallCategory.OTHER


def ngram_counts(calls: list[str], n: int) -> dict[tuple[str, ...], int]:
    """Counts of contiguous call n-grams; n must be 2 or 3."""
    if n not in (2, 3):
        raise ValueError(f"n must be 2 or 3, got {n}")
    counts: dict[tuple[str, ...], int] = {}
    for i in range(len(calls) - n + 1):
        gram = tuple(calls[i:i + n])
        counts[gram] = counts.get(gram, 0) + 1
    return counts


_URL_RE = re.compile(r"https?://[^\s'\"<>]+")
_B64_LITERAL_RE = re.compile(r"[A-Za-z0-9+/]{20,}={0,2}")
_ATOB_RE = re.compile(r"\b(atob|btoa|base64)\s*\(", re.IGNORECASE)

OOV = "<OOV>"

FAMILIES = ("f1", "f2", "f3", "f4", "f5", "f6", "ngram")


@dataclass(frozen=True)
class FeatureVector:
    f1_permissions: tuple[int, ...]
    f2_api_calls: tuple[int, ...]
    f3_eval: int
    f3_base64: int
    f4_cookie_changes: int
    f4_storage_changes: int
    f4_url_in_cookie: int
    f4_url_in_storage: int
    f5_xhr: int
    f5_get: int
    f5_post: int
    f5_wot: float
    f6_filename_hits: tuple[int, ...]
    f6_rating: float
    f6_num_reviews: int
    f6_users: int
    ngrams: dict[tuple[str, ...], int] | None = None


@dataclass
class FeatureSpace:
    """Fitted vocabularies plus the static config feature extraction needs.

    Fit on the training split only; transform is pure afterwards.
    """
    reputation: ReputationTable
    first_party_domains: frozenset[str]
    globs: tuple[str, ...] = tuple(default_globs())
    include_ngrams: bool = False
    ngram_sizes: tuple[int, ...] = (2, 3)
    permission_vocab: list[str] = field(default_factory=list)
    call_vocab: list[str] = field(default_factory=list)
    ngram_vocab: list[tuple[str, ...]] = field(default_factory=list)
    fitted: bool = False

    def fit(self, items: list[tuple[ExtensionRecord, BehaviorTrace]]) -> "FeatureSpace":
        perms: list[str] = []
        calls: list[str] = []
        grams: list[tuple[str, ...]] = []
        seen_p: set[str] = set()
        seen_c: set[str] = set()
        seen_g: set[tuple[str, ...]] = set()
        for record, trace in items:
            for p in sorted(record.permissions):
                if p not in seen_p:
                    seen_p.add(p)
                    perms.append(p)
            stream = trace.calls(include_web_api=False)
            for c in stream:
                if c not in seen_c:
                    seen_c.add(c)
                    calls.append(c)
            if self.include_ngrams:
                for n in self.ngram_sizes:
                    for g in ngram_counts(stream, n):
                        if g not in seen_g:
                            seen_g.add(g)
                            grams.append(g)
        self.permission_vocab = perms
        self.call_vocab = calls
        self.ngram_vocab = grams
        self.fitted = True
        return self

    # -- per-family helpers -------------------------------------------------

    def _one_hot(self, vocab: list[str], present: set[str]) -> tuple[int, ...]:
        bits = [1 if v in present else 0 for v in vocab]
        bits.append(1 if any(p not in vocab for p in present) else 0)  # OOV bucket
        return tuple(bits)

    def transform(self, record: ExtensionRecord, trace: BehaviorTrace) -> FeatureVector:
        if not self.fitted:
            raise UnfittedVocabulary("FeatureSpace.fit was not called")
        chrome_calls = trace.calls(include_web_api=False)
        invoked = set(chrome_calls)

        source = "\n".join(record.source_snippets)
        f3_eval = 1 if "eval(" in source else 0
        f3_base64 = 1 if (_B64_LITERAL_RE.search(source) or _ATOB_RE.search(source)) else 0

        cookie_changes = sum(1 for s in trace.storage if s.store == "cookie")
        storage_changes = sum(1 for s in trace.storage if s.store == "localStorage")
        url_in_cookie = 1 if any(
            s.store == "cookie" and s.new_value and _URL_RE.search(s.new_value)
            for s in trace.storage) else 0
        url_in_storage = 1 if any(
            s.store == "localStorage" and s.new_value and _URL_RE.search(s.new_value)
            for s in trace.storage) else 0

        xhr = sum(1 for e in trace.events if e.kind == "web_api" and e.call.startswith("xhr."))
        gets = sum(1 for n in trace.network if n.method == "GET")
        posts = sum(1 for n in trace.network if n.method == "POST")
        wot = -1.0
        scores = []
        for n in trace.network:
            dom = registered_domain(n.url)
            if dom and dom not in self.first_party_domains:
                _, score = self.reputation.lookup(dom)
                if score is not None:
                    scores.append(score)
        if scores:
            wot = max(scores)

        hits = filename_filter(record, list(self.globs))
        hit_globs = set()
        for g in self.globs:
            pat = re.compile(fnmatch.translate(g.lower()))
            if any(pat.match(h.lower()) for h in hits):
                hit_globs.add(g)
        f6_hits = tuple(1 if g in hit_globs else 0 for g in self.globs)

        grams = None
        if self.include_ngrams:
            grams = {}
            for n in self.ngram_sizes:
                grams.update(ngram_counts(chrome_calls, n))

        return FeatureVector(
            f1_permissions=self._one_hot(self.permission_vocab, set(record.permissions)),
            f2_api_calls=self._one_hot(self.call_vocab, invoked),
            f3_eval=f3_eval,
            f3_base64=f3_base64,
            f4_cookie_changes=cookie_changes,
            f4_storage_changes=storage_changes,
            f4_url_in_cookie=url_in_cookie,
            f4_url_in_storage=url_in_storage,
            f5_xhr=xhr,
            f5_get=gets,
            f5_post=posts,
            f5_wot=wot,
            f6_filename_hits=f6_hits,
            f6_rating=record.rating,
            f6_num_reviews=record.num_ratings,
            f6_users=record.users,
            ngrams=grams,
        )

    # -- matrix assembly ----------------------------------------------------

    def feature_names(self, families: tuple[str, ...] = FAMILIES) -> list[str]:
        names: list[str] = []
        if "f1" in families:
            names += [f"f1_perm:{p}" for p in self.permission_vocab] + ["f1_perm:<OOV>"]
        if "f2" in families:
            names += [f"f2_call:{c}" for c in self.call_vocab] + ["f2_call:<OOV>"]
        if "f3" in families:
            names += ["f3_eval", "f3_base64"]
        if "f4" in families:
            names += ["f4_cookie_changes", "f4_storage_changes",
                      "f4_url_in_cookie", "f4_url_in_storage"]
        if "f5" in families:
            names += ["f5_xhr", "f5_get", "f5_post", "f5_wot"]
        if "f6" in families:
            names += [f"f6_file:{g}" for g in self.globs]
            names += ["f6_rating", "f6_num_reviews", "f6_users"]
        if "ngram" in families and self.include_ngrams:
            names += ["ngram:" + "|".join(g) for g in self.ngram_vocab]
        return names

    def to_row(self, fv: FeatureVector, families: tuple[str, ...] = FAMILIES) -> np.ndarray:
        parts: list[float] = []
        if "f1" in families:
            parts += list(fv.f1_permissions)
        if "f2" in families:
            parts += list(fv.f2_api_calls)
        if "f3" in families:
            parts += [fv.f3_eval, fv.f3_base64]
        if "f4" in families:
            parts += [fv.f4_cookie_changes, fv.f4_storage_changes,
                      fv.f4_url_in_cookie, fv.f4_url_in_storage]
        if "f5" in families:
            parts += [fv.f5_xhr, fv.f5_get, fv.f5_post, fv.f5_wot]
        if "f6" in families:
            parts += list(fv.f6_filename_hits)
            parts += [fv.f6_rating, fv.f6_num_reviews, fv.f6_users]
        if "ngram" in families and self.include_ngrams:
            gram_counts = fv.ngrams or {}
            parts += [float(gram_counts.get(g, 0)) for g in self.ngram_vocab]
        return np.asarray(parts, dtype=np.float64)

    def to_matrix(self, fvs: list[FeatureVector], families: tuple[str, ...] = FAMILIES) -> np.ndarray:
        if not fvs:
            return np.zeros((0, len(self.feature_names(families))))
        return np.vstack([self.to_row(fv, families) for fv in fvs])
