"""Leak verification: decode transmitted payloads and decide whether values an
extension accessed were sent to a third-party domain.

A network payload region (URL path, query parameter, POST body) is tried
against every decoder chain of length <= 2 over {base64, hex, url-decode};
an accessed value found in a decoded region of a third-party request at or
after its access time is evidence of spying.  Bodies that are high-entropy
and undecodable mark the verdict "unverified" instead.
"""

from __future__ import annotations

import base64
import binascii
import math
import re
import warnings
from collections import Counter
from dataclasses import dataclass
from urllib.parse import unquote, urlparse

from .corpus import BehaviorTrace, NetworkEvent
from .domains import registered_domain
from .errors import EmptyAccessLogWarning

DECODERS = ("base64", "hex", "urldecode")
MAX_CHAIN = 2

# "unverified" heuristic: obfuscated third-party POST bodies we cannot decode
ENTROPY_BITS_PER_CHAR = 4.5
MIN_OBFUSCATED_LEN = 64

_B64_RE = re.compile(r"^[A-Za-z0-9+/_\-]+={0,2}$")
_HEX_RE = re.compile(r"^[0-9a-fA-F]+$")


def _printable(text: str) -> bool:
    return bool(text) and all(ch.isprintable() or ch in "\t\n\r" for ch in text)


def _apply(decoder: str, text: str) -> str | None:
    if decoder == "base64":
        stripped = text.strip()
        if len(stripped) < 4 or len(stripped) % 4 != 0 or not _B64_RE.match(stripped):
            return None
        try:
            raw = base64.b64decode(stripped.replace("-", "+").replace("_", "/"), validate=True)
            out = raw.decode("utf-8")
        except (binascii.Error, UnicodeDecodeError, ValueError):
            return None
        return out if _printable(out) else None
    if decoder == "hex":
        stripped = text.strip()
        if len(stripped) < 4 or len(stripped) % 2 != 0 or not _HEX_RE.match(stripped):
            return None
        try:
            out = bytes.fromhex(stripped).decode("utf-8")
        except (ValueError, UnicodeDecodeError):
            return None
        return out if _printable(out) else None
    if decoder == "urldecode":
        if "%" not in text:
            return None
        try:
            out = unquote(text, errors="strict")
        except UnicodeDecodeError:
            return None
        return out if out != text and _printable(out) else None
    raise ValueError(f"unknown decoder {decoder!r}")


def decode_candidates(payload: str) -> list[tuple[tuple[str, ...], str]]:
    """All decodings of a payload under chains of length <= 2, identity first.

    Chains that fail to decode to printable UTF-8 are silently omitted.
    """
    results: list[tuple[tuple[str, ...], str]] = [((), payload)]
    frontier = [((), payload)]
    for _ in range(MAX_CHAIN):
        nxt = []
        for chain, text in frontier:
            for dec in DECODERS:
                out = _apply(dec, text)
                if out is not None:
                    entry = (chain + (dec,), out)
                    results.append(entry)
                    nxt.append(entry)
        frontier = nxt
    return results


def shannon_entropy(text: str) -> float:
    """Bits per character of the empirical character distribution."""
    if not text:
        return 0.0
    counts = Counter(text)
    n = len(text)
    return -sum((c / n) * math.log2(c / n) for c in counts.values())


@dataclass(frozen=True)
class LeakEvidence:
    ext_id: str
    network_t: int
    remote_domain: str
    decoder_chain: tuple[str, ...]
    accessed_value: str
    where: str  # url_path | query_param | post_body
    payload: str

    def recheck(self) -> bool:
        """Re-apply the decoder chain and confirm the containment still holds."""
        text = self.payload
        for dec in self.decoder_chain:
            decoded = _apply(dec, text)
            if decoded is None:
                return False
            text = decoded
        return self.accessed_value in text or _host_path(self.accessed_value) in text

    def to_dict(self) -> dict:
        return {
            "ext_id": self.ext_id,
            "network_t": self.network_t,
            "remote_domain": self.remote_domain,
            "decoder_chain": list(self.decoder_chain) or ["identity"],
            "accessed_value": self.accessed_value,
            "where": self.where,
        }


@dataclass(frozen=True)
class Verdict:
    ext_id: str
    spying: bool
    evidence: tuple[LeakEvidence, ...]
    unverified: bool

    def to_dict(self) -> dict:
        return {
            "ext_id": self.ext_id,
            "spying": self.spying,
            "unverified": self.unverified,
            "evidence": [e.to_dict() for e in self.evidence],
        }


def _host_path(value: str) -> str:
    """host+path form of a URL-shaped accessed value, query stripped.

    Browsing-history URLs are often transmitted truncated; matching on
    host+path catches those.  Non-URL values are returned unchanged.
    """
    if "://" not in value:
        return value
    parsed = urlparse(value)
    return parsed.netloc + parsed.path


def _regions(event: NetworkEvent) -> list[tuple[str, str]]:
    regions = [("url_path", urlparse(event.url).path)]
    for _, v in event.query:
        regions.append(("query_param", v))
    if event.body:
        regions.append(("post_body", event.body))
    return regions


def verify(trace: BehaviorTrace, first_party_domains: frozenset[str] | set[str]) -> Verdict:
    """Decide whether the trace leaks accessed values to any third-party domain.

    spying is true iff some network event to a domain outside
    ``first_party_domains`` contains, under some decoder chain, an accessed
    value whose access time does not exceed the transmit time.  The verdict
    is deterministic; evidence is deduplicated per (event, region, value)
    with the shortest decoder chain kept.
    """
    if not trace.accessed_values:
        warnings.warn(
            f"trace {trace.ext_id}/r{trace.run_id} has no accessed values",
            EmptyAccessLogWarning,
            stacklevel=2,
        )
    first_party = frozenset(d.lower() for d in first_party_domains)
    evidence: list[LeakEvidence] = []
    obfuscated_unmatched = False

    for event in trace.network:
        domain = registered_domain(event.url)
        if not domain or domain in first_party:
            continue
        visible = [(t, v) for t, v in trace.accessed_values if t <= event.t]
        event_matched = False
        for where, payload in _regions(event):
            if not payload:
                continue
            candidates = decode_candidates(payload)
            for t_acc, value in visible:
                needle_full = value
                needle_trunc = _host_path(value)
                for chain, text in candidates:
                    if needle_full in text or (needle_trunc and needle_trunc in text):
                        evidence.append(LeakEvidence(
                            ext_id=trace.ext_id,
                            network_t=event.t,
                            remote_domain=domain,
                            decoder_chain=chain,
                            accessed_value=value,
                            where=where,
                            payload=payload,
                        ))
                        event_matched = True
                        break  # shortest chain for this (event, region, value)
        if (not event_matched and event.body
                and len(event.body) >= MIN_OBFUSCATED_LEN
                and shannon_entropy(event.body) > ENTROPY_BITS_PER_CHAR):
            obfuscated_unmatched = True

    spying = bool(evidence)
    return Verdict(
        ext_id=trace.ext_id,
        spying=spying,
        evidence=tuple(evidence),
        unverified=(not spying) and obfuscated_unmatched,
    )
