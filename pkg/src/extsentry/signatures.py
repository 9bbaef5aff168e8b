"""Candidate shortlisting heuristics and signature-based corpus expansion.

Covers two pipeline stages over a corpus of ExtensionRecords: shortlisting
(suspicious filenames, permissions, monetizer developers) and expansion
(filename / developer / URL / snippet / monetizer signatures mined from
confirmed spying extensions).  Everything here is pure and deterministic;
the default rule sets ship as editable JSON config.
"""

from __future__ import annotations

import csv
import fnmatch
import io
import json
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .corpus import ExtensionRecord
from .domains import registered_domain
from .errors import EmptyInput, InvalidGlob

RULE_KINDS = ("filename", "developer", "url", "snippet", "monetizer")


@lru_cache(maxsize=1)
def default_config() -> dict:
    text = resources.files("extsentry.data").joinpath("shortlist_defaults.json").read_text("utf-8")
    return json.loads(text)


def default_globs() -> list[str]:
    return list(default_config()["filename_globs"])


@dataclass(frozen=True)
class SignatureSet:
    filename_globs: tuple[str, ...] = ()
    developer_ids: frozenset[str] = frozenset()
    tracker_urls: frozenset[str] = frozenset()
    js_snippets: tuple[str, ...] = ()
    monetizer_ids: frozenset[str] = frozenset()

    def to_json(self) -> str:
        return json.dumps({
            "filename_globs": sorted(self.filename_globs),
            "developer_ids": sorted(self.developer_ids),
            "tracker_urls": sorted(self.tracker_urls),
            "js_snippets": sorted(self.js_snippets),
            "monetizer_ids": sorted(self.monetizer_ids),
        }, ensure_ascii=False, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SignatureSet":
        obj = json.loads(text)
        return cls(
            filename_globs=tuple(obj.get("filename_globs", [])),
            developer_ids=frozenset(obj.get("developer_ids", [])),
            tracker_urls=frozenset(obj.get("tracker_urls", [])),
            js_snippets=tuple(obj.get("js_snippets", [])),
            monetizer_ids=frozenset(obj.get("monetizer_ids", [])),
        )


@dataclass(frozen=True)
class CandidateReport:
    ext_id: str
    matched_rules: tuple[tuple[str, str], ...]

    @property
    def score(self) -> int:
        return len({kind for kind, _ in self.matched_rules})


def _compile_glob(glob: str) -> re.Pattern:
    if not glob or not isinstance(glob, str):
        raise InvalidGlob(f"bad glob {glob!r}")
    try:
        return re.compile(fnmatch.translate(glob.lower()))
    except re.error as exc:
        raise InvalidGlob(f"glob {glob!r} does not compile: {exc}") from None


def filename_filter(record: ExtensionRecord, globs: list[str] | None = None) -> list[str]:
    """Filenames matching any suspicious glob, case-insensitive, each reported once."""
    if globs is None:
        globs = default_globs()
    if not globs:
        raise InvalidGlob("glob list is empty")
    compiled = [_compile_glob(g) for g in globs]
    hits = []
    for name in record.filenames:
        low = name.lower()
        if any(pat.match(low) for pat in compiled) and name not in hits:
            hits.append(name)
    return hits


def permission_filter(record: ExtensionRecord, config: dict | None = None) -> bool:
    """True iff the manifest permissions hit the suspicious set or a suspicious pair."""
    cfg = config if config is not None else default_config()
    singles = set(cfg.get("suspicious_permissions", []))
    if record.permissions & singles:
        return True
    for pair in cfg.get("suspicious_permission_pairs", []):
        if all(p in record.permissions for p in pair):
            return True
    return False


_WS_RUN = re.compile(r"\s+")
_STRING_LIT = re.compile(r"(\"(?:[^\"\\]|\\.)*\"|'(?:[^'\\]|\\.)*')")


def normalize_snippet(code: str) -> str:
    """Normalization used for snippet signatures: drop string-literal contents,
    then strip all whitespace runs."""
    def _blank(match: re.Match) -> str:
        quote = match.group(0)[0]
        return quote + quote
    code = _STRING_LIT.sub(_blank, code)
    return _WS_RUN.sub("", code)


def extract_signatures(
    spying_records: list[ExtensionRecord],
    globs: list[str] | None = None,
    monetizer_ids: frozenset[str] | None = None,
) -> SignatureSet:
    """Mine filename/developer/URL/snippet signatures from confirmed spying extensions.

    Filename signatures keep only files that the suspicious-glob filter already
    flagged (stored as exact lowercase basenames); URLs reduce to registered
    domains.  Monetizer ids come from config, not from the records.
    """
    if not spying_records:
        raise EmptyInput("no spying records to extract signatures from")
    filenames: list[str] = []
    developers: set[str] = set()
    trackers: set[str] = set()
    snippets: list[str] = []
    for rec in spying_records:
        for hit in filename_filter(rec, globs):
            base = hit.rsplit("/", 1)[-1].lower()
            if base not in filenames:
                filenames.append(base)
        if rec.developer:
            developers.add(rec.developer)
        for url in rec.source_urls:
            dom = registered_domain(url)
            if dom:
                trackers.add(dom)
        for snippet in rec.source_snippets:
            norm = normalize_snippet(snippet)
            if norm and norm not in snippets:
                snippets.append(norm)
    if monetizer_ids is None:
        monetizer_ids = frozenset(default_config()["monetizer_ids"])
    return SignatureSet(
        filename_globs=tuple(sorted(filenames)),
        developer_ids=frozenset(developers),
        tracker_urls=frozenset(trackers),
        js_snippets=tuple(sorted(snippets)),
        monetizer_ids=monetizer_ids,
    )


def _match_record(record: ExtensionRecord, sigs: SignatureSet) -> list[tuple[str, str]]:
    matches: list[tuple[str, str]] = []
    if sigs.filename_globs:
        compiled = [(g, _compile_glob(g)) for g in sigs.filename_globs]
        for name in record.filenames:
            base = name.rsplit("/", 1)[-1].lower()
            for glob, pat in compiled:
                if pat.match(base):
                    entry = ("filename", glob)
                    if entry not in matches:
                        matches.append(entry)
    if record.developer in sigs.developer_ids:
        matches.append(("developer", record.developer))
    if sigs.tracker_urls:
        seen = set()
        for url in record.source_urls:
            dom = registered_domain(url)
            if dom in sigs.tracker_urls and dom not in seen:
                seen.add(dom)
                matches.append(("url", dom))
    if sigs.js_snippets:
        normed = [normalize_snippet(s) for s in record.source_snippets]
        for sig in sigs.js_snippets:
            if any(sig in n for n in normed):
                matches.append(("snippet", sig))
    if sigs.monetizer_ids:
        ids = {record.developer} | {registered_domain(u) for u in record.source_urls}
        for mid in sorted(sigs.monetizer_ids & ids):
            matches.append(("monetizer", mid))
    return matches


def expand_candidates(corpus: list[ExtensionRecord], sigs: SignatureSet) -> list[CandidateReport]:
    """One report per extension hitting >=1 signature, ordered by (score desc, ext_id)."""
    reports = []
    for rec in corpus:
        matched = _match_record(rec, sigs)
        if matched:
            reports.append(CandidateReport(ext_id=rec.ext_id, matched_rules=tuple(matched)))
    reports.sort(key=lambda r: (-r.score, r.ext_id))
    return reports


# ---------------------------------------------------------------------------
# Offline reputation fixtures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReputationTable:
    """Offline domain-reputation lookups: blacklist flag + WoT score fixtures."""
    entries: dict[str, tuple[bool, float | None]] = field(default_factory=dict)

    @classmethod
    def from_csv(cls, text: str) -> "ReputationTable":
        entries = {}
        for row in csv.DictReader(io.StringIO(text)):
            score = row.get("wot_score", "")
            entries[row["domain"].lower()] = (
                row.get("blacklisted", "false").strip().lower() == "true",
                float(score) if score not in ("", None) else None,
            )
        return cls(entries=entries)

    @classmethod
    def from_file(cls, path: str | Path) -> "ReputationTable":
        return cls.from_csv(Path(path).read_text("utf-8"))

    @classmethod
    def bundled(cls) -> "ReputationTable":
        text = resources.files("extsentry.data").joinpath("reputation_fixtures.csv").read_text("utf-8")
        return cls.from_csv(text)

    def lookup(self, domain: str) -> tuple[bool, float | None]:
        """(blacklisted, wot_score); unknown domains are (False, None)."""
        return self.entries.get(domain.lower(), (False, None))


def reputation_lookup(domain: str, fixtures: ReputationTable) -> tuple[bool, float | None]:
    return fixtures.lookup(domain)
