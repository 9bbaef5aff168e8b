"""Domain types and on-disk formats for extension corpora.

Trace Format v1 is line-oriented UTF-8 JSON, one record per line, first line
a header::

    {"fmt":"extsentry-trace","v":1,"ext_id":"...","run_id":N}
    {"r":"api","t":MS,"k":"chrome_api"|"web_api","call":"cookies.set"}
    {"r":"net","t":MS,"m":"GET"|"POST","url":"...","q":{...},"body":"..."}
    {"r":"sto","t":MS,"s":"cookie"|"localStorage","key":"...","old":null|"...","new":null|"..."}
    {"r":"acc","t":MS,"v":"<sensitive value>"}

Serialization is canonical (fixed key order, compact separators) so that
parse -> serialize round-trips byte-exactly.  Equal-timestamp records keep
file order.  All parsed objects are immutable value objects.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator

from .errors import (
    MalformedLine,
    MalformedManifest,
    NonMonotonicTime,
    UnknownRecordKind,
)

TRACE_FMT = "extsentry-trace"
TRACE_VERSION = 1

CALL_RE = re.compile(r"^[A-Za-z_]+\.[A-Za-z_]+$")
WEB_API_PREFIXES = ("xhr.", "fetch.")


@dataclass(frozen=True, slots=True)
class ApiCallEvent:
    t: int
    kind: str  # chrome_api | web_api
    call: str  # dotted "endpoint.method"
    arg_digest: str | None = None

    def __post_init__(self):
        if self.t < 0:
            raise ValueError(f"negative timestamp {self.t}")
        if not CALL_RE.match(self.call):
            raise ValueError(f"bad call name {self.call!r}")
        if self.kind not in ("chrome_api", "web_api"):
            raise ValueError(f"bad api kind {self.kind!r}")
        if self.kind == "web_api" and not self.call.startswith(WEB_API_PREFIXES):
            raise ValueError(f"web_api call outside web vocabulary: {self.call!r}")


@dataclass(frozen=True, slots=True)
class NetworkEvent:
    t: int
    method: str  # GET | POST
    url: str
    query: tuple[tuple[str, str], ...] = ()
    body: str = ""

    def __post_init__(self):
        if self.t < 0:
            raise ValueError(f"negative timestamp {self.t}")
        if self.method not in ("GET", "POST"):
            raise ValueError(f"bad method {self.method!r}")
        if self.method == "GET" and self.body:
            raise ValueError("GET events carry no body")
        if "://" not in self.url:
            raise ValueError(f"url missing scheme: {self.url!r}")

    @property
    def query_dict(self) -> dict[str, str]:
        return dict(self.query)


@dataclass(frozen=True, slots=True)
class StorageEvent:
    t: int
    store: str  # cookie | localStorage
    key: str
    old_value: str | None = None
    new_value: str | None = None

    def __post_init__(self):
        if self.t < 0:
            raise ValueError(f"negative timestamp {self.t}")
        if self.store not in ("cookie", "localStorage"):
            raise ValueError(f"bad store {self.store!r}")
        if self.old_value is None and self.new_value is None:
            raise ValueError("old_value and new_value both absent")


@dataclass(frozen=True, slots=True)
class BehaviorTrace:
    ext_id: str
    run_id: int
    events: tuple[ApiCallEvent, ...] = ()
    network: tuple[NetworkEvent, ...] = ()
    storage: tuple[StorageEvent, ...] = ()
    accessed_values: tuple[tuple[int, str], ...] = ()

    def calls(self, include_web_api: bool = True) -> list[str]:
        """Call names in time order, optionally dropping web-API events."""
        if include_web_api:
            return [e.call for e in self.events]
        return [e.call for e in self.events if e.kind == "chrome_api"]


@dataclass(frozen=True, slots=True)
class Label:
    ext_id: str
    cls: str  # spying | benign
    provenance: str = ""

    def __post_init__(self):
        if self.cls not in ("spying", "benign"):
            raise ValueError(f"bad class {self.cls!r}")


@dataclass(frozen=True)
class ExtensionRecord:
    ext_id: str
    developer: str = ""
    category: str = ""
    claimed_description: str = ""
    users: int = 0
    rating: float = 0.0
    num_ratings: int = 0
    permissions: frozenset[str] = frozenset()
    filenames: tuple[str, ...] = ()
    source_urls: tuple[str, ...] = ()
    source_snippets: tuple[str, ...] = ()
    reports: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.ext_id:
            raise ValueError("ext_id must be nonempty")
        if not (0.0 <= self.rating <= 5.0):
            raise ValueError(f"rating {self.rating} outside [0,5]")
        if self.users < 0 or self.num_ratings < 0:
            raise ValueError("users and num_ratings must be non-negative")


# ---------------------------------------------------------------------------
# Trace Format v1
# ---------------------------------------------------------------------------

_KNOWN_KINDS = ("api", "net", "sto", "acc")


def _json_line(line: str, line_no: int) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedLine(line_no, str(exc)) from None
    if not isinstance(obj, dict):
        raise MalformedLine(line_no, "record is not a JSON object")
    return obj


def parse_trace(data: bytes | str) -> BehaviorTrace:
    """Parse a Trace Format v1 byte stream into an immutable BehaviorTrace."""
    if isinstance(data, bytes):
        text = data.decode("utf-8")
    else:
        text = data
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise MalformedLine(1, "missing header")

    header = _json_line(lines[0], 1)
    if header.get("fmt") != TRACE_FMT or header.get("v") != TRACE_VERSION:
        raise MalformedLine(1, "not an extsentry-trace v1 header")
    ext_id = header.get("ext_id")
    run_id = header.get("run_id")
    if not isinstance(ext_id, str) or not ext_id or not isinstance(run_id, int):
        raise MalformedLine(1, "header missing ext_id/run_id")

    events: list[ApiCallEvent] = []
    network: list[NetworkEvent] = []
    storage: list[StorageEvent] = []
    accessed: list[tuple[int, str]] = []
    last_t = {"api": -1, "net": -1, "sto": -1, "acc": -1}

    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        obj = _json_line(line, line_no)
        kind = obj.get("r")
        if kind not in _KNOWN_KINDS:
            raise UnknownRecordKind(line_no, str(kind))
        t = obj.get("t")
        if not isinstance(t, int) or t < 0:
            raise MalformedLine(line_no, f"bad timestamp {t!r}")
        if t < last_t[kind]:
            raise NonMonotonicTime(line_no)
        last_t[kind] = t
        try:
            if kind == "api":
                events.append(
                    ApiCallEvent(t=t, kind=obj["k"], call=obj["call"], arg_digest=obj.get("d"))
                )
            elif kind == "net":
                query = obj.get("q") or {}
                if not isinstance(query, dict):
                    raise ValueError("q is not an object")
                network.append(
                    NetworkEvent(
                        t=t,
                        method=obj["m"],
                        url=obj["url"],
                        query=tuple((str(k), str(v)) for k, v in query.items()),
                        body=obj.get("body", ""),
                    )
                )
            elif kind == "sto":
                storage.append(
                    StorageEvent(
                        t=t, store=obj["s"], key=obj["key"],
                        old_value=obj.get("old"), new_value=obj.get("new"),
                    )
                )
            else:  # acc
                value = obj["v"]
                if not isinstance(value, str):
                    raise ValueError("v is not a string")
                accessed.append((t, value))
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedLine(line_no, str(exc)) from None

    return BehaviorTrace(
        ext_id=ext_id,
        run_id=run_id,
        events=tuple(events),
        network=tuple(network),
        storage=tuple(storage),
        accessed_values=tuple(accessed),
    )


def _dump(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def serialize_trace(trace: BehaviorTrace) -> bytes:
    """Canonical Trace Format v1 bytes; parse_trace(serialize_trace(x)) == x."""
    out = io.StringIO()
    out.write(_dump({"fmt": TRACE_FMT, "v": TRACE_VERSION,
                     "ext_id": trace.ext_id, "run_id": trace.run_id}) + "\n")
    for e in trace.events:
        rec: dict = {"r": "api", "t": e.t, "k": e.kind, "call": e.call}
        if e.arg_digest is not None:
            rec["d"] = e.arg_digest
        out.write(_dump(rec) + "\n")
    for n in trace.network:
        out.write(_dump({"r": "net", "t": n.t, "m": n.method, "url": n.url,
                         "q": dict(n.query), "body": n.body}) + "\n")
    for s in trace.storage:
        out.write(_dump({"r": "sto", "t": s.t, "s": s.store, "key": s.key,
                         "old": s.old_value, "new": s.new_value}) + "\n")
    for t, v in trace.accessed_values:
        out.write(_dump({"r": "acc", "t": t, "v": v}) + "\n")
    return out.getvalue().encode("utf-8")


# ---------------------------------------------------------------------------
# Manifests
# ---------------------------------------------------------------------------

def parse_manifest(data: bytes | str) -> tuple[frozenset[str], dict]:
    """Extract the deduplicated permission set plus remaining metadata fields."""
    try:
        obj = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedManifest(str(exc)) from None
    if not isinstance(obj, dict):
        raise MalformedManifest("manifest is not a JSON object")
    perms = obj.get("permissions", [])
    if not isinstance(perms, list) or not all(isinstance(p, str) for p in perms):
        raise MalformedManifest("permissions must be an array of strings")
    meta = {k: v for k, v in obj.items() if k != "permissions"}
    return frozenset(perms), meta


# ---------------------------------------------------------------------------
# Labels and metadata files
# ---------------------------------------------------------------------------

def parse_labels(text: str) -> dict[str, Label]:
    """Labels CSV `ext_id,class,provenance` with header row; one label per ext_id."""
    reader = csv.DictReader(io.StringIO(text))
    labels: dict[str, Label] = {}
    for row in reader:
        ext_id = row["ext_id"]
        if ext_id in labels:
            raise ValueError(f"duplicate label for {ext_id}")
        labels[ext_id] = Label(ext_id=ext_id, cls=row["class"], provenance=row.get("provenance", ""))
    return labels


def serialize_labels(labels: Iterable[Label]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["ext_id", "class", "provenance"])
    for lab in labels:
        writer.writerow([lab.ext_id, lab.cls, lab.provenance])
    return out.getvalue()


def record_to_json(record: ExtensionRecord) -> str:
    return _dump({
        "ext_id": record.ext_id,
        "developer": record.developer,
        "category": record.category,
        "claimed_description": record.claimed_description,
        "users": record.users,
        "rating": record.rating,
        "num_ratings": record.num_ratings,
        "permissions": sorted(record.permissions),
        "filenames": list(record.filenames),
        "source_urls": list(record.source_urls),
        "source_snippets": list(record.source_snippets),
        "reports": list(record.reports),
    })


def record_from_json(line: str) -> ExtensionRecord:
    obj = json.loads(line)
    return ExtensionRecord(
        ext_id=obj["ext_id"],
        developer=obj.get("developer", ""),
        category=obj.get("category", ""),
        claimed_description=obj.get("claimed_description", ""),
        users=obj.get("users", 0),
        rating=obj.get("rating", 0.0),
        num_ratings=obj.get("num_ratings", 0),
        permissions=frozenset(obj.get("permissions", [])),
        filenames=tuple(obj.get("filenames", [])),
        source_urls=tuple(obj.get("source_urls", [])),
        source_snippets=tuple(obj.get("source_snippets", [])),
        reports=tuple(obj.get("reports", [])),
    )


# ---------------------------------------------------------------------------
# Corpus directory layout
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Corpus:
    """In-memory corpus: records, labels and traces keyed by extension id."""
    records: dict[str, ExtensionRecord]
    labels: dict[str, Label]
    traces: dict[str, tuple[BehaviorTrace, ...]] = field(default_factory=dict)

    def with_record(self, record: ExtensionRecord) -> "Corpus":
        records = dict(self.records)
        records[record.ext_id] = record
        return replace(self, records=records)


def trace_filename(ext_id: str, run_id: int) -> str:
    return f"{ext_id}_r{run_id}.trace"


def load_corpus(root: str | Path, with_traces: bool = True) -> Corpus:
    """Load records.jsonl, labels.csv and traces/ from a corpus directory."""
    root = Path(root)
    records: dict[str, ExtensionRecord] = {}
    for line in (root / "records.jsonl").read_text("utf-8").splitlines():
        if line.strip():
            rec = record_from_json(line)
            if rec.ext_id in records:
                raise ValueError(f"duplicate record for {rec.ext_id}")
            records[rec.ext_id] = rec
    labels_path = root / "labels.csv"
    labels = parse_labels(labels_path.read_text("utf-8")) if labels_path.exists() else {}
    traces: dict[str, tuple[BehaviorTrace, ...]] = {}
    trace_dir = root / "traces"
    if with_traces and trace_dir.is_dir():
        by_ext: dict[str, list[BehaviorTrace]] = {}
        for path in sorted(trace_dir.iterdir()):
            if path.suffix != ".trace":
                continue
            tr = parse_trace(path.read_bytes())
            by_ext.setdefault(tr.ext_id, []).append(tr)
        traces = {k: tuple(sorted(v, key=lambda t: t.run_id)) for k, v in by_ext.items()}
    return Corpus(records=records, labels=labels, traces=traces)


def iter_corpus_traces(corpus: Corpus) -> Iterator[BehaviorTrace]:
    for ext_id in sorted(corpus.traces):
        yield from corpus.traces[ext_id]
