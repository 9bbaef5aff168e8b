"""Registered-domain (TLD+1) computation against a bundled public-suffix snapshot.

Third-party checks throughout the toolkit operate at the registered-domain
granularity: the public suffix plus one label.  The snapshot ships with the
package; there are no network lookups.
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources
from urllib.parse import urlparse

_SNAPSHOT_RESOURCE = "public_suffix_snapshot.dat"


def _load_rules(text: str) -> tuple[dict[tuple[str, ...], bool], int]:
    """Parse suffix rules into {reversed labels: is_exception} plus max rule length."""
    rules: dict[tuple[str, ...], bool] = {}
    longest = 1
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("//"):
            continue
        exception = line.startswith("!")
        if exception:
            line = line[1:]
        labels = tuple(reversed(line.lower().split(".")))
        rules[labels] = exception
        longest = max(longest, len(labels))
    return rules, longest


@lru_cache(maxsize=1)
def _default_rules() -> tuple[dict[tuple[str, ...], bool], int]:
    text = resources.files("extsentry.data").joinpath(_SNAPSHOT_RESOURCE).read_text("utf-8")
    return _load_rules(text)


def public_suffix(host: str) -> str:
    """Longest matching public suffix of ``host`` per the standard PSL algorithm.

    Unlisted TLDs fall back to the implicit ``*`` rule (last label is the suffix).
    """
    rules, longest = _default_rules()
    labels = host.lower().rstrip(".").split(".")
    rev = tuple(reversed(labels))
    match_len = 1  # implicit "*" rule
    for n in range(1, min(len(rev), longest) + 1):
        prefix = rev[:n]
        exact = rules.get(prefix)
        if exact is False:
            match_len = max(match_len, n)
        elif exact is True:
            # exception rule: the suffix is the rule minus its leftmost label
            match_len = max(match_len, n - 1)
        if n >= 2:
            wild = prefix[:-1] + ("*",)
            if rules.get(wild) is False:
                match_len = max(match_len, n)
    return ".".join(reversed(rev[:match_len]))


def registered_domain(host_or_url: str) -> str:
    """TLD+1 of a host name or URL; empty string if the input has no host.

    A bare public suffix (e.g. ``co.uk``) has no registrable part and also
    returns the empty string.
    """
    host = host_or_url.strip().lower()
    if "//" in host or host.startswith(("http:", "https:")):
        host = urlparse(host_or_url.strip()).netloc.lower()
    host = host.split("@")[-1].split(":")[0].rstrip(".")
    if not host or "." not in host:
        return ""
    labels = host.split(".")
    suffix = public_suffix(host)
    n_suffix = suffix.count(".") + 1
    if len(labels) <= n_suffix:
        return ""
    return ".".join(labels[-(n_suffix + 1):])
