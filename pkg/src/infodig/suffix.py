"""Registrable-domain ("root website") extraction.

Implements the standard public-suffix matching algorithm against a bundled
snapshot: exception rules win, otherwise the longest matching rule, otherwise
the rightmost label; the registrable domain is the suffix plus one label.
"""

from __future__ import annotations

import ipaddress
import re
from functools import lru_cache
from importlib import resources
from urllib.parse import urlsplit

_LABEL_RE = re.compile(r"^[a-z0-9_](?:[a-z0-9_-]*[a-z0-9_])?$")


@lru_cache(maxsize=1)
def _rules() -> tuple[frozenset, frozenset, frozenset]:
    normal, wildcard, exception = set(), set(), set()
    data = resources.files("infodig").joinpath("data/public_suffix_snapshot.dat").read_text("utf-8")
    for line in data.splitlines():
        line = line.strip().lower()
        if not line or line.startswith("//"):
            continue
        if line.startswith("!"):
            exception.add(line[1:])
        elif line.startswith("*."):
            wildcard.add(line[2:])
        else:
            normal.add(line)
    return frozenset(normal), frozenset(wildcard), frozenset(exception)


def public_suffix(host: str) -> str:
    """Longest matching public suffix of a lowercase hostname."""
    normal, wildcard, exception = _rules()
    labels = host.split(".")
    for i in range(len(labels)):
        candidate = ".".join(labels[i:])
        if candidate in exception:
            # the suffix is the exception rule minus its leftmost label
            return ".".join(labels[i + 1:])
    best = labels[-1]  # implicit "*" rule
    for i in range(len(labels)):
        candidate = ".".join(labels[i:])
        if candidate in normal and len(candidate) > len(best):
            best = candidate
        # "*.<base>" makes every direct child of <base> a suffix
        parent = ".".join(labels[i + 1:])
        if parent in wildcard and len(candidate) > len(best):
            best = candidate
    return best


def registrable_domain(host: str) -> str:
    """Public suffix plus one label; the host itself if nothing remains."""
    host = host.strip().strip(".").lower()
    if not host:
        raise ValueError("empty hostname")
    try:
        ipaddress.ip_address(host)
        return host
    except ValueError:
        pass
    if "." not in host:
        return host  # single-label hosts (localhost etc.)
    for label in host.split("."):
        if not _LABEL_RE.match(label):
            raise ValueError(f"invalid hostname label: {label!r}")
    suffix = public_suffix(host)
    if host == suffix:
        return host
    extra = host[: -(len(suffix) + 1)].split(".") if suffix else host.split(".")
    return f"{extra[-1]}.{suffix}" if suffix else extra[-1]


def root_domain(url: str) -> str:
    """Registrable domain of an absolute URL, lowercased."""
    parts = urlsplit(url)
    if not parts.scheme or not parts.netloc:
        raise ValueError(f"not an absolute URL: {url!r}")
    host = parts.hostname
    if not host:
        raise ValueError(f"URL has no hostname: {url!r}")
    return registrable_domain(host)
