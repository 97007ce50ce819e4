"""Search and one-step crawl: building the practically indexed information set.

The indexed set is, by definition, snippets plus depth-1 crawls of hit links;
:func:`accumulate_indexed` enforces that boundary, and everything the engine
later classifies as "indexed" must trace back through this module.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import httpx

from .browser import extract_text_and_links
from .errors import ProtocolError, TransportError

log = logging.getLogger(__name__)

SNIPPET_MAX_CHARS = 400
DEFAULT_TOP_K = 10
MAX_QUERIES_PER_CALL = 10


@dataclass(frozen=True)
class SearchHit:
    title: str
    link: str
    snippet: str
    position: int
    date: Optional[str] = None

    def to_obj(self) -> dict:
        return {
            "title": self.title,
            "link": self.link,
            "snippet": self.snippet,
            "date": self.date,
            "position": self.position,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "SearchHit":
        return cls(
            title=obj.get("title", ""),
            link=obj["link"],
            snippet=obj.get("snippet", ""),
            date=obj.get("date"),
            position=obj.get("position", 1),
        )


@dataclass(frozen=True)
class CrawlResult:
    url: str
    fetched_at: float
    text: str
    outlinks: tuple[str, ...]
    status: int

    def to_obj(self) -> dict:
        return {
            "url": self.url,
            "fetched_at": self.fetched_at,
            "text": self.text,
            "outlinks": list(self.outlinks),
            "status": self.status,
        }


@dataclass(frozen=True)
class IndexedInfoSet:
    """Snippets plus depth-1 crawl texts, with provenance for every span."""

    queries: tuple[str, ...]
    hits: tuple[SearchHit, ...]
    crawls: tuple[CrawlResult, ...]
    provenance: tuple[tuple[str, str, str], ...]  # (span, kind, url)

    def spans(self) -> list[tuple[str, str, str]]:
        return list(self.provenance)


def accumulate_indexed(
    hits: list[SearchHit],
    crawls: list[CrawlResult] = (),
    queries: list[str] = (),
) -> IndexedInfoSet:
    """Build the indexed set. Crawls of URLs that never appeared as hits are
    rejected outright - they would silently widen the definition."""
    seen: dict[str, SearchHit] = {}
    for hit in hits:
        seen.setdefault(hit.link, hit)
    hit_links = set(seen)
    kept_crawls: dict[str, CrawlResult] = {}
    for c in crawls:
        if c.url not in hit_links:
            raise ProtocolError(f"crawl of {c.url} is outside the hit set; indexed info only covers hit links")
        kept_crawls.setdefault(c.url, c)
    provenance = [(h.snippet, "snippet", h.link) for h in seen.values()]
    provenance += [(c.text, "crawl", c.url) for c in kept_crawls.values()]
    return IndexedInfoSet(
        queries=tuple(dict.fromkeys(queries)),
        hits=tuple(seen.values()),
        crawls=tuple(kept_crawls.values()),
        provenance=tuple(provenance),
    )


# -- providers ------------------------------------------------------------------


class StaticSearchProvider:
    """Fixed hits: either one list for every query or a per-query mapping."""

    def __init__(self, hits=None, by_query: dict[str, list[SearchHit]] = None):
        self._hits = list(hits or [])
        self._by_query = by_query or {}

    def run_query(self, query: str, top_k: int) -> list[SearchHit]:
        if query in self._by_query:
            return list(self._by_query[query])[:top_k]
        return list(self._hits)[:top_k]


class FailingSearchProvider:
    def __init__(self, message: str = "provider offline"):
        self.message = message

    def run_query(self, query: str, top_k: int) -> list[SearchHit]:
        raise TransportError(self.message)


def _serper_hits(payload: dict) -> list[SearchHit]:
    hits = []
    for item in payload.get("organic", []):
        hits.append(
            SearchHit(
                title=item.get("title", ""),
                link=item.get("link", ""),
                snippet=item.get("snippet", ""),
                date=item.get("date"),
                position=item.get("position", len(hits) + 1),
            )
        )
    return hits


class FixtureSearchProvider:
    """Replays recorded provider responses from disk, keyed by a digest of the
    request, so search tests run fully offline."""

    def __init__(self, directory: Path):
        self.directory = Path(directory)

    @staticmethod
    def request_digest(query: str, top_k: int) -> str:
        raw = json.dumps({"num": top_k, "q": query}, sort_keys=True)
        return hashlib.sha256(raw.encode("utf-8")).hexdigest()[:24]

    def record(self, query: str, top_k: int, payload: dict):
        self.directory.mkdir(parents=True, exist_ok=True)
        path = self.directory / f"{self.request_digest(query, top_k)}.json"
        path.write_text(json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2), encoding="utf-8")

    def run_query(self, query: str, top_k: int) -> list[SearchHit]:
        path = self.directory / f"{self.request_digest(query, top_k)}.json"
        if not path.exists():
            raise TransportError(f"no recorded response for query {query!r} (top_k={top_k})", retriable=False)
        return _serper_hits(json.loads(path.read_text(encoding="utf-8")))[:top_k]


class SerperSearchProvider:
    """Live Serper-style endpoint; the API key comes from an env var."""

    def __init__(self, endpoint: str = "https://google.serper.dev/search",
                 api_key_env: str = "SERPER_API_KEY", timeout_s: float = 15.0):
        self.endpoint = endpoint
        self.api_key_env = api_key_env
        self.timeout_s = timeout_s

    def run_query(self, query: str, top_k: int) -> list[SearchHit]:
        key = os.environ.get(self.api_key_env, "")
        if not key:
            raise TransportError(f"missing API key env var {self.api_key_env}", retriable=False)
        try:
            resp = httpx.post(
                self.endpoint,
                json={"q": query, "num": top_k},
                headers={"X-API-KEY": key},
                timeout=self.timeout_s,
            )
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            raise TransportError(f"search provider failed: {exc}") from exc
        return _serper_hits(resp.json())[:top_k]


_TOKEN_RE = re.compile(r"[a-z0-9]+")


class SimSearchProvider:
    """Search over a simulated site's indexed pages (homepage and depth-1
    pages), ranked by simple token overlap. Answer-bearing deep pages are not
    indexed, which is exactly what makes the sim questions unindexed."""

    def __init__(self, base_url: str, entries: list[tuple[str, str, str]]):
        self.base_url = base_url.rstrip("/")
        self.entries = entries

    def run_query(self, query: str, top_k: int) -> list[SearchHit]:
        terms = set(_TOKEN_RE.findall(query.lower()))
        scored = []
        for order, (path, title, snippet) in enumerate(self.entries):
            text = f"{title} {snippet} {path}".lower()
            page_tokens = set(_TOKEN_RE.findall(text))
            score = len(terms & page_tokens)
            scored.append((-score, order, path, title, snippet))
        scored.sort()
        hits = []
        for position, (_, _, path, title, snippet) in enumerate(scored[:top_k], start=1):
            hits.append(
                SearchHit(title=title, link=f"{self.base_url}{path}", snippet=snippet, position=position)
            )
        return hits


# -- operations -------------------------------------------------------------------


def search(provider, query_list: list[str], top_k: int = DEFAULT_TOP_K) -> list[SearchHit]:
    """Dispatch up to ten queries concurrently; merge results in (query order,
    position) order, deduplicated by link. A single failing query only logs a
    warning; if every query fails the whole call is a transport error."""
    if not query_list or len(query_list) > MAX_QUERIES_PER_CALL:
        raise ProtocolError(f"query_list must have 1..{MAX_QUERIES_PER_CALL} entries")
    results: list[list[SearchHit]] = [[] for _ in query_list]
    errors: list[str] = []
    with ThreadPoolExecutor(max_workers=min(8, len(query_list))) as pool:
        futures = [pool.submit(provider.run_query, q, top_k) for q in query_list]
        for i, future in enumerate(futures):
            try:
                results[i] = future.result()
            except Exception as exc:
                errors.append(f"{query_list[i]!r}: {exc}")
                log.warning("query %r contributed no hits: %s", query_list[i], exc)
    if errors and len(errors) == len(query_list):
        raise TransportError(f"all {len(query_list)} queries failed; first error: {errors[0]}")
    merged: dict[str, SearchHit] = {}
    for per_query in results:
        for hit in sorted(per_query, key=lambda h: h.position):
            snippet = hit.snippet[:SNIPPET_MAX_CHARS]
            if hit.link not in merged:
                merged[hit.link] = SearchHit(
                    title=hit.title, link=hit.link, snippet=snippet, position=hit.position, date=hit.date
                )
    return list(merged.values())


def crawl(url: str, *, timeout_s: float = 20.0, clock=None) -> CrawlResult:
    """Exactly one fetch of one absolute URL - depth one, never recursive.
    Markup is stripped deterministically; outlinks come back absolutized."""
    if not re.match(r"^https?://", url or ""):
        raise ProtocolError(f"crawl needs an absolute http(s) URL, got {url!r}")
    fetched_at = clock() if clock else time.time()
    try:
        resp = httpx.get(url, follow_redirects=True, timeout=timeout_s)
    except httpx.TimeoutException as exc:
        raise TransportError(f"crawl timeout for {url}: {exc}") from exc
    except httpx.HTTPError as exc:
        raise TransportError(f"crawl failed for {url}: {exc}") from exc
    if resp.status_code < 200 or resp.status_code >= 300:
        return CrawlResult(url=url, fetched_at=fetched_at, text="", outlinks=(), status=resp.status_code)
    content_type = resp.headers.get("content-type", "")
    if "html" in content_type or content_type.startswith("text/"):
        text, outlinks = extract_text_and_links(resp.text, str(resp.url))
    else:
        text, outlinks = "", ()
    return CrawlResult(url=url, fetched_at=fetched_at, text=text, outlinks=tuple(outlinks), status=resp.status_code)
