"""The indexed/unindexed information model made executable.

A question is *indexed-information-seeking* (IIS) when its answer can be
reached from search snippets, from a single crawl of a search hit, or from a
model's own knowledge; it is *unindexed-information-seeking* (UIS) otherwise.
The classifier runs the filtering stages in cost order - inner knowledge,
snippet scan, depth-1 crawl scan, then an indexed-only answering pass whose
only extra power is downloading files linked from hit pages.  Answers found
only inside such files keep the UIS label with the file-exception flag set.

The stages are conjunctive filters, so running the cheap inner-knowledge
check first changes which stage gets recorded but never the final label.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional
from urllib.parse import urlsplit

import httpx

from .errors import EngineError, ProtocolError, TransportError
from .gateway import ModelProfile, SamplingParams
from .protocol import Trajectory
from .qa import QAPair
from .reader import DownloadedFile, parse, sniff_media_kind
from .searcher import CrawlResult, IndexedInfoSet, SearchHit, accumulate_indexed, crawl, search
from .suffix import root_domain
from .textnorm import contains_answer

log = logging.getLogger(__name__)

LABELS = ("IIS", "UIS", "UNANSWERABLE")
_FILE_SUFFIXES = (".pdf", ".xlsx", ".docx")


@dataclass(frozen=True)
class ClassifyBudget:
    max_queries: int = 5
    top_k: int = 10
    max_crawls: int = 30
    max_downloads: int = 8


@dataclass
class UISVerdict:
    label: str
    stage: str
    evidence: list[dict] = field(default_factory=list)  # matching spans with provenance
    file_exception: bool = False
    spans: list[dict] = field(default_factory=list)  # everything collected, tagged indexed/unindexed
    notes: list[str] = field(default_factory=list)

    def to_obj(self) -> dict:
        return {
            "label": self.label,
            "stage": self.stage,
            "file_exception": self.file_exception,
            "evidence": self.evidence,
            "notes": self.notes,
        }


def _answer_candidates(qa: QAPair) -> list[str]:
    if qa.rule.kind == "any_of":
        return [str(alt) for alt in qa.rule.payload]
    return [qa.answer]


def _found_in(text: str, qa: QAPair) -> bool:
    return any(contains_answer(text, candidate) for candidate in _answer_candidates(qa))


def _span(text: str, qa: QAPair, window: int = 120) -> str:
    # a short context window around the first matching candidate, for reports
    for candidate in _answer_candidates(qa):
        idx = text.find(candidate)
        if idx >= 0:
            return text[max(0, idx - window // 2): idx + len(candidate) + window // 2]
    return text[:window]


def classify(
    qa: QAPair,
    budget: ClassifyBudget = ClassifyBudget(),
    *,
    search_provider,
    inner_profile: ModelProfile = None,
    query_profile: ModelProfile = None,
    judge_profile: ModelProfile = None,
    strict_redirect: bool = False,
    clock=None,
) -> UISVerdict:
    """Run the filtering stages against one QA pair.

    ``strict_redirect`` applies the stricter manual convention: content found
    only by following a hit link (a depth-1 crawl) does not count as indexed,
    so such questions stay UIS.  The default follows the formal definition,
    where depth-1 crawl text is part of the indexed set.
    """
    from .bench import verify

    notes: list[str] = []
    spans: list[dict] = []

    # inner knowledge: can a model answer with no tools at all?
    if inner_profile is not None:
        try:
            turn = inner_profile.client().complete(
                [{"role": "user", "content": qa.question}], SamplingParams(temperature=0.0)
            )[0]
            if verify(turn.text.strip(), qa, judge_profile):
                return UISVerdict(label="IIS", stage="inner_knowledge",
                                  evidence=[{"span": turn.text.strip(), "kind": "model", "ref": "inner"}],
                                  spans=spans, notes=notes)
            notes.append("inner-knowledge answer did not verify")
        except EngineError as exc:
            notes.append(f"inner-knowledge stage skipped: {exc}")

    # queries: model-issued when a profile is given, else the question itself
    queries = [qa.question]
    if query_profile is not None:
        try:
            turn = query_profile.client().complete(
                [{"role": "user", "content": f"Write up to {budget.max_queries} search queries, one per line, "
                                             f"for answering:\n{qa.question}"}],
                SamplingParams(temperature=0.0),
            )[0]
            issued = [line.strip() for line in turn.text.splitlines() if line.strip()]
            if issued:
                queries = issued
        except EngineError as exc:
            notes.append(f"query model failed, using the question as query: {exc}")
    queries = queries[: budget.max_queries]

    try:
        hits = search(search_provider, queries, top_k=budget.top_k)
    except (EngineError, TransportError) as exc:
        return UISVerdict(label="UNANSWERABLE", stage="search", notes=[f"search failed: {exc}"], spans=spans)

    evidence: list[dict] = []
    for hit in hits:
        tagged = {"span": hit.snippet, "kind": "snippet", "ref": hit.link, "indexed": True}
        spans.append(tagged)
        if _found_in(hit.snippet, qa):
            evidence.append({"span": _span(hit.snippet, qa), "kind": "snippet", "ref": hit.link})
    if evidence:
        return UISVerdict(label="IIS", stage="snippet", evidence=evidence, spans=spans, notes=notes)

    # depth-1 crawls of every hit link
    links = [h.link for h in hits]
    if len(links) > budget.max_crawls:
        return UISVerdict(label="UNANSWERABLE", stage="crawl",
                          notes=notes + [f"{len(links)} hits exceed the crawl budget {budget.max_crawls}"],
                          spans=spans)
    crawls: list[CrawlResult] = []
    crawl_evidence: list[dict] = []
    for link in links:
        try:
            result = crawl(link, clock=clock)
        except TransportError as exc:
            notes.append(f"crawl failed for {link}: {exc}")
            continue
        crawls.append(result)
        spans.append({"span": result.text, "kind": "crawl", "ref": link, "indexed": True})
        if _found_in(result.text, qa):
            crawl_evidence.append({"span": _span(result.text, qa), "kind": "crawl", "ref": link})
    indexed = accumulate_indexed(hits, crawls, queries=queries)
    if crawl_evidence:
        if strict_redirect:
            notes.append("answer reachable via hit-link crawl; strict mode keeps the UIS label")
            return UISVerdict(label="UIS", stage="strict_redirect", evidence=crawl_evidence,
                              spans=spans, notes=notes)
        return UISVerdict(label="IIS", stage="crawl", evidence=crawl_evidence, spans=spans, notes=notes)

    # indexed-only answering pass: the one extra capability is downloading
    # files linked from hit pages
    file_links: list[str] = []
    for result in crawls:
        for out in result.outlinks:
            if out.lower().split("?")[0].endswith(_FILE_SUFFIXES) and out not in file_links:
                file_links.append(out)
    for link in links:
        if link.lower().split("?")[0].endswith(_FILE_SUFFIXES) and link not in file_links:
            file_links.append(link)
    file_evidence: list[dict] = []
    for url in file_links[: budget.max_downloads]:
        try:
            resp = httpx.get(url, follow_redirects=True, timeout=20.0)
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            notes.append(f"download failed for {url}: {exc}")
            continue
        data = resp.content
        kind = sniff_media_kind(data)
        if kind not in ("pdf", "xlsx", "docx", "text"):
            continue
        import hashlib
        import tempfile

        tmp = tempfile.NamedTemporaryFile(delete=False, suffix=f".{kind}")
        tmp.write(data)
        tmp.close()
        record = DownloadedFile(
            file_id=hashlib.sha256(data).hexdigest(), origin_url=url,
            media_kind=kind, byte_size=len(data), local_ref=tmp.name,
        )
        try:
            doc = parse(record)
        except EngineError as exc:
            notes.append(f"file parse failed for {url}: {exc}")
            continue
        text = doc.full_text()
        spans.append({"span": text, "kind": "file", "ref": url, "indexed": False})
        if _found_in(text, qa):
            file_evidence.append({"span": _span(text, qa), "kind": "file", "ref": url})
    if file_evidence:
        return UISVerdict(label="UIS", stage="file_download", evidence=file_evidence,
                          file_exception=True, spans=spans, notes=notes)

    notes.append(f"indexed set exhausted: {len(indexed.hits)} hits, {len(indexed.crawls)} crawls, "
                 f"{len(file_links)} files checked")
    return UISVerdict(label="UIS", stage="indexed_exhausted", spans=spans, notes=notes)


# -- grounding analysis ----------------------------------------------------------------


@dataclass(frozen=True)
class GroundingRing:
    correct: bool
    retrieved_root: bool
    visited_root: bool
    root_domain: str

    def combo(self) -> str:
        return f"{int(self.correct)}{int(self.retrieved_root)}{int(self.visited_root)}"


def _iter_hit_links(traj_set: list[Trajectory]):
    for traj in traj_set:
        for step in traj.steps:
            for call, result in zip(step.tool_calls, step.tool_results):
                if call.tool_name == "search" and result.status == "ok" and isinstance(result.content, dict):
                    for hit in result.content.get("hits", []):
                        yield hit.get("link", "")


def _iter_visited_urls(traj_set: list[Trajectory]):
    for traj in traj_set:
        for url in traj.extra.get("history", []):
            yield url
        for step in traj.steps:
            for call, result in zip(step.tool_calls, step.tool_results):
                if result.status != "ok":
                    continue
                if call.tool_name == "crawl" and isinstance(result.content, dict):
                    yield result.content.get("url", "")
                elif call.tool_name == "download" and isinstance(result.content, dict):
                    yield result.content.get("origin_url", "")
                elif call.tool_name in ("navigate", "click", "submit") and isinstance(result.content, dict):
                    yield result.content.get("url", "")


def _same_root(url: str, golden_root: str) -> bool:
    try:
        return bool(url) and root_domain(url) == golden_root
    except ValueError:
        return False


def grounding_rings(traj_set: list[Trajectory], qa: QAPair, correct: Optional[bool] = None) -> GroundingRing:
    """Three nested outcome flags for one run: answer correct, golden root
    domain retrieved in search, golden root domain actually visited (crawled,
    surfed, or downloaded).  Visits without retrieval are possible - agents
    sometimes navigate straight to a known URL."""
    if not qa.golden_url:
        raise ProtocolError(f"QA pair {qa.qa_id} has no golden URL")
    golden_root = qa.root_domain or root_domain(qa.golden_url)
    if correct is None:
        from .bench import verify

        planner = next((t for t in traj_set if t.owner == "planner"), None)
        correct = bool(planner and planner.final_answer and verify(planner.final_answer, qa))
    retrieved = any(_same_root(link, golden_root) for link in _iter_hit_links(traj_set))
    visited = any(_same_root(url, golden_root) for url in _iter_visited_urls(traj_set))
    return GroundingRing(correct=bool(correct), retrieved_root=retrieved,
                         visited_root=visited, root_domain=golden_root)


def ring_report(corpus: list) -> dict[str, float]:
    """Proportions over the eight (correct, retrieved, visited) combinations.
    Accepts GroundingRings or (traj_set, qa) pairs."""
    if not corpus:
        raise ProtocolError("ring_report needs a non-empty corpus")
    rings = []
    for item in corpus:
        if isinstance(item, GroundingRing):
            rings.append(item)
        else:
            traj_set, qa = item
            rings.append(grounding_rings(traj_set, qa))
    total = len(rings)
    out = {f"{c}{r}{v}": 0.0 for c in "01" for r in "01" for v in "01"}
    for ring in rings:
        out[ring.combo()] += 1.0
    return {combo: count / total for combo, count in out.items()}
