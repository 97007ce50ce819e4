"""QA synthesis and trajectory dataset construction.

Two sources feed the pipeline: real-site exploration (engine-driven section
collection, then model-written questions, then a judge filter) and simulated
sites (questions derived straight from the seeded database, which doubles as
the verification oracle).  Collected trajectories pass reject sampling -
only verified, non-trivial runs survive - and a difficulty-weighted
retention draw that keeps runs from hard questions with higher probability.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional
from urllib.parse import urlencode

from .errors import GatewayError, ProtocolError
from .gateway import ModelProfile, SamplingParams
from .prompts import load_prompt
from .protocol import Trajectory, dump_trajectory, new_task
from .qa import QAPair, VerificationRule, guess_language
from .simenv.db import QueryTemplate, SimDatabase, oracle
from .simenv.files import _slug
from .suffix import root_domain
from .textnorm import contains_answer

log = logging.getLogger(__name__)

STAGES = ("sft", "rft")
STAGE_SAMPLING = {"sft": SamplingParams(temperature=0.0, group_size=1),
                  "rft": SamplingParams(temperature=0.4, group_size=4)}

MAX_QA_PER_DOMAIN = 2

# Published reference scale for sanity checks (informational only): queries
# and trajectory counts a full-size pipeline produced at each stage.
REFERENCE_SCALE = {
    "sft": {"queries": 1482, "trajectories": 4501},
    "rft": {"queries": 3317, "trajectories": 12959, "retained": 4467},
}


# -- real-site exploration -----------------------------------------------------------


@dataclass(frozen=True)
class ContextSection:
    url: str
    text: str


@dataclass
class ExploreResult:
    sections: list[ContextSection]
    partial: bool


_SECTION_RE = re.compile(r"SECTION:\s*(\S+)\s*\n(.*?)(?=\nSECTION:|\Z)", re.DOTALL)


def explore_site(homepage: str, engine, budget=None, target: int = 5) -> ExploreResult:
    """Roam a site with the full engine and collect up to five deep-page
    sections; fewer than two is flagged as a partial result."""
    prompt = load_prompt("explore_site").format(homepage=homepage)
    task = new_task(prompt, budget or engine.config.budget,
                    task_id=f"task-explore-{_digest(homepage)}", created_at=0.0)
    result = engine.run(task)
    sections: list[ContextSection] = []
    if result.final_answer:
        for match in _SECTION_RE.finditer(result.final_answer):
            text = match.group(2).strip()
            if text:
                sections.append(ContextSection(url=match.group(1), text=text))
            if len(sections) == target:
                break
    return ExploreResult(sections=sections, partial=len(sections) < 2)


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:10]


# -- question generation ----------------------------------------------------------------

_ITEM_RE = re.compile(
    r"\d+\.\s*Question Design:\s*(?P<design>.*?)\s*"
    r"Question:\s*(?P<question>.*?)\s*"
    r"Answer:\s*(?P<answer>.*?)\s*"
    r"Rationale:\s*(?P<rationale>.*?)\s*(?=\d+\.\s*Question Design:|\Z)",
    re.DOTALL,
)


def generate_queries(context: list[ContextSection], profile: ModelProfile,
                     month: str = "2026-08", target: int = 5) -> list[QAPair]:
    """One generation turn, parsed against the fixed four-field item format;
    malformed items are dropped with a warning."""
    if not context:
        raise ProtocolError("generate_queries needs non-empty context")
    joined = "\n\n".join(f"[source: {s.url}]\n{s.text}" for s in context)
    prompt = load_prompt("generate_questions").format(month=month, context=joined)
    turn = profile.client().complete([{"role": "user", "content": prompt}],
                                     SamplingParams(temperature=0.0))[0]
    qas: list[QAPair] = []
    matched = 0
    for match in _ITEM_RE.finditer(turn.text):
        matched += 1
        question = match.group("question").strip()
        answer = match.group("answer").strip()
        if not question or not answer:
            log.warning("dropping malformed generated item %d (empty question or answer)", matched)
            continue
        qas.append(
            QAPair(
                qa_id=f"gen-{_digest(question)}",
                question=question,
                answer=answer,
                language=guess_language(question),
                golden_url=context[0].url,
                root_domain=_safe_root(context[0].url),
                rule=VerificationRule("normalized"),
                source="real_site",
            )
        )
        if len(qas) == target:
            break
    if matched > len(qas):
        log.warning("%d generated items did not parse", matched - len(qas))
    if not qas:
        raise GatewayError("generation turn produced zero parseable QA items")
    return qas


def _safe_root(url: Optional[str]) -> Optional[str]:
    try:
        return root_domain(url) if url else None
    except ValueError:
        return None


# -- judge filtering --------------------------------------------------------------------

DROP_REASONS = ("subjective", "ambiguous", "unverifiable", "time_varying")

_SUBJECTIVE_PATTERNS = (
    r"\badvantages? of\b", r"\bmain goals?\b", r"\bkey measures?\b", r"\bwhy does\b",
    r"\bfocus(es)? on\b", r"\bprospects\b", r"优势", r"主要目标", r"为什么",
)
_TIME_PATTERNS = (r"\btoday\b", r"\bright now\b", r"\bcurrently\b", r"\blatest\b", r"今天", r"现在", r"最新")


@dataclass(frozen=True)
class FilterDecision:
    decision: str  # keep | drop | quarantined
    reason: Optional[str] = None


def judge_filter(qa: QAPair, profile: ModelProfile = None) -> FilterDecision:
    """Rule-based screens first, then the judge model. A judge outage
    quarantines the item instead of silently keeping it."""
    for pattern in _SUBJECTIVE_PATTERNS:
        if re.search(pattern, qa.question, re.IGNORECASE):
            return FilterDecision("drop", "subjective")
    for pattern in _TIME_PATTERNS:
        if re.search(pattern, qa.question, re.IGNORECASE):
            return FilterDecision("drop", "time_varying")
    if not qa.answer.strip():
        return FilterDecision("drop", "unverifiable")
    if profile is None:
        return FilterDecision("keep")
    prompt = load_prompt("judge_question").format(question=qa.question, answer=qa.answer)
    try:
        turn = profile.client().complete([{"role": "user", "content": prompt}],
                                         SamplingParams(temperature=0.0))[0]
    except GatewayError as exc:
        log.warning("judge failed on %s: %s", qa.qa_id, exc)
        return FilterDecision("quarantined", str(exc))
    reply = turn.text.strip()
    if reply.upper().startswith("KEEP"):
        return FilterDecision("keep")
    match = re.search(r"DROP\s+(\w+)", reply, re.IGNORECASE)
    reason = (match.group(1).lower() if match else "ambiguous")
    if reason not in DROP_REASONS:
        reason = "ambiguous"
    return FilterDecision("drop", reason)


def cap_per_domain(qas: list[QAPair], limit: int = MAX_QA_PER_DOMAIN) -> list[QAPair]:
    """Benchmark-style diversity rule: at most `limit` pairs per root domain."""
    kept: list[QAPair] = []
    counts: dict[str, int] = {}
    for qa in qas:
        domain = qa.root_domain or ""
        if counts.get(domain, 0) >= limit:
            continue
        counts[domain] = counts.get(domain, 0) + 1
        kept.append(qa)
    return kept


# -- simulated-site derivation --------------------------------------------------------------

_QUESTION_TEXT = {
    ("flights", "min_fare"): "What is the lowest fare for a SimFlights flight from {origin} to {destination} on {date}?",
    ("flights", "max_fare"): "What is the highest fare for a SimFlights flight from {origin} to {destination} on {date}?",
    ("flights", "count"): "How many SimFlights flights run from {origin} to {destination} on {date}?",
    ("flights", "lookup_fare"): "What is the fare of SimFlights flight {flight_no} from {origin} to {destination} on {date}?",
    ("shopping", "lookup_price"): "What was the unit price of the {item} that {user} bought on {date} at SimShop?",
    ("shopping", "count"): "How many SimShop orders did {user} place in total?",
    ("shopping", "min_price"): "What is the lowest unit price among {user}'s SimShop orders?",
    ("shopping", "max_price"): "What is the highest unit price among {user}'s SimShop orders?",
    ("statistics", "lookup_value"): "What is the published {metric} value for {region} in {period} on the SimStats Portal?",
    ("statistics", "count"): "How many periods of {metric} records does the SimStats Portal publish for {region}?",
    ("statistics", "lookup_audited"): "According to the audited report files on the SimStats Portal, what is the audited {metric} for {region} in {period}?",
    ("statistics", "diff_value"): "By how much did the published {metric} for {region} change from {_p1} to {_p2} on the SimStats Portal?",
}


def _golden_url(base_url: str, template: QueryTemplate) -> str:
    base = base_url.rstrip("/")
    p = template.params
    if template.kind == "flights":
        query = urlencode(sorted({k: v for k, v in p.items() if k in ("origin", "destination", "date")}.items()))
        return f"{base}/results?{query}"
    if template.kind == "shopping":
        query = urlencode(sorted({k: v for k, v in p.items() if k in ("user", "item", "date")}.items()))
        return f"{base}/orders/results?{query}"
    if template.name == "lookup_audited":
        return f"{base}/download/audited-{_slug(p['region'])}.pdf"
    query = urlencode(sorted({k: v for k, v in p.items() if k in ("region", "metric", "period")}.items()))
    return f"{base}/stats/results?{query}"


def derive_from_db(db: SimDatabase, template: QueryTemplate, base_url: str = "http://sim.invalid") -> QAPair:
    """Turn one query template into a QA pair whose answer comes straight from
    exhaustive database evaluation - the oracle and the QA share one source of
    truth. Non-unique or empty selections raise."""
    answer = oracle(db, template)
    text_key = (template.kind, template.name)
    if text_key not in _QUESTION_TEXT:
        raise ProtocolError(f"no question wording for template {text_key}")
    question = _QUESTION_TEXT[text_key].format(**template.params)
    golden = _golden_url(base_url, template)
    return QAPair(
        qa_id=f"sim-{db.kind}-{_digest(question)}",
        question=question,
        answer=answer,
        language="en",
        golden_url=golden,
        root_domain=_safe_root(golden),
        rule=VerificationRule("numeric_tolerance", 1e-9),
        source="sim_site",
        query_template=template.to_obj(),
    )


# -- trajectory collection ---------------------------------------------------------------------


@dataclass
class RunSample:
    """One full engine run for one question: its answer, verification flag,
    and every trajectory the run produced."""

    final_answer: Optional[str]
    verified: bool
    trajectories: list[Trajectory]
    dropped: Optional[str] = None  # set by reject sampling / reweighting


@dataclass
class TrajectoryRecord:
    qa: QAPair
    stage: str
    group_size: int
    samples: list[RunSample] = field(default_factory=list)
    error: bool = False

    @property
    def qa_id(self) -> str:
        return self.qa.qa_id

    @property
    def correct_count(self) -> int:
        return sum(1 for s in self.samples if s.verified and s.dropped is None)

    def surviving(self) -> list[RunSample]:
        return [s for s in self.samples if s.dropped is None]


def collect(
    qas: list[QAPair],
    stage: str,
    engine_for: Callable[[QAPair, int], object],
    *,
    judge_profile: ModelProfile = None,
    run_root: Optional[Path] = None,
) -> list[TrajectoryRecord]:
    """Run every question at the stage's sampling setting: one run per
    question for sft, a group of four at temperature 0.4 for rft.  Engine
    crashes produce an error record with zero correct attempts."""
    from .bench import verify

    if stage not in STAGES:
        raise ProtocolError(f"stage must be one of {STAGES}, got {stage!r}")
    sampling = STAGE_SAMPLING[stage]
    records: list[TrajectoryRecord] = []
    for qa in qas:
        record = TrajectoryRecord(qa=qa, stage=stage, group_size=sampling.group_size)
        for member in range(sampling.group_size):
            task = new_task(qa.question, task_id=f"task-{qa.qa_id}-g{member}", created_at=0.0)
            run_dir = (Path(run_root) / stage / qa.qa_id / f"g{member}") if run_root else None
            try:
                engine = engine_for(qa, member)
                result = engine.run(task, run_dir=run_dir)
            except Exception as exc:
                log.warning("engine crashed on %s member %d: %s", qa.qa_id, member, exc)
                record.error = True
                record.samples.append(RunSample(None, False, [], dropped="engine_error"))
                continue
            verified = bool(result.final_answer) and verify(result.final_answer, qa, judge_profile)
            record.samples.append(RunSample(result.final_answer, verified, result.trajectories))
        records.append(record)
    return records


def first_model_turn(sample: RunSample) -> str:
    """The top-level agent's first model output for this run."""
    planner = next((t for t in sample.trajectories if t.owner == "planner"), None)
    if planner and planner.steps:
        return planner.steps[0].thought
    return ""


def reject_sample(records: list[TrajectoryRecord]) -> list[TrajectoryRecord]:
    """Keep only verified, non-trivial runs.  A run is trivial when the golden
    answer already appears in the planner's first model turn - the question
    required no seeking."""
    for record in records:
        for sample in record.samples:
            if sample.dropped is not None:
                continue
            if not sample.verified:
                sample.dropped = "incorrect"
            elif contains_answer(first_model_turn(sample), record.qa.answer):
                sample.dropped = "trivial"
    return records


def retention_probability(k: int, group_size: int) -> float:
    """w(k) = (G - k + 1) / G: fewer correct attempts, higher retention."""
    if not 1 <= k <= group_size:
        raise ProtocolError(f"k must be in 1..{group_size}, got {k}")
    return (group_size - k + 1) / group_size


def _unit_draw(seed: int, qa_id: str, index: int) -> float:
    raw = hashlib.sha256(f"{seed}:{qa_id}:{index}".encode("utf-8")).digest()
    return int.from_bytes(raw[:8], "big") / 2**64


def difficulty_reweight(records: list[TrajectoryRecord], seed: int) -> list[TrajectoryRecord]:
    """Independently retain each surviving run with probability w(k), where k
    is the record's surviving-correct count.  Draws derive from the seed and
    stable per-run keys, so the outcome is order-independent."""
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ProtocolError("difficulty_reweight needs an integer seed")
    for record in records:
        k = len(record.surviving())
        if k == 0:
            continue
        w = retention_probability(k, record.group_size)
        for index, sample in enumerate(record.samples):
            if sample.dropped is None and _unit_draw(seed, record.qa_id, index) >= w:
                sample.dropped = "reweighted_out"
    return records


# -- dataset emission -----------------------------------------------------------------------------


@dataclass
class DatasetManifest:
    stage: str
    qa_ids: list[str]
    files: list[str]
    retention_seed: Optional[int]
    difficulty_buckets: dict[str, int]

    def to_obj(self) -> dict:
        return {
            "stage": self.stage,
            "qa_ids": self.qa_ids,
            "files": self.files,
            "retention_seed": self.retention_seed,
            "difficulty_buckets": self.difficulty_buckets,
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "DatasetManifest":
        return cls(
            stage=obj["stage"],
            qa_ids=list(obj["qa_ids"]),
            files=list(obj["files"]),
            retention_seed=obj.get("retention_seed"),
            difficulty_buckets=dict(obj.get("difficulty_buckets", {})),
        )


def _training_segments(qa: QAPair, traj: Trajectory) -> list[dict]:
    """Flatten a trajectory into training segments: model-generated turns are
    trainable, tool responses and the task statement are not."""
    segments = [{"role": "user", "text": qa.question, "trainable": False}]
    for step in traj.steps:
        if step.thought:
            segments.append({"role": "assistant", "text": step.thought, "trainable": True})
        for call, result in zip(step.tool_calls, step.tool_results):
            rendered = json.dumps({"tool": call.tool_name, "result": result.content},
                                  ensure_ascii=False, sort_keys=True)
            segments.append({"role": "tool", "text": rendered, "trainable": False})
    if traj.final_answer and (not traj.steps or traj.steps[-1].thought != traj.final_answer):
        segments.append({"role": "assistant", "text": traj.final_answer, "trainable": True})
    return segments


def emit_dataset(records: list[TrajectoryRecord], stage: str, out_dir: Path,
                 retention_seed: Optional[int] = None) -> DatasetManifest:
    """Write surviving runs as training files plus a manifest.  The sft and
    rft question sets must stay disjoint, so emission fails if the other
    stage's manifest in the same directory shares any qa_id."""
    if stage not in STAGES:
        raise ProtocolError(f"stage must be one of {STAGES}, got {stage!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    other = [s for s in STAGES if s != stage][0]
    other_manifest = out_dir / f"manifest_{other}.json"
    qa_ids = sorted({r.qa_id for r in records})
    if other_manifest.exists():
        existing = DatasetManifest.from_obj(json.loads(other_manifest.read_text(encoding="utf-8")))
        overlap = sorted(set(qa_ids) & set(existing.qa_ids))
        if overlap:
            raise ProtocolError(f"qa_ids overlap across stages: {', '.join(overlap)}")
    files: list[str] = []
    buckets: dict[str, int] = {}
    for record in records:
        if record.surviving():
            bucket = str(record.correct_count)
            buckets[bucket] = buckets.get(bucket, 0) + 1
        for member, sample in enumerate(record.samples):
            if sample.dropped is not None:
                continue
            for traj in sample.trajectories:
                name = f"{stage}/{record.qa_id}.g{member}.{traj.ref}.{traj.owner}.jsonl"
                path = out_dir / name
                path.parent.mkdir(parents=True, exist_ok=True)
                lines = [json.dumps(seg, ensure_ascii=False, sort_keys=True)
                         for seg in _training_segments(record.qa, traj)]
                path.write_text("\n".join(lines) + "\n", encoding="utf-8")
                files.append(name)
                raw = out_dir / f"{stage}/{record.qa_id}.g{member}.{traj.ref}.{traj.owner}.raw.jsonl"
                raw.write_text(dump_trajectory(traj), encoding="utf-8")
    manifest = DatasetManifest(stage=stage, qa_ids=qa_ids, files=files,
                               retention_seed=retention_seed, difficulty_buckets=buckets)
    (out_dir / f"manifest_{stage}.json").write_text(
        json.dumps(manifest.to_obj(), ensure_ascii=False, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    return manifest


def load_manifest(out_dir: Path, stage: str) -> DatasetManifest:
    path = Path(out_dir) / f"manifest_{stage}.json"
    return DatasetManifest.from_obj(json.loads(path.read_text(encoding="utf-8")))


def scale_note(manifest: DatasetManifest) -> str:
    """Informational comparison against the published full-scale pipeline."""
    ref = REFERENCE_SCALE.get(manifest.stage, {})
    return (f"{manifest.stage}: {len(manifest.qa_ids)} questions, {len(manifest.files)} files "
            f"(full-scale reference: {ref.get('queries', '?')} questions, "
            f"{ref.get('trajectories', '?')} trajectories)")
