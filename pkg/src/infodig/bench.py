"""Benchmark loading, answer verification, scoring, and analysis reports."""

from __future__ import annotations

import json
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .errors import GatewayError, ProtocolError, TransportError
from .gateway import ModelProfile, SamplingParams
from .prompts import load_prompt
from .protocol import Trajectory
from .qa import QAPair, VerificationRule
from .textnorm import normalize_answer, parse_number

log = logging.getLogger(__name__)

# tool name -> reported action category
ACTION_CATEGORIES = {
    "search": "search",
    "crawl": "crawl",
    "click": "browse-action",
    "scroll": "browse-action",
    "type": "browse-action",
    "select": "browse-action",
    "navigate": "browse-action",
    "submit": "browse-action",
    "download": "browse-action",
    "locate": "browse-action",
    "screenshot": "browse-action",
    "read_file": "file-parse",
    "delegate": "delegate",
}
CATEGORY_ORDER = ("search", "crawl", "browse-action", "file-parse", "delegate")


# -- verification -----------------------------------------------------------------


def _normalized_equal(prediction: str, expected: str) -> bool:
    return normalize_answer(prediction) == normalize_answer(expected)


def verify(
    prediction: str,
    qa: QAPair,
    judge_profile: ModelProfile = None,
) -> bool:
    """Rule-based answer check. llm_judge rules fall back to normalized
    comparison when no judge profile is configured."""
    result, _ = verify_detail(prediction, qa, judge_profile)
    return result


def verify_detail(prediction: str, qa: QAPair, judge_profile: ModelProfile = None) -> tuple[bool, list[str]]:
    rule = qa.rule
    prediction = prediction or ""
    flags: list[str] = []
    if rule.kind in ("exact", "normalized"):
        return _normalized_equal(prediction, qa.answer), flags
    if rule.kind == "any_of":
        return any(_normalized_equal(prediction, alt) for alt in rule.payload), flags
    if rule.kind == "numeric_tolerance":
        got = parse_number(prediction)
        want = parse_number(qa.answer)
        if got is None or want is None:
            return False, flags
        return abs(got - want) <= float(rule.payload), flags
    if rule.kind == "llm_judge":
        if judge_profile is None:
            flags.append("llm_judge_fallback_normalized")
            return _normalized_equal(prediction, qa.answer), flags
        prompt = load_prompt("verify_judge").format(
            question=qa.question, answer=qa.answer, prediction=prediction
        )
        try:
            turn = judge_profile.client().complete(
                [{"role": "user", "content": prompt}], SamplingParams(temperature=0.0)
            )[0]
        except (GatewayError, TransportError) as exc:
            flags.append(f"judge_failed: {exc}")
            return _normalized_equal(prediction, qa.answer), flags
        return turn.text.strip().upper().startswith("YES"), flags
    raise ProtocolError(f"unhandled rule kind {rule.kind!r}")


# -- benchmark files -----------------------------------------------------------------

REQUIRED_FIELDS = ("qa_id", "question", "answer")


def load_benchmark(path: Path) -> list[QAPair]:
    """One JSON record per line. A malformed record fails the whole load,
    naming its line; an empty file is a warning, not an error."""
    path = Path(path)
    if not path.exists():
        raise ProtocolError(f"benchmark file not found: {path}")
    qas: list[QAPair] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            for key in REQUIRED_FIELDS:
                if not obj.get(key):
                    raise ProtocolError(f"missing field {key!r}")
            qas.append(QAPair.from_obj(obj))
        except (json.JSONDecodeError, ProtocolError, KeyError, TypeError) as exc:
            raise ProtocolError(f"{path}:{lineno}: bad benchmark record: {exc}") from exc
    if not qas:
        log.warning("benchmark file %s holds no records", path)
    counts = language_counts(qas)
    log.info("loaded %d records from %s (%s)", len(qas), path,
             ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    return qas


def language_counts(qas: list[QAPair]) -> dict[str, int]:
    return dict(Counter(qa.language for qa in qas))


_TIME_VARYING = ("today", "current", "right now", "latest", "this week", "this month",
                 "今天", "现在", "最新", "本周", "本月")
_SUBJECTIVE = ("advantage", "main goal", "focus on", "why does", "key measure",
               "优势", "主要目标", "为什么")


def validate_benchmark(qas: list[QAPair]) -> list[str]:
    """Machine-checkable dataset principles: objectivity, stability,
    verifiability, and per-domain diversity."""
    issues: list[str] = []
    seen_ids = Counter(qa.qa_id for qa in qas)
    for qa_id, n in seen_ids.items():
        if n > 1:
            issues.append(f"{qa_id}: duplicate qa_id ({n} records)")
    per_domain = Counter(qa.root_domain for qa in qas if qa.root_domain)
    for domain, n in per_domain.items():
        if n > 2:
            issues.append(f"{domain}: {n} QA pairs from one root domain (max 2)")
    for qa in qas:
        lowered = qa.question.lower()
        if any(t in lowered for t in _TIME_VARYING):
            issues.append(f"{qa.qa_id}: question looks time-varying")
        if any(t in lowered for t in _SUBJECTIVE):
            issues.append(f"{qa.qa_id}: question looks subjective")
        if qa.question.rstrip().endswith(("...", "等")):
            issues.append(f"{qa.qa_id}: question looks open-ended")
        if qa.golden_url and not qa.golden_url.startswith(("http://", "https://")):
            issues.append(f"{qa.qa_id}: golden_url is not an http(s) URL")
    return issues


# -- action statistics ------------------------------------------------------------------


def _count_actions(traj_set: list[Trajectory]) -> Counter:
    counts: Counter = Counter()
    for traj in traj_set:
        for step in traj.steps:
            for call in step.tool_calls:
                category = ACTION_CATEGORIES.get(call.tool_name)
                if category:
                    counts[category] += 1
    return counts


def action_stats(traj_sets: list[list[Trajectory]], verify_results: list[bool]) -> dict:
    """Mean tool calls per category, split by outcome. A missing outcome group
    is reported as absent and flagged rather than zero-filled."""
    if not traj_sets or len(traj_sets) != len(verify_results):
        raise ProtocolError("action_stats needs matched, non-empty trajectory sets and outcomes")
    groups = {"correct": [], "incorrect": []}
    for traj_set, verified in zip(traj_sets, verify_results):
        groups["correct" if verified else "incorrect"].append(_count_actions(traj_set))
    table: dict = {"correct": None, "incorrect": None, "flags": []}
    for name, counters in groups.items():
        if not counters:
            table["flags"].append(f"no {name} runs")
            continue
        table[name] = {
            cat: round(sum(c.get(cat, 0) for c in counters) / len(counters), 4)
            for cat in CATEGORY_ORDER
        }
    return table


# -- full benchmark runs --------------------------------------------------------------------


@dataclass
class RunReport:
    per_qa: list[dict]
    accuracy: float
    ring_proportions: Optional[dict]
    action_table: dict
    flags: list[str] = field(default_factory=list)

    def to_obj(self) -> dict:
        return {
            "per_qa": self.per_qa,
            "accuracy": self.accuracy,
            "ring_proportions": self.ring_proportions,
            "action_table": self.action_table,
            "flags": self.flags,
        }

    def save(self, out_dir: Path):
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(
            json.dumps(self.to_obj(), ensure_ascii=False, sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
        (out_dir / "report.txt").write_text(self.to_text(), encoding="utf-8")

    def to_text(self) -> str:
        lines = [f"accuracy: {self.accuracy:.4f}  ({len(self.per_qa)} items)"]
        if self.ring_proportions:
            lines.append("grounding rings (correct/retrieved/visited -> share):")
            for combo in sorted(self.ring_proportions):
                lines.append(f"  {combo}: {self.ring_proportions[combo]:.4f}")
        for group in ("correct", "incorrect"):
            stats = self.action_table.get(group)
            if stats:
                rendered = ", ".join(f"{cat}={stats[cat]:.2f}" for cat in CATEGORY_ORDER)
                lines.append(f"mean actions ({group}): {rendered}")
        for flag in self.flags:
            lines.append(f"flag: {flag}")
        lines.append("")
        lines.append(f"{'qa_id':<24} {'ok':<3} prediction")
        for row in self.per_qa:
            lines.append(f"{row['qa_id']:<24} {'y' if row['verified'] else 'n':<3} {row['prediction']}")
        return "\n".join(lines) + "\n"


def run_bench(
    benchmark: list[QAPair],
    engine_for: Callable[[QAPair], object],
    out_dir: Path,
    *,
    judge_profile: ModelProfile = None,
    parallelism: int = 1,
) -> RunReport:
    """Run the engine over a benchmark, verify, and assemble the report.
    Per-item engine failures score as incorrect and are flagged; the run
    continues."""
    from .classifier import grounding_rings, ring_report
    from .protocol import new_task

    if not benchmark:
        raise ProtocolError("benchmark is empty")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def run_one(index: int, qa: QAPair):
        task = new_task(qa.question, task_id=f"task-{qa.qa_id}", created_at=0.0)
        try:
            engine = engine_for(qa)
            result = engine.run(task, run_dir=out_dir / "runs" / qa.qa_id)
            return index, result.final_answer, result.trajectories, None
        except Exception as exc:  # keep the run going; scored as incorrect
            log.warning("engine failed on %s: %s", qa.qa_id, exc)
            return index, None, [], f"engine_error: {exc}"

    outcomes: list = [None] * len(benchmark)
    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            for index, answer, trajs, error in pool.map(lambda iq: run_one(*iq), enumerate(benchmark)):
                outcomes[index] = (answer, trajs, error)
    else:
        for index, qa in enumerate(benchmark):
            _, answer, trajs, error = run_one(index, qa)
            outcomes[index] = (answer, trajs, error)

    per_qa: list[dict] = []
    rings = []
    traj_sets: list[list[Trajectory]] = []
    verified_flags: list[bool] = []
    report_flags: list[str] = []
    for qa, (answer, trajs, error) in zip(benchmark, outcomes):
        prediction = answer or ""
        ok, flags = verify_detail(prediction, qa, judge_profile) if prediction else (False, [])
        row = {
            "qa_id": qa.qa_id,
            "prediction": prediction,
            "verified": ok,
            "abstained": answer is None,
            "tool_counts": dict(_count_actions(trajs)),
        }
        if error:
            row["error"] = error
            report_flags.append(f"{qa.qa_id}: {error}")
        for flag in flags:
            report_flags.append(f"{qa.qa_id}: {flag}")
        if qa.golden_url:
            ring = grounding_rings(trajs, qa, correct=ok)
            row["ring"] = ring.combo()
            rings.append(ring)
        per_qa.append(row)
        traj_sets.append(trajs)
        verified_flags.append(ok)
    accuracy = sum(verified_flags) / len(verified_flags)
    report = RunReport(
        per_qa=per_qa,
        accuracy=accuracy,
        ring_proportions=ring_report(rings) if rings else None,
        action_table=action_stats(traj_sets, verified_flags),
        flags=report_flags,
    )
    report.save(out_dir)
    return report
