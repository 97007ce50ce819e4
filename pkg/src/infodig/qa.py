"""QA pairs and their verification rules (shared across bench, forge, classifier)."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .errors import ProtocolError

RULE_KINDS = ("exact", "normalized", "any_of", "numeric_tolerance", "llm_judge")
QA_SOURCES = ("real_site", "sim_site", "benchmark")
LANGUAGES = ("zh", "en")

_CJK_RE = re.compile(r"[一-鿿]")


@dataclass(frozen=True)
class VerificationRule:
    kind: str
    payload: object = None  # alternatives list, tolerance number, or judge prompt ref

    def __post_init__(self):
        if self.kind not in RULE_KINDS:
            raise ProtocolError(f"unknown verification rule kind: {self.kind!r}")
        if self.kind == "any_of" and not self.payload:
            raise ProtocolError("any_of rules need a non-empty alternatives list")
        if self.kind == "numeric_tolerance":
            if self.payload is None or float(self.payload) < 0:
                raise ProtocolError("numeric_tolerance rules need a tolerance >= 0")

    def to_obj(self) -> dict:
        return {"kind": self.kind, "payload": self.payload}

    @classmethod
    def from_obj(cls, obj) -> "VerificationRule":
        if isinstance(obj, str):  # shorthand: "llm_judge" or a bare kind
            return cls(kind=obj)
        return cls(kind=obj["kind"], payload=obj.get("payload"))


@dataclass(frozen=True)
class QAPair:
    qa_id: str
    question: str
    answer: str
    language: str = "en"
    golden_url: Optional[str] = None
    root_domain: Optional[str] = None
    rule: VerificationRule = VerificationRule("normalized")
    source: str = "benchmark"
    context_sections: tuple[str, ...] = ()
    query_template: Optional[dict] = None  # sim QA pairs: enables oracle recomputation

    def __post_init__(self):
        if not self.answer:
            raise ProtocolError(f"QA pair {self.qa_id}: answer must be non-empty")
        if self.language not in LANGUAGES:
            raise ProtocolError(f"QA pair {self.qa_id}: language must be one of {LANGUAGES}")
        if self.source == "sim_site" and not self.query_template:
            raise ProtocolError(f"QA pair {self.qa_id}: sim pairs must carry a query template")

    def to_obj(self) -> dict:
        obj = {
            "qa_id": self.qa_id,
            "question": self.question,
            "answer": self.answer,
            "language": self.language,
            "golden_url": self.golden_url,
            "root_domain": self.root_domain,
            "rule": self.rule.to_obj(),
            "source": self.source,
        }
        if self.context_sections:
            obj["context_sections"] = list(self.context_sections)
        if self.query_template:
            obj["query_template"] = self.query_template
        return obj

    @classmethod
    def from_obj(cls, obj: dict) -> "QAPair":
        return cls(
            qa_id=str(obj["qa_id"]),
            question=obj["question"],
            answer=str(obj["answer"]),
            language=obj.get("language") or guess_language(obj["question"]),
            golden_url=obj.get("golden_url"),
            root_domain=obj.get("root_domain"),
            rule=VerificationRule.from_obj(obj.get("rule", {"kind": "normalized"})),
            source=obj.get("source", "benchmark"),
            context_sections=tuple(obj.get("context_sections", ())),
            query_template=obj.get("query_template"),
        )


def guess_language(text: str) -> str:
    return "zh" if _CJK_RE.search(text or "") else "en"
