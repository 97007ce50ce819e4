"""Deterministic scripted policies for solving simulated-site questions.

Given a sim QA pair (which carries its database query template), this module
writes the model scripts that steer the engine through the real form flow:
navigate to the search form, fill the fields from the template params,
submit, and read the answer off the rendered results page with an extraction
pattern.  Answers therefore come from the served pages, never from the
database - if navigation or rendering broke, verification against the oracle
would fail.
"""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Optional

from ..engine import EngineConfig
from ..errors import ProtocolError
from ..gateway import ModelProfile
from ..protocol import DEFAULT_BUDGET, StepBudget
from ..qa import QAPair
from .db import QueryTemplate, SimDatabase


def _tool(name: str, args: dict) -> str:
    return "```tool\n" + json.dumps({"tool": name, "args": args}, ensure_ascii=False) + "\n```"


def _plan_response(qa: QAPair, base_url: str) -> str:
    return (
        "This needs interaction with the site, so the web surfer takes it.\n"
        + _tool(
            "plan",
            {
                "subtasks": [
                    {
                        "instruction": qa.question,
                        "assignee": "web_surfer",
                        "start_url": base_url + "/",
                        "max_num_steps": 20,
                    }
                ]
            },
        )
    )


_HOME_MARKERS = {
    "flights": "Plan journeys across the SimFlights network",
    "shopping": "Browse the SimShop order ledger",
    "statistics": "Explore regional indicators",
}
_FORM_PATHS = {"flights": "/search", "shopping": "/orders", "statistics": "/stats"}
_FORM_MARKERS = {"flights": "Search flights", "shopping": "Order lookup", "statistics": "Statistics lookup"}
_RESULT_MARKERS = {"flights": "flights found", "shopping": "orders found", "statistics": "records found"}


def _fill_turn(template: QueryTemplate) -> str:
    """One turn that fills every form field and submits; actions run in issue
    order, so the submit comes last."""
    p = template.params
    calls: list[str] = []
    if template.kind == "flights":
        calls.append(_tool("select", {"target": "origin", "value": p["origin"]}))
        calls.append(_tool("select", {"target": "destination", "value": p["destination"]}))
        calls.append(_tool("type", {"target": "date", "value": p["date"]}))
        sort = "fare_desc" if template.name == "max_fare" else "fare_asc"
        calls.append(_tool("select", {"target": "sort", "value": sort}))
    elif template.kind == "shopping":
        calls.append(_tool("select", {"target": "user", "value": p["user"]}))
        if "item" in p:
            calls.append(_tool("select", {"target": "item", "value": p["item"]}))
        if "date" in p:
            calls.append(_tool("type", {"target": "date", "value": p["date"]}))
        sort = "price_desc" if template.name == "max_price" else "price_asc"
        calls.append(_tool("select", {"target": "sort", "value": sort}))
    else:
        calls.append(_tool("select", {"target": "region", "value": p["region"]}))
        calls.append(_tool("select", {"target": "metric", "value": p["metric"]}))
        if "period" in p:
            calls.append(_tool("select", {"target": "period", "value": p["period"]}))
    calls.append(_tool("submit", {"target": "0"}))
    return "Filling the form with the requested filters.\n" + "\n".join(calls)


def _extract_pattern(template: QueryTemplate) -> str:
    """Regex (with one group) applied to the results-page observation."""
    p = template.params
    if template.kind == "flights":
        if template.name in ("min_fare", "max_fare"):
            return r"fare ([0-9][0-9.]*)"  # first row carries the extreme under the chosen sort
        if template.name == "count":
            return r"(\d+) flights found"
        if template.name == "lookup_fare":
            return re.escape(p["flight_no"]) + r".*?fare ([0-9][0-9.]*)"
    elif template.kind == "shopping":
        if template.name in ("min_price", "max_price"):
            return r"at price ([0-9][0-9.]*)"
        if template.name == "count":
            return r"(\d+) orders found"
        if template.name == "lookup_price":
            return re.escape(p["item"]) + r" on " + re.escape(p["date"]) + r" at price ([0-9][0-9.]*)"
    else:
        if template.name == "lookup_value":
            return r"Value: (-?[0-9][0-9.]*)"
        if template.name == "count":
            return r"(\d+) records found"
    raise ProtocolError(f"no extraction pattern for template {template.kind}/{template.name}")


def surfer_script(qa: QAPair, base_url: str) -> list[dict]:
    template = QueryTemplate.from_obj(qa.query_template)
    kind = template.kind
    return [
        {
            "match": _HOME_MARKERS[kind],
            "response": "Opening the lookup form.\n" + _tool("navigate", {"target": base_url + _FORM_PATHS[kind]}),
            "max_uses": 1,
        },
        {"match": _FORM_MARKERS[kind], "response": _fill_turn(template), "max_uses": 1},
        {"match": _RESULT_MARKERS[kind], "response": "{{extract:" + _extract_pattern(template) + "}}"},
    ]


def planner_script(qa: QAPair, base_url: str) -> list[dict]:
    return [
        {"match": "Plan sub-tasks", "response": _plan_response(qa, base_url), "max_uses": 1},
        {"match": "terminated=answered answer=", "response": "{{extract:terminated=answered answer=(.*)}}"},
        # sub-task failed or ran out of budget: abstain
        {"match": "finished: terminated=", "response": ""},
    ]


def policy_config(
    qa: QAPair,
    base_url: str,
    *,
    run_dir: Optional[Path] = None,
    budget: StepBudget = DEFAULT_BUDGET,
    variant: int = 0,
    temperature: float = 0.0,
) -> EngineConfig:
    """Engine configuration whose scripted models solve this sim QA pair."""
    profiles = {
        "planner": ModelProfile(role="teacher", endpoint="scripted", script=planner_script(qa, base_url)),
        "web_surfer": ModelProfile(role="teacher", endpoint="scripted", script=surfer_script(qa, base_url)),
        "web_searcher": ModelProfile(role="teacher", endpoint="scripted", script=[]),
        "file_reader": ModelProfile(role="teacher", endpoint="scripted", script=[]),
    }
    return EngineConfig(
        profiles=profiles,
        budget=budget,
        deterministic=True,
        run_dir=run_dir,
        temperature=temperature,
        variant=variant,
    )


# -- deterministic QA suites over a seeded database ---------------------------------


def _shallow_page_texts(db: SimDatabase) -> list[str]:
    from ..browser import extract_text_and_links
    from .site import SiteRenderer, site_spec

    renderer = SiteRenderer(site_spec(db.kind, "form"), db)
    texts = []
    for path in renderer.pages_below_answer_depth():
        status, _, body, _ = renderer.handle("GET", path, {}, {})
        if status == 200:
            text, _ = extract_text_and_links(body.decode("utf-8"), f"http://sim.invalid{path}")
            texts.append(text)
    return texts


def sim_qa_suite(db: SimDatabase, base_url: str, count: int, seed: int = 0) -> list[QAPair]:
    """Pick `count` valid, scriptable QA pairs for this database.  Candidates
    cycle through the template kinds; ones the oracle rejects (empty or
    non-unique selections) are skipped, as is any candidate whose answer
    string already shows up on a page shallower than the answer depth - the
    generated questions must be unindexed by construction."""
    import random

    from ..forge import derive_from_db
    from ..textnorm import contains_answer

    rng = random.Random(f"suite:{db.kind}:{seed}")
    rows = list(db.records)
    rng.shuffle(rows)
    shallow_texts = _shallow_page_texts(db)
    candidates: list[QueryTemplate] = []
    for row in rows:
        if db.kind == "flights":
            route = {"origin": row["origin"], "destination": row["destination"], "date": row["date"]}
            candidates.append(QueryTemplate("flights", "min_fare", route))
            candidates.append(QueryTemplate("flights", "count", route))
            candidates.append(QueryTemplate("flights", "lookup_fare", {**route, "flight_no": row["flight_no"]}))
            candidates.append(QueryTemplate("flights", "max_fare", route))
        elif db.kind == "shopping":
            candidates.append(QueryTemplate("shopping", "count", {"user": row["user"]}))
            candidates.append(
                QueryTemplate("shopping", "lookup_price",
                              {"user": row["user"], "item": row["item"], "date": row["date"]})
            )
            candidates.append(QueryTemplate("shopping", "min_price", {"user": row["user"]}))
            candidates.append(QueryTemplate("shopping", "max_price", {"user": row["user"]}))
        else:
            key = {"region": row["region"], "metric": row["metric"]}
            candidates.append(QueryTemplate("statistics", "lookup_value", {**key, "period": row["period"]}))
            candidates.append(QueryTemplate("statistics", "count", key))
    suite: list[QAPair] = []
    seen_questions: set[str] = set()
    for template in candidates:
        try:
            qa = derive_from_db(db, template, base_url)
        except ProtocolError:
            continue
        if qa.question in seen_questions:
            continue
        if any(contains_answer(text, qa.answer) for text in shallow_texts):
            continue
        seen_questions.add(qa.question)
        suite.append(qa)
        if len(suite) == count:
            return suite
    raise ProtocolError(f"could only derive {len(suite)} of {count} QA pairs from this database")


def sim_file_qa_suite(db: SimDatabase, base_url: str, count: int, seed: int = 0) -> list[QAPair]:
    """QA pairs answerable only from the downloadable audited report files."""
    import random

    from ..forge import derive_from_db

    if db.kind != "statistics":
        raise ProtocolError("file QA pairs come from the statistics site")
    from ..textnorm import contains_answer

    rng = random.Random(f"files:{seed}")
    rows = list(db.records)
    rng.shuffle(rows)
    shallow_texts = _shallow_page_texts(db)
    suite: list[QAPair] = []
    for row in rows:
        template = QueryTemplate(
            "statistics", "lookup_audited",
            {"region": row["region"], "metric": row["metric"], "period": row["period"]},
        )
        try:
            qa = derive_from_db(db, template, base_url)
        except ProtocolError:
            continue
        if any(contains_answer(text, qa.answer) for text in shallow_texts):
            continue
        suite.append(qa)
        if len(suite) == count:
            return suite
    raise ProtocolError(f"could only derive {len(suite)} of {count} file QA pairs")
