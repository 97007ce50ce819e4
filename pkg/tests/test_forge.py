import json

import pytest

from infodig import forge
from infodig.engine import Engine, EngineConfig
from infodig.errors import GatewayError, ProtocolError
from infodig.forge import (
    ContextSection,
    RunSample,
    TrajectoryRecord,
    cap_per_domain,
    collect,
    derive_from_db,
    difficulty_reweight,
    emit_dataset,
    explore_site,
    generate_queries,
    judge_filter,
    load_manifest,
    reject_sample,
    retention_probability,
)
from infodig.gateway import ModelProfile
from infodig.protocol import Step, Trajectory, append_step
from infodig.qa import QAPair, VerificationRule
from infodig.simenv.db import QueryTemplate


def scripted(script, role="teacher"):
    return ModelProfile(role=role, endpoint="scripted", script=script)


def tool_block(name, args):
    return "```tool\n" + json.dumps({"tool": name, "args": args}) + "\n```"


def qa_fixture(qa_id="q1", answer="12.5"):
    return QAPair(qa_id=qa_id, question=f"what is {qa_id}?", answer=answer,
                  rule=VerificationRule("normalized"))


def sample_with_first_turn(first_turn: str, answer="12.5", verified=True):
    planner = Trajectory(owner="planner", ref="t")
    append_step(planner, Step(0, first_turn, (), ()))
    if verified or answer:
        planner.finalize("answered", answer)
    else:
        planner.finalize("budget_exhausted")
    return RunSample(final_answer=answer, verified=verified, trajectories=[planner])


class TestExploreSite:
    def engine_answering(self, text):
        planner = [
            {"match": "Plan sub-tasks", "response": tool_block(
                "plan", {"subtasks": [{"instruction": "roam", "assignee": "web_searcher"}]}), "max_uses": 1},
            {"match": "finished", "response": text},
        ]
        searcher = [{"match": "roam", "response": "done roaming"}]
        return Engine(EngineConfig(profiles={
            "planner": scripted(planner),
            "web_searcher": scripted(searcher),
            "web_surfer": scripted([]),
            "file_reader": scripted([]),
        }))

    def test_sections_parsed_from_answer(self):
        answer = (
            "SECTION: http://site.example/a/deep1\nFacts about one thing.\n"
            "SECTION: http://site.example/b/deep2\nFacts about another.\n"
        )
        result = explore_site("http://site.example", self.engine_answering(answer))
        assert [s.url for s in result.sections] == [
            "http://site.example/a/deep1", "http://site.example/b/deep2"]
        assert not result.partial

    def test_single_section_is_partial(self):
        result = explore_site("http://site.example",
                              self.engine_answering("SECTION: http://x/1\nOnly one.\n"))
        assert len(result.sections) == 1
        assert result.partial


WELL_FORMED = """1. Question Design: from the fare table Question: What is the fare of X on 2025-03-02? Answer: 42.5 Rationale: row two
2. Question Design: from counts Question: How many flights on 2025-03-02? Answer: 3 Rationale: count
3. Question Design: lookup Question: Which airline flies X? Answer: AeroLume Rationale: row
4. Question Design: compare Question: Difference between Q2 and Q1 totals? Answer: 7.5 Rationale: a; b
5. Question Design: date Question: When was the report filed? Answer: 2025-03-04 Rationale: page
"""


class TestGenerateQueries:
    def test_five_well_formed_items(self):
        profile = scripted([{"match": "Text Segment", "response": WELL_FORMED}])
        qas = generate_queries([ContextSection("http://s/x", "facts")], profile)
        assert len(qas) == 5
        assert qas[0].answer == "42.5"
        assert all(qa.source == "real_site" for qa in qas)

    def test_malformed_items_dropped_with_warning(self, caplog):
        text = WELL_FORMED.splitlines()[0] + "\n2. Question Design: broken no fields\n" + \
            "3. Question Design: d Question: q3? Answer: a3 Rationale: r3\n"
        profile = scripted([{"match": "Text Segment", "response": text}])
        qas = generate_queries([ContextSection("http://s/x", "facts")], profile)
        assert len(qas) == 2  # items 1 and 3

    def test_empty_context_rejected(self):
        with pytest.raises(ProtocolError):
            generate_queries([], scripted([]))

    def test_zero_parseable_is_generation_error(self):
        profile = scripted([{"match": "Text Segment", "response": "no items at all"}])
        with pytest.raises(GatewayError):
            generate_queries([ContextSection("http://s/x", "facts")], profile)


class TestJudgeFilter:
    def test_scripted_keep(self):
        decision = judge_filter(qa_fixture(), scripted([{"match": "Question:", "response": "KEEP"}]))
        assert decision.decision == "keep"

    def test_subjective_precheck_drops_before_judge(self):
        qa = QAPair(qa_id="s", question="What are X's advantages of design?", answer="many")
        decision = judge_filter(qa, profile=None)
        assert decision.decision == "drop"
        assert decision.reason == "subjective"

    def test_judge_outage_quarantines(self):
        decision = judge_filter(qa_fixture(), scripted([]))  # empty script: every call fails
        assert decision.decision == "quarantined"

    def test_scripted_drop_reason(self):
        decision = judge_filter(qa_fixture(), scripted([{"match": "Question:", "response": "DROP time_varying"}]))
        assert decision == forge.FilterDecision("drop", "time_varying")


class TestDeriveFromDb:
    def test_answer_is_brute_force_minimum(self, flights_db, flights_server):
        row = flights_db.records[0]
        template = QueryTemplate("flights", "min_fare", {
            "origin": row["origin"], "destination": row["destination"], "date": row["date"]})
        qa = derive_from_db(flights_db, template, flights_server.base_url)
        expected = min(r["fare"] for r in flights_db.records
                       if (r["origin"], r["destination"], r["date"])
                       == (row["origin"], row["destination"], row["date"]))
        assert float(qa.answer) == expected
        assert qa.golden_url.startswith(flights_server.base_url + "/results?")
        assert qa.source == "sim_site"

    def test_zero_match_template_rejected(self, flights_db):
        template = QueryTemplate("flights", "min_fare",
                                 {"origin": "Nowhere", "destination": "Else", "date": "2025-03-01"})
        with pytest.raises(ProtocolError):
            derive_from_db(flights_db, template)

    def test_count_template_matches_recount(self, shopping_db):
        user = shopping_db.records[0]["user"]
        qa = derive_from_db(shopping_db, QueryTemplate("shopping", "count", {"user": user}))
        assert int(qa.answer) == sum(1 for r in shopping_db.records if r["user"] == user)


def fallback_planner_script():
    # unparseable plan -> engine falls back to one web_searcher sub-task
    return [
        {"match": "Plan sub-tasks", "response": "thinking about it", "max_uses": 1},
        {"match": "terminated=answered answer=", "response": "{{extract:terminated=answered answer=(.*)}}"},
        {"match": "finished: terminated=", "response": ""},
    ]


def collection_engine_factory(answers_by_qa: dict):
    """Searcher variants give one scripted answer per group member."""

    def factory(qa, member):
        searcher = [{"match": qa.question, "variants": answers_by_qa[qa.qa_id]}]
        return Engine(EngineConfig(profiles={
            "planner": scripted(fallback_planner_script()),
            "web_searcher": scripted(searcher),
            "web_surfer": scripted([]),
            "file_reader": scripted([]),
        }, temperature=0.4, variant=member))

    return factory


class TestCollect:
    def test_sft_produces_one_run_per_question(self):
        qas = [qa_fixture(f"q{i}", answer="7") for i in range(3)]
        factory = collection_engine_factory({qa.qa_id: ["7"] for qa in qas})
        records = collect(qas, "sft", factory)
        assert len(records) == 3
        assert all(len(r.samples) == 1 for r in records)
        assert all(r.correct_count == 1 for r in records)

    def test_rft_group_of_four_counts_correct_attempts(self):
        qa = qa_fixture("qr", answer="7")
        factory = collection_engine_factory({"qr": ["7", "wrong", "7", "also wrong"]})
        records = collect([qa], "rft", factory)
        assert len(records[0].samples) == 4
        assert records[0].correct_count == 2

    def test_unknown_stage_rejected(self):
        with pytest.raises(ProtocolError):
            collect([], "dpo", lambda qa, member: None)

    def test_engine_crash_yields_error_record(self):
        def exploding(qa, member):
            raise RuntimeError("no engine today")

        records = collect([qa_fixture()], "sft", exploding)
        assert records[0].error
        assert records[0].correct_count == 0


class TestRejectSampling:
    def test_trivial_correct_run_is_dropped(self):
        record = TrajectoryRecord(qa=qa_fixture(answer="12.5"), stage="sft", group_size=1)
        record.samples.append(sample_with_first_turn("the answer is 12.5, easy", verified=True))
        reject_sample([record])
        assert record.samples[0].dropped == "trivial"

    def test_incorrect_run_is_dropped(self):
        record = TrajectoryRecord(qa=qa_fixture(), stage="sft", group_size=1)
        record.samples.append(sample_with_first_turn("let me look", answer="99", verified=False))
        reject_sample([record])
        assert record.samples[0].dropped == "incorrect"

    def test_late_answer_is_kept(self):
        record = TrajectoryRecord(qa=qa_fixture(answer="12.5"), stage="sft", group_size=1)
        sample = sample_with_first_turn("searching for the figure now")
        for i in range(1, 7):
            append_step(sample.trajectories[0], Step(i, f"step {i}", (), ()))
        record.samples.append(sample)
        reject_sample([record])
        assert record.samples[0].dropped is None

    def test_never_increases_and_survivors_verify(self):
        record = TrajectoryRecord(qa=qa_fixture(answer="1"), stage="rft", group_size=4)
        record.samples = [
            sample_with_first_turn("t", answer="1", verified=True),
            sample_with_first_turn("t", answer="2", verified=False),
            sample_with_first_turn("contains 1 already", answer="1", verified=True),
            sample_with_first_turn("t", answer="No idea", verified=False),
        ]
        before = len(record.surviving())
        reject_sample([record])
        assert len(record.surviving()) <= before
        assert all(s.verified for s in record.surviving())


class TestDifficultyReweight:
    def synthetic_records(self, k, group_size, n):
        records = []
        for i in range(n):
            record = TrajectoryRecord(qa=qa_fixture(f"q{i}", answer="1"), stage="rft", group_size=group_size)
            record.samples = [
                RunSample(final_answer="1", verified=True, trajectories=[]) for _ in range(k)
            ]
            records.append(record)
        return records

    def test_retention_formula_endpoints(self):
        assert retention_probability(1, 4) == 1.0
        assert retention_probability(4, 4) == 0.25
        with pytest.raises(ProtocolError):
            retention_probability(0, 4)

    def test_monotone_in_k_for_all_group_sizes(self):
        for g in range(1, 9):
            probs = [retention_probability(k, g) for k in range(1, g + 1)]
            assert probs == sorted(probs, reverse=True)

    @pytest.mark.parametrize("k,expected", [(1, 1.0), (2, 0.75), (4, 0.25)])
    def test_empirical_retention_rate(self, k, expected):
        records = self.synthetic_records(k, 4, 10_000 // k)
        difficulty_reweight(records, seed=20260810)
        draws = sum(len(r.samples) for r in records)
        kept = sum(len(r.surviving()) for r in records)
        assert abs(kept / draws - expected) <= 0.02

    def test_zero_survivors_contribute_nothing(self):
        record = TrajectoryRecord(qa=qa_fixture(), stage="rft", group_size=4)
        record.samples = [RunSample(None, False, [], dropped="incorrect")] * 4
        difficulty_reweight([record], seed=1)
        assert record.surviving() == []

    def test_invalid_seed_rejected(self):
        with pytest.raises(ProtocolError):
            difficulty_reweight([], seed="tomorrow")

    def test_seed_determines_outcome(self):
        a = self.synthetic_records(2, 4, 50)
        b = self.synthetic_records(2, 4, 50)
        difficulty_reweight(a, seed=5)
        difficulty_reweight(b, seed=5)
        assert [len(r.surviving()) for r in a] == [len(r.surviving()) for r in b]


class TestEmitDataset:
    def record_with_survivor(self, qa_id="q1"):
        record = TrajectoryRecord(qa=qa_fixture(qa_id, answer="7"), stage="sft", group_size=1)
        record.samples.append(sample_with_first_turn("searching", answer="7"))
        return record

    def test_disjoint_stages_enforced(self, tmp_path):
        emit_dataset([self.record_with_survivor("shared")], "sft", tmp_path)
        with pytest.raises(ProtocolError):
            emit_dataset([self.record_with_survivor("shared")], "rft", tmp_path)

    def test_empty_records_valid(self, tmp_path):
        manifest = emit_dataset([], "sft", tmp_path)
        assert manifest.qa_ids == [] and manifest.files == []

    def test_manifest_round_trip(self, tmp_path):
        emitted = emit_dataset([self.record_with_survivor()], "sft", tmp_path, retention_seed=9)
        loaded = load_manifest(tmp_path, "sft")
        assert loaded == emitted

    def test_trainable_flags_partition_segments(self, tmp_path):
        record = self.record_with_survivor()
        manifest = emit_dataset([record], "sft", tmp_path)
        segment_file = tmp_path / manifest.files[0]
        segments = [json.loads(line) for line in segment_file.read_text().splitlines()]
        assert segments, "no segments emitted"
        for seg in segments:
            assert seg["trainable"] in (True, False)
            assert (seg["role"] == "assistant") == seg["trainable"]


def test_cap_per_domain():
    qas = [QAPair(qa_id=f"q{i}", question="?", answer="a", root_domain="dup.example") for i in range(4)]
    qas.append(QAPair(qa_id="other", question="?", answer="a", root_domain="solo.example"))
    kept = cap_per_domain(qas)
    assert len([q for q in kept if q.root_domain == "dup.example"]) == 2
    assert len(kept) == 3
