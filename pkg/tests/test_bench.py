import json

import pytest

from infodig.bench import (
    action_stats,
    language_counts,
    load_benchmark,
    run_bench,
    validate_benchmark,
    verify,
    verify_detail,
)
from infodig.engine import Engine
from infodig.errors import ProtocolError
from infodig.gateway import ModelProfile
from infodig.protocol import Step, ToolCall, ToolResult, Trajectory, append_step
from infodig.qa import QAPair, VerificationRule
from infodig.simenv.policy import policy_config, sim_qa_suite


def qa_with(rule, answer="27.3"):
    return QAPair(qa_id="q", question="?", answer=answer, rule=rule)


class TestVerify:
    def test_normalization_strips_trailing_percent_and_width(self):
        assert verify("27.3%", qa_with(VerificationRule("normalized")))
        assert verify("２７.3", qa_with(VerificationRule("normalized")))  # full-width digits
        assert verify("  27.3  ", qa_with(VerificationRule("exact")))
        assert not verify("27.4", qa_with(VerificationRule("normalized")))

    def test_any_alternative_counts(self):
        rule = VerificationRule("any_of", ["Alpha Base", "A-Base"])
        assert verify("alpha base", qa_with(rule, answer="Alpha Base"))
        assert verify("A-base", qa_with(rule, answer="Alpha Base"))
        assert not verify("B-Base", qa_with(rule, answer="Alpha Base"))

    def test_numeric_tolerance(self):
        rule = VerificationRule("numeric_tolerance", 0.01)
        assert verify("3.141", qa_with(rule, answer="3.14"))
        assert not verify("3.16", qa_with(rule, answer="3.14"))
        assert not verify("not a number", qa_with(rule, answer="3.14"))

    def test_numeric_parses_embedded_values(self):
        rule = VerificationRule("numeric_tolerance", 0.0)
        assert verify("The fare is 204.50 total", qa_with(rule, answer="204.5"))

    def test_llm_judge_falls_back_without_profile(self):
        ok, flags = verify_detail("27.3", qa_with(VerificationRule("llm_judge")), None)
        assert ok
        assert "llm_judge_fallback_normalized" in flags

    def test_llm_judge_scripted(self):
        judge = ModelProfile(role="judge", endpoint="scripted",
                             script=[{"match": "Predicted answer: twenty-seven point three", "response": "YES"},
                                     {"match": "Predicted", "response": "NO"}])
        assert verify("twenty-seven point three", qa_with(VerificationRule("llm_judge")), judge)
        assert not verify("something else", qa_with(VerificationRule("llm_judge")), judge)

    def test_normalized_comparison_is_symmetric(self):
        pairs = [("27.3%", "27.3"), ("A B", "a b"), ("１２３", "123"), ("x%", "x")]
        for a, b in pairs:
            forward = verify(a, QAPair(qa_id="s", question="?", answer=b))
            backward = verify(b, QAPair(qa_id="s", question="?", answer=a))
            assert forward == backward

    def test_bad_rule_kinds_rejected(self):
        with pytest.raises(ProtocolError):
            VerificationRule("fuzzy")
        with pytest.raises(ProtocolError):
            VerificationRule("any_of", [])
        with pytest.raises(ProtocolError):
            VerificationRule("numeric_tolerance", -0.5)


class TestLoadBenchmark:
    def write(self, tmp_path, lines):
        path = tmp_path / "bench.jsonl"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    def record(self, qa_id="q1", **kw):
        obj = {"qa_id": qa_id, "question": "什么?", "answer": "a", "language": "zh",
               "golden_url": "https://x.example/p", "root_domain": "x.example",
               "rule": {"kind": "normalized"}}
        obj.update(kw)
        return json.dumps(obj, ensure_ascii=False)

    def test_loads_and_counts_languages(self, tmp_path):
        path = self.write(tmp_path, [self.record("q1"), self.record("q2", language="en")])
        qas = load_benchmark(path)
        assert len(qas) == 2
        assert language_counts(qas) == {"zh": 1, "en": 1}

    def test_missing_answer_names_the_line(self, tmp_path):
        path = self.write(tmp_path, [self.record("q1"), self.record("q2", answer="")])
        with pytest.raises(ProtocolError, match=":2:"):
            load_benchmark(path)

    def test_empty_file_warns_not_raises(self, tmp_path, caplog):
        path = tmp_path / "empty.jsonl"
        path.write_text("", encoding="utf-8")
        import logging

        with caplog.at_level(logging.WARNING):
            assert load_benchmark(path) == []
        assert any("no records" in r.message for r in caplog.records)

    def test_validators_catch_principle_violations(self, tmp_path):
        records = [
            self.record("dup"), self.record("dup"),
            self.record("d1", root_domain="busy.example"),
            self.record("d2", root_domain="busy.example"),
            self.record("d3", root_domain="busy.example"),
            self.record("tv", question="What is the latest figure today?"),
        ]
        qas = load_benchmark(self.write(tmp_path, records))
        issues = validate_benchmark(qas)
        assert any("duplicate qa_id" in i for i in issues)
        assert any("root domain" in i for i in issues)
        assert any("time-varying" in i for i in issues)


def run_with_counts(counts: dict):
    traj = Trajectory(owner="x", ref="r")
    calls = []
    results = []
    for tool, n in counts.items():
        for _ in range(n):
            calls.append(ToolCall(tool, {}))
            results.append(ToolResult("ok", {}))
    append_step(traj, Step(0, "t", tuple(calls), tuple(results)))
    traj.finalize("budget_exhausted")
    return [traj]


class TestActionStats:
    def test_single_correct_run(self):
        table = action_stats([run_with_counts({"click": 1})], [True])
        assert table["correct"]["browse-action"] == 1.0
        assert table["incorrect"] is None
        assert "no incorrect runs" in table["flags"]

    def test_hand_built_four_run_corpus(self):
        sets = [
            run_with_counts({"search": 3, "crawl": 2}),
            run_with_counts({"search": 1}),
            run_with_counts({"navigate": 4, "read_file": 1}),
            run_with_counts({"delegate": 2, "search": 2}),
        ]
        outcomes = [True, True, False, False]
        table = action_stats(sets, outcomes)
        # correct group: searches (3+1)/2, crawls (2+0)/2
        assert table["correct"]["search"] == 2.0
        assert table["correct"]["crawl"] == 1.0
        # incorrect group: browse (4+0)/2, file-parse (1+0)/2, delegate (0+2)/2
        assert table["incorrect"]["browse-action"] == 2.0
        assert table["incorrect"]["file-parse"] == 0.5
        assert table["incorrect"]["delegate"] == 1.0

    def test_all_incorrect_flags_missing_group(self):
        table = action_stats([run_with_counts({"search": 1})], [False])
        assert table["correct"] is None
        assert "no correct runs" in table["flags"]

    def test_empty_input_rejected(self):
        with pytest.raises(ProtocolError):
            action_stats([], [])


class TestRunBench:
    def test_sim_benchmark_scores_and_persists(self, flights_server, flights_db, tmp_path):
        qas = sim_qa_suite(flights_db, flights_server.base_url, 3, seed=21)
        report = run_bench(
            qas,
            lambda qa: Engine(policy_config(qa, flights_server.base_url)),
            tmp_path / "out",
        )
        assert report.accuracy == 1.0
        assert (tmp_path / "out" / "report.json").exists()
        assert (tmp_path / "out" / "report.txt").exists()
        # correct, no search retrieval (scripted policy navigates directly), visited
        assert all(row["ring"] == "101" for row in report.per_qa)

    def test_engine_failure_counts_incorrect_and_continues(self, flights_server, flights_db, tmp_path):
        qas = sim_qa_suite(flights_db, flights_server.base_url, 2, seed=22)

        def engine_for(qa):
            if qa.qa_id == qas[0].qa_id:
                raise RuntimeError("engine exploded")
            return Engine(policy_config(qa, flights_server.base_url))

        report = run_bench(qas, engine_for, tmp_path / "out2")
        assert report.accuracy == 0.5
        assert any("engine_error" in f for f in report.flags)

    def test_accuracy_is_mean_of_verified_flags(self, flights_server, flights_db, tmp_path):
        qas = sim_qa_suite(flights_db, flights_server.base_url, 4, seed=23)
        report = run_bench(
            qas,
            lambda qa: Engine(policy_config(qa, flights_server.base_url)),
            tmp_path / "out3",
        )
        assert report.accuracy == sum(r["verified"] for r in report.per_qa) / len(report.per_qa)
