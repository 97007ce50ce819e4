import pytest

from infodig.classifier import (
    ClassifyBudget,
    GroundingRing,
    classify,
    grounding_rings,
    ring_report,
)
from infodig.errors import ProtocolError
from infodig.protocol import Step, ToolCall, ToolResult, Trajectory, append_step
from infodig.qa import QAPair, VerificationRule
from infodig.searcher import SearchHit, StaticSearchProvider
from infodig.simenv.site import SiteRenderer, site_spec
from infodig.searcher import SimSearchProvider
from infodig.simenv.policy import sim_file_qa_suite, sim_qa_suite


def plain_qa(answer="onward", golden="https://site.example/deep/page", rule=None):
    return QAPair(
        qa_id="qa-1",
        question="what is the motto?",
        answer=answer,
        golden_url=golden,
        rule=rule or VerificationRule("normalized"),
    )


def hit(link, snippet, position=1):
    return SearchHit(title="t", link=link, snippet=snippet, position=position)


class TestClassify:
    def test_answer_in_snippet_is_iis(self):
        provider = StaticSearchProvider([hit("http://a.example/x", "the motto is onward, always")])
        verdict = classify(plain_qa(), search_provider=provider, clock=lambda: 0.0)
        assert verdict.label == "IIS"
        assert verdict.stage == "snippet"
        assert verdict.evidence

    def test_sim_questions_are_uis_by_construction(self, statistics_server, statistics_db):
        renderer = SiteRenderer(site_spec("statistics", "form"), statistics_db)
        provider = SimSearchProvider(statistics_server.base_url, renderer.index_entries())
        for qa in sim_qa_suite(statistics_db, statistics_server.base_url, 3, seed=11):
            verdict = classify(qa, search_provider=provider, clock=lambda: 0.0)
            assert verdict.label == "UIS"

    def test_file_only_answers_get_the_file_exception(self, statistics_server, statistics_db):
        renderer = SiteRenderer(site_spec("statistics", "form"), statistics_db)
        provider = SimSearchProvider(statistics_server.base_url, renderer.index_entries())
        qa = sim_file_qa_suite(statistics_db, statistics_server.base_url, 1, seed=11)[0]
        verdict = classify(qa, search_provider=provider, clock=lambda: 0.0)
        assert verdict.label == "UIS"
        assert verdict.file_exception
        assert verdict.stage == "file_download"

    def test_crawl_found_answer_default_vs_strict(self, flights_server, flights_db):
        # answer lives in the page body but not the snippet
        page_url = flights_server.base_url + "/about"
        provider = StaticSearchProvider([hit(page_url, "a stub snippet")])
        qa = QAPair(qa_id="qa-c", question="what practices navigation?",
                    answer="information-seeking agents", golden_url=page_url)
        default = classify(qa, search_provider=provider, clock=lambda: 0.0)
        assert (default.label, default.stage) == ("IIS", "crawl")
        strict = classify(qa, search_provider=provider, strict_redirect=True, clock=lambda: 0.0)
        assert (strict.label, strict.stage) == ("UIS", "strict_redirect")

    def test_inner_knowledge_stage(self):
        from infodig.gateway import ModelProfile

        inner = ModelProfile(role="student", endpoint="scripted",
                             script=[{"match": "motto", "response": "onward"}])
        provider = StaticSearchProvider([])
        verdict = classify(plain_qa(), search_provider=provider, inner_profile=inner, clock=lambda: 0.0)
        assert (verdict.label, verdict.stage) == ("IIS", "inner_knowledge")

    def test_budget_exhaustion_is_unanswerable(self):
        provider = StaticSearchProvider([hit(f"http://h{i}.example/", "s", i) for i in range(1, 6)])
        verdict = classify(plain_qa(), ClassifyBudget(max_crawls=2), search_provider=provider,
                           clock=lambda: 0.0)
        assert verdict.label == "UNANSWERABLE"
        assert verdict.stage == "crawl"

    def test_monotone_under_more_queries(self):
        by_query = {
            "q1": [hit("http://a.example/1", "nothing here")],
            "q2": [hit("http://b.example/2", "the motto is onward")],
        }
        provider = StaticSearchProvider(hits=[], by_query=by_query)
        qa1 = QAPair(qa_id="m", question="q2", answer="onward", golden_url="http://b.example/2")
        small = classify(qa1, search_provider=provider, clock=lambda: 0.0)
        assert small.label == "IIS"

        class TwoQueryProvider:
            def run_query(self, query, top_k):
                return by_query.get(query, [])

        # widening the query set (both q1 and q2 issued) never flips IIS -> UIS
        from infodig.gateway import ModelProfile

        two_queries = ModelProfile(role="student", endpoint="scripted",
                                   script=[{"match": "", "response": "q1\nq2"}])
        wide = classify(qa1, search_provider=TwoQueryProvider(), query_profile=two_queries,
                        clock=lambda: 0.0)
        assert wide.label == "IIS"

    def test_spans_partition_into_indexed_and_unindexed(self, statistics_server, statistics_db):
        renderer = SiteRenderer(site_spec("statistics", "form"), statistics_db)
        provider = SimSearchProvider(statistics_server.base_url, renderer.index_entries())
        qa = sim_file_qa_suite(statistics_db, statistics_server.base_url, 1, seed=3)[0]
        verdict = classify(qa, search_provider=provider, clock=lambda: 0.0)
        assert verdict.spans
        for span in verdict.spans:
            assert span["indexed"] in (True, False)
        kinds = {(s["kind"], s["indexed"]) for s in verdict.spans}
        assert ("snippet", True) in kinds
        assert ("file", False) in kinds

    def test_deterministic_under_fixed_fixtures(self, statistics_server, statistics_db):
        renderer = SiteRenderer(site_spec("statistics", "form"), statistics_db)
        provider = SimSearchProvider(statistics_server.base_url, renderer.index_entries())
        qa = sim_qa_suite(statistics_db, statistics_server.base_url, 1, seed=12)[0]
        a = classify(qa, search_provider=provider, clock=lambda: 0.0)
        b = classify(qa, search_provider=provider, clock=lambda: 0.0)
        assert a.to_obj() == b.to_obj()


def traj_with(hits=(), visited=(), owner="web_searcher"):
    traj = Trajectory(owner=owner, ref="sub-1")
    calls, results = [], []
    if hits:
        calls.append(ToolCall("search", {"query_list": ["q"]}))
        results.append(ToolResult("ok", {"hits": [h.to_obj() for h in hits]}))
    append_step(traj, Step(0, "t", tuple(calls), tuple(results)))
    if visited:
        traj.extra["history"] = list(visited)
    traj.finalize("budget_exhausted")
    return traj


class TestGroundingRings:
    def test_retrieved_but_not_visited(self):
        qa = plain_qa(golden="https://golden.example/page")
        trajs = [traj_with(hits=[hit("https://www.golden.example/other", "s")])]
        ring = grounding_rings(trajs, qa, correct=False)
        assert (ring.correct, ring.retrieved_root, ring.visited_root) == (False, True, False)
        assert ring.root_domain == "golden.example"

    def test_visited_via_intrinsic_url_knowledge(self):
        # zero matching search hits, but the agent navigated straight there
        qa = plain_qa(golden="https://golden.example/page")
        trajs = [traj_with(hits=[hit("https://unrelated.example/x", "s")],
                           visited=["https://golden.example/deep"], owner="web_surfer")]
        ring = grounding_rings(trajs, qa, correct=True)
        assert (ring.correct, ring.retrieved_root, ring.visited_root) == (True, False, True)

    def test_crawl_and_download_count_as_visits(self):
        qa = plain_qa(golden="https://golden.example/page")
        traj = Trajectory(owner="web_searcher", ref="s")
        append_step(traj, Step(0, "t",
                               (ToolCall("crawl", {"url": "https://golden.example/a"}),),
                               (ToolResult("ok", {"url": "https://golden.example/a", "status": 200,
                                                  "text": "", "outlinks": [], "fetched_at": 0.0}),)))
        traj.finalize("budget_exhausted")
        ring = grounding_rings([traj], qa, correct=False)
        assert ring.visited_root

    def test_missing_golden_url_is_an_error(self):
        qa = QAPair(qa_id="q", question="?", answer="a")
        with pytest.raises(ProtocolError):
            grounding_rings([], qa)

    def test_correct_flag_computed_from_planner_answer(self):
        qa = plain_qa(answer="onward", golden="https://golden.example/p")
        planner = Trajectory(owner="planner", ref="t")
        append_step(planner, Step(0, "thinking", (), ()))
        planner.finalize("answered", "Onward")
        ring = grounding_rings([planner], qa)
        assert ring.correct


class TestRingReport:
    def test_singleton_corpus(self):
        ring = GroundingRing(True, True, True, "x.example")
        report = ring_report([ring])
        assert report["111"] == 1.0
        assert sum(report.values()) == pytest.approx(1.0, abs=1e-9)

    def test_all_correct_corpus(self):
        rings = [GroundingRing(True, r, v, "x") for r in (True, False) for v in (True, False)]
        report = ring_report(rings)
        assert sum(v for combo, v in report.items() if combo.startswith("1")) == pytest.approx(1.0)

    def test_hand_built_corpus_proportions(self):
        # 10 runs: 3 of 111, 2 of 100, 2 of 011, 1 each of 110, 001, 000
        rings = (
            [GroundingRing(True, True, True, "d")] * 3
            + [GroundingRing(True, False, False, "d")] * 2
            + [GroundingRing(False, True, True, "d")] * 2
            + [GroundingRing(True, True, False, "d")]
            + [GroundingRing(False, False, True, "d")]
            + [GroundingRing(False, False, False, "d")]
        )
        report = ring_report(rings)
        assert report["111"] == 0.3
        assert report["100"] == 0.2
        assert report["011"] == 0.2
        assert report["110"] == 0.1
        assert report["001"] == 0.1
        assert report["000"] == 0.1
        assert report["101"] == 0.0 and report["010"] == 0.0
        assert sum(report.values()) == pytest.approx(1.0, abs=1e-9)

    def test_empty_corpus_rejected(self):
        with pytest.raises(ProtocolError):
            ring_report([])
