import hashlib

import pytest

from infodig.engine import Engine
from infodig.errors import EngineError
from infodig.gateway import ModelProfile, describe_image
from infodig.protocol import new_task
from infodig.simenv.policy import policy_config, sim_qa_suite
from infodig.surfer import BrowserAction, act, observe, open_session


class TestObserve:
    def test_textual_twice_without_actions_is_identical(self, flights_server):
        session = open_session(flights_server.base_url + "/")
        first = observe(session, "textual")
        second = observe(session, "textual")
        assert first.content == second.content
        assert first.url == second.url == session.current_url
        session.close()

    def test_modes_share_one_browser_state(self, flights_server):
        vision = ModelProfile(role="vision", endpoint="scripted",
                              script={"by_prompt": [{"match": ".", "response": "page"}]})
        session = open_session(flights_server.base_url + "/search")
        textual = observe(session, "textual")
        visual = observe(session, "visual", vision_profile=vision)
        assert textual.url == visual.url == session.current_url
        session.close()

    def test_visual_without_profile_rejected(self, flights_server):
        session = open_session(flights_server.base_url + "/")
        with pytest.raises(EngineError):
            observe(session, "visual")
        session.close()

    def test_closed_session_rejected(self, flights_server):
        session = open_session(flights_server.base_url + "/")
        session.close()
        with pytest.raises(EngineError):
            observe(session, "textual")


class TestActionReplay:
    def test_recorded_action_log_replays_to_same_final_url(self, flights_server, flights_db, tmp_path):
        qa = sim_qa_suite(flights_db, flights_server.base_url, 1, seed=41)[0]
        engine = Engine(policy_config(qa, flights_server.base_url))
        result = engine.run(new_task(qa.question, task_id="task-replay-log", created_at=0.0))
        surfer_traj = next(t for t in result.trajectories if t.owner == "web_surfer")
        recorded = surfer_traj.extra["actions"]
        final_url = surfer_traj.extra["history"][-1]

        session = open_session(flights_server.base_url + "/")
        from infodig.reader import DownloadStore

        store = DownloadStore(tmp_path / "dl")
        for entry in recorded:
            action = BrowserAction(kind=entry["kind"], target=entry["target"], value=entry["value"])
            act(session, action, store=store)
        assert session.current_url == final_url
        session.close()


class TestScriptedVisionPipeline:
    def test_chart_screenshot_described_by_hash_keyed_fixture(self, statistics_db):
        # widget-tier chart page: the text render carries no values; the
        # hash-keyed vision fixture supplies what the pixels would show
        from infodig.simenv import serve, site_spec

        handle = serve(site_spec("statistics", "widget"), statistics_db, 0)
        try:
            session = open_session(handle.base_url + "/chart")
            textual = observe(session, "textual")
            import re

            # page text carries no numbers (element-numbering markers aside)
            assert not re.search(r"\d", session.browser.page.plain_text)
            png = session.browser.screenshot()
            digest = hashlib.sha256(png).hexdigest()
            vision = ModelProfile(
                role="vision", endpoint="scripted",
                script={"by_image_sha256": {digest: "bars: East Shore 231.4, West Ridge 87.9"}},
            )
            visual = observe(session, "visual", vision_profile=vision)
            assert "231.4" in visual.content
            assert visual.url == textual.url
            session.close()
        finally:
            handle.stop()


class TestSearcherCrawlBoundary:
    def test_crawl_outside_hits_is_refused(self, flights_server):
        import json

        def tool_block(name, args):
            return "```tool\n" + json.dumps({"tool": name, "args": args}) + "\n```"

        from infodig.engine import EngineConfig
        from infodig.searcher import StaticSearchProvider, SearchHit

        def scripted(script):
            return ModelProfile(role="teacher", endpoint="scripted", script=script)

        planner = [
            {"match": "Plan sub-tasks", "response": tool_block(
                "plan", {"subtasks": [{"instruction": "probe depth", "assignee": "web_searcher"}]}), "max_uses": 1},
            {"match": "finished: terminated=", "response": ""},
        ]
        searcher = [
            {"match": "probe depth", "response": tool_block(
                "crawl", {"url": flights_server.base_url + "/search"}), "max_uses": 1},
            {"match": "crawl failed", "response": "could not go deeper"},
        ]
        provider = StaticSearchProvider([SearchHit("t", "http://elsewhere.example/x", "s", 1)])
        engine = Engine(EngineConfig(profiles={
            "planner": scripted(planner), "web_searcher": scripted(searcher),
            "web_surfer": scripted([]), "file_reader": scripted([]),
        }, search_provider=provider))
        result = engine.run(new_task("probe depth", task_id="task-depth", created_at=0.0))
        searcher_traj = next(t for t in result.trajectories if t.owner == "web_searcher")
        crawl_results = [r for s in searcher_traj.steps for c, r in zip(s.tool_calls, s.tool_results)
                         if c.tool_name == "crawl"]
        assert crawl_results[0].status == "error"
        assert "not among current search hits" in str(crawl_results[0].content)
        assert searcher_traj.extra["indexed"]["crawled"] == []
