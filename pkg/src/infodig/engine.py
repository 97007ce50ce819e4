"""Planner orchestration: decompose, dispatch to sub-agents, integrate.

The planner plans once, the engine executes the sub-tasks sequentially in
plan order (one trajectory each), and the planner then integrates the results
into a final answer or, at most twice, plans again.  Sub-agents run their own
ReAct loops; only the planner and the web searcher may delegate, and the
delegation graph never gets deeper than planner -> searcher -> surfer/reader.
"""

from __future__ import annotations

import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import httpx

from . import searcher as websearch
from .browser import HtmlBrowser
from .errors import EngineError, ProtocolError, TransportError
from .gateway import TOOL_BLOCK_RE, ModelProfile, SamplingParams
from .prompts import load_prompt
from .protocol import (
    DEFAULT_BUDGET,
    ROLE_TOOLS,
    AgentMessage,
    IdGen,
    Memory,
    MessageBus,
    Step,
    StepBudget,
    SubTask,
    Task,
    ToolCall,
    ToolResult,
    Trajectory,
    append_step,
    write_run_manifest,
    write_trajectory,
)
from .reader import DEFAULT_WINDOW_CHARS, DownloadStore, parse, read_chunked
from .surfer import BrowserAction, act, observe, open_session

log = logging.getLogger(__name__)

SUBORDINATES = ("web_searcher", "web_surfer", "file_reader")

_MEMORY_SNIPPET = 4_000
_RESULT_SNIPPET = 2_000


def strip_tool_blocks(text: str) -> str:
    return TOOL_BLOCK_RE.sub("", text).strip()


@dataclass
class EngineConfig:
    profiles: dict[str, ModelProfile]
    search_provider: object = None
    browser_factory: Callable[[], HtmlBrowser] = HtmlBrowser
    vision_profile: Optional[ModelProfile] = None
    budget: StepBudget = DEFAULT_BUDGET
    seed: int = 0
    deterministic: bool = True
    run_dir: Optional[Path] = None
    temperature: float = 0.0
    variant: int = 0
    max_replans: int = 2
    reader_window_chars: int = DEFAULT_WINDOW_CHARS

    def profile(self, role: str) -> ModelProfile:
        if role not in self.profiles:
            raise EngineError(f"no model profile configured for {role!r}")
        return self.profiles[role].with_variant(self.variant)


@dataclass
class RunResult:
    final_answer: Optional[str]  # None means abstention
    trajectories: list[Trajectory]
    run_dir: Optional[Path] = None

    @property
    def abstained(self) -> bool:
        return self.final_answer is None


class RunContext:
    """Everything one task run shares: ids, bus, downloads, budget meter."""

    def __init__(self, config: EngineConfig, task: Task, run_dir: Optional[Path]):
        self.config = config
        self.task = task
        self.ids = IdGen()
        self.bus = MessageBus(ids=self.ids, wall_clock_limit_s=task.budget.wall_clock_limit_s)
        self.run_dir = Path(run_dir) if run_dir else None
        if self.run_dir:
            downloads_dir = self.run_dir / "downloads"
        else:
            import tempfile

            downloads_dir = Path(tempfile.mkdtemp(prefix="infodig-dl-"))
        self.store = DownloadStore(downloads_dir)
        self.trajectories: list[Trajectory] = []
        self.clock = (lambda: 0.0) if config.deterministic else time.time
        self._calls_used = 0
        self._lock = threading.Lock()

    def add_trajectory(self, traj: Trajectory):
        with self._lock:
            self.trajectories.append(traj)

    def charge(self, n: int = 1) -> bool:
        """Reserve tool-call budget; False once the run-wide cap is hit."""
        with self._lock:
            if self._calls_used + n > self.task.budget.max_total_tool_calls:
                return False
            self._calls_used += n
            return True

    def close(self):
        self.bus.close()


def _render_memory(memory: Memory) -> list[dict]:
    return [{"role": "user", "content": f"[{tag}] {text}"} for tag, text in memory.entries]


def _truncate(text: str, limit: int) -> str:
    return text if len(text) <= limit else text[:limit] + "…"


class Engine:
    """One engine instance per configuration; ``run`` is the entry point."""

    def __init__(self, config: EngineConfig):
        self.config = config
        self._prompts = {
            "planner": load_prompt("planner_system"),
            "web_searcher": load_prompt("searcher_system"),
            "web_surfer": load_prompt("surfer_system"),
        }

    # -- planning -----------------------------------------------------------

    def _context(self, role: str, instruction: str, memory: Memory) -> list[dict]:
        return [
            {"role": "system", "content": self._prompts.get(role, "")},
            {"role": "user", "content": instruction},
            *_render_memory(memory),
        ]

    def _sampling(self) -> SamplingParams:
        return SamplingParams(temperature=self.config.temperature, group_size=1)

    def _parse_plan(self, task: Task, turn, ids: IdGen) -> Optional[list[SubTask]]:
        for call in turn.parsed_tool_calls:
            if call.tool_name != "plan":
                continue
            subtasks = []
            for item in call.arguments.get("subtasks", []):
                if not isinstance(item, dict):
                    continue
                assignee = item.get("assignee", "")
                if assignee not in SUBORDINATES:
                    continue
                if assignee == "web_surfer" and not item.get("start_url"):
                    continue
                instruction = (item.get("instruction") or "").strip()
                if not instruction:
                    continue
                try:
                    subtasks.append(
                        SubTask(
                            parent_task_id=task.task_id,
                            subtask_id=ids.next("sub"),
                            instruction=instruction,
                            assignee=assignee,
                            start_url=item.get("start_url"),
                            max_num_steps=int(item.get("max_num_steps", self.config.budget.max_steps)),
                        )
                    )
                except (ProtocolError, ValueError):
                    continue
            if subtasks:
                return subtasks
        return None

    def _fallback_plan(self, task: Task, ids: IdGen) -> list[SubTask]:
        return [
            SubTask(
                parent_task_id=task.task_id,
                subtask_id=ids.next("sub"),
                instruction=task.instruction,
                assignee="web_searcher",
                max_num_steps=self.config.budget.max_steps,
            )
        ]

    def plan(self, task: Task, profile: ModelProfile = None) -> list[SubTask]:
        """One planning turn; an unparseable plan falls back to a single
        web_searcher sub-task carrying the whole instruction."""
        profile = profile or self.config.profile("planner")
        ids = IdGen()
        client = profile.client()
        context = self._context("planner", f"Plan sub-tasks for this task:\n{task.instruction}", Memory("planner"))
        turn = client.complete(context, self._sampling())[0]
        return self._parse_plan(task, turn, ids) or self._fallback_plan(task, ids)

    # -- delegation -----------------------------------------------------------

    def delegate(self, sub: SubTask, ctx: RunContext, caller: str = "planner") -> dict:
        """Send a sub-task to its assignee over the bus and wait for the
        result. Only the planner and the web searcher may delegate."""
        if caller not in ("planner", "web_searcher"):
            raise ProtocolError(f"{caller} may not delegate sub-tasks")
        if caller == "web_searcher" and sub.assignee not in ("web_surfer", "file_reader"):
            raise ProtocolError("the web searcher may only delegate to web_surfer or file_reader")
        if sub.assignee == caller:
            raise ProtocolError("delegation to self is not allowed")
        request = ctx.bus.request(sender=caller, recipient=sub.assignee, payload={"subtask": sub})
        response = ctx.bus.route(request)
        payload = response.payload
        if payload["status"] != "ok":
            return {"answer": None, "terminated": "error", "error": payload["content"]}
        return payload["content"]

    def _register_agents(self, ctx: RunContext):
        ctx.bus.register("web_searcher", lambda msg: self._searcher_loop(msg.payload["subtask"], ctx))
        ctx.bus.register("web_surfer", lambda msg: self._surfer_loop(msg.payload["subtask"], ctx))
        ctx.bus.register("file_reader", lambda msg: self._reader_loop(msg.payload["subtask"], ctx))

    # -- full run ---------------------------------------------------------------

    def run(self, task: Task, run_dir: Optional[Path] = None) -> RunResult:
        run_dir = Path(run_dir) if run_dir else self.config.run_dir
        ctx = RunContext(self.config, task, run_dir)
        self._register_agents(ctx)
        try:
            result = self._planner_loop(task, ctx)
        finally:
            ctx.close()
        if run_dir:
            self._persist(task, ctx, result, Path(run_dir))
        return result

    def _planner_loop(self, task: Task, ctx: RunContext) -> RunResult:
        client = self.config.profile("planner").client()
        traj = Trajectory(owner="planner", ref=task.task_id)
        ctx.add_trajectory(traj)
        memory = Memory("planner")
        sampling = self._sampling()

        def record(thought: str, calls: list[ToolCall], results: list[ToolResult]):
            append_step(traj, Step(len(traj.steps), thought, tuple(calls), tuple(results)))

        try:
            context = self._context("planner", f"Plan sub-tasks for this task:\n{task.instruction}", memory)
            turn = client.complete(context, sampling)[0]
        except EngineError as exc:
            traj.finalize("error")
            log.warning("planner model failed at planning: %s", exc)
            return RunResult(None, ctx.trajectories)
        subtasks = self._parse_plan(task, turn, ctx.ids)
        fallback = subtasks is None
        if fallback:
            subtasks = self._fallback_plan(task, ctx.ids)
        if not ctx.charge():  # the plan record is itself a tool call
            traj.finalize("budget_exhausted")
            return RunResult(None, ctx.trajectories)
        plan_args = {"subtasks": [
            {"assignee": s.assignee, "instruction": s.instruction, "start_url": s.start_url,
             "max_num_steps": s.max_num_steps} for s in subtasks]}
        record(
            turn.text,
            [ToolCall("plan", plan_args)],
            [ToolResult("ok", {"fallback": fallback, "subtask_ids": [s.subtask_id for s in subtasks]})],
        )
        memory.add("plan", f"sub-tasks created: {', '.join(s.subtask_id for s in subtasks)}")

        final_answer: Optional[str] = None
        replans = 0
        while True:
            for sub in subtasks:
                if not ctx.charge():
                    record("", [ToolCall("delegate", {"subtask_id": sub.subtask_id})],
                           [ToolResult("error", "tool-call budget exhausted")])
                    traj.finalize("budget_exhausted")
                    return RunResult(None, ctx.trajectories)
                outcome = self.delegate(sub, ctx, caller="planner")
                status = "error" if outcome.get("terminated") == "error" else "ok"
                record(
                    "",
                    [ToolCall("delegate", {"subtask_id": sub.subtask_id, "assignee": sub.assignee})],
                    [ToolResult(status, outcome)],
                )
                memory.add(
                    f"delegate:{sub.subtask_id}",
                    f"subtask {sub.subtask_id} ({sub.assignee}) finished: "
                    f"terminated={outcome.get('terminated')} answer={outcome.get('answer')}",
                )
            try:
                context = self._context("planner", f"Plan sub-tasks for this task:\n{task.instruction}", memory)
                turn = client.complete(context, sampling)[0]
            except EngineError as exc:
                log.warning("planner model failed at integration: %s", exc)
                traj.finalize("error")
                return RunResult(None, ctx.trajectories)
            wants_replan = any(c.tool_name == "plan" for c in turn.parsed_tool_calls)
            if wants_replan and replans < self.config.max_replans:
                replans += 1
                new_subtasks = self._parse_plan(task, turn, ctx.ids)
                if not new_subtasks:
                    record(turn.text, [ToolCall("plan", {})], [ToolResult("error", "unparseable re-plan")])
                    break
                subtasks = new_subtasks
                record(
                    turn.text,
                    [ToolCall("plan", {"subtasks": [s.subtask_id for s in subtasks]})],
                    [ToolResult("ok", {"fallback": False, "subtask_ids": [s.subtask_id for s in subtasks]})],
                )
                memory.add("plan", f"re-planned: {', '.join(s.subtask_id for s in subtasks)}")
                continue
            text = strip_tool_blocks(turn.text)
            record(turn.text, [], [])
            if text:
                final_answer = text
            break

        if final_answer:
            traj.finalize("answered", final_answer)
        else:
            traj.finalize("budget_exhausted")
        return RunResult(final_answer, ctx.trajectories)

    # -- web searcher -------------------------------------------------------------

    def _searcher_loop(self, sub: SubTask, ctx: RunContext) -> dict:
        client = self.config.profile("web_searcher").client()
        traj = Trajectory(owner="web_searcher", ref=sub.subtask_id)
        ctx.add_trajectory(traj)
        memory = Memory("web_searcher")
        queries: list[str] = []
        hit_links: list[str] = []
        crawled: list[str] = []
        answer = None
        reason = "budget_exhausted"
        max_steps = min(sub.max_num_steps, self.config.budget.max_steps)
        for _ in range(max_steps):
            try:
                turn = client.complete(self._context("web_searcher", sub.instruction, memory), self._sampling())[0]
            except EngineError as exc:
                memory.add("error", str(exc))
                reason = "error"
                break
            if not turn.parsed_tool_calls:
                text = strip_tool_blocks(turn.text)
                append_step(traj, Step(len(traj.steps), turn.text, (), ()))
                if text:
                    answer, reason = text, "answered"
                else:
                    reason = "error"
                break
            calls = list(turn.parsed_tool_calls)
            state = {"queries": queries, "hit_links": hit_links, "crawled": crawled}
            results = self._execute_calls("web_searcher", calls, ctx, memory, state)
            append_step(traj, Step(len(traj.steps), turn.text, tuple(calls), tuple(results)))
            if any(r.status == "error" and r.content == "tool-call budget exhausted" for r in results):
                reason = "budget_exhausted"
                break
        traj.extra["indexed"] = {"queries": queries, "hit_links": hit_links, "crawled": crawled}
        if reason == "answered":
            traj.finalize("answered", answer)
        else:
            traj.finalize(reason)
        return {"answer": answer, "terminated": traj.terminated_reason,
                "memory_summary": _truncate("; ".join(t for t, _ in memory.entries[-3:]), 500)}

    def _execute_calls(self, role: str, calls: list[ToolCall], ctx: RunContext, memory: Memory,
                       state: dict) -> list[ToolResult]:
        """Run one step's tool calls (concurrently when there are several) and
        record results in issue order.  The indexed-set bookkeeping folds in
        after the step, also in issue order, so concurrent completion never
        changes what gets recorded; crawls are validated against the hit
        links known when the step was issued."""
        snapshot = {"hit_links": tuple(state.get("hit_links", ()))}

        def one(call: ToolCall) -> ToolResult:
            if call.tool_name not in ROLE_TOOLS[role]:
                return ToolResult("error", f"tool {call.tool_name!r} not registered for {role}")
            started = time.time()
            try:
                content = self._dispatch_tool(role, call, ctx, snapshot)
                status = "ok"
            except (EngineError, ValueError) as exc:
                content = f"{type(exc).__name__}: {exc}"
                status = "error"
            latency = 0 if self.config.deterministic else int((time.time() - started) * 1000)
            return ToolResult(status, content, latency_ms=latency)

        charged: list[bool] = [ctx.charge() for _ in calls]
        results: list[Optional[ToolResult]] = [None] * len(calls)
        runnable = [i for i, ok in enumerate(charged) if ok]
        for i, ok in enumerate(charged):
            if not ok:
                results[i] = ToolResult("error", "tool-call budget exhausted")
        if len(runnable) > 1:
            with ThreadPoolExecutor(max_workers=min(4, len(runnable))) as pool:
                futures = {i: pool.submit(one, calls[i]) for i in runnable}
                for i in runnable:
                    results[i] = futures[i].result()
        else:
            for i in runnable:
                results[i] = one(calls[i])
        for call, result in zip(calls, results):
            if result.status == "ok":
                if call.tool_name == "search" and isinstance(result.content, dict):
                    for q in call.arguments.get("query_list") or []:
                        if q not in state["queries"]:
                            state["queries"].append(q)
                    for h in result.content.get("hits", []):
                        if h["link"] not in state["hit_links"]:
                            state["hit_links"].append(h["link"])
                elif call.tool_name == "crawl":
                    state["crawled"].append(call.arguments.get("url", ""))
            memory.add(f"tool:{call.tool_name}", self._render_result(call, result))
        return results

    def _dispatch_tool(self, role: str, call: ToolCall, ctx: RunContext, snapshot: dict):
        name, args = call.tool_name, call.arguments
        if name == "search":
            provider = self.config.search_provider
            if provider is None:
                raise EngineError("no search provider configured")
            query_list = args.get("query_list") or ([args["query"]] if args.get("query") else [])
            hits = websearch.search(provider, query_list, int(args.get("top_k", websearch.DEFAULT_TOP_K)))
            return {"hits": [h.to_obj() for h in hits]}
        if name == "crawl":
            url = args.get("url", "")
            if url not in snapshot.get("hit_links", ()):
                # depth-1 rule: only already-seen hit links may be crawled
                raise ProtocolError(f"crawl target {url!r} is not among current search hits")
            result = websearch.crawl(url, clock=ctx.clock)
            obj = result.to_obj()
            obj["text"] = _truncate(obj["text"], _MEMORY_SNIPPET)
            return obj
        if name == "download":
            url = args.get("url", "")
            try:
                resp = httpx.get(url, follow_redirects=True, timeout=20.0)
                resp.raise_for_status()
            except httpx.HTTPError as exc:
                raise TransportError(f"download failed for {url}: {exc}") from exc
            record = ctx.store.add(resp.content, str(resp.url))
            return {"file_id": record.file_id, "media_kind": record.media_kind,
                    "byte_size": record.byte_size, "origin_url": record.origin_url}
        if name == "delegate":
            assignee = args.get("assignee", "")
            instruction = args.get("instruction", "")
            if args.get("file_id"):
                instruction = f"{instruction}\n[file_id: {args['file_id']}]"
            sub = SubTask(
                parent_task_id=ctx.task.task_id,
                subtask_id=ctx.ids.next("sub"),
                instruction=instruction,
                assignee=assignee,
                start_url=args.get("start_url"),
                max_num_steps=int(args.get("max_num_steps", self.config.budget.max_steps)),
            )
            return self.delegate(sub, ctx, caller=role)
        raise EngineError(f"tool {name!r} has no dispatcher")

    @staticmethod
    def _render_result(call: ToolCall, result: ToolResult) -> str:
        if result.status == "error":
            return f"{call.tool_name} failed: {result.content}"
        content = result.content
        if call.tool_name == "search" and isinstance(content, dict):
            lines = [f"search results ({len(content['hits'])} hits):"]
            for h in content["hits"]:
                lines.append(f"{h['position']}. {h['title']} - {h['link']}")
                if h.get("snippet"):
                    lines.append(f"   {h['snippet']}")
            return "\n".join(lines)
        if call.tool_name == "crawl" and isinstance(content, dict):
            return f"crawled {content['url']} (status {content['status']}):\n{content['text']}"
        if call.tool_name == "download" and isinstance(content, dict):
            return (f"downloaded {content['media_kind']} file {content['file_id'][:16]} "
                    f"({content['byte_size']} bytes) from {content['origin_url']}")
        if call.tool_name == "delegate" and isinstance(content, dict):
            return f"delegated: terminated={content.get('terminated')} answer={content.get('answer')}"
        return str(content)

    # -- web surfer ----------------------------------------------------------------

    def _surfer_loop(self, sub: SubTask, ctx: RunContext) -> dict:
        traj = Trajectory(owner="web_surfer", ref=sub.subtask_id)
        ctx.add_trajectory(traj)
        if not sub.start_url:
            traj.finalize("error")
            return {"answer": None, "terminated": "error", "error": "surfer sub-task without start_url"}
        client = self.config.profile("web_surfer").client()
        memory = Memory("web_surfer")
        actions_log: list[dict] = []
        try:
            session = open_session(sub.start_url, browser=self.config.browser_factory(),
                                   session_id=ctx.ids.next("session"))
        except (TransportError, EngineError) as exc:
            traj.finalize("error")
            return {"answer": None, "terminated": "error", "error": str(exc)}
        obs = observe(session, "textual")
        memory.add("observation", f"({obs.mode}) {obs.url}\n{obs.content}")
        answer = None
        reason = "budget_exhausted"
        try:
            for _ in range(sub.max_num_steps):
                try:
                    turn = client.complete(self._context("web_surfer", sub.instruction, memory), self._sampling())[0]
                except EngineError as exc:
                    memory.add("error", str(exc))
                    reason = "error"
                    break
                if not turn.parsed_tool_calls:
                    text = strip_tool_blocks(turn.text)
                    append_step(traj, Step(len(traj.steps), turn.text, (), ()))
                    if text:
                        answer, reason = text, "answered"
                    else:
                        reason = "error"
                    break
                calls = list(turn.parsed_tool_calls)
                results = []
                budget_hit = False
                for call in calls:  # browser actions never run concurrently on one session
                    if call.tool_name not in ROLE_TOOLS["web_surfer"]:
                        results.append(ToolResult("error", f"tool {call.tool_name!r} not registered for web_surfer"))
                        continue
                    if not ctx.charge():
                        results.append(ToolResult("error", "tool-call budget exhausted"))
                        budget_hit = True
                        continue
                    results.append(self._surf_act(session, call, ctx, memory, actions_log))
                append_step(traj, Step(len(traj.steps), turn.text, tuple(calls), tuple(results)))
                if budget_hit:
                    reason = "budget_exhausted"
                    break
        finally:
            downloads = [f.file_id for f in session.downloads]
            traj.extra["history"] = list(session.history)
            traj.extra["actions"] = actions_log
            if downloads:
                traj.extra["downloads"] = downloads
            session.close()
        if reason == "answered":
            traj.finalize("answered", answer)
        else:
            traj.finalize(reason)
        return {"answer": answer, "terminated": traj.terminated_reason,
                "memory_summary": _truncate("; ".join(t for t, _ in memory.entries[-2:]), 500)}

    def _surf_act(self, session, call: ToolCall, ctx: RunContext, memory: Memory, actions_log: list) -> ToolResult:
        args = call.arguments
        started = time.time()
        try:
            action = BrowserAction(kind=call.tool_name, target=args.get("target"), value=args.get("value"))
            obs = act(session, action, store=ctx.store, vision_profile=self.config.vision_profile)
            tag = "vision" if obs.mode == "visual" else "observation"
            memory.add(tag, f"({obs.mode}) {obs.url}\n{obs.content}")
            content = {"mode": obs.mode, "url": obs.url, "content": _truncate(obs.content, _RESULT_SNIPPET),
                       "truncated": obs.truncated}
            status = "ok"
        except (EngineError, ValueError) as exc:
            detail = str(exc)
            candidates = getattr(exc, "candidates", None)
            if candidates:
                detail += f" (nearest: {', '.join(candidates)})"
            # a failed action still yields an observation so the model can recover
            memory.add("observation", f"action {call.tool_name} failed: {detail}")
            content = {"error": detail, "url": session.current_url}
            status = "error"
        actions_log.append({"kind": call.tool_name, "target": args.get("target"),
                            "value": args.get("value"), "url_after": session.current_url, "status": status})
        latency = 0 if self.config.deterministic else int((time.time() - started) * 1000)
        return ToolResult(status, content, latency_ms=latency)

    # -- file reader ------------------------------------------------------------------

    def _reader_loop(self, sub: SubTask, ctx: RunContext) -> dict:
        import re as _re

        traj = Trajectory(owner="file_reader", ref=sub.subtask_id)
        ctx.add_trajectory(traj)
        match = _re.search(r"\[file_id:\s*([0-9a-f]+)\]", sub.instruction)
        if match:
            file_id = match.group(1)
        else:
            files = ctx.store.all()
            if len(files) != 1:
                traj.finalize("error")
                return {"answer": None, "terminated": "error",
                        "error": f"no file_id given and {len(files)} files in store"}
            file_id = files[0].file_id
        question = _re.sub(r"\[file_id:[^\]]*\]", "", sub.instruction).strip()
        if not ctx.charge():
            traj.finalize("budget_exhausted")
            return {"answer": None, "terminated": "budget_exhausted"}
        try:
            record = ctx.store.get(file_id)
            doc = parse(record)
            digest = read_chunked(doc, self.config.reader_window_chars, question,
                                  self.config.profile("file_reader"))
            content = {"file_id": record.file_id, "media_kind": record.media_kind,
                       "units": len(doc.units), "char_total": doc.char_total,
                       "chunks_read": digest.chunks_read, "answer": digest.answer,
                       "notes": _truncate(digest.running_notes, 500), "error": digest.error}
            status = "error" if digest.error else "ok"
        except EngineError as exc:
            content = f"{type(exc).__name__}: {exc}"
            status = "error"
            digest = None
        append_step(traj, Step(0, "", (ToolCall("read_file", {"file_id": file_id}),),
                               (ToolResult(status, content),)))
        if digest is not None and digest.answer:
            traj.finalize("answered", digest.answer)
        elif digest is not None and not digest.error:
            traj.finalize("budget_exhausted")  # read everything, no answer found
        else:
            traj.finalize("error")
        return {"answer": traj.final_answer, "terminated": traj.terminated_reason}

    # -- persistence ---------------------------------------------------------------------

    def _persist(self, task: Task, ctx: RunContext, result: RunResult, run_dir: Path):
        run_dir.mkdir(parents=True, exist_ok=True)
        traj_dir = run_dir / "trajectories"
        entries = []
        files = []
        for traj in ctx.trajectories:
            name = f"{traj.ref}.{traj.owner}.jsonl"
            write_trajectory(traj, traj_dir / name)
            files.append(f"trajectories/{name}")
            if traj.owner == "web_surfer" and traj.extra.get("actions") is not None:
                import json as _json

                action_lines = "".join(
                    _json.dumps(a, ensure_ascii=False, sort_keys=True) + "\n" for a in traj.extra["actions"]
                )
                (traj_dir / f"{traj.ref}.{traj.owner}.actions.jsonl").write_text(action_lines, encoding="utf-8")
        entries.append(
            {
                "task_id": task.task_id,
                "instruction": task.instruction,
                "final_answer": result.final_answer,
                "trajectories": files,
            }
        )
        write_run_manifest(run_dir / "manifest.json", entries)
        result.run_dir = run_dir
