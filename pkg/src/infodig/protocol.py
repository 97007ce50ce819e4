"""Tasks, messages, trajectories, memories, and the request-response bus.

Every agent in the engine communicates through :class:`MessageBus`; every
agent's work is recorded as a :class:`Trajectory` of ReAct steps.  Trajectory
files are line-delimited JSON (one step per line plus a terminating summary
record) so long runs can stream to disk and tests can diff them.
"""

from __future__ import annotations

import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from concurrent.futures import TimeoutError as FutureTimeout
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

from .errors import ProtocolError, RoutingError

AGENT_ROLES = ("planner", "web_searcher", "web_surfer", "file_reader")

# Tools each role is allowed to issue.  The surfer's tools are exactly the
# nine browser interactions.
ROLE_TOOLS = {
    "planner": ("plan", "delegate"),
    "web_searcher": ("search", "crawl", "download", "delegate"),
    "web_surfer": (
        "click",
        "scroll",
        "type",
        "select",
        "navigate",
        "submit",
        "download",
        "locate",
        "screenshot",
    ),
    "file_reader": ("read_file",),
}


@dataclass(frozen=True)
class StepBudget:
    """Per-run resource limits. max_steps applies to each agent's loop."""

    max_steps: int = 20
    max_total_tool_calls: int = 120
    wall_clock_limit_s: float = 600.0

    def __post_init__(self):
        if self.max_steps <= 0 or self.max_total_tool_calls <= 0 or self.wall_clock_limit_s <= 0:
            raise ProtocolError("budget values must all be positive")


DEFAULT_BUDGET = StepBudget()


@dataclass(frozen=True)
class Task:
    task_id: str
    instruction: str
    budget: StepBudget = DEFAULT_BUDGET
    created_at: float = 0.0


@dataclass(frozen=True)
class SubTask:
    parent_task_id: str
    subtask_id: str
    instruction: str
    assignee: str
    start_url: Optional[str] = None
    max_num_steps: int = 20

    def __post_init__(self):
        if self.assignee not in AGENT_ROLES:
            raise ProtocolError(f"unknown assignee role: {self.assignee!r}")
        if self.max_num_steps < 1:
            raise ProtocolError("max_num_steps must be >= 1")


@dataclass(frozen=True)
class ToolCall:
    tool_name: str
    arguments: dict

    def to_obj(self) -> dict:
        return {"tool": self.tool_name, "args": self.arguments}

    @classmethod
    def from_obj(cls, obj: dict) -> "ToolCall":
        return cls(tool_name=obj["tool"], arguments=obj.get("args", {}))


@dataclass(frozen=True)
class ToolResult:
    status: str  # "ok" | "error"
    content: Any
    latency_ms: int = 0

    def to_obj(self) -> dict:
        return {"status": self.status, "content": self.content, "latency_ms": self.latency_ms}

    @classmethod
    def from_obj(cls, obj: dict) -> "ToolResult":
        return cls(status=obj["status"], content=obj.get("content"), latency_ms=obj.get("latency_ms", 0))


@dataclass(frozen=True)
class Step:
    step_index: int
    thought: str
    tool_calls: tuple[ToolCall, ...]
    tool_results: tuple[ToolResult, ...]

    def __post_init__(self):
        if len(self.tool_calls) != len(self.tool_results):
            raise ProtocolError("tool_calls and tool_results must match one-to-one")

    def to_obj(self) -> dict:
        return {
            "kind": "step",
            "index": self.step_index,
            "thought": self.thought,
            "calls": [c.to_obj() for c in self.tool_calls],
            "results": [r.to_obj() for r in self.tool_results],
        }

    @classmethod
    def from_obj(cls, obj: dict) -> "Step":
        return cls(
            step_index=obj["index"],
            thought=obj.get("thought", ""),
            tool_calls=tuple(ToolCall.from_obj(c) for c in obj.get("calls", [])),
            tool_results=tuple(ToolResult.from_obj(r) for r in obj.get("results", [])),
        )


@dataclass
class Trajectory:
    owner: str
    ref: str  # task or subtask id this trajectory belongs to
    steps: list[Step] = field(default_factory=list)
    final_answer: Optional[str] = None
    terminated_reason: Optional[str] = None  # answered | budget_exhausted | error
    extra: dict = field(default_factory=dict)  # attachments (indexed-info summary, action log)

    def finalize(self, reason: str, final_answer: Optional[str] = None):
        if reason == "answered" and final_answer is None:
            raise ProtocolError("answered trajectories must carry a final answer")
        if reason != "answered" and final_answer is not None:
            raise ProtocolError(f"final answer not allowed with terminated_reason={reason!r}")
        self.terminated_reason = reason
        self.final_answer = final_answer


def new_task(instruction: str, budget: StepBudget = DEFAULT_BUDGET, *, task_id: str = None, created_at: float = None) -> Task:
    """Create a task. The instruction is stored verbatim but must be non-empty."""
    if not isinstance(instruction, str) or not instruction.strip():
        raise ProtocolError("task instruction must be non-empty")
    if task_id is None:
        task_id = f"task-{int(time.time() * 1000):x}"
    if created_at is None:
        created_at = time.time()
    return Task(task_id=task_id, instruction=instruction, budget=budget, created_at=created_at)


def append_step(traj: Trajectory, step: Step) -> Trajectory:
    """Append one step; the index must be exactly the current length."""
    if step.step_index != len(traj.steps):
        raise ProtocolError(
            f"step index {step.step_index} does not extend trajectory of length {len(traj.steps)}"
        )
    traj.steps.append(step)
    return traj


@dataclass
class Memory:
    """Per-agent working memory: ordered (source-tag, text) entries.

    A fresh agent instance always starts with an empty entry list; entries are
    only ever appended.
    """

    owner: str
    entries: list[tuple[str, str]] = field(default_factory=list)
    token_estimate: int = 0

    def add(self, tag: str, text: str):
        self.entries.append((tag, text))
        self.token_estimate += max(1, len(text) // 4)


class IdGen:
    """Deterministic id source; counters are per-prefix and thread-safe."""

    def __init__(self):
        self._counts: dict[str, int] = {}
        self._lock = threading.Lock()

    def next(self, prefix: str) -> str:
        with self._lock:
            n = self._counts.get(prefix, 0) + 1
            self._counts[prefix] = n
        return f"{prefix}-{n:04d}"


@dataclass(frozen=True)
class AgentMessage:
    message_id: str
    correlation_id: Optional[str]
    sender: str
    recipient: str
    kind: str  # request | response
    payload: Any


class MessageBus:
    """Single-process request-response bus.

    Handlers are registered per recipient name.  Each recipient processes its
    requests serially (a one-thread mailbox); concurrent senders are safe.  A
    handler crash becomes an error response, and no call outlives the wall
    clock limit.
    """

    def __init__(self, ids: IdGen = None, wall_clock_limit_s: float = 600.0):
        self._handlers: dict[str, Callable[[AgentMessage], Any]] = {}
        self._mailboxes: dict[str, ThreadPoolExecutor] = {}
        self._ids = ids or IdGen()
        self._lock = threading.Lock()
        self.wall_clock_limit_s = wall_clock_limit_s

    def register(self, name: str, handler: Callable[[AgentMessage], Any]):
        with self._lock:
            self._handlers[name] = handler
            self._mailboxes.setdefault(name, ThreadPoolExecutor(max_workers=1))

    def request(self, sender: str, recipient: str, payload: Any) -> AgentMessage:
        return AgentMessage(
            message_id=self._ids.next("msg"),
            correlation_id=None,
            sender=sender,
            recipient=recipient,
            kind="request",
            payload=payload,
        )

    def route(self, msg: AgentMessage) -> AgentMessage:
        """Deliver one request; always returns exactly one correlated response."""
        if msg.kind != "request":
            raise RoutingError(f"only requests can be routed, got kind={msg.kind!r}")
        with self._lock:
            handler = self._handlers.get(msg.recipient)
            mailbox = self._mailboxes.get(msg.recipient)
        if handler is None:
            raise RoutingError(f"no agent registered as {msg.recipient!r}")
        future = mailbox.submit(handler, msg)
        try:
            body = future.result(timeout=self.wall_clock_limit_s)
            status, content = "ok", body
        except FutureTimeout:
            status, content = "error", f"handler for {msg.recipient} exceeded wall clock limit"
        except Exception as exc:  # crash containment: error response, never a hang
            status, content = "error", f"{type(exc).__name__}: {exc}"
        return AgentMessage(
            message_id=self._ids.next("msg"),
            correlation_id=msg.message_id,
            sender=msg.recipient,
            recipient=msg.sender,
            kind="response",
            payload={"status": status, "content": content},
        )

    def close(self):
        with self._lock:
            for pool in self._mailboxes.values():
                pool.shutdown(wait=False)
            self._mailboxes.clear()
            self._handlers.clear()


def route(bus: MessageBus, msg: AgentMessage) -> AgentMessage:
    return bus.route(msg)


# ---------------------------------------------------------------------------
# Trajectory persistence: one JSON record per line, UTF-8.


def _dump_record(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)


def dump_trajectory(traj: Trajectory) -> str:
    lines = [_dump_record(step.to_obj()) for step in traj.steps]
    end = {
        "kind": "end",
        "owner": traj.owner,
        "ref": traj.ref,
        "final_answer": traj.final_answer,
        "terminated": traj.terminated_reason,
    }
    if traj.extra:
        end["extra"] = traj.extra
    lines.append(_dump_record(end))
    return "\n".join(lines) + "\n"


def load_trajectory(text: str) -> Trajectory:
    steps: list[Step] = []
    end: Optional[dict] = None
    for line in text.splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        if obj.get("kind") == "step":
            steps.append(Step.from_obj(obj))
        elif obj.get("kind") == "end":
            end = obj
        else:
            raise ProtocolError(f"unknown trajectory record kind: {obj.get('kind')!r}")
    if end is None:
        raise ProtocolError("trajectory file has no end record")
    traj = Trajectory(owner=end["owner"], ref=end["ref"])
    for step in steps:
        append_step(traj, step)
    traj.final_answer = end.get("final_answer")
    traj.terminated_reason = end.get("terminated")
    traj.extra = end.get("extra", {})
    return traj


def write_trajectory(traj: Trajectory, path: Path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(dump_trajectory(traj), encoding="utf-8")


def read_trajectory(path: Path) -> Trajectory:
    return load_trajectory(Path(path).read_text(encoding="utf-8"))


def write_run_manifest(path: Path, tasks: list[dict]):
    """Manifest maps each task to its trajectory files (paths relative to the run dir)."""
    payload = {"tasks": tasks}
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def read_run_manifest(path: Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
