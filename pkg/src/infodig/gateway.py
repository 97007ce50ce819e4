"""Uniform client layer over chat and vision models.

Profiles describe where a model lives; ``complete`` always honors the
sampling group size.  The scripted backend replays (match-pattern, response)
records and is the workhorse for offline tests: it keys each reply on the
last user-visible message plus an internal call counter, so repeated prompts
can advance through a scenario deterministically.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import httpx

from .errors import GatewayError, TransportError
from .protocol import ToolCall

TOOL_BLOCK_RE = re.compile(r"```tool\s*\n(.*?)```", re.DOTALL)
EXTRACT_RE = re.compile(r"\{\{extract:(.*?)\}\}", re.DOTALL)

MODEL_ROLES = ("teacher", "student", "judge", "vision")


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 0.0
    group_size: int = 1
    max_output_tokens: int = 4096

    def __post_init__(self):
        if self.temperature < 0:
            raise GatewayError("temperature must be >= 0")
        if self.group_size < 1:
            raise GatewayError("group_size must be >= 1")


@dataclass(frozen=True)
class ModelTurn:
    text: str
    parsed_tool_calls: tuple[ToolCall, ...] = ()
    finish_reason: str = "stop"
    parse_warning: bool = False


@dataclass(frozen=True)
class ModelProfile:
    """Where a model lives and how to talk to it.

    ``endpoint`` is either an HTTP URL or the literal string "scripted", in
    which case ``script`` must hold the response records (or a path to them).
    """

    role: str
    endpoint: str
    model_name: str = ""
    auth_env: str = ""
    script: object = None
    timeout_s: float = 30.0
    variant: int = 0  # selects among scripted response variants for grouped sampling

    def __post_init__(self):
        if self.role not in MODEL_ROLES:
            raise GatewayError(f"unknown model role: {self.role!r}")
        if self.endpoint == "scripted" and self.script is None:
            raise GatewayError("scripted profiles must carry a script")

    def with_variant(self, variant: int) -> "ModelProfile":
        return ModelProfile(
            role=self.role,
            endpoint=self.endpoint,
            model_name=self.model_name,
            auth_env=self.auth_env,
            script=self.script,
            timeout_s=self.timeout_s,
            variant=variant,
        )

    def client(self) -> "ModelClient":
        """New client with fresh per-trajectory state (scripted call counter)."""
        if self.endpoint == "scripted":
            return ScriptedClient(load_script(self.script), variant=self.variant)
        return HttpClient(self)


def parse_tool_blocks(text: str) -> tuple[tuple[ToolCall, ...], bool]:
    """Extract fenced ```tool blocks. Any malformed block voids them all and
    sets the parse-warning flag (the turn then reads as plain text)."""
    calls = []
    for match in TOOL_BLOCK_RE.finditer(text):
        try:
            obj = json.loads(match.group(1))
            calls.append(ToolCall(tool_name=obj["tool"], arguments=obj.get("args", {})))
        except (json.JSONDecodeError, KeyError, TypeError):
            return (), True
    return tuple(calls), False


def last_user_message(context: list[dict]) -> str:
    for msg in reversed(context):
        if msg.get("role") == "user":
            return msg.get("content", "")
    return context[-1].get("content", "") if context else ""


def load_script(script) -> list[dict]:
    if isinstance(script, (str, Path)):
        return json.loads(Path(script).read_text(encoding="utf-8"))
    return list(script)


class ScriptedClient:
    """Deterministic model stand-in.

    Script records: ``{"match": <substring or regex>, "regex": bool,
    "response": str, "variants": [str, ...], "max_uses": int|null}``.
    The first record with remaining uses whose pattern matches the last
    user-visible message wins.  Responses may embed ``{{extract:REGEX}}``,
    replaced with the first group the regex captures from that same message -
    this lets scripted policies read values off observations instead of
    hard-coding them.
    """

    def __init__(self, entries: list[dict], variant: int = 0):
        self.entries = entries
        self.variant = variant
        self.call_count = 0
        self._uses = [0] * len(entries)

    def _pick(self, message: str) -> dict:
        digest = hashlib.sha256(message.encode("utf-8")).hexdigest()[:12]
        for i, entry in enumerate(self.entries):
            limit = entry.get("max_uses")
            if limit is not None and self._uses[i] >= limit:
                continue
            pattern = entry.get("match", "")
            if entry.get("regex"):
                hit = re.search(pattern, message, re.DOTALL) is not None
            else:
                hit = pattern in message
            if hit:
                self._uses[i] += 1
                return entry
        raise GatewayError(f"script has no entry for message digest {digest} (call {self.call_count})")

    def _render(self, entry: dict, message: str, variant: int) -> str:
        variants = entry.get("variants")
        if variants:
            text = variants[variant % len(variants)]
        else:
            text = entry.get("response", "")

        def expand(m: re.Match) -> str:
            found = re.search(m.group(1), message, re.DOTALL)
            if not found or not found.groups():
                raise GatewayError(f"extract pattern {m.group(1)!r} found nothing in the message")
            return found.group(1).strip()

        return EXTRACT_RE.sub(expand, text)

    def complete(self, context: list[dict], sampling: SamplingParams) -> list[ModelTurn]:
        if not context:
            raise GatewayError("context must be non-empty")
        message = last_user_message(context)
        entry = self._pick(message)
        self.call_count += 1
        turns = []
        for i in range(sampling.group_size):
            variant = 0 if sampling.temperature == 0 else self.variant + i
            text = self._render(entry, message, variant)
            calls, warn = parse_tool_blocks(text)
            turns.append(ModelTurn(text=text, parsed_tool_calls=calls, parse_warning=warn))
        return turns


class HttpClient:
    """Minimal chat-completions client for live endpoints."""

    def __init__(self, profile: ModelProfile):
        self.profile = profile

    def complete(self, context: list[dict], sampling: SamplingParams) -> list[ModelTurn]:
        if not context:
            raise GatewayError("context must be non-empty")
        import os

        headers = {}
        if self.profile.auth_env:
            key = os.environ.get(self.profile.auth_env, "")
            if key:
                headers["Authorization"] = f"Bearer {key}"
        payload = {
            "model": self.profile.model_name,
            "messages": context,
            "temperature": sampling.temperature,
            "n": sampling.group_size,
            "max_tokens": sampling.max_output_tokens,
        }
        try:
            resp = httpx.post(self.profile.endpoint, json=payload, headers=headers, timeout=self.profile.timeout_s)
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            raise TransportError(f"model endpoint failed: {exc}", retriable=True) from exc
        turns = []
        for choice in resp.json().get("choices", []):
            text = choice.get("message", {}).get("content", "") or ""
            calls, warn = parse_tool_blocks(text)
            turns.append(ModelTurn(text=text, parsed_tool_calls=calls, parse_warning=warn))
        if len(turns) != sampling.group_size:
            raise GatewayError(f"endpoint returned {len(turns)} choices, wanted {sampling.group_size}")
        return turns


def complete(profile: ModelProfile, context: list[dict], sampling: SamplingParams) -> list[ModelTurn]:
    """One-shot completion honoring the group-size contract."""
    return profile.client().complete(context, sampling)


@dataclass
class VisionScript:
    """Fixture store for scripted vision replies, keyed by image hash with a
    prompt-pattern fallback."""

    by_image_sha256: dict[str, str] = field(default_factory=dict)
    by_prompt: list[dict] = field(default_factory=list)  # {"match":..., "response":...}

    @classmethod
    def from_obj(cls, obj) -> "VisionScript":
        if isinstance(obj, VisionScript):
            return obj
        if isinstance(obj, (str, Path)):
            obj = json.loads(Path(obj).read_text(encoding="utf-8"))
        return cls(by_image_sha256=obj.get("by_image_sha256", {}), by_prompt=obj.get("by_prompt", []))


_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
_JPEG_MAGIC = b"\xff\xd8\xff"


def describe_image(profile: ModelProfile, image_bytes: bytes, prompt: str) -> str:
    """Ask a vision model to describe a screenshot."""
    if profile.role != "vision":
        raise GatewayError(f"describe_image needs a vision profile, got role={profile.role!r}")
    if not image_bytes:
        raise GatewayError("image is empty")
    if not (image_bytes.startswith(_PNG_MAGIC) or image_bytes.startswith(_JPEG_MAGIC)):
        raise GatewayError("bytes are not a PNG or JPEG image")
    if profile.endpoint == "scripted":
        script = VisionScript.from_obj(profile.script)
        digest = hashlib.sha256(image_bytes).hexdigest()
        if digest in script.by_image_sha256:
            return script.by_image_sha256[digest]
        for entry in script.by_prompt:
            if re.search(entry.get("match", ""), prompt, re.DOTALL):
                return entry.get("response", "")
        raise GatewayError(f"vision script has no entry for image {digest[:12]} / this prompt")
    raise TransportError("live vision endpoints are not reachable from this build", retriable=False)
