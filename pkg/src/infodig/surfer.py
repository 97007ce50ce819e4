"""Browser session driving: the nine-action space with dual-mode observation.

One session means one browser, one history, one download list - regardless of
whether the page is being observed as linearized text or as a screenshot
interpreted by a vision model.  Observing never mutates browser state, so any
mix of textual and visual observations leaves navigation unchanged.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional

from .browser import HtmlBrowser
from .errors import EngineError, LocatorError, TransportError
from .gateway import ModelProfile, describe_image
from .reader import DownloadedFile, DownloadStore

ACTION_KINDS = (
    "click",
    "scroll",
    "type",
    "select",
    "navigate",
    "submit",
    "download",
    "locate",
    "screenshot",
)

RESULT_SNIPPET_CHARS = 2_000


@dataclass(frozen=True)
class BrowserAction:
    kind: str
    target: Optional[str] = None
    value: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ACTION_KINDS:
            raise EngineError(f"unknown browser action kind: {self.kind!r}")


@dataclass(frozen=True)
class Observation:
    mode: str  # textual | visual
    url: str
    content: str
    truncated: bool = False


@dataclass
class BrowserSession:
    session_id: str
    browser: HtmlBrowser
    downloads: list[DownloadedFile] = field(default_factory=list)
    mode_last_used: str = "textual"
    closed: bool = False

    @property
    def current_url(self) -> str:
        return self.browser.current_url

    @property
    def history(self) -> list[str]:
        return self.browser.history

    def close(self):
        self.closed = True
        self.browser.close()


def open_session(start_url: str, *, browser: HtmlBrowser = None, session_id: str = "session-1") -> BrowserSession:
    """Navigate a fresh browser to the start URL. Redirect hops end up in the
    history with current_url at the final location."""
    b = browser or HtmlBrowser()
    try:
        b.navigate(start_url)
    except TransportError:
        b.close()
        raise
    return BrowserSession(session_id=session_id, browser=b)


def observe(
    session: BrowserSession,
    mode: str = "textual",
    vision_profile: ModelProfile = None,
) -> Observation:
    """Snapshot the current page without touching browser state."""
    if session.closed:
        raise EngineError("session is closed")
    if mode == "textual":
        text, truncated = session.browser.viewport_text()
        session.mode_last_used = "textual"
        return Observation(mode="textual", url=session.current_url, content=text, truncated=truncated)
    if mode == "visual":
        if vision_profile is None:
            raise EngineError("visual observation needs a vision profile")
        png = session.browser.screenshot()
        digest = hashlib.sha256(png).hexdigest()
        description = describe_image(
            vision_profile, png, prompt=f"Describe the page at {session.current_url} for an agent."
        )
        session.mode_last_used = "visual"
        return Observation(
            mode="visual",
            url=session.current_url,
            content=f"[image sha256:{digest[:16]}] {description}",
        )
    raise EngineError(f"unknown observation mode: {mode!r}")


def act(
    session: BrowserSession,
    action: BrowserAction,
    *,
    store: DownloadStore = None,
    vision_profile: ModelProfile = None,
) -> Observation:
    """Perform one action and return the resulting observation (textual by
    default; the screenshot action returns a visual one)."""
    if session.closed:
        raise EngineError("session is closed")
    b = session.browser
    kind = action.kind
    if kind == "navigate":
        if not action.target:
            raise LocatorError("navigate needs a target URL")
        b.navigate(action.target)
    elif kind == "click":
        b.click(action.target)
    elif kind == "type":
        b.type(action.target, action.value or "")
    elif kind == "select":
        b.select(action.target, action.value or "")
    elif kind == "submit":
        b.submit(action.target)
    elif kind == "scroll":
        b.scroll(action.value or "down")
    elif kind == "locate":
        matches = b.locate(action.value or action.target or "")
        listing = "\n".join(f"[{el.number}] <{el.tag}> {el.label}" for el in matches) or "(no matches)"
        return Observation(mode="textual", url=session.current_url, content=f"locate results:\n{listing}")
    elif kind == "download":
        if store is None:
            raise EngineError("downloads need a download store")
        data, origin = b.download(action.target)
        record = store.add(data, origin)
        session.downloads.append(record)
        return Observation(
            mode="textual",
            url=session.current_url,
            content=(
                f"downloaded {record.media_kind} file {record.file_id[:16]} "
                f"({record.byte_size} bytes) from {record.origin_url}"
            ),
        )
    elif kind == "screenshot":
        return observe(session, "visual", vision_profile=vision_profile)
    return observe(session, "textual")
