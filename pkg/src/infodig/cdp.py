"""Remote-debugging browser backend (DevTools wire protocol over WebSocket).

Presents the same surface as :class:`infodig.browser.HtmlBrowser`, so the
surfer can drive a real headless browser for widget-tier pages - client-side
scripts run, canvases paint, and screenshots capture real pixels.  Element
numbering matches the textual-observation scheme: a page script walks the DOM,
numbers interactive elements, and keeps the mapping for later actions.

Only the WebSocket frame codec is exercised in offline tests; everything else
needs a live browser endpoint (config: ``browser.endpoint``).
"""

from __future__ import annotations

import base64
import io
import json
import os
import socket
import struct
from urllib.parse import urlsplit

import httpx

from .errors import EngineError, LocatorError, TransportError

_LINEARIZE_JS = r"""
(() => {
  const interactive = new Set(['A', 'BUTTON', 'INPUT', 'SELECT', 'TEXTAREA']);
  const els = [];
  const lines = [];
  const walk = (node) => {
    if (node.nodeType === Node.TEXT_NODE) {
      const t = node.textContent.replace(/\s+/g, ' ').trim();
      if (t) lines.push(t);
      return;
    }
    if (node.nodeType !== Node.ELEMENT_NODE) return;
    const tag = node.tagName;
    if (tag === 'SCRIPT' || tag === 'STYLE' || tag === 'HEAD') return;
    if (interactive.has(tag)) {
      els.push(node);
      const n = els.length;
      let label = '';
      if (tag === 'A' || tag === 'BUTTON') label = node.textContent.replace(/\s+/g, ' ').trim();
      else if (tag === 'SELECT') {
        const opts = Array.from(node.options).map(o => o.textContent.trim()).join(' | ');
        label = (node.name || 'select') + ' (options: ' + opts + ')';
      } else label = node.name || node.placeholder || node.type || tag.toLowerCase();
      lines.push('[' + n + '] <' + tag.toLowerCase() + '> ' + label);
      if (tag === 'SELECT') return;
    }
    for (const child of node.childNodes) walk(child);
  };
  walk(document.body || document.documentElement);
  window.__agentElements = els;
  return lines.join('\n');
})()
"""


def _ws_key() -> str:
    return base64.b64encode(os.urandom(16)).decode("ascii")


class WebSocketClient:
    """Just enough RFC 6455 for a DevTools session: client handshake, masked
    text frames out, fragmented frames in, ping/pong."""

    def __init__(self, url: str, timeout_s: float = 30.0):
        parts = urlsplit(url)
        if parts.scheme not in ("ws", "wss"):
            raise TransportError(f"not a ws(s) URL: {url!r}", retriable=False)
        if parts.scheme == "wss":
            raise TransportError("wss endpoints are not supported by this client", retriable=False)
        host = parts.hostname
        port = parts.port or 80
        self.sock = socket.create_connection((host, port), timeout=timeout_s)
        path = parts.path or "/"
        if parts.query:
            path += "?" + parts.query
        request = (
            f"GET {path} HTTP/1.1\r\n"
            f"Host: {host}:{port}\r\n"
            "Upgrade: websocket\r\n"
            "Connection: Upgrade\r\n"
            f"Sec-WebSocket-Key: {_ws_key()}\r\n"
            "Sec-WebSocket-Version: 13\r\n\r\n"
        )
        self.sock.sendall(request.encode("ascii"))
        status = self._read_http_response()
        if "101" not in status.split("\r\n", 1)[0]:
            raise TransportError(f"websocket handshake rejected: {status.splitlines()[0]}")

    def _read_http_response(self) -> str:
        data = b""
        while b"\r\n\r\n" not in data:
            chunk = self.sock.recv(4096)
            if not chunk:
                raise TransportError("connection closed during handshake")
            data += chunk
        return data.decode("latin-1")

    def _read_exact(self, n: int) -> bytes:
        data = b""
        while len(data) < n:
            chunk = self.sock.recv(n - len(data))
            if not chunk:
                raise TransportError("connection closed mid-frame")
            data += chunk
        return data

    @staticmethod
    def encode_frame(payload: bytes, opcode: int = 1, mask: bytes = None) -> bytes:
        mask = mask if mask is not None else os.urandom(4)
        head = bytes([0x80 | opcode])
        n = len(payload)
        if n < 126:
            head += bytes([0x80 | n])
        elif n < 1 << 16:
            head += bytes([0x80 | 126]) + struct.pack(">H", n)
        else:
            head += bytes([0x80 | 127]) + struct.pack(">Q", n)
        masked = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
        return head + mask + masked

    @staticmethod
    def decode_frame(data: bytes) -> tuple[int, bytes, int]:
        """Returns (opcode, payload, total_bytes_consumed) for one frame."""
        if len(data) < 2:
            raise ValueError("short frame")
        opcode = data[0] & 0x0F
        masked = data[1] & 0x80
        n = data[1] & 0x7F
        offset = 2
        if n == 126:
            n = struct.unpack(">H", data[offset:offset + 2])[0]
            offset += 2
        elif n == 127:
            n = struct.unpack(">Q", data[offset:offset + 8])[0]
            offset += 8
        if masked:
            mask = data[offset:offset + 4]
            offset += 4
            payload = bytes(b ^ mask[i % 4] for i, b in enumerate(data[offset:offset + n]))
        else:
            payload = data[offset:offset + n]
        return opcode, payload, offset + n

    def send_text(self, text: str):
        self.sock.sendall(self.encode_frame(text.encode("utf-8"), opcode=1))

    def recv_message(self) -> str:
        buffer = b""
        while True:
            header = self._read_exact(2)
            opcode = header[0] & 0x0F
            fin = header[0] & 0x80
            n = header[1] & 0x7F
            if n == 126:
                n = struct.unpack(">H", self._read_exact(2))[0]
            elif n == 127:
                n = struct.unpack(">Q", self._read_exact(8))[0]
            payload = self._read_exact(n) if n else b""
            if opcode == 8:  # close
                raise TransportError("websocket closed by peer")
            if opcode == 9:  # ping -> pong
                self.sock.sendall(self.encode_frame(payload, opcode=10))
                continue
            buffer += payload
            if fin:
                return buffer.decode("utf-8")

    def close(self):
        try:
            self.sock.sendall(self.encode_frame(b"", opcode=8))
        except OSError:
            pass
        self.sock.close()


class CdpBrowser:
    """Drives one browser tab over the DevTools protocol."""

    def __init__(self, endpoint: str, timeout_s: float = 30.0):
        self.endpoint = endpoint.rstrip("/")
        self.timeout_s = timeout_s
        self.history: list[str] = []
        self.current_url: str = ""
        self.scroll_pos = 0
        self._msg_id = 0
        self._last_text = ""
        try:
            resp = httpx.put(f"{self.endpoint}/json/new?about:blank", timeout=timeout_s)
            if resp.status_code >= 400:
                resp = httpx.get(f"{self.endpoint}/json/new?about:blank", timeout=timeout_s)
            resp.raise_for_status()
            target = resp.json()
        except httpx.HTTPError as exc:
            raise TransportError(f"cannot reach browser endpoint {self.endpoint}: {exc}") from exc
        self._target_id = target.get("id", "")
        self.ws = WebSocketClient(target["webSocketDebuggerUrl"], timeout_s=timeout_s)
        self._cmd("Page.enable", {})
        self._cmd("Runtime.enable", {})

    def _cmd(self, method: str, params: dict, wait_event: str = None) -> dict:
        self._msg_id += 1
        want = self._msg_id
        self.ws.send_text(json.dumps({"id": want, "method": method, "params": params}))
        result = None
        event_seen = wait_event is None
        while result is None or not event_seen:
            msg = json.loads(self.ws.recv_message())
            if msg.get("id") == want:
                if "error" in msg:
                    raise EngineError(f"{method} failed: {msg['error'].get('message')}")
                result = msg.get("result", {})
            elif wait_event and msg.get("method") == wait_event:
                event_seen = True
        return result

    def _eval(self, expression: str, await_promise: bool = False):
        result = self._cmd(
            "Runtime.evaluate",
            {"expression": expression, "returnByValue": True, "awaitPromise": await_promise},
        )
        if result.get("exceptionDetails"):
            raise EngineError(f"page script failed: {result['exceptionDetails'].get('text')}")
        return result.get("result", {}).get("value")

    # -- HtmlBrowser-compatible surface --------------------------------------

    def navigate(self, url: str):
        if self.current_url:
            from urllib.parse import urljoin

            url = urljoin(self.current_url, url)
        self._cmd("Page.navigate", {"url": url}, wait_event="Page.loadEventFired")
        self.current_url = self._eval("location.href") or url
        self.history.append(self.current_url)
        self.scroll_pos = 0

    def _element_js(self, target) -> str:
        number = str(target).strip().strip("[]")
        if not number.isdigit():
            raise LocatorError(f"remote backend needs numbered targets, got {target!r}")
        return f"window.__agentElements[{int(number) - 1}]"

    def _after_action(self):
        # settle the event loop, then refresh location/history bookkeeping
        self._eval("new Promise(r => setTimeout(r, 120))", await_promise=True)
        url = self._eval("location.href")
        if url and url != self.current_url:
            self.current_url = url
            self.history.append(url)

    def click(self, target):
        self._eval(f"{self._element_js(target)}.click()")
        self._after_action()

    def type(self, target, value: str):
        el = self._element_js(target)
        self._eval(
            f"(() => {{ const e = {el}; e.value = {json.dumps(value)}; "
            "e.dispatchEvent(new Event('input', {bubbles: true})); "
            "e.dispatchEvent(new Event('change', {bubbles: true})); })()"
        )
        self._after_action()

    def select(self, target, value: str):
        el = self._element_js(target)
        self._eval(
            f"(() => {{ const e = {el}; e.value = {json.dumps(value)}; "
            "e.dispatchEvent(new Event('change', {bubbles: true})); })()"
        )
        self._after_action()

    def submit(self, target=None):
        index = int(target) if target is not None and str(target).isdigit() else 0
        self._eval(f"document.forms[{index}].requestSubmit ? document.forms[{index}].requestSubmit() "
                   f": document.forms[{index}].submit()")
        self._cmd("Runtime.evaluate", {"expression": "0"})
        self._after_action()

    def scroll(self, direction: str = "down"):
        delta = -600 if direction == "up" else 600
        self._eval(f"window.scrollBy(0, {delta})")
        self.scroll_pos = max(0, self.scroll_pos + delta)

    def locate(self, text: str):
        from .browser import PageElement

        found = self._eval(
            "(() => { const out = []; (window.__agentElements || []).forEach((e, i) => {"
            f"  const t = {json.dumps(text.lower())};"
            "  if ((e.textContent || '').toLowerCase().includes(t) || (e.name || '').toLowerCase() === t)"
            "    out.push([i + 1, e.tagName.toLowerCase(), (e.textContent || e.name || '').trim()]); });"
            " return out; })()"
        ) or []
        return [PageElement(number=n, tag=tag, attrs={}, label=label) for n, tag, label in found]

    def download(self, target) -> tuple[bytes, str]:
        el = self._element_js(target)
        href = self._eval(f"{el}.href")
        if not href:
            raise LocatorError(f"element {target} has no href to download")
        encoded = self._eval(
            f"fetch({json.dumps(href)}).then(r => r.arrayBuffer()).then(b => "
            "btoa(Array.from(new Uint8Array(b), c => String.fromCharCode(c)).join('')))",
            await_promise=True,
        )
        return base64.b64decode(encoded), href

    def viewport_text(self) -> tuple[str, bool]:
        text = self._eval(_LINEARIZE_JS) or ""
        self._last_text = text
        from .browser import VIEWPORT_CHARS

        window = text[self.scroll_pos: self.scroll_pos + VIEWPORT_CHARS]
        return window, len(text) > self.scroll_pos + VIEWPORT_CHARS

    def screenshot(self) -> bytes:
        result = self._cmd("Page.captureScreenshot", {"format": "png"})
        return base64.b64decode(result.get("data", ""))

    def close(self):
        try:
            self.ws.close()
        finally:
            if self._target_id:
                try:
                    httpx.get(f"{self.endpoint}/json/close/{self._target_id}", timeout=5.0)
                except httpx.HTTPError:
                    pass


def browser_factory_from_config(browser_cfg: dict):
    """Factory selection: 'html' (built-in) or 'cdp' with an endpoint."""
    backend = (browser_cfg or {}).get("backend", "html")
    if backend == "html":
        from .browser import HtmlBrowser

        return HtmlBrowser
    if backend == "cdp":
        endpoint = browser_cfg.get("endpoint", "")
        if not endpoint:
            raise EngineError("cdp backend needs browser.endpoint in the config")
        return lambda: CdpBrowser(endpoint)
    raise EngineError(f"unknown browser backend: {backend!r}")
