"""Threaded HTTP server hosting one simulated site."""

from __future__ import annotations

import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qsl, urlsplit

from ..errors import ProtocolError
from .db import SimDatabase
from .site import SimSiteSpec, SiteRenderer

log = logging.getLogger(__name__)

# Frozen Date header for byte-stable responses under test mode.
_FROZEN_DATE = "Thu, 01 Jan 2026 00:00:00 GMT"


class _Handler(BaseHTTPRequestHandler):
    renderer: SiteRenderer = None
    test_mode: bool = True
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):
        log.debug("sim-env %s", fmt % args)

    def date_time_string(self, timestamp=None):
        if self.test_mode:
            return _FROZEN_DATE
        return super().date_time_string(timestamp)

    def _respond(self, status, content_type, body, location=None):
        self.send_response(status)
        if location:
            self.send_header("Location", location)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        if self.test_mode:
            self.send_header("Cache-Control", "no-store")
        self.end_headers()
        if body:
            self.wfile.write(body)

    def do_GET(self):
        parts = urlsplit(self.path)
        query = dict(parse_qsl(parts.query))
        status, ctype, body, location = self.renderer.handle("GET", parts.path, query, {})
        self._respond(status, ctype, body, location)

    def do_POST(self):
        parts = urlsplit(self.path)
        length = int(self.headers.get("Content-Length", "0"))
        form = dict(parse_qsl(self.rfile.read(length).decode("utf-8"))) if length else {}
        status, ctype, body, location = self.renderer.handle("POST", parts.path, dict(parse_qsl(parts.query)), form)
        self._respond(status, ctype, body, location)


class ServerHandle:
    def __init__(self, server: ThreadingHTTPServer, thread: threading.Thread):
        self._server = server
        self._thread = thread
        host, port = server.server_address[:2]
        self.port = port
        self.base_url = f"http://127.0.0.1:{port}"

    def stop(self):
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)


def serve(
    spec: SimSiteSpec,
    db: SimDatabase,
    port: int = 0,
    *,
    widget_bundle: bytes = b"",
    test_mode: bool = True,
) -> ServerHandle:
    """Start a site server on 127.0.0.1. ``port=0`` picks a free port; a busy
    port raises. Stop it through the returned handle."""
    renderer = SiteRenderer(spec, db, widget_bundle=widget_bundle)
    handler = type("BoundHandler", (_Handler,), {"renderer": renderer, "test_mode": test_mode})
    try:
        server = ThreadingHTTPServer(("127.0.0.1", port), handler)
    except OSError as exc:
        raise ProtocolError(f"cannot bind port {port}: {exc}") from exc
    thread = threading.Thread(target=server.serve_forever, name=f"sim-{spec.kind}", daemon=True)
    thread.start()
    log.info("serving %s (%s tier) on port %d", spec.kind, spec.tier, server.server_address[1])
    return ServerHandle(server, thread)
