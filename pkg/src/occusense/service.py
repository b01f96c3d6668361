"""HTTP status endpoint and live reading feeds for a running detector."""

from __future__ import annotations

import csv
import json
import logging
import socketserver
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Iterable
from urllib.parse import urlsplit

from .dataset import READINGS_HEADER, parse_reading
from .detector import Detector
from .errors import InvalidFeature

log = logging.getLogger(__name__)


class StatusHandler(BaseHTTPRequestHandler):
    server_version = "occusense"
    # so unparseable request lines still get a status line back
    default_request_version = "HTTP/1.0"

    def _send_json(self, code: int, payload):
        body = json.dumps(payload).encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        detector: Detector = self.server.detector
        path = urlsplit(self.path).path.rstrip("/") or "/"
        if path == "/status":
            self._send_json(200, detector.status())
        elif path == "/history":
            self._send_json(200, detector.history())
        else:
            self._send_json(404, {"error": f"no such resource {path}"})

    def _not_allowed(self):
        self._send_json(405, {"error": "only GET is supported"})

    do_POST = do_PUT = do_DELETE = do_PATCH = _not_allowed

    def log_message(self, format, *args):
        log.debug("%s %s", self.address_string(), format % args)


class StatusServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address: tuple[str, int], detector: Detector):
        super().__init__(address, StatusHandler)
        self.detector = detector


def start_status_server(detector: Detector, host: str = "127.0.0.1", port: int = 8080) -> StatusServer:
    """Bind and serve in a background thread. Bind failures raise OSError."""
    server = StatusServer((host, port), detector)
    thread = threading.Thread(target=server.serve_forever, args=(0.1,), name="occusense-http", daemon=True)
    thread.start()
    return server


def parse_bind(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep:
        raise ValueError(f"bind address must be host:port, got {text!r}")
    try:
        return host or "127.0.0.1", int(port)
    except ValueError:
        raise ValueError(f"bad port in bind address {text!r}") from None


def feed_lines(detector: Detector, lines: Iterable[str], source: str = "<input>") -> int:
    """Feed CSV reading lines into `detector`; returns the number of rejected lines.

    A header line is skipped wherever it appears, so concatenated files work.
    """
    rejected = 0
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            continue
        row = next(csv.reader([line]))
        if tuple(f.strip() for f in row) == READINGS_HEADER:
            continue
        try:
            reading = parse_reading(row)
            detector.feed(reading)
        except (ValueError, InvalidFeature) as exc:
            rejected += 1
            log.warning("%s:%d rejected (%s): %s", source, lineno, exc, line)
    return rejected


class _FeedHandler(socketserver.StreamRequestHandler):
    def handle(self):
        peer = "%s:%d" % self.client_address[:2]
        lines = (raw.decode("utf-8", errors="replace") for raw in self.rfile)
        feed_lines(self.server.detector, lines, peer)


class FeedServer(socketserver.TCPServer):
    """Line-delimited TCP reading feed. Connections are handled one at a time,
    which keeps the detector single-writer."""

    allow_reuse_address = True

    def __init__(self, address: tuple[str, int], detector: Detector):
        super().__init__(address, _FeedHandler)
        self.detector = detector
