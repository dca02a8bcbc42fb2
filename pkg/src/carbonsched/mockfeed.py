"""Deterministic mock intensity feed.

Serves a carbon trace one sample per GET, advancing through the series and
holding the last sample once exhausted. Lets the live service run against a
scripted intensity series in tests and demos, with no real grid API.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .traces import CarbonTrace, iso_utc

__all__ = ["MockIntensityFeed"]


class _FeedHandler(BaseHTTPRequestHandler):
    feed: "MockIntensityFeed"

    def do_GET(self) -> None:  # noqa: N802 (http.server naming)
        sample = self.feed._next_sample()
        body = json.dumps(
            {
                "from": iso_utc(sample.interval.start),
                "to": iso_utc(sample.interval.end),
                "intensity_g_per_kwh": sample.intensity_g_per_kwh,
            }
        ).encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, fmt: str, *args) -> None:
        pass


class MockIntensityFeed:
    """HTTP server replaying a carbon trace sample-by-sample."""

    def __init__(self, trace: CarbonTrace, host: str = "127.0.0.1", port: int = 0):
        self.trace = trace
        self._index = 0
        self._lock = threading.Lock()
        handler = type("BoundFeedHandler", (_FeedHandler,), {"feed": self})
        self._httpd = ThreadingHTTPServer((host, port), handler)
        self._httpd.daemon_threads = True
        self._thread: threading.Thread | None = None

    def _next_sample(self):
        with self._lock:
            sample = self.trace.samples[min(self._index, len(self.trace) - 1)]
            self._index += 1
            return sample

    @property
    def served_count(self) -> int:
        return self._index

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address[0], self._httpd.server_address[1]
        return f"http://{host}:{port}/"

    def start(self) -> "MockIntensityFeed":
        self._thread = threading.Thread(
            target=self._httpd.serve_forever, name="carbonsched-mockfeed", daemon=True
        )
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread:
            self._thread.join(timeout=5)

    def __enter__(self) -> "MockIntensityFeed":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()
