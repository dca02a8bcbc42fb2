"""Live operation: poll an intensity feed, answer selection queries over
HTTP, and keep an append-only decision log.

The feed is a minimal JSON endpoint returning one sample per poll:
``{"from": "<ISO-8601>", "to": "<ISO-8601>", "intensity_g_per_kwh": <number>}``.
Adapters for concrete regional grid APIs can wrap this shape.

HTTP API:
  GET /v1/select -> {model, e_target_mj, fraction, c_current, c_low, c_high,
                     mapping, decided_at}; 503 until the first sample lands.
  GET /v1/health -> {status, samples_ingested, last_sample_from}

Every served selection is appended to a JSON-lines log *before* the
response is sent, so the audit trail can never miss a served decision. Each
entry records the inputs the decision was made from, which makes the log
self-verifying: replaying an entry through the selector must reproduce its
model.
"""

from __future__ import annotations

import json
import logging
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .errors import ConfigError, DataError
from .registry import ModelPool
from .selector import (
    MAPPING_DIRECTIONS,
    BoundsWindow,
    IntensityBounds,
    SelectionDecision,
    decide,
    decide_with_bounds,
)
from .traces import CarbonSample, CarbonTrace, iso_utc, parse_feed_sample

__all__ = [
    "DecisionLogEntry",
    "DecisionLog",
    "IntensityHistory",
    "LiveService",
    "LiveServer",
    "poll_intensity",
    "read_decision_log",
    "replay_entry",
]

log = logging.getLogger("carbonsched.live")

DEFAULT_WINDOW = BoundsWindow.trailing(24)


def poll_intensity(endpoint: str, timeout: float = 10.0) -> CarbonSample:
    """Fetch and validate one sample from the intensity feed."""
    try:
        with urllib.request.urlopen(endpoint, timeout=timeout) as response:
            body = response.read().decode("utf-8")
    except (urllib.error.URLError, OSError) as exc:
        raise DataError(f"intensity feed unreachable: {exc}") from exc
    try:
        doc = json.loads(body)
    except json.JSONDecodeError:
        raise DataError("malformed intensity feed body: not JSON") from None
    return parse_feed_sample(doc)


class IntensityHistory:
    """In-memory intensity history: one writer, many readers.

    Samples are deduplicated by interval start; overlapping samples are
    rejected. The sample tuple is replaced atomically on append, so a
    reader's snapshot is always a consistent history.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._samples: tuple[CarbonSample, ...] = ()
        self._starts: set[datetime] = set()

    def append(self, sample: CarbonSample) -> bool:
        """Insert a sample; returns False for a duplicate start (history
        unchanged). Raises DataError if it overlaps an existing sample."""
        with self._lock:
            if sample.interval.start in self._starts:
                return False
            merged = sorted(
                self._samples + (sample,), key=lambda s: s.interval.start
            )
            for prev, nxt in zip(merged, merged[1:]):
                if nxt.interval.start < prev.interval.end:
                    raise DataError(
                        "feed sample overlaps existing history "
                        f"(from {iso_utc(sample.interval.start)})"
                    )
            self._samples = tuple(merged)
            self._starts.add(sample.interval.start)
            return True

    def snapshot(self) -> CarbonTrace | None:
        samples = self._samples
        if not samples:
            return None
        return CarbonTrace(samples)

    def __len__(self) -> int:
        return len(self._samples)

    def last_sample(self) -> CarbonSample | None:
        samples = self._samples
        return samples[-1] if samples else None


@dataclass(frozen=True)
class DecisionLogEntry:
    """One logged selection with the inputs it was computed from."""

    decided_at: datetime
    c_current: float
    fraction: float
    e_target: float
    model: str
    mapping: str
    c_low: float
    c_high: float
    window: BoundsWindow

    def to_json_dict(self) -> dict:
        return {
            "decided_at": iso_utc(self.decided_at),
            "c_current": self.c_current,
            "fraction": self.fraction,
            "e_target": self.e_target,
            "model": self.model,
            "mapping": self.mapping,
            "c_low": self.c_low,
            "c_high": self.c_high,
            "window": self.window.to_json_dict(),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "DecisionLogEntry":
        from .traces import parse_utc

        return cls(
            decided_at=parse_utc(doc["decided_at"]),
            c_current=float(doc["c_current"]),
            fraction=float(doc["fraction"]),
            e_target=float(doc["e_target"]),
            model=str(doc["model"]),
            mapping=str(doc["mapping"]),
            c_low=float(doc["c_low"]),
            c_high=float(doc["c_high"]),
            window=BoundsWindow(
                doc["window"]["mode"],
                doc["window"]["hours"],
            ),
        )


class DecisionLog:
    """Append-only JSON-lines decision log with a single serialized
    appender. Each append is flushed before it is acknowledged."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, entry: DecisionLogEntry) -> None:
        line = json.dumps(entry.to_json_dict(), separators=(",", ":"))
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as handle:
                handle.write(line + "\n")
                handle.flush()


def read_decision_log(path: str | Path) -> list[DecisionLogEntry]:
    """Read a decision log back. A torn (unparseable) final line is
    dropped; a malformed line anywhere else is an error."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    entries: list[DecisionLogEntry] = []
    for idx, raw in enumerate(lines):
        if not raw.strip():
            continue
        try:
            entries.append(DecisionLogEntry.from_json_dict(json.loads(raw)))
        except (json.JSONDecodeError, KeyError, ValueError, TypeError, DataError):
            if idx == len(lines) - 1:
                log.warning("dropping torn final log line in %s", path)
                break
            raise DataError(f"malformed decision log line {idx + 1} in {path}") from None
    return entries


def replay_entry(entry: DecisionLogEntry, pool: ModelPool) -> SelectionDecision:
    """Re-run the selector on an entry's recorded inputs."""
    bounds = IntensityBounds(entry.c_low, entry.c_high)
    return decide_with_bounds(entry.c_current, bounds, pool, entry.mapping)


class LiveService:
    """Selection service over a live intensity history.

    HTTP handling is kept separate (:class:`LiveServer`), so the decision
    path is directly testable.
    """

    def __init__(
        self,
        pool: ModelPool,
        mapping: str = "prose",
        window: BoundsWindow = DEFAULT_WINDOW,
        decision_log: DecisionLog | None = None,
    ) -> None:
        if mapping not in MAPPING_DIRECTIONS:
            raise ConfigError(f"unknown mapping {mapping!r}")
        self.pool = pool
        self.mapping = mapping
        self.window = window
        self.decision_log = decision_log
        self.history = IntensityHistory()

    def ingest(self, sample: CarbonSample) -> bool:
        """Append a feed sample; duplicate starts are ignored."""
        return self.history.append(sample)

    def poll_once(self, endpoint: str, timeout: float = 10.0) -> bool:
        """One poll cycle; feed failures are logged, never fatal."""
        try:
            sample = poll_intensity(endpoint, timeout=timeout)
        except DataError as exc:
            log.error("poll failed: %s", exc)
            return False
        try:
            fresh = self.ingest(sample)
        except DataError as exc:
            log.error("rejected feed sample: %s", exc)
            return False
        if fresh:
            log.info(
                "ingested sample from=%s intensity=%s",
                iso_utc(sample.interval.start),
                sample.intensity_g_per_kwh,
            )
        return fresh

    def select(self, now: datetime | None = None) -> dict:
        """Compute, log, and return one selection.

        Raises DataError when no usable history exists (mapped to 503) and
        OSError when the decision cannot be logged (mapped to 500; an
        unlogged decision is never served).
        """
        history = self.history.snapshot()
        if history is None:
            raise DataError("no intensity data")
        now = now or datetime.now(timezone.utc)
        current = None
        for sample in reversed(history.samples):
            if sample.interval.start <= now:
                current = sample
                break
        if current is None:
            raise DataError("no intensity sample at or before now")
        decision = decide(
            current.intensity_g_per_kwh,
            history,
            now,
            self.pool,
            self.window,
            self.mapping,
        )
        entry = DecisionLogEntry(
            decided_at=now,
            c_current=decision.c_current,
            fraction=decision.fraction,
            e_target=decision.e_target,
            model=decision.model,
            mapping=self.mapping,
            c_low=decision.bounds.c_low,
            c_high=decision.bounds.c_high,
            window=self.window,
        )
        if self.decision_log is not None:
            self.decision_log.append(entry)
        return {
            "model": decision.model,
            "e_target_mj": decision.e_target,
            "fraction": decision.fraction,
            "c_current": decision.c_current,
            "c_low": decision.bounds.c_low,
            "c_high": decision.bounds.c_high,
            "mapping": self.mapping,
            "decided_at": iso_utc(now),
        }

    def health(self) -> dict:
        last = self.history.last_sample()
        return {
            "status": "ok" if last is not None else "waiting",
            "samples_ingested": len(self.history),
            "last_sample_from": iso_utc(last.interval.start) if last else None,
        }


class _Handler(BaseHTTPRequestHandler):
    service: LiveService

    def do_GET(self) -> None:  # noqa: N802 (http.server naming)
        if self.path.split("?")[0] == "/v1/select":
            try:
                body = self.service.select()
                self._reply(200, body)
            except DataError as exc:
                self._reply(503, {"error": str(exc)})
            except OSError as exc:
                log.error("decision log write failed: %s", exc)
                self._reply(500, {"error": "decision log write failed"})
        elif self.path.split("?")[0] == "/v1/health":
            self._reply(200, self.service.health())
        else:
            self._reply(404, {"error": "not found"})

    def _reply(self, status: int, body: dict) -> None:
        payload = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, fmt: str, *args) -> None:
        log.debug("http: " + fmt, *args)


class LiveServer:
    """HTTP front end plus feed poller for a LiveService."""

    def __init__(
        self,
        service: LiveService,
        feed_url: str | None,
        poll_seconds: float = 60.0,
        host: str = "127.0.0.1",
        port: int = 0,
        feed_timeout: float = 10.0,
    ) -> None:
        self.service = service
        self.feed_url = feed_url
        self.poll_seconds = poll_seconds
        self.feed_timeout = feed_timeout
        handler = type("BoundHandler", (_Handler,), {"service": service})
        self._httpd = ThreadingHTTPServer((host, port), handler)
        self._httpd.daemon_threads = True
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []

    @property
    def address(self) -> tuple[str, int]:
        return self._httpd.server_address[0], self._httpd.server_address[1]

    @property
    def url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    def _poll_loop(self) -> None:
        while not self._stop.is_set():
            self.service.poll_once(self.feed_url, timeout=self.feed_timeout)
            self._stop.wait(self.poll_seconds)

    def start(self) -> None:
        server_thread = threading.Thread(
            target=self._httpd.serve_forever, name="carbonsched-http", daemon=True
        )
        server_thread.start()
        self._threads.append(server_thread)
        if self.feed_url:
            poll_thread = threading.Thread(
                target=self._poll_loop, name="carbonsched-poller", daemon=True
            )
            poll_thread.start()
            self._threads.append(poll_thread)

    def stop(self) -> None:
        self._stop.set()
        self._httpd.shutdown()
        self._httpd.server_close()
        for thread in self._threads:
            thread.join(timeout=5)

    def serve_forever(self) -> None:
        """Blocking run (CLI `serve`); Ctrl-C stops cleanly."""
        self.start()
        try:
            self._stop.wait()
        except KeyboardInterrupt:
            pass
        finally:
            self.stop()
