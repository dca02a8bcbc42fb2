"""Carbon-intensity and request-count time series.

Both trace kinds are sequences of half-open UTC intervals ``[start, end)``:
half-open so that boundary instants are never double-counted. ``align``
joins the two series onto the carbon grid, attributing request counts to
carbon intervals by proportional time overlap with largest-remainder
rounding, so counts stay integral and exactly conserved.

CSV formats:
  carbon:   header ``start_utc,end_utc,intensity_g_per_kwh``
  requests: header ``start_utc,end_utc,count``
ISO-8601 timestamps; naive timestamps are taken as UTC, offsets are
converted. A carbon trace may also be given as JSON: an array (or one
object, or JSON lines) of ``{"from", "to", "intensity_g_per_kwh"}``
objects, the same shape the live intensity feed serves.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path

from .errors import ConfigError, DataError

__all__ = [
    "Interval",
    "CarbonSample",
    "CarbonTrace",
    "RequestSample",
    "RequestTrace",
    "AlignedStep",
    "AlignedTimeline",
    "GAP_POLICIES",
    "parse_utc",
    "iso_utc",
    "load_carbon_trace",
    "load_carbon_trace_json",
    "load_carbon_trace_file",
    "load_request_trace",
    "load_request_trace_file",
    "align",
]

GAP_POLICIES = ("strict", "carry_forward")

CARBON_CSV_HEADER = ("start_utc", "end_utc", "intensity_g_per_kwh")
REQUEST_CSV_HEADER = ("start_utc", "end_utc", "count")

_US = timedelta(microseconds=1)


def parse_utc(text: str) -> datetime:
    """Parse an ISO-8601 timestamp to a UTC-aware datetime.

    Accepts a trailing ``Z``, any fixed offset, or a naive timestamp
    (assumed UTC).
    """
    cleaned = text.strip()
    if cleaned.endswith(("Z", "z")):
        cleaned = cleaned[:-1] + "+00:00"
    try:
        stamp = datetime.fromisoformat(cleaned)
    except ValueError:
        raise DataError(f"malformed timestamp {text.strip()!r}") from None
    if stamp.tzinfo is None:
        return stamp.replace(tzinfo=timezone.utc)
    return stamp.astimezone(timezone.utc)


def iso_utc(stamp: datetime) -> str:
    """Canonical UTC rendering with a ``Z`` suffix."""
    return stamp.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


@dataclass(frozen=True)
class Interval:
    """Half-open UTC interval [start, end)."""

    start: datetime
    end: datetime

    def __post_init__(self) -> None:
        if self.start >= self.end:
            raise DataError(
                f"empty or inverted interval [{iso_utc(self.start)}, {iso_utc(self.end)})"
            )

    def duration_us(self) -> int:
        return (self.end - self.start) // _US

    def overlap_us(self, other: "Interval") -> int:
        lo = max(self.start, other.start)
        hi = min(self.end, other.end)
        return max(0, (hi - lo) // _US)


@dataclass(frozen=True)
class CarbonSample:
    interval: Interval
    intensity_g_per_kwh: float

    def __post_init__(self) -> None:
        v = self.intensity_g_per_kwh
        if not (math.isfinite(v) and v >= 0.0):
            raise DataError("negative or non-finite carbon intensity")


@dataclass(frozen=True)
class RequestSample:
    interval: Interval
    count: int

    def __post_init__(self) -> None:
        if self.count < 0:
            raise DataError("negative request count")


def _check_sorted_disjoint(intervals, lines=None, what: str = "trace") -> None:
    for i in range(1, len(intervals)):
        if intervals[i].start < intervals[i - 1].end:
            if lines is not None:
                raise DataError(
                    f"overlapping intervals in {what} "
                    f"(lines {lines[i - 1]} and {lines[i]})"
                )
            raise DataError(f"overlapping intervals in {what}")


@dataclass(frozen=True)
class CarbonTrace:
    """Sorted, non-overlapping carbon-intensity samples."""

    samples: tuple[CarbonSample, ...]

    def __post_init__(self) -> None:
        if not self.samples:
            raise DataError("empty carbon trace")
        _check_sorted_disjoint([s.interval for s in self.samples], what="carbon trace")

    def __len__(self) -> int:
        return len(self.samples)

    def intensities(self) -> tuple[float, ...]:
        return tuple(s.intensity_g_per_kwh for s in self.samples)

    def span(self) -> Interval:
        return Interval(self.samples[0].interval.start, self.samples[-1].interval.end)

    def to_csv(self) -> str:
        lines = [",".join(CARBON_CSV_HEADER)]
        for s in self.samples:
            lines.append(
                f"{iso_utc(s.interval.start)},{iso_utc(s.interval.end)},"
                f"{s.intensity_g_per_kwh!r}"
            )
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class RequestTrace:
    """Sorted, non-overlapping request-count samples."""

    samples: tuple[RequestSample, ...]

    def __post_init__(self) -> None:
        if not self.samples:
            raise DataError("empty request trace")
        _check_sorted_disjoint([s.interval for s in self.samples], what="request trace")

    def __len__(self) -> int:
        return len(self.samples)

    def total_count(self) -> int:
        return sum(s.count for s in self.samples)

    def span(self) -> Interval:
        return Interval(self.samples[0].interval.start, self.samples[-1].interval.end)

    def to_csv(self) -> str:
        lines = [",".join(REQUEST_CSV_HEADER)]
        for s in self.samples:
            lines.append(
                f"{iso_utc(s.interval.start)},{iso_utc(s.interval.end)},{s.count}"
            )
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class AlignedStep:
    """One simulation step: a carbon interval, its intensity, and the
    request count attributed to it."""

    interval: Interval
    intensity_g_per_kwh: float
    count: int


@dataclass(frozen=True)
class AlignedTimeline:
    steps: tuple[AlignedStep, ...]

    def __len__(self) -> int:
        return len(self.steps)

    def total_count(self) -> int:
        return sum(s.count for s in self.steps)


def _iter_csv_rows(source: str):
    """Yield (lineno, cells) for non-blank, non-comment lines."""
    for lineno, raw in enumerate(source.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        yield lineno, [c.strip() for c in next(csv.reader([raw]))]


def _parse_stamp(text: str, line: int) -> datetime:
    try:
        return parse_utc(text)
    except DataError as exc:
        raise DataError(f"{exc} at line {line}") from None


def load_carbon_trace(source: str) -> CarbonTrace:
    """Parse carbon CSV content into a sorted, validated trace."""
    header_seen = False
    entries: list[tuple[CarbonSample, int]] = []
    for lineno, cells in _iter_csv_rows(source):
        if not header_seen:
            if tuple(cells) != CARBON_CSV_HEADER:
                raise DataError(
                    f"bad carbon header at line {lineno}: expected "
                    f"{','.join(CARBON_CSV_HEADER)!r}"
                )
            header_seen = True
            continue
        if len(cells) != 3:
            raise DataError(f"malformed row at line {lineno}: expected 3 fields")
        start = _parse_stamp(cells[0], lineno)
        end = _parse_stamp(cells[1], lineno)
        try:
            intensity = float(cells[2])
        except ValueError:
            raise DataError(f"malformed intensity {cells[2]!r} at line {lineno}") from None
        if not math.isfinite(intensity):
            raise DataError(f"non-finite intensity at line {lineno}")
        if intensity < 0:
            raise DataError(f"negative intensity at line {lineno}")
        if start >= end:
            raise DataError(f"empty or inverted interval at line {lineno}")
        entries.append((CarbonSample(Interval(start, end), intensity), lineno))
    if not header_seen:
        raise DataError("empty carbon file (missing header)")
    if not entries:
        raise DataError("empty trace")
    entries.sort(key=lambda e: e[0].interval.start)
    _check_sorted_disjoint(
        [e[0].interval for e in entries],
        lines=[e[1] for e in entries],
        what="carbon trace",
    )
    return CarbonTrace(tuple(e[0] for e in entries))


def load_carbon_trace_json(source: str) -> CarbonTrace:
    """Parse the live-feed JSON shape (array, single object, or JSON lines
    of ``{"from", "to", "intensity_g_per_kwh"}``) into a carbon trace."""
    try:
        doc = json.loads(source)
    except json.JSONDecodeError:
        doc = []
        for lineno, raw in enumerate(source.splitlines(), start=1):
            if not raw.strip():
                continue
            try:
                doc.append(json.loads(raw))
            except json.JSONDecodeError:
                raise DataError(f"malformed JSON at line {lineno}") from None
    if isinstance(doc, dict):
        doc = [doc]
    if not isinstance(doc, list):
        raise DataError("carbon JSON must be an object or an array of objects")
    samples = []
    for idx, item in enumerate(doc):
        samples.append(parse_feed_sample(item, where=f"entry {idx}"))
    if not samples:
        raise DataError("empty trace")
    samples.sort(key=lambda s: s.interval.start)
    _check_sorted_disjoint([s.interval for s in samples], what="carbon trace")
    return CarbonTrace(tuple(samples))


def parse_feed_sample(item: object, where: str = "feed body") -> CarbonSample:
    """Validate one ``{"from", "to", "intensity_g_per_kwh"}`` object."""
    if not isinstance(item, dict):
        raise DataError(f"malformed {where}: expected a JSON object")
    try:
        start = parse_utc(str(item["from"]))
        end = parse_utc(str(item["to"]))
        intensity = float(item["intensity_g_per_kwh"])
    except KeyError as exc:
        raise DataError(f"missing field {exc.args[0]!r} in {where}") from None
    except (TypeError, ValueError):
        raise DataError(f"malformed field values in {where}") from None
    if not math.isfinite(intensity) or intensity < 0:
        raise DataError(f"negative or non-finite intensity in {where}")
    if start >= end:
        raise DataError(f"empty or inverted interval in {where}")
    return CarbonSample(Interval(start, end), intensity)


def load_carbon_trace_file(path: str | Path) -> CarbonTrace:
    """Load a carbon trace from a CSV or feed-JSON file (sniffed)."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"carbon file not found: {path}")
    text = path.read_text(encoding="utf-8")
    head = text.lstrip()[:1]
    if head in ("[", "{"):
        return load_carbon_trace_json(text)
    return load_carbon_trace(text)


def load_request_trace(source: str) -> RequestTrace:
    """Parse request CSV content into a sorted, validated trace."""
    header_seen = False
    entries: list[tuple[RequestSample, int]] = []
    for lineno, cells in _iter_csv_rows(source):
        if not header_seen:
            if tuple(cells) != REQUEST_CSV_HEADER:
                raise DataError(
                    f"bad request header at line {lineno}: expected "
                    f"{','.join(REQUEST_CSV_HEADER)!r}"
                )
            header_seen = True
            continue
        if len(cells) != 3:
            raise DataError(f"malformed row at line {lineno}: expected 3 fields")
        start = _parse_stamp(cells[0], lineno)
        end = _parse_stamp(cells[1], lineno)
        try:
            count = int(cells[2])
        except ValueError:
            raise DataError(f"non-integer count {cells[2]!r} at line {lineno}") from None
        if count < 0:
            raise DataError(f"negative count at line {lineno}")
        if start >= end:
            raise DataError(f"empty or inverted interval at line {lineno}")
        entries.append((RequestSample(Interval(start, end), count), lineno))
    if not header_seen:
        raise DataError("empty request file (missing header)")
    if not entries:
        raise DataError("empty trace")
    entries.sort(key=lambda e: e[0].interval.start)
    _check_sorted_disjoint(
        [e[0].interval for e in entries],
        lines=[e[1] for e in entries],
        what="request trace",
    )
    return RequestTrace(tuple(e[0] for e in entries))


def load_request_trace_file(path: str | Path) -> RequestTrace:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"request file not found: {path}")
    return load_request_trace(path.read_text(encoding="utf-8"))


def _largest_remainder(count: int, weights: list[int]) -> list[int]:
    """Split ``count`` proportionally to integer weights, rounding so the
    parts stay integral and sum exactly to ``count``. Leftover units go to
    the largest fractional remainders, earlier entries first on ties."""
    total = sum(weights)
    base = [count * w // total for w in weights]
    remainders = [count * w % total for w in weights]
    leftover = count - sum(base)
    for idx in sorted(range(len(weights)), key=lambda i: (-remainders[i], i))[:leftover]:
        base[idx] += 1
    return base


def _coverage(carbon: CarbonTrace, requests: RequestTrace, gap_policy: str):
    """Carbon coverage intervals as (interval, intensity) pairs.

    Under carry_forward, gaps between consecutive carbon samples, and any
    tail between the last carbon sample and the end of the request trace,
    are filled with the most recent earlier sample's intensity.
    """
    coverage: list[tuple[Interval, float]] = []
    for i, sample in enumerate(carbon.samples):
        if gap_policy == "carry_forward" and i > 0:
            prev = carbon.samples[i - 1]
            if prev.interval.end < sample.interval.start:
                coverage.append(
                    (
                        Interval(prev.interval.end, sample.interval.start),
                        prev.intensity_g_per_kwh,
                    )
                )
        coverage.append((sample.interval, sample.intensity_g_per_kwh))
    if gap_policy == "carry_forward":
        last = carbon.samples[-1]
        req_end = requests.span().end
        if last.interval.end < req_end:
            coverage.append(
                (Interval(last.interval.end, req_end), last.intensity_g_per_kwh)
            )
    return coverage


def align(
    carbon: CarbonTrace,
    requests: RequestTrace,
    gap_policy: str = "strict",
) -> AlignedTimeline:
    """Join request counts onto the carbon grid.

    Carbon intensity is piecewise-constant on each carbon interval. Each
    request sample's count is split across the carbon intervals it overlaps,
    proportionally to overlap time, with largest-remainder rounding so the
    total is conserved exactly.

    gap_policy:
      strict        -- request time not covered by a carbon interval is an
                       error.
      carry_forward -- gaps after the first carbon sample reuse the most
                       recent earlier intensity (as synthetic steps); request
                       time before the first carbon sample has no intensity
                       to carry and is still an error.
    """
    if gap_policy not in GAP_POLICIES:
        raise ConfigError(
            f"unknown gap policy {gap_policy!r}: expected one of {GAP_POLICIES}"
        )
    coverage = _coverage(carbon, requests, gap_policy)
    counts = [0] * len(coverage)
    touched = [False] * len(coverage)
    any_overlap = False
    for rs in requests.samples:
        overlaps: list[tuple[int, int]] = []
        for idx, (interval, _) in enumerate(coverage):
            o = rs.interval.overlap_us(interval)
            if o > 0:
                overlaps.append((idx, o))
                touched[idx] = True
        covered_us = sum(o for _, o in overlaps)
        duration_us = rs.interval.duration_us()
        if covered_us < duration_us:
            if gap_policy == "strict":
                raise DataError(
                    "coverage gap: request interval "
                    f"[{iso_utc(rs.interval.start)}, {iso_utc(rs.interval.end)}) "
                    "not fully covered by carbon intervals"
                )
            raise DataError(
                "request time before first carbon sample: no earlier intensity "
                f"to carry forward for [{iso_utc(rs.interval.start)}, "
                f"{iso_utc(rs.interval.end)})"
            )
        any_overlap = True
        shares = _largest_remainder(rs.count, [o for _, o in overlaps])
        for (idx, _), share in zip(overlaps, shares):
            counts[idx] += share
    if not any_overlap:
        raise DataError("zero overlap between carbon and request traces")
    steps = tuple(
        AlignedStep(interval, intensity, counts[idx])
        for idx, (interval, intensity) in enumerate(coverage)
        if touched[idx]
    )
    return AlignedTimeline(steps)
