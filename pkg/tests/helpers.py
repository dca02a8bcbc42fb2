"""Shared trace-building helpers and independent oracles for the suite.

The oracles stay deliberately naive (per-minute buckets, per-request
pricing loops) so they check the engine without sharing its code paths.
"""

from __future__ import annotations

import math
from collections import defaultdict
from datetime import datetime, timedelta, timezone
from itertools import repeat

from carbonsched.emissions import grams_per_inference
from carbonsched.selector import BoundsWindow, decide_with_bounds, observe_bounds
from carbonsched.traces import (
    CarbonSample,
    CarbonTrace,
    Interval,
    RequestSample,
    RequestTrace,
)

T0 = datetime(2023, 6, 1, tzinfo=timezone.utc)


def ts(minutes: float) -> datetime:
    return T0 + timedelta(minutes=minutes)


def interval(m0: float, m1: float) -> Interval:
    return Interval(ts(m0), ts(m1))


def carbon_trace(*samples: tuple[float, float, float]) -> CarbonTrace:
    """Build a carbon trace from (start_min, end_min, intensity) triples."""
    return CarbonTrace(
        tuple(CarbonSample(interval(a, b), value) for a, b, value in samples)
    )


def request_trace(*samples: tuple[float, float, int]) -> RequestTrace:
    """Build a request trace from (start_min, end_min, count) triples."""
    return RequestTrace(
        tuple(RequestSample(interval(a, b), count) for a, b, count in samples)
    )


def grid_carbon(intensities, step_min: int = 30, start_min: int = 0) -> CarbonTrace:
    """Regular-grid carbon trace from a list of intensities."""
    return carbon_trace(
        *(
            (start_min + i * step_min, start_min + (i + 1) * step_min, v)
            for i, v in enumerate(intensities)
        )
    )


def grid_requests(counts, step_min: int = 30, start_min: int = 0) -> RequestTrace:
    """Regular-grid request trace from a list of counts."""
    return request_trace(
        *(
            (start_min + i * step_min, start_min + (i + 1) * step_min, c)
            for i, c in enumerate(counts)
        )
    )


def per_minute_oracle(carbon: CarbonTrace, requests: RequestTrace) -> dict[int, float]:
    """Independent attribution oracle: 1-minute buckets, uniform spread of
    each request sample's count across its minutes, summed per carbon
    interval (keyed by carbon sample index). Traces must be minute-aligned."""
    minute = timedelta(minutes=1)
    totals: dict[int, float] = defaultdict(float)
    for rs in requests.samples:
        minutes = int((rs.interval.end - rs.interval.start) / minute)
        per_minute = rs.count / minutes
        t = rs.interval.start
        for _ in range(minutes):
            for idx, cs in enumerate(carbon.samples):
                if cs.interval.start <= t < cs.interval.end:
                    totals[idx] += per_minute
                    break
            t += minute
    return totals


def per_request_total(timeline, carbon, pool, window, mapping):
    """Brute-force emission oracle: decide and price every request one by
    one, reducing per interval and then across intervals (the same
    two-level reduction shape the engine uses, so equality is exact)."""
    if window.mode == "whole_trace":
        global_bounds = observe_bounds(
            carbon, carbon.samples[-1].interval.start, BoundsWindow.whole_trace()
        )
    per_interval = []
    for step in timeline.steps:
        bounds = (
            global_bounds
            if window.mode == "whole_trace"
            else observe_bounds(carbon, step.interval.start, window)
        )
        grams = []
        for _ in repeat(None, step.count):
            decision = decide_with_bounds(
                step.intensity_g_per_kwh, bounds, pool, mapping
            )
            profile = pool.get(decision.model)
            grams.append(
                grams_per_inference(profile.energy_mj, step.intensity_g_per_kwh)
            )
        per_interval.append(math.fsum(grams))
    return per_interval, math.fsum(per_interval)
