"""Intensity-to-model selection heuristic.

The current grid carbon intensity is normalized against the low/high
intensities observed over a window, and that fraction is mapped to a target
energy-per-inference between the pool's energy bounds. The pool model whose
energy is nearest the target is selected.

Two mapping directions ship:

  ``prose``   -- high intensity maps to the low-energy end: small cheap
                 models when the grid is dirty, large accurate ones when it
                 is clean. This is the default.
  ``literal`` -- high intensity maps to the high-energy end (the direct
                 reading of the normalization identity); kept selectable for
                 auditability.

The direction is always explicit configuration, never inferred.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timedelta

from .errors import ConfigError, DataError
from .registry import EnergyBounds, ModelPool, ModelProfile, energy_bounds
from .traces import CarbonTrace

__all__ = [
    "MAPPING_DIRECTIONS",
    "IntensityBounds",
    "BoundsWindow",
    "SelectionDecision",
    "HeuristicPolicy",
    "FixedPolicy",
    "observe_bounds",
    "intensity_fraction",
    "target_energy",
    "select_model",
    "decide_with_bounds",
    "decide",
    "fixed_policy",
]

MAPPING_DIRECTIONS = ("prose", "literal")


def _check_mapping(mapping: str) -> None:
    if mapping not in MAPPING_DIRECTIONS:
        raise ConfigError(
            f"unknown mapping {mapping!r}: expected one of {MAPPING_DIRECTIONS}"
        )


@dataclass(frozen=True)
class IntensityBounds:
    """Lowest/highest intensity observed over the bounds window (g/kWh)."""

    c_low: float
    c_high: float

    def __post_init__(self) -> None:
        if self.c_low > self.c_high:
            raise DataError("c_low exceeds c_high")


@dataclass(frozen=True)
class BoundsWindow:
    """Observation window for intensity bounds: the whole trace seen so
    far, or a trailing number of hours."""

    mode: str
    hours: float | None = None

    def __post_init__(self) -> None:
        if self.mode not in ("whole_trace", "trailing"):
            raise ConfigError(f"unknown bounds window mode {self.mode!r}")
        if self.mode == "trailing":
            if self.hours is None or not (
                math.isfinite(self.hours) and self.hours > 0
            ):
                raise ConfigError("trailing window needs a positive hour count")
        elif self.hours is not None:
            raise ConfigError("whole_trace window takes no hour count")

    @classmethod
    def whole_trace(cls) -> "BoundsWindow":
        return cls("whole_trace")

    @classmethod
    def trailing(cls, hours: float) -> "BoundsWindow":
        return cls("trailing", float(hours))

    @classmethod
    def parse(cls, text: str) -> "BoundsWindow":
        """Parse ``whole`` / ``whole_trace`` or an hour count."""
        cleaned = text.strip()
        if cleaned in ("whole", "whole_trace"):
            return cls.whole_trace()
        try:
            hours = float(cleaned)
        except ValueError:
            raise ConfigError(
                f"bad window {text!r}: expected 'whole' or an hour count"
            ) from None
        return cls.trailing(hours)

    def describe(self) -> str:
        if self.mode == "whole_trace":
            return "whole_trace"
        return f"trailing({self.hours:g}h)"

    def to_json_dict(self) -> dict:
        return {"mode": self.mode, "hours": self.hours}


@dataclass(frozen=True)
class SelectionDecision:
    """One selection: the observed intensity, its normalized fraction, the
    target energy it maps to, and the chosen model. ``bounds`` records the
    low/high intensities in force (None for fixed policies, which ignore
    intensity)."""

    c_current: float
    fraction: float
    e_target: float
    model: str
    bounds: IntensityBounds | None = None


def observe_bounds(
    carbon: CarbonTrace, at: datetime, window: BoundsWindow
) -> IntensityBounds:
    """Min/max intensity over samples whose interval start lies at or
    before ``at`` (and, for trailing windows, within the trailing span)."""
    cutoff = None
    if window.mode == "trailing":
        cutoff = at - timedelta(hours=window.hours)
    values = [
        s.intensity_g_per_kwh
        for s in carbon.samples
        if s.interval.start <= at and (cutoff is None or s.interval.start >= cutoff)
    ]
    if not values:
        raise DataError(
            f"no carbon samples in window {window.describe()} at {at.isoformat()}"
        )
    return IntensityBounds(min(values), max(values))


def intensity_fraction(c_current: float, bounds: IntensityBounds) -> float:
    """Normalize the current intensity into [0, 1] between the bounds.

    Clamped, so intensities outside the observed range stay in range; a
    degenerate window (c_low == c_high) carries no signal and yields 0.
    """
    if bounds.c_high == bounds.c_low:
        return 0.0
    fraction = (c_current - bounds.c_low) / (bounds.c_high - bounds.c_low)
    return min(1.0, max(0.0, fraction))


def target_energy(fraction: float, e: EnergyBounds, mapping: str) -> float:
    """Map a fraction in [0, 1] to a target energy between the pool bounds.

    literal: e_low + fraction * (e_high - e_low)
    prose:   e_high - fraction * (e_high - e_low)
    """
    _check_mapping(mapping)
    span = e.e_high - e.e_low
    if mapping == "literal":
        return e.e_low + fraction * span
    return e.e_high - fraction * span


def select_model(e_target: float, pool: ModelPool) -> ModelProfile:
    """Pool profile with energy nearest the target. Ties go to the
    lower-energy profile, then to the earlier profile in pool order."""
    return min(
        enumerate(pool),
        key=lambda item: (abs(item[1].energy_mj - e_target), item[1].energy_mj, item[0]),
    )[1]


def decide_with_bounds(
    c_current: float,
    bounds: IntensityBounds,
    pool: ModelPool,
    mapping: str = "prose",
) -> SelectionDecision:
    """Run the fraction -> target -> nearest-model chain against known
    bounds, recording every intermediate."""
    fraction = intensity_fraction(c_current, bounds)
    e_target = target_energy(fraction, energy_bounds(pool), mapping)
    profile = select_model(e_target, pool)
    return SelectionDecision(
        c_current=c_current,
        fraction=fraction,
        e_target=e_target,
        model=profile.name,
        bounds=bounds,
    )


def decide(
    c_current: float,
    carbon: CarbonTrace,
    at: datetime,
    pool: ModelPool,
    window: BoundsWindow | None = None,
    mapping: str = "prose",
) -> SelectionDecision:
    """Full decision from history: observe bounds at ``at``, then select."""
    window = window or BoundsWindow.whole_trace()
    bounds = observe_bounds(carbon, at, window)
    return decide_with_bounds(c_current, bounds, pool, mapping)


@dataclass(frozen=True)
class HeuristicPolicy:
    """Intensity-adaptive policy over a pool."""

    pool: ModelPool
    mapping: str = "prose"
    window: BoundsWindow = BoundsWindow.whole_trace()

    def __post_init__(self) -> None:
        _check_mapping(self.mapping)

    @property
    def name(self) -> str:
        return "heuristic"

    def decide(
        self, c_current: float, carbon: CarbonTrace, at: datetime
    ) -> SelectionDecision:
        return decide(c_current, carbon, at, self.pool, self.window, self.mapping)


@dataclass(frozen=True)
class FixedPolicy:
    """Baseline policy: always the same model, whatever the intensity."""

    profile: ModelProfile

    @property
    def name(self) -> str:
        return self.profile.name

    def decide(
        self,
        c_current: float,
        carbon: CarbonTrace | None = None,
        at: datetime | None = None,
    ) -> SelectionDecision:
        return SelectionDecision(
            c_current=c_current,
            fraction=0.0,
            e_target=self.profile.energy_mj,
            model=self.profile.name,
            bounds=None,
        )


def fixed_policy(model_name: str, pool: ModelPool) -> FixedPolicy:
    """Constant policy serving one pool model; unknown names are rejected."""
    return FixedPolicy(pool.get(model_name))
