"""Carbon accounting: grams of CO2 from requests, energy, and intensity.

All accounting is in grams with double precision. Per-inference grams sit
around 1e-5 g while daily totals reach kilograms, so totals use compensated
summation (math.fsum) and the blended error rate uses exact rational
arithmetic, which in particular makes a single-model run's blended error
equal that model's rate exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import DataError
from .registry import ModelPool, ModelProfile
from .traces import Interval, iso_utc

__all__ = [
    "MJ_PER_KWH",
    "IntervalEmission",
    "RunSummary",
    "EfficiencyComparison",
    "grams_per_inference",
    "interval_emission",
    "blended_error",
    "quality_improvement",
    "efficiency_comparison",
    "carbon_emission_efficiency",
    "build_run_summary",
]

# Millijoules per kilowatt-hour; the only place this constant is defined.
MJ_PER_KWH = 3.6e9

EMISSION_CSV_HEADER = (
    "start_utc",
    "end_utc",
    "model",
    "count",
    "energy_mj_total",
    "carbon_g",
)


def grams_per_inference(energy_mj: float, intensity_g_per_kwh: float) -> float:
    """Grams of CO2 for one inference at the given grid intensity."""
    return energy_mj * intensity_g_per_kwh / MJ_PER_KWH


@dataclass(frozen=True)
class IntervalEmission:
    """Emission accounting for one interval served by one model."""

    interval: Interval
    model: str
    count: int
    energy_mj_total: float
    carbon_g: float

    def to_json_dict(self) -> dict:
        return {
            "interval": {
                "start": iso_utc(self.interval.start),
                "end": iso_utc(self.interval.end),
            },
            "model": self.model,
            "count": self.count,
            "energy_mj_total": self.energy_mj_total,
            "carbon_g": self.carbon_g,
        }

    def csv_row(self) -> str:
        return (
            f"{iso_utc(self.interval.start)},{iso_utc(self.interval.end)},"
            f"{self.model},{self.count},{self.energy_mj_total!r},{self.carbon_g!r}"
        )


def interval_emission(
    count: int,
    model: ModelProfile,
    intensity_g_per_kwh: float,
    interval: Interval,
) -> IntervalEmission:
    """Emission of ``count`` inferences on ``model`` at the given intensity."""
    if count < 0:
        raise DataError("negative request count")
    return IntervalEmission(
        interval=interval,
        model=model.name,
        count=count,
        energy_mj_total=count * model.energy_mj,
        carbon_g=count * grams_per_inference(model.energy_mj, intensity_g_per_kwh),
    )


def blended_error(per_interval: Iterable[tuple[int, ModelProfile]]) -> float:
    """Request-weighted mean error rate (%) across intervals.

    Accumulated exactly over the rationals, then rounded once to float.
    """
    weighted = Fraction(0)
    total = 0
    for count, profile in per_interval:
        if count < 0:
            raise DataError("negative request count")
        weighted += count * Fraction(profile.error_rate_pct)
        total += count
    if total == 0:
        raise DataError("zero total requests: blended error undefined")
    return float(weighted / total)


def quality_improvement(baseline_error_pct: float, candidate_error_pct: float) -> float:
    """Relative error-rate improvement of the candidate over the baseline,
    in percent; negative when the candidate is worse."""
    if not (math.isfinite(baseline_error_pct) and baseline_error_pct > 0):
        raise DataError("baseline error rate must be positive")
    return (baseline_error_pct - candidate_error_pct) / baseline_error_pct * 100.0


@dataclass(frozen=True)
class RunSummary:
    """Totals for one policy over a timeline."""

    policy: str
    total_carbon_g: float
    total_requests: int
    blended_error_pct: float
    per_interval: tuple[IntervalEmission, ...]

    def to_json_dict(self) -> dict:
        return {
            "policy": self.policy,
            "total_carbon_g": self.total_carbon_g,
            "total_requests": self.total_requests,
            "blended_error_pct": self.blended_error_pct,
            "per_interval": [e.to_json_dict() for e in self.per_interval],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        lines = [",".join(EMISSION_CSV_HEADER)]
        lines.extend(e.csv_row() for e in self.per_interval)
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class EfficiencyComparison:
    """Carbon-emission efficiency of a candidate against a baseline:
    relative quality improvement (%) per gram of additional carbon.

    ``cee`` is None when the two runs emit identical carbon (the quotient
    is undefined)."""

    baseline: str
    candidate: str
    quality_improvement_pct: float
    delta_carbon_g: float
    cee: float | None

    def to_json_dict(self) -> dict:
        return {
            "baseline": self.baseline,
            "candidate": self.candidate,
            "quality_improvement_pct": self.quality_improvement_pct,
            "delta_carbon_g": self.delta_carbon_g,
            "cee": self.cee,
        }


def efficiency_comparison(
    baseline_name: str,
    candidate_name: str,
    baseline_error_pct: float,
    candidate_error_pct: float,
    baseline_carbon_g: float,
    candidate_carbon_g: float,
) -> EfficiencyComparison:
    improvement = quality_improvement(baseline_error_pct, candidate_error_pct)
    delta = candidate_carbon_g - baseline_carbon_g
    cee = improvement / delta if delta != 0.0 else None
    return EfficiencyComparison(
        baseline=baseline_name,
        candidate=candidate_name,
        quality_improvement_pct=improvement,
        delta_carbon_g=delta,
        cee=cee,
    )


def carbon_emission_efficiency(
    baseline: RunSummary, candidate: RunSummary
) -> EfficiencyComparison:
    """Compare two run summaries; an undefined quotient (equal carbon
    totals) is reported as ``cee=None`` rather than raised."""
    return efficiency_comparison(
        baseline.policy,
        candidate.policy,
        baseline.blended_error_pct,
        candidate.blended_error_pct,
        baseline.total_carbon_g,
        candidate.total_carbon_g,
    )


def build_run_summary(
    policy_name: str,
    emissions: Sequence[IntervalEmission],
    pool: ModelPool,
) -> RunSummary:
    """Aggregate per-interval emissions into a RunSummary."""
    total_carbon = math.fsum(e.carbon_g for e in emissions)
    total_requests = sum(e.count for e in emissions)
    blended = blended_error((e.count, pool.get(e.model)) for e in emissions)
    return RunSummary(
        policy=policy_name,
        total_carbon_g=total_carbon,
        total_requests=total_requests,
        blended_error_pct=blended,
        per_interval=tuple(emissions),
    )
