"""Trace-driven replay of selection policies over an aligned timeline.

Each policy (the adaptive heuristic plus fixed single-model baselines) is
replayed over the same aligned timeline; per-interval emissions, totals,
blended error rates, and efficiency comparisons against a configured
baseline make up the report.

With a whole-trace bounds window the intensity bounds are global (the
offline setting: the period's extremes are known in advance), so decisions
at early steps may already reflect later extremes. A trailing window is
causal: the decision at a step sees only samples at or before it.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .emissions import (
    MJ_PER_KWH,
    EfficiencyComparison,
    IntervalEmission,
    RunSummary,
    build_run_summary,
    carbon_emission_efficiency,
    interval_emission,
)
from .errors import CarbonSchedError, ConfigError
from .registry import RESNET_NAMES, ModelPool, resolve_pool
from .selector import (
    BoundsWindow,
    SelectionDecision,
    decide_with_bounds,
    observe_bounds,
)
from .traces import AlignedTimeline, CarbonTrace, RequestTrace, align

__all__ = [
    "HEURISTIC_POLICY",
    "SimulationConfig",
    "SimulationReport",
    "SweepOutcome",
    "default_policies",
    "run",
    "sweep",
]

HEURISTIC_POLICY = "heuristic"


def default_policies(pool: ModelPool) -> tuple[str, ...]:
    """Heuristic plus fixed baselines: the four ResNet variants when the
    pool has them all, otherwise every pool model."""
    if all(name in pool for name in RESNET_NAMES):
        return (HEURISTIC_POLICY, *RESNET_NAMES)
    return (HEURISTIC_POLICY, *pool.names())


@dataclass(frozen=True)
class SimulationConfig:
    """What to run: pool selection (builtin name, file path, or a pool),
    mapping direction, bounds window, gap policy, the policies to replay,
    and which of them anchors the efficiency comparisons."""

    pool: object = "resnet"
    mapping: str = "prose"
    window: BoundsWindow = field(default_factory=BoundsWindow.whole_trace)
    gap_policy: str = "strict"
    policies: tuple[str, ...] | None = None
    baseline: str = "ResNet50"

    def resolved_policies(self, pool: ModelPool) -> tuple[str, ...]:
        policies = self.policies if self.policies is not None else default_policies(pool)
        if not policies:
            raise ConfigError("empty policy list")
        for name in policies:
            if name != HEURISTIC_POLICY and name not in pool:
                raise ConfigError(f"policy {name!r} names no pool model")
        if self.baseline not in policies:
            raise ConfigError(
                f"baseline {self.baseline!r} is not among the policies {policies}"
            )
        return tuple(policies)

    def to_json_dict(self, pool: ModelPool) -> dict:
        return {
            "pool": str(self.pool) if not isinstance(self.pool, ModelPool) else "inline",
            "pool_models": list(pool.names()),
            "mapping": self.mapping,
            "window": self.window.to_json_dict(),
            "gap_policy": self.gap_policy,
            "policies": list(self.resolved_policies(pool)),
            "baseline": self.baseline,
            "mj_per_kwh": MJ_PER_KWH,
        }


@dataclass(frozen=True)
class SimulationReport:
    """One run: config echo, input digests, per-policy summaries, and
    efficiency comparisons of each non-baseline policy vs the baseline."""

    config: dict
    inputs: dict
    summaries: tuple[RunSummary, ...]
    comparisons: tuple[EfficiencyComparison, ...]

    def summary_for(self, policy: str) -> RunSummary:
        for summary in self.summaries:
            if summary.policy == policy:
                return summary
        raise KeyError(policy)

    def comparison_for(self, candidate: str) -> EfficiencyComparison | None:
        for comparison in self.comparisons:
            if comparison.candidate == candidate:
                return comparison
        return None

    def to_json_dict(self) -> dict:
        return {
            "config": self.config,
            "inputs": self.inputs,
            "policies": [s.to_json_dict() for s in self.summaries],
            "comparisons": [c.to_json_dict() for c in self.comparisons],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        """Per-interval rows for every policy, plot-ready."""
        lines = ["policy,start_utc,end_utc,model,count,energy_mj_total,carbon_g"]
        for summary in self.summaries:
            for emission in summary.per_interval:
                lines.append(f"{summary.policy},{emission.csv_row()}")
        return "\n".join(lines) + "\n"


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _heuristic_decisions(
    timeline: AlignedTimeline,
    carbon: CarbonTrace,
    pool: ModelPool,
    window: BoundsWindow,
    mapping: str,
) -> list[SelectionDecision]:
    if window.mode == "whole_trace":
        # Offline setting: bounds over the entire trace, known in advance.
        bounds = observe_bounds(
            carbon, carbon.samples[-1].interval.start, BoundsWindow.whole_trace()
        )
        return [
            decide_with_bounds(step.intensity_g_per_kwh, bounds, pool, mapping)
            for step in timeline.steps
        ]
    return [
        decide_with_bounds(
            step.intensity_g_per_kwh,
            observe_bounds(carbon, step.interval.start, window),
            pool,
            mapping,
        )
        for step in timeline.steps
    ]


def run(
    config: SimulationConfig,
    carbon: CarbonTrace,
    requests: RequestTrace,
) -> SimulationReport:
    """Replay every configured policy over the aligned timeline.

    Deterministic: identical inputs and config produce an identical report,
    byte-for-byte once serialized.
    """
    pool = resolve_pool(config.pool)
    policies = config.resolved_policies(pool)
    timeline = align(carbon, requests, config.gap_policy)

    summaries: list[RunSummary] = []
    for policy_name in policies:
        if policy_name == HEURISTIC_POLICY:
            decisions = _heuristic_decisions(
                timeline, carbon, pool, config.window, config.mapping
            )
            chosen = [pool.get(d.model) for d in decisions]
        else:
            profile = pool.get(policy_name)
            chosen = [profile] * len(timeline.steps)
        emissions: list[IntervalEmission] = [
            interval_emission(
                step.count, profile, step.intensity_g_per_kwh, step.interval
            )
            for step, profile in zip(timeline.steps, chosen)
        ]
        summaries.append(build_run_summary(policy_name, emissions, pool))

    baseline_summary = next(s for s in summaries if s.policy == config.baseline)
    comparisons = tuple(
        carbon_emission_efficiency(baseline_summary, summary)
        for summary in summaries
        if summary.policy != config.baseline
    )
    return SimulationReport(
        config=config.to_json_dict(pool),
        inputs={
            "carbon_sha256": _sha256(carbon.to_csv()),
            "requests_sha256": _sha256(requests.to_csv()),
            "pool_sha256": _sha256(pool.to_csv()),
        },
        summaries=tuple(summaries),
        comparisons=comparisons,
    )


@dataclass(frozen=True)
class SweepOutcome:
    """Result slot for one config in a sweep: a report or an error string."""

    config: SimulationConfig
    report: SimulationReport | None
    error: str | None


def sweep(
    configs,
    carbon: CarbonTrace,
    requests: RequestTrace,
) -> tuple[SweepOutcome, ...]:
    """Run each config independently; a failing config reports its error
    without aborting the rest. Outcome order matches config order."""
    outcomes: list[SweepOutcome] = []
    for config in configs:
        try:
            outcomes.append(SweepOutcome(config, run(config, carbon, requests), None))
        except CarbonSchedError as exc:
            outcomes.append(SweepOutcome(config, None, str(exc)))
    return tuple(outcomes)
