"""Carbon-intensity-aware model selection for inference serving.

Pick low-energy model variants when the grid is carbon-heavy and
high-accuracy ones when it is clean, replay the policy against historical
carbon/request traces, account the resulting emissions, and score the
trade with the carbon-emission-efficiency metric.
"""

from .emissions import (
    MJ_PER_KWH,
    EfficiencyComparison,
    IntervalEmission,
    RunSummary,
    blended_error,
    carbon_emission_efficiency,
    efficiency_comparison,
    grams_per_inference,
    interval_emission,
    quality_improvement,
)
from .errors import CarbonSchedError, ConfigError, DataError
from .registry import (
    EnergyBounds,
    ModelPool,
    ModelProfile,
    builtin_pool,
    dump_pool,
    energy_bounds,
    load_pool,
    load_pool_file,
    resolve_pool,
)
from .selector import (
    BoundsWindow,
    FixedPolicy,
    HeuristicPolicy,
    IntensityBounds,
    SelectionDecision,
    decide,
    decide_with_bounds,
    fixed_policy,
    intensity_fraction,
    observe_bounds,
    select_model,
    target_energy,
)
from .simulator import SimulationConfig, SimulationReport, run, sweep
from .traces import (
    AlignedStep,
    AlignedTimeline,
    CarbonSample,
    CarbonTrace,
    Interval,
    RequestSample,
    RequestTrace,
    align,
    load_carbon_trace,
    load_carbon_trace_file,
    load_request_trace,
    load_request_trace_file,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "MJ_PER_KWH",
    "AlignedStep",
    "AlignedTimeline",
    "BoundsWindow",
    "CarbonSample",
    "CarbonSchedError",
    "CarbonTrace",
    "ConfigError",
    "DataError",
    "EfficiencyComparison",
    "EnergyBounds",
    "FixedPolicy",
    "HeuristicPolicy",
    "IntensityBounds",
    "Interval",
    "IntervalEmission",
    "ModelPool",
    "ModelProfile",
    "RequestSample",
    "RequestTrace",
    "RunSummary",
    "SelectionDecision",
    "SimulationConfig",
    "SimulationReport",
    "align",
    "blended_error",
    "builtin_pool",
    "carbon_emission_efficiency",
    "decide",
    "decide_with_bounds",
    "dump_pool",
    "efficiency_comparison",
    "energy_bounds",
    "fixed_policy",
    "grams_per_inference",
    "intensity_fraction",
    "interval_emission",
    "load_carbon_trace",
    "load_carbon_trace_file",
    "load_pool",
    "load_pool_file",
    "load_request_trace",
    "load_request_trace_file",
    "observe_bounds",
    "quality_improvement",
    "resolve_pool",
    "run",
    "select_model",
    "sweep",
    "target_energy",
]
