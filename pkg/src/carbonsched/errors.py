"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: DataError -> 1 (bad input
data), ConfigError -> 2 (bad configuration).
"""


class CarbonSchedError(Exception):
    """Base class for all carbonsched errors."""


class DataError(CarbonSchedError):
    """Malformed or invariant-violating input data (trace files, pool files,
    feed bodies)."""


class ConfigError(CarbonSchedError):
    """Invalid configuration: unknown pool variant, unknown policy or
    baseline name, bad mapping/window values."""
