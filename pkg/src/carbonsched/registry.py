"""Model profile registry.

A pool is an ordered set of candidate model profiles, each carrying the
energy cost of one inference (millijoules) and a top-line error rate
(percent). The pool's min/max energies are the anchor points the selection
heuristic interpolates between.

Pool CSV format: header ``name,energy_mj,error_rate_pct``, UTF-8, ``.``
decimal separator, lines starting with ``#`` ignored.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, DataError

__all__ = [
    "ModelProfile",
    "ModelPool",
    "EnergyBounds",
    "REFERENCE_PROFILES",
    "RESNET_NAMES",
    "POOL_CSV_HEADER",
    "builtin_pool",
    "energy_bounds",
    "load_pool",
    "load_pool_file",
    "dump_pool",
    "resolve_pool",
]

POOL_CSV_HEADER = ("name", "energy_mj", "error_rate_pct")


@dataclass(frozen=True)
class ModelProfile:
    """One servable model variant: energy per inference and error rate."""

    name: str
    energy_mj: float
    error_rate_pct: float

    def __post_init__(self) -> None:
        if not self.name:
            raise DataError("empty model name")
        if not (math.isfinite(self.energy_mj) and self.energy_mj > 0):
            raise DataError(f"non-positive energy for model {self.name!r}")
        if not (
            math.isfinite(self.error_rate_pct) and 0.0 <= self.error_rate_pct <= 100.0
        ):
            raise DataError(f"error rate out of [0, 100] for model {self.name!r}")


@dataclass(frozen=True)
class ModelPool:
    """Ordered, non-empty collection of uniquely named profiles.

    Order is preserved from the source and is used only for deterministic
    tie-breaking during selection.
    """

    profiles: tuple[ModelProfile, ...]

    def __post_init__(self) -> None:
        if not self.profiles:
            raise DataError("empty model pool")
        seen: set[str] = set()
        for profile in self.profiles:
            if profile.name in seen:
                raise DataError(f"duplicate model name {profile.name!r}")
            seen.add(profile.name)

    def __iter__(self):
        return iter(self.profiles)

    def __len__(self) -> int:
        return len(self.profiles)

    def names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.profiles)

    def __contains__(self, name: str) -> bool:
        return any(p.name == name for p in self.profiles)

    def get(self, name: str) -> ModelProfile:
        for profile in self.profiles:
            if profile.name == name:
                return profile
        raise ConfigError(f"unknown model name {name!r}")

    def to_csv(self) -> str:
        return dump_pool(self)


@dataclass(frozen=True)
class EnergyBounds:
    """Min/max energy per inference across a pool (both attained)."""

    e_low: float
    e_high: float

    def __post_init__(self) -> None:
        if self.e_low > self.e_high:
            raise DataError("e_low exceeds e_high")


# Bundled energy/error profiles for seven ImageNet classifiers, used as the
# default candidate pool. Energies in mJ per inference, error rates in %.
REFERENCE_PROFILES: tuple[ModelProfile, ...] = (
    ModelProfile("ResNet34", 359.9321833, 8.58),
    ModelProfile("ResNet50", 420.6213298, 7.138),
    ModelProfile("ResNet101", 803.0948846, 6.454),
    ModelProfile("ResNet152", 1238.147188, 5.954),
    ModelProfile("VGG16", 668.9749319, 9.618),
    ModelProfile("VGG19", 803.852304, 9.124),
    ModelProfile("AlexNet", 124.9984724, 20.934),
)

RESNET_NAMES = ("ResNet34", "ResNet50", "ResNet101", "ResNet152")


def builtin_pool(variant: str = "full") -> ModelPool:
    """Return a bundled pool: ``full`` (all seven profiles) or ``resnet``
    (the four ResNet variants only)."""
    if variant == "full":
        return ModelPool(REFERENCE_PROFILES)
    if variant in ("resnet", "resnet_only"):
        return ModelPool(
            tuple(p for p in REFERENCE_PROFILES if p.name in RESNET_NAMES)
        )
    raise ConfigError(f"unknown builtin pool variant {variant!r}")


def energy_bounds(pool: ModelPool) -> EnergyBounds:
    """Min/max energy_mj across the pool."""
    energies = [p.energy_mj for p in pool]
    return EnergyBounds(min(energies), max(energies))


def _parse_float(text: str, what: str, line: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"malformed {what} {text!r} at line {line}") from None
    if not math.isfinite(value):
        raise DataError(f"non-finite {what} at line {line}")
    return value


def load_pool(source: str) -> ModelPool:
    """Parse pool CSV content into a ModelPool.

    Raises DataError with the offending line number for malformed rows,
    non-positive energies, out-of-range error rates, and duplicate names.
    """
    header_seen = False
    profiles: list[ModelProfile] = []
    names: set[str] = set()
    for lineno, raw in enumerate(source.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        cells = [c.strip() for c in next(csv.reader([raw]))]
        if not header_seen:
            if tuple(cells) != POOL_CSV_HEADER:
                raise DataError(
                    f"bad pool header at line {lineno}: expected "
                    f"{','.join(POOL_CSV_HEADER)!r}"
                )
            header_seen = True
            continue
        if len(cells) != 3:
            raise DataError(f"malformed row at line {lineno}: expected 3 fields")
        name = cells[0]
        if not name:
            raise DataError(f"empty model name at line {lineno}")
        energy = _parse_float(cells[1], "energy", lineno)
        error_rate = _parse_float(cells[2], "error rate", lineno)
        if energy <= 0:
            raise DataError(f"non-positive energy at line {lineno}")
        if not 0.0 <= error_rate <= 100.0:
            raise DataError(f"error rate out of [0, 100] at line {lineno}")
        if name in names:
            raise DataError(f"duplicate name {name!r} at line {lineno}")
        names.add(name)
        profiles.append(ModelProfile(name, energy, error_rate))
    if not header_seen:
        raise DataError("empty pool file (missing header)")
    if not profiles:
        raise DataError("pool file contains no data rows")
    return ModelPool(tuple(profiles))


def load_pool_file(path: str | Path) -> ModelPool:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"pool file not found: {path}")
    return load_pool(path.read_text(encoding="utf-8"))


def dump_pool(pool: ModelPool) -> str:
    """Serialize a pool back to CSV. repr() keeps every float exact on
    round-trip."""
    lines = [",".join(POOL_CSV_HEADER)]
    for p in pool:
        lines.append(f"{p.name},{p.energy_mj!r},{p.error_rate_pct!r}")
    return "\n".join(lines) + "\n"


def resolve_pool(spec: str | Path | ModelPool) -> ModelPool:
    """Resolve a pool selection: a ModelPool passes through, ``full`` /
    ``resnet`` / ``resnet_only`` name a builtin, anything else is a CSV
    file path."""
    if isinstance(spec, ModelPool):
        return spec
    text = str(spec)
    if text in ("full", "resnet", "resnet_only"):
        return builtin_pool(text)
    return load_pool_file(text)
