"""Measurement scales, raw-to-indicator normalization and four-level thresholds.

Every metric is mapped onto a common indicator scale in [0, 1] where higher
is always better.  Thresholds are expressed on that indicator scale so their
ordering (reject < accept <= target) does not depend on metric direction.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import (
    DegenerateNormalization,
    DirectionMismatch,
    NominalNormalization,
    ThresholdOrder,
    ThresholdRange,
)

__all__ = [
    "Scale",
    "Direction",
    "LinearNormalization",
    "ThresholdSet",
    "MetricSpec",
    "VerdictLevel",
    "ReferenceComparison",
    "Verdict",
    "normalize_value",
    "validate_thresholds",
    "evaluate_thresholds",
    "admissible_stats",
]


class Scale(enum.Enum):
    NOMINAL = "nominal"
    ORDINAL = "ordinal"
    INTERVAL = "interval"
    RATIO = "ratio"

    @property
    def rank(self) -> int:
        return _SCALE_ORDER.index(self)


_SCALE_ORDER = [Scale.NOMINAL, Scale.ORDINAL, Scale.INTERVAL, Scale.RATIO]


class Direction(enum.Enum):
    HIGHER_BETTER = "higher-better"
    LOWER_BETTER = "lower-better"


@dataclass(frozen=True)
class LinearNormalization:
    """Linear map sending ``from_raw`` to indicator 0 and ``to_raw`` to 1."""

    from_raw: float
    to_raw: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.from_raw) and math.isfinite(self.to_raw)):
            raise DegenerateNormalization("normalization endpoints must be finite")
        if self.from_raw == self.to_raw:
            raise DegenerateNormalization(
                f"normalization endpoints are equal ({self.from_raw})"
            )


@dataclass(frozen=True)
class ThresholdSet:
    reject: float
    accept: float
    target: float
    reference: float | None = None


@dataclass(frozen=True)
class MetricSpec:
    name: str
    scale: Scale
    unit: str
    direction: Direction
    normalization: LinearNormalization
    thresholds: ThresholdSet | None = None

    def __post_init__(self) -> None:
        n = self.normalization
        rising = n.to_raw > n.from_raw
        if rising != (self.direction is Direction.HIGHER_BETTER):
            raise DirectionMismatch(
                f"metric {self.name!r}: {self.direction.value} requires "
                f"'from' to be the worse endpoint (from={n.from_raw}, to={n.to_raw})"
            )
        if self.thresholds is not None:
            validate_thresholds(self.thresholds)


class VerdictLevel(enum.IntEnum):
    REJECTED = 0
    MARGINAL = 1
    ACCEPTED = 2
    TARGET_MET = 3

    @property
    def label(self) -> str:
        return self.name.lower().replace("_", "-")


class ReferenceComparison(enum.Enum):
    BELOW = "below"
    AT_OR_ABOVE = "at-or-above"


@dataclass(frozen=True)
class Verdict:
    level: VerdictLevel
    vs_reference: ReferenceComparison | None = None


def normalize_value(spec: MetricSpec, raw: float) -> float:
    """Map a raw observation to an indicator in [0, 1], clamping out-of-range values."""
    if spec.scale is Scale.NOMINAL:
        raise NominalNormalization(
            f"metric {spec.name!r} is nominal; linear normalization is not admissible"
        )
    lo, hi = spec.normalization.from_raw, spec.normalization.to_raw
    indicator = (raw - lo) / (hi - lo)
    if indicator != indicator:
        raise ValueError(f"raw value {raw!r} is not a number")
    return min(1.0, max(0.0, indicator))


def validate_thresholds(t: ThresholdSet) -> None:
    """Raise ThresholdRange or ThresholdOrder unless 0 <= reject < accept <= target <= 1."""
    values = {"reject": t.reject, "accept": t.accept, "target": t.target}
    if t.reference is not None:
        values["reference"] = t.reference
    for name, value in values.items():
        if not (0.0 <= value <= 1.0):
            raise ThresholdRange(f"{name} threshold {value} outside [0, 1]")
    if not t.reject < t.accept:
        raise ThresholdOrder(f"reject ({t.reject}) must be strictly below accept ({t.accept})")
    if not t.accept <= t.target:
        raise ThresholdOrder(f"accept ({t.accept}) must not exceed target ({t.target})")


def evaluate_thresholds(t: ThresholdSet, indicator: float) -> Verdict:
    # boundaries: indicator == reject is Rejected, indicator == target is TargetMet
    if indicator <= t.reject:
        level = VerdictLevel.REJECTED
    elif indicator < t.accept:
        level = VerdictLevel.MARGINAL
    elif indicator < t.target:
        level = VerdictLevel.ACCEPTED
    else:
        level = VerdictLevel.TARGET_MET
    vs_ref = None
    if t.reference is not None:
        vs_ref = (
            ReferenceComparison.BELOW
            if indicator < t.reference
            else ReferenceComparison.AT_OR_ABOVE
        )
    return Verdict(level, vs_ref)


_NOMINAL_STATS = frozenset({"mode", "count"})
_ORDINAL_STATS = _NOMINAL_STATS | {"median", "percentile"}
_INTERVAL_STATS = _ORDINAL_STATS | {"arithmetic-mean", "variance"}
_RATIO_STATS = _INTERVAL_STATS | {"geometric-mean", "harmonic-mean", "ratio"}

_ADMISSIBLE = {
    Scale.NOMINAL: _NOMINAL_STATS,
    Scale.ORDINAL: _ORDINAL_STATS,
    Scale.INTERVAL: _INTERVAL_STATS,
    Scale.RATIO: _RATIO_STATS,
}


def admissible_stats(scale: Scale) -> frozenset[str]:
    """Statistics that are meaningful on values of the given measurement scale."""
    return _ADMISSIBLE[scale]
