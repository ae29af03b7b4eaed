"""Condition classification and operational-limit alerting.

Health indices map onto four ordered condition states through three
thresholds (base, alarm, predicted); boundaries are inclusive toward the
more severe state. Upward transitions that skip levels expand into the
intermediate crossings in order; downward transitions (after maintenance)
emit a single event.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

from .errors import ConfigError
from .events import AssetId, ChannelId, Measurement, TedsRecord


class ConditionState(IntEnum):
    NORMAL = 0
    DEGRADED = 1
    ALARM = 2
    PREDICTED = 3

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "ConditionState":
        try:
            return cls[label.upper()]
        except KeyError:
            raise ConfigError(f"unknown condition state {label!r}") from None


@dataclass(frozen=True)
class Thresholds:
    """Base / alarm / predicted levels on the [0, 1] health scale."""

    base_level: float = 0.3
    alarm_level: float = 0.6
    predicted_level: float = 0.9

    def __post_init__(self) -> None:
        if not 0 < self.base_level < self.alarm_level < self.predicted_level <= 1:
            raise ConfigError(
                "thresholds must satisfy 0 < base < alarm < predicted <= 1, got "
                f"{self.base_level}/{self.alarm_level}/{self.predicted_level}"
            )


def classify_condition(h: float, th: Thresholds) -> ConditionState:
    """Map a health index to its condition state (boundaries go upward)."""
    if not math.isfinite(h) or not 0 <= h <= 1:
        raise ValueError(f"health index must be finite in [0, 1], got {h}")
    if h >= th.predicted_level:
        return ConditionState.PREDICTED
    if h >= th.alarm_level:
        return ConditionState.ALARM
    if h >= th.base_level:
        return ConditionState.DEGRADED
    return ConditionState.NORMAL


@dataclass(frozen=True)
class Alert:
    """One sample crossing an operational or physical-range limit."""

    asset: AssetId
    channel: ChannelId
    t: int
    limit_kind: str  # "upper" | "lower"
    observed: float
    limit: float


def check_limits(m: Measurement, teds: TedsRecord) -> Alert | None:
    """Alert iff the sample violates the tightest configured limit.

    No hysteresis: every violating sample alerts, at most one alert per
    sample (a value cannot violate both directions at once).
    """
    if m.channel != teds.channel:
        raise ConfigError(f"measurement channel {m.channel} does not match TEDS {teds.channel}")
    upper = teds.range_max if teds.op_high is None else min(teds.range_max, teds.op_high)
    lower = teds.range_min if teds.op_low is None else max(teds.range_min, teds.op_low)
    if m.value > upper:
        return Alert(m.asset, m.channel, m.t, "upper", m.value, upper)
    if m.value < lower:
        return Alert(m.asset, m.channel, m.t, "lower", m.value, lower)
    return None


@dataclass(frozen=True)
class ConditionTransition:
    from_state: ConditionState
    to_state: ConditionState


def transition(prev: ConditionState, new: ConditionState) -> list[ConditionTransition]:
    """State-change events between two classifications.

    Upward moves visit each intermediate level in order; downward moves
    (maintenance effects) collapse into a single event.
    """
    if prev == new:
        return []
    if new > prev:
        steps = range(prev, new)
        return [ConditionTransition(ConditionState(i), ConditionState(i + 1)) for i in steps]
    return [ConditionTransition(prev, new)]
