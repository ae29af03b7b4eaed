"""Health-index computation and the three-stage fault diagnosis cascade.

The cascade tries historical case matching first, then declared rules, then
a residual check against the nominal wear model; the first stage that
produces a diagnosis wins and later stages are not invoked (verifiable via
the per-stage counters on :class:`DiagnosisContext`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

from .errors import ConfigError
from .events import AssetId, CaseId, ChannelId, RuleId, TedsRecord
from .monitor import ConditionState
from .simulator import ActionKind, MaintenanceAction


@dataclass(frozen=True)
class FeatureSnapshot:
    """Latest filtered value per channel for one asset at one step."""

    asset: AssetId
    t: int
    features: dict[ChannelId, float]
    condition: ConditionState

    def __post_init__(self) -> None:
        if not self.features:
            raise ConfigError("feature snapshot must not be empty")
        for channel, value in self.features.items():
            if not math.isfinite(value):
                raise ConfigError(f"feature {channel} is not finite: {value}")


@dataclass(frozen=True)
class HealthAssessment:
    asset: AssetId
    t: int
    h: float
    condition: ConditionState
    history_window: tuple[tuple[int, float], ...] = ()


@dataclass(frozen=True)
class CaseRecord:
    """A remembered problem-cause-solution with its normalized feature vector."""

    id: CaseId
    features: tuple[float, ...]
    problem: str
    cause: str
    solution: str  # ActionKind value


@dataclass(frozen=True)
class RuleClause:
    channel: ChannelId
    op: str  # one of < <= > >= == !=
    value: float

    _OPS = {
        "<": lambda a, b: a < b,
        "<=": lambda a, b: a <= b,
        ">": lambda a, b: a > b,
        ">=": lambda a, b: a >= b,
        "==": lambda a, b: a == b,
        "!=": lambda a, b: a != b,
    }

    def __post_init__(self) -> None:
        if self.op not in self._OPS:
            raise ConfigError(f"unknown comparator {self.op!r}")

    def holds(self, features: dict[ChannelId, float]) -> bool:
        if self.channel not in features:
            return False
        return self._OPS[self.op](features[self.channel], self.value)


@dataclass(frozen=True)
class Rule:
    id: RuleId
    clauses: tuple[RuleClause, ...]
    fault_label: str
    cause: str

    def __post_init__(self) -> None:
        if not self.clauses:
            raise ConfigError(f"rule {self.id} must have at least one clause")

    def fires(self, features: dict[ChannelId, float]) -> bool:
        return all(clause.holds(features) for clause in self.clauses)


class DiagnosisSource(str, Enum):
    CASE_BASED = "case_based"
    RULE_BASED = "rule_based"
    MODEL_BASED = "model_based"
    NONE = "none"


@dataclass(frozen=True)
class Diagnosis:
    asset: AssetId
    t: int
    source: DiagnosisSource
    fault_label: str | None = None
    cause: str | None = None
    matched_case: CaseId | None = None
    matched_rule: RuleId | None = None
    residual: float | None = None


@dataclass(frozen=True)
class LinearWearModel:
    """Expected value of the primary channel under nominal wear at a given age."""

    channel: ChannelId
    nominal: float
    failure_value: float
    drift: float  # nominal health growth per step for the kind

    def predict(self, age_steps: int) -> float:
        return self.nominal + self.drift * age_steps * (self.failure_value - self.nominal)


def compute_health_index(
    snap: FeatureSnapshot,
    teds_set: list[TedsRecord] | tuple[TedsRecord, ...],
    weights: dict[ChannelId, float],
) -> HealthAssessment:
    """Weighted normalized deviation from nominal, clamped to [0, 1]."""
    teds_by_channel = {t.channel: t for t in teds_set}
    total_weight = sum(weights.values())
    if weights and abs(total_weight - 1.0) > 1e-9:
        raise ConfigError(f"weights must sum to 1, got {total_weight}")
    h = 0.0
    for channel, value in snap.features.items():
        if channel not in weights:
            raise ConfigError(f"missing weight for channel {channel}")
        if channel not in teds_by_channel:
            raise ConfigError(f"missing TEDS record for channel {channel}")
        w = weights[channel]
        if w < 0:
            raise ConfigError(f"weight for {channel} must be >= 0")
        teds = teds_by_channel[channel]
        h += w * (value - teds.nominal) / (teds.failure_value - teds.nominal)
    h = min(max(h, 0.0), 1.0)
    return HealthAssessment(asset=snap.asset, t=snap.t, h=h, condition=snap.condition)


def normalize_features(
    features: dict[ChannelId, float],
    teds_by_channel: dict[ChannelId, TedsRecord],
    channel_order: tuple[ChannelId, ...],
) -> tuple[float, ...]:
    """Min-max normalize the configured channels (TEDS range as the scale)."""
    out = []
    for channel in channel_order:
        if channel not in features:
            raise ConfigError(f"snapshot missing case feature channel {channel}")
        teds = teds_by_channel[channel]
        out.append((features[channel] - teds.range_min) / (teds.range_max - teds.range_min))
    return tuple(out)


def diagnose_case_based(
    snap: FeatureSnapshot,
    library: list[CaseRecord],
    tau: float,
    *,
    teds_by_channel: dict[ChannelId, TedsRecord],
    channel_order: tuple[ChannelId, ...],
) -> Diagnosis | None:
    """Nearest stored case by Euclidean distance; a match needs distance <= tau."""
    if tau <= 0:
        raise ConfigError(f"tau must be > 0, got {tau}")
    if not library:
        return None
    query = normalize_features(snap.features, teds_by_channel, channel_order)
    best: CaseRecord | None = None
    best_dist = math.inf
    for case in library:
        if len(case.features) != len(query):
            raise ConfigError(
                f"case {case.id} dimension {len(case.features)} != query {len(query)}"
            )
        dist = math.dist(query, case.features)
        # ties broken by lowest case id, lexicographically
        if dist < best_dist or (dist == best_dist and best is not None and case.id < best.id):
            best, best_dist = case, dist
    if best is None or best_dist > tau:
        return None
    return Diagnosis(
        asset=snap.asset,
        t=snap.t,
        source=DiagnosisSource.CASE_BASED,
        fault_label=best.problem,
        cause=best.cause,
        matched_case=best.id,
    )


def diagnose_rule_based(snap: FeatureSnapshot, rules: tuple[Rule, ...]) -> Diagnosis | None:
    """First declared rule whose clauses all hold fires."""
    for rule in rules:
        if rule.fires(snap.features):
            return Diagnosis(
                asset=snap.asset,
                t=snap.t,
                source=DiagnosisSource.RULE_BASED,
                fault_label=rule.fault_label,
                cause=rule.cause,
                matched_rule=rule.id,
            )
    return None


def diagnose_model_based(
    snap: FeatureSnapshot,
    model: LinearWearModel,
    k_sigma: float,
    sigma: float,
    age_steps: int,
) -> Diagnosis | None:
    """Residual against the nominal wear curve, k-sigma gated."""
    if k_sigma <= 0 or sigma <= 0:
        raise ConfigError("k_sigma and sigma must be > 0")
    if model.channel not in snap.features:
        raise ConfigError(f"model channel {model.channel} missing from snapshot")
    residual = snap.features[model.channel] - model.predict(age_steps)
    if abs(residual) <= k_sigma * sigma:
        return None
    return Diagnosis(
        asset=snap.asset,
        t=snap.t,
        source=DiagnosisSource.MODEL_BASED,
        fault_label="model_deviation",
        cause="observed wear deviates from the nominal wear curve",
        residual=residual,
    )


@dataclass
class DiagnosisContext:
    """Everything one asset kind needs to run the cascade, plus stage counters."""

    library: list[CaseRecord]
    teds_by_channel: dict[ChannelId, TedsRecord]
    channel_order: tuple[ChannelId, ...]
    tau: float = 0.15
    rules: tuple[Rule, ...] = ()
    model: LinearWearModel | None = None
    k_sigma: float = 3.0
    sigma: float = 0.05
    calls: dict[str, int] = field(
        default_factory=lambda: {"case": 0, "rule": 0, "model": 0}
    )


def diagnose(snap: FeatureSnapshot, ctx: DiagnosisContext, age_steps: int) -> Diagnosis:
    """Run the cascade case -> rule -> model; first producer wins."""
    ctx.calls["case"] += 1
    diag = diagnose_case_based(
        snap,
        ctx.library,
        ctx.tau,
        teds_by_channel=ctx.teds_by_channel,
        channel_order=ctx.channel_order,
    )
    if diag is not None:
        return diag
    ctx.calls["rule"] += 1
    diag = diagnose_rule_based(snap, ctx.rules)
    if diag is not None:
        return diag
    if ctx.model is not None:
        ctx.calls["model"] += 1
        diag = diagnose_model_based(snap, ctx.model, ctx.k_sigma, ctx.sigma, age_steps)
        if diag is not None:
            return diag
    return Diagnosis(asset=snap.asset, t=snap.t, source=DiagnosisSource.NONE)


def record_case(
    diag: Diagnosis,
    action_taken: MaintenanceAction,
    snap: FeatureSnapshot,
    library: list[CaseRecord],
    *,
    teds_by_channel: dict[ChannelId, TedsRecord],
    channel_order: tuple[ChannelId, ...],
) -> list[CaseRecord]:
    """Append a problem-cause-solution case learned from a committed action."""
    if diag.source == DiagnosisSource.NONE:
        raise ConfigError("cannot record a case from an empty diagnosis")
    case_id = f"case-{len(library) + 1:04d}"
    if any(c.id == case_id for c in library):
        raise ConfigError(f"duplicate case id {case_id}")
    new = CaseRecord(
        id=case_id,
        features=normalize_features(snap.features, teds_by_channel, channel_order),
        problem=diag.fault_label or "unknown",
        cause=diag.cause or "unknown",
        solution=action_taken.kind.value
        if isinstance(action_taken.kind, ActionKind)
        else str(action_taken.kind),
    )
    return library + [new]
