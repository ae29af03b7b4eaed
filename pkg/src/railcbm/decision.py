"""The predictive decision layer: condition-driven maintenance planning.

The state machine maps condition states to monitoring intensity and
maintenance actions:

====================  ==========================================================
condition / event     effect
====================  ==========================================================
-> normal             monitoring x1, pending cleared, no requests
-> degraded           monitoring x2, no maintenance action
-> alarm              monitoring x2, requests RAISE_ALERT + RUN_DIAGNOSIS
-> predicted          monitoring x2, pending cancelled, request EMERGENCY_CORRECTIVE
diagnosis ready       at alarm: arm planning (remember a diagnosis arrived)
rul ready             at alarm, armed, nothing pending, trend present:
                      plan corrective at due = t + max(1, floor(rul_lower) - margin)
operator ack          no state effect (the acknowledgement is logged by the caller)
====================  ==========================================================

Every other (state, event) pair is a no-op. Monitoring rate is always a pure
function of the condition: doubled at degraded or worse.

The same linear-ramp failure probability (0 before the RUL band's lower edge,
1 after the upper edge) prices recommendations and what-if projections.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Union

from .diagnosis import Diagnosis, DiagnosisSource
from .errors import ConfigError, RoutingError
from .events import AssetId
from .monitor import ConditionState, Thresholds, classify_condition
from .prognostics import RulEstimate, TrendModel
from .simulator import ActionKind

MONITORING_NORMAL = 1
MONITORING_DOUBLED = 2

# absorbs last-ulp noise so floor() of a near-integer RUL is stable across
# independently computed trends
_FLOOR_EPS = 1e-9


def monitoring_rate_for(condition: ConditionState) -> int:
    return MONITORING_DOUBLED if condition >= ConditionState.DEGRADED else MONITORING_NORMAL


@dataclass(frozen=True)
class PlannedAction:
    action: ActionKind
    due: int


@dataclass(frozen=True)
class IpdssState:
    asset: AssetId
    condition: ConditionState = ConditionState.NORMAL
    monitoring_rate: int = MONITORING_NORMAL
    pending: PlannedAction | None = None
    diagnosis_seen: bool = False


@dataclass(frozen=True)
class StateChange:
    asset: AssetId
    t: int
    to: ConditionState


@dataclass(frozen=True)
class DiagnosisReady:
    asset: AssetId
    t: int
    diagnosis: Diagnosis


@dataclass(frozen=True)
class RulReady:
    asset: AssetId
    t: int
    estimate: RulEstimate


@dataclass(frozen=True)
class OperatorAck:
    asset: AssetId
    t: int


IpdssEvent = Union[StateChange, DiagnosisReady, RulReady, OperatorAck]


class RequestKind(str, Enum):
    RAISE_ALERT = "raise_alert"
    RUN_DIAGNOSIS = "run_diagnosis"
    PLAN_CORRECTIVE = "plan_corrective"
    EMERGENCY_CORRECTIVE = "emergency_corrective"


@dataclass(frozen=True)
class ActionRequest:
    kind: RequestKind
    due: int | None = None


def step_ipdss(
    state: IpdssState, event: IpdssEvent, safety_margin: int = 2
) -> tuple[IpdssState, list[ActionRequest]]:
    """Advance the per-asset decision state machine; total over all inputs."""
    if event.asset != state.asset:
        raise RoutingError(f"event for {event.asset} routed to machine for {state.asset}")

    if isinstance(event, StateChange):
        to = event.to
        pending = state.pending
        requests: list[ActionRequest] = []
        if to == ConditionState.PREDICTED:
            pending = None  # emergency supersedes any planned action
            requests = [ActionRequest(RequestKind.EMERGENCY_CORRECTIVE, due=event.t)]
        elif to == ConditionState.ALARM:
            requests = [
                ActionRequest(RequestKind.RAISE_ALERT),
                ActionRequest(RequestKind.RUN_DIAGNOSIS),
            ]
        elif to < ConditionState.ALARM:
            pending = None
        new = replace(
            state,
            condition=to,
            monitoring_rate=monitoring_rate_for(to),
            pending=pending,
            diagnosis_seen=False,
        )
        return new, requests

    if isinstance(event, DiagnosisReady):
        if state.condition == ConditionState.ALARM:
            return replace(state, diagnosis_seen=True), []
        return state, []

    if isinstance(event, RulReady):
        est = event.estimate
        can_plan = (
            state.condition == ConditionState.ALARM
            and state.diagnosis_seen
            and state.pending is None
            and est.rul_steps is not None
        )
        if not can_plan:
            return state, []
        lower = est.band[0] if est.band is not None else est.rul_steps
        due = event.t + max(1, math.floor(lower + _FLOOR_EPS) - safety_margin)
        planned = PlannedAction(ActionKind.REPLACE, due)
        return replace(state, pending=planned), [
            ActionRequest(RequestKind.PLAN_CORRECTIVE, due=due)
        ]

    if isinstance(event, OperatorAck):
        return state, []

    raise ConfigError(f"unknown event type {type(event).__name__}")  # pragma: no cover


# --- recommendation pricing -------------------------------------------------


@dataclass(frozen=True)
class PolicyCosts:
    inspect: float = 0.5
    preventive: float = 10.0
    corrective: float = 50.0
    downtime_per_step: float = 1.0
    stock_per_part_step: float = 0.05

    def __post_init__(self) -> None:
        all_zero = self.corrective == self.preventive == self.inspect == 0
        if not all_zero and not self.corrective > self.preventive > self.inspect >= 0:
            raise ConfigError(
                "costs must satisfy corrective > preventive > inspect >= 0, got "
                f"{self.corrective}/{self.preventive}/{self.inspect}"
            )
        if self.downtime_per_step < 0 or self.stock_per_part_step < 0:
            raise ConfigError("downtime and stock costs must be >= 0")

    def action_cost(self, kind: ActionKind) -> float:
        if kind == ActionKind.INSPECT:
            return self.inspect
        return self.preventive


POLICIES = ("corrective_only", "time_based", "condition_based")


@dataclass(frozen=True)
class PolicyConfig:
    policy: str = "condition_based"
    costs: PolicyCosts = field(default_factory=PolicyCosts)
    mtbf_steps: float = 250.0
    interval_steps: int | None = None  # time_based; defaults to mtbf/2
    safety_margin_steps: int = 2
    spare_lead_steps: int = 5
    repair_lead_steps: int = 0

    def __post_init__(self) -> None:
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown policy {self.policy!r}")
        if self.mtbf_steps <= 0:
            raise ConfigError("mtbf_steps must be > 0")
        if self.interval_steps is not None and self.interval_steps < 1:
            raise ConfigError("interval_steps must be >= 1")
        for name in ("safety_margin_steps", "spare_lead_steps", "repair_lead_steps"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")

    @property
    def effective_interval(self) -> int:
        if self.interval_steps is not None:
            return self.interval_steps
        return max(1, int(self.mtbf_steps // 2))


@dataclass(frozen=True)
class PolicyReport:
    policy: str
    seeds: int
    mean_total_cost: float
    unplanned_failures: float
    preventive_count: float
    downtime_steps: float
    mean_spare_stock: float


def failure_probability(band: tuple[float, float] | None, rul: float, steps_ahead: float) -> float:
    """Linear ramp across the RUL band; degenerate band is a step at the point RUL."""
    lower, upper = band if band is not None else (rul, rul)
    if steps_ahead <= lower:
        return 0.0
    if steps_ahead >= upper:
        return 1.0
    return (steps_ahead - lower) / (upper - lower)


@dataclass(frozen=True)
class Alternative:
    action: ActionKind
    due: int  # absolute step
    projected_cost: float
    projected_risk: float


@dataclass(frozen=True)
class Rationale:
    diagnosis_source: str
    fault_label: str | None
    rul_steps: float | None


@dataclass(frozen=True)
class Recommendation:
    asset: AssetId
    t: int
    primary: Alternative
    alternatives: tuple[Alternative, ...]
    rationale: Rationale


def _priced(
    kind: ActionKind, offset: int, est: RulEstimate, costs: PolicyCosts, now: int
) -> Alternative:
    risk = failure_probability(est.band, est.rul_steps or 0.0, float(offset))
    cost = costs.action_cost(kind) + risk * costs.corrective
    return Alternative(action=kind, due=now + offset, projected_cost=cost, projected_risk=risk)


def recommend(
    diag: Diagnosis, rul: RulEstimate | None, cfg: PolicyConfig, *, now: int
) -> Recommendation:
    """Price the standard alternatives; the cheapest becomes the primary.

    Without a usable trend the only defensible recommendation is an
    immediate inspection.
    """
    rationale = Rationale(
        diagnosis_source=diag.source.value,
        fault_label=diag.fault_label,
        rul_steps=None if rul is None else rul.rul_steps,
    )
    if rul is None or rul.rul_steps is None:
        only = Alternative(ActionKind.INSPECT, now, cfg.costs.inspect, 0.0)
        return Recommendation(diag.asset, now, only, (only,), rationale)

    lower = rul.band[0] if rul.band is not None else rul.rul_steps
    replace_offset = max(1, math.floor(lower + _FLOOR_EPS) - cfg.safety_margin_steps)
    inspect_offset = max(1, math.floor(rul.rul_steps / 2 + _FLOOR_EPS))
    alternatives = [
        _priced(ActionKind.REPLACE, replace_offset, rul, cfg.costs, now),
        _priced(ActionKind.RESTORE, 0, rul, cfg.costs, now),
        _priced(ActionKind.INSPECT, inspect_offset, rul, cfg.costs, now),
    ]
    ordered = tuple(sorted(alternatives, key=lambda a: a.projected_cost))
    return Recommendation(diag.asset, now, ordered[0], ordered, rationale)


@dataclass(frozen=True)
class ProjectedOutcome:
    projected_cost: float
    failure_probability: float
    projected_state_at_action: ConditionState


def what_if(
    trend: TrendModel,
    rul: RulEstimate,
    action: ActionKind,
    defer_steps: int,
    costs: PolicyCosts,
    thresholds: Thresholds,
) -> ProjectedOutcome:
    """Pure projection of deferring ``action`` by ``defer_steps``."""
    if defer_steps < 0:
        raise ConfigError(f"defer_steps must be >= 0, got {defer_steps}")
    risk = failure_probability(rul.band, rul.rul_steps or 0.0, float(defer_steps))
    cost = costs.action_cost(action) + risk * costs.corrective
    h_proj = trend.intercept + trend.slope * (trend.t_ref + defer_steps)
    h_proj = min(max(h_proj, 0.0), 1.0)
    return ProjectedOutcome(
        projected_cost=cost,
        failure_probability=risk,
        projected_state_at_action=classify_condition(h_proj, thresholds),
    )
