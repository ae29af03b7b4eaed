"""The ordered event pipeline: ticking, persistence, and replay.

One :class:`Engine` owns a fleet's ground truth plus every per-asset pipeline
memory and appends all resulting events to an in-memory history (and
optionally an NDJSON log file). A tick processes assets in scenario order;
per asset the stage order is fixed and documented below, and all events of a
tick are appended in generation order, ending with one ``policy_tick``:

1. failed assets: repair countdown, corrective replace when it expires
2. advance ground truth (drift + shocks); on failure start the repair clock
3. sample every channel at the asset's monitoring rate (measurement events,
   one limit check per raw sample -> alert events)
4. filter per channel, evaluate virtual channels
5. health index + condition classification; upward transitions expand into
   intermediate state_change events, each fed to the decision state machine
6. at alarm or worse: diagnosis event, trend fit + rul event, and, when the
   machine plans an action, a recommendation event
7. execute due actions: queued operator actions first (submission order),
   then the planned action, then emergency requests from this tick

Determinism: (scenario, master seed, ordered operator-action script) fully
determines the event log byte for byte. Replay re-simulates the log's ticks,
re-injecting operator actions, and verifies the regenerated lines match.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from .decision import (
    ActionRequest,
    DiagnosisReady,
    IpdssState,
    OperatorAck,
    PolicyConfig,
    Recommendation,
    RequestKind,
    RulReady,
    StateChange,
    monitoring_rate_for,
    recommend,
    step_ipdss,
    what_if as project_what_if,
    ProjectedOutcome,
)
from .diagnosis import (
    Diagnosis,
    DiagnosisContext,
    DiagnosisSource,
    FeatureSnapshot,
    compute_health_index,
    diagnose,
    record_case,
)
from .errors import AlreadyFailed, ConfigError, CorruptLog, InsufficientData, NotFound, StateError
from .events import EventRecord, decode_event, encode_event
from .monitor import ConditionState, check_limits, classify_condition, transition
from .prognostics import RulEstimate, TrendModel, estimate_rul, fit_trend
from .scenario import AssetSpec, KindProfile, Scenario
from .signals import evaluate_expression, parse_expression
from .simulator import (
    ActionKind,
    AssetState,
    MaintenanceAction,
    advance_asset,
    apply_action,
    sample_channel,
)

# action event origins
ORIGIN_OPERATOR = "operator"
ORIGIN_PLANNED = "planned"
ORIGIN_EMERGENCY = "emergency"
ORIGIN_CORRECTIVE = "corrective"


@dataclass
class QueuedAction:
    due: int
    order: int
    action: MaintenanceAction
    origin: str


@dataclass
class ExecutedAction:
    t: int
    asset: str
    kind: ActionKind
    origin: str
    amount: float


@dataclass
class AssetRuntime:
    """Per-asset pipeline memory, separate from hidden ground truth."""

    spec: AssetSpec
    kind: KindProfile
    sim: AssetState
    raw: dict[str, list[float]] = field(default_factory=dict)
    ewma_value: dict[str, float] = field(default_factory=dict)
    history: list[tuple[int, float]] = field(default_factory=list)
    condition: ConditionState = ConditionState.NORMAL
    ipdss: IpdssState = None  # type: ignore[assignment]
    trend: TrendModel | None = None
    last_h: float = 0.0
    last_rul: RulEstimate | None = None
    last_diag: Diagnosis | None = None
    last_snap: FeatureSnapshot | None = None
    last_recommendation: Recommendation | None = None
    pipeline_age: int = 0
    repair_countdown: int = -1  # -1: not repairing

    def __post_init__(self) -> None:
        if self.ipdss is None:
            self.ipdss = IpdssState(asset=self.spec.id)
        for channel in self.kind.channel_order:
            self.raw.setdefault(channel, [])


@dataclass
class EngineStats:
    unplanned_failures: int = 0
    downtime_steps: int = 0
    parts_consumed: int = 0


class Engine:
    """Deterministic pipeline over one scenario."""

    def __init__(
        self,
        scenario: Scenario,
        *,
        master_seed: int | None = None,
        horizon: int | None = None,
        log_path: str | Path | None = None,
    ):
        self.scenario = scenario
        self.master_seed = scenario.master_seed if master_seed is None else master_seed
        self.horizon = scenario.horizon_steps if horizon is None else horizon
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        self.clock = 0
        self.seq = 0
        self.stats = EngineStats()
        self.history: list[EventRecord] = []
        self.executed: list[ExecutedAction] = []
        self._queue: list[QueuedAction] = []
        self._queue_counter = 0
        self.case_libraries: dict[str, list] = {}
        self.diag_contexts: dict[str, DiagnosisContext] = {}
        self._virtual_exprs: dict[str, list[tuple[str, Any]]] = {}
        for kind_name, kind in scenario.profiles.items():
            library = list(kind.seed_cases)
            self.case_libraries[kind_name] = library
            self.diag_contexts[kind_name] = DiagnosisContext(
                library=library,
                teds_by_channel=kind.teds_by_channel,
                channel_order=kind.channel_order,
                tau=kind.tau,
                rules=kind.rules,
                model=kind.wear_model(),
                k_sigma=kind.model_k_sigma,
                sigma=kind.model_sigma,
            )
            self._virtual_exprs[kind_name] = [
                (v.name, parse_expression(v.expr)) for v in kind.virtual_channels
            ]
        self.assets: dict[str, AssetRuntime] = {}
        for spec in scenario.assets:
            profile = scenario.profile_for(spec)
            self.assets[spec.id] = AssetRuntime(
                spec=spec,
                kind=scenario.profiles[spec.kind],
                sim=AssetState.create(spec.id, profile, self.master_seed),
            )
        self._log_file: io.TextIOWrapper | None = None
        if log_path is not None:
            self._log_file = open(log_path, "a", encoding="utf-8")

    # -- log plumbing --------------------------------------------------------

    def close(self) -> None:
        if self._log_file is not None:
            self._log_file.close()
            self._log_file = None

    def _emit(self, batch: list[EventRecord], t: int, kind: str, payload: dict[str, Any]) -> EventRecord:
        self.seq += 1
        event = EventRecord(seq=self.seq, t=t, kind=kind, payload=payload)
        batch.append(event)
        return event

    def _persist(self, batch: list[EventRecord]) -> None:
        self.history.extend(batch)
        if self._log_file is not None:
            self._log_file.write("".join(encode_event(e) + "\n" for e in batch))
            self._log_file.flush()

    # -- operator surface ------------------------------------------------------

    def submit_action(self, action: MaintenanceAction, due: int, origin: str = ORIGIN_OPERATOR) -> int:
        """Queue an action; it executes on the first tick with clock >= due."""
        if action.asset not in self.assets:
            raise NotFound(f"unknown asset {action.asset!r}")
        effective = max(due, self.clock + 1)
        self._queue_counter += 1
        self._queue.append(QueuedAction(effective, self._queue_counter, action, origin))
        return effective

    def what_if(self, asset_id: str, action: ActionKind, defer_steps: int) -> ProjectedOutcome:
        """Pure projection for one asset; requires an alarmed asset with a trend."""
        rt = self.assets.get(asset_id)
        if rt is None:
            raise NotFound(f"unknown asset {asset_id!r}")
        if rt.condition < ConditionState.ALARM:
            raise StateError(f"asset {asset_id} is not at alarm; what-if needs a diagnosis cycle")
        if rt.trend is None or rt.last_rul is None:
            raise StateError(f"asset {asset_id} has no fitted trend yet")
        return project_what_if(
            rt.trend,
            rt.last_rul,
            action,
            defer_steps,
            self.scenario.policy.costs,
            rt.kind.thresholds,
        )

    # -- the tick ------------------------------------------------------------

    def tick(self) -> list[EventRecord]:
        if self.clock >= self.horizon:
            raise StateError(f"horizon {self.horizon} reached")
        t = self.clock + 1
        batch: list[EventRecord] = []
        for rt in self.assets.values():
            self._tick_asset(rt, t, batch)
        self._emit(batch, t, "policy_tick", {})
        self.clock = t
        self._persist(batch)
        return batch

    def run(self, steps: int | None = None) -> None:
        remaining = (self.horizon - self.clock) if steps is None else steps
        for _ in range(remaining):
            self.tick()

    def _execute(
        self,
        rt: AssetRuntime,
        t: int,
        kind: ActionKind,
        origin: str,
        amount: float,
        batch: list[EventRecord],
        due: int | None,
    ) -> None:
        action = MaintenanceAction(asset=rt.spec.id, kind=kind, amount=amount)
        apply_action(rt.sim, action)
        if kind == ActionKind.REPLACE:
            rt.pipeline_age = 0
            rt.repair_countdown = -1
            self.stats.parts_consumed += 1
        elif kind == ActionKind.RESTORE:
            rt.pipeline_age = max(0, rt.pipeline_age - int(round(amount / rt.kind.nominal_drift)))
        if kind in (ActionKind.REPLACE, ActionKind.RESTORE):
            # filter memory belongs to the replaced component; a fresh part
            # must not be smoothed against the old part's readings
            rt.ewma_value.clear()
            for series in rt.raw.values():
                series.clear()
            if (
                self.scenario.record_cases
                and rt.last_diag is not None
                and rt.last_diag.source != DiagnosisSource.NONE
                and rt.last_snap is not None
            ):
                library = self.case_libraries[rt.spec.kind]
                new_library = record_case(
                    rt.last_diag,
                    action,
                    rt.last_snap,
                    library,
                    teds_by_channel=rt.kind.teds_by_channel,
                    channel_order=rt.kind.channel_order,
                )
                library.append(new_library[-1])
            rt.ipdss = replace(rt.ipdss, pending=None, diagnosis_seen=False)
            rt.last_diag = None
            rt.last_rul = None
            rt.last_recommendation = None
        self.executed.append(ExecutedAction(t, rt.spec.id, kind, origin, amount))
        self._emit(
            batch,
            t,
            "action",
            {
                "asset": rt.spec.id,
                "action": kind.value,
                "amount": amount,
                "origin": origin,
                "due": due,
            },
        )
        if origin == ORIGIN_OPERATOR:
            rt.ipdss, _ = step_ipdss(rt.ipdss, OperatorAck(asset=rt.spec.id, t=t))

    def _tick_asset(self, rt: AssetRuntime, t: int, batch: list[EventRecord]) -> None:
        cfg = self.scenario.policy
        kind = rt.kind

        # stage 1: a failed asset is out of service until corrective repair
        if rt.sim.failed:
            if rt.repair_countdown > 0:
                rt.repair_countdown -= 1
                self.stats.downtime_steps += 1
                if rt.repair_countdown > 0:
                    return
            self._execute(rt, t, ActionKind.REPLACE, ORIGIN_CORRECTIVE, 0.0, batch, due=None)
            return

        # stage 2: ground truth advances
        advance_asset(rt.sim)
        rt.pipeline_age += 1
        if rt.sim.failed:
            self.stats.unplanned_failures += 1
            if cfg.repair_lead_steps == 0:
                self._execute(rt, t, ActionKind.REPLACE, ORIGIN_CORRECTIVE, 0.0, batch, due=None)
            else:
                rt.repair_countdown = cfg.repair_lead_steps
            return

        # stage 3: sampling at the condition-driven monitoring rate
        rate = rt.ipdss.monitoring_rate
        step_values: dict[str, float] = {}
        for spec_channel in kind.channels:
            teds = spec_channel.teds
            samples = []
            for sample_idx in range(rate):
                m = sample_channel(rt.sim, teds, t)
                samples.append(m.value)
                self._emit(
                    batch,
                    t,
                    "measurement",
                    {
                        "asset": rt.spec.id,
                        "channel": teds.channel,
                        "sample": sample_idx,
                        "value": m.value,
                    },
                )
                alert = check_limits(m, teds)
                if alert is not None:
                    self._emit(
                        batch,
                        t,
                        "alert",
                        {
                            "asset": alert.asset,
                            "channel": alert.channel,
                            "limit": alert.limit,
                            "limit_kind": alert.limit_kind,
                            "observed": alert.observed,
                        },
                    )
            value = sum(samples) / len(samples)
            rt.raw[teds.channel].append(value)
            step_values[teds.channel] = value

        # stage 4: filtering and virtual channels
        features: dict[str, float] = {}
        for spec_channel in kind.channels:
            channel = spec_channel.teds.channel
            f = spec_channel.filter
            x = step_values[channel]
            if f.kind == "ewma":
                prev = rt.ewma_value.get(channel)
                y = x if prev is None else f.alpha * x + (1 - f.alpha) * prev
                rt.ewma_value[channel] = y
            elif f.kind == "moving_average":
                tail = rt.raw[channel][-f.window :]
                y = sum(tail) / len(tail)
            else:
                y = x
            features[channel] = y
        all_features = dict(features)
        for name, ast in self._virtual_exprs[rt.spec.kind]:
            all_features[name] = evaluate_expression(ast, all_features)

        # stage 5: health + condition
        health_snap = FeatureSnapshot(rt.spec.id, t, features, rt.condition)
        assessment = compute_health_index(
            health_snap, [c.teds for c in kind.channels], kind.weights
        )
        h = assessment.h
        rt.last_h = h
        rt.history.append((t, h))
        new_condition = classify_condition(h, kind.thresholds)
        requests: list[ActionRequest] = []
        for tr in transition(rt.condition, new_condition):
            self._emit(
                batch,
                t,
                "state_change",
                {
                    "asset": rt.spec.id,
                    "from": tr.from_state.label,
                    "to": tr.to_state.label,
                },
            )
            rt.ipdss, reqs = step_ipdss(
                rt.ipdss,
                StateChange(asset=rt.spec.id, t=t, to=tr.to_state),
                cfg.safety_margin_steps,
            )
            requests.extend(reqs)
        rt.condition = new_condition

        # stage 6: diagnosis and prognosis while alarmed
        if new_condition >= ConditionState.ALARM:
            snap = FeatureSnapshot(rt.spec.id, t, all_features, new_condition)
            ctx = self.diag_contexts[rt.spec.kind]
            diag = diagnose(snap, ctx, rt.pipeline_age)
            rt.last_diag = diag
            rt.last_snap = snap
            self._emit(
                batch,
                t,
                "diagnosis",
                {
                    "asset": rt.spec.id,
                    "source": diag.source.value,
                    "fault_label": diag.fault_label,
                    "cause": diag.cause,
                    "matched_case": diag.matched_case,
                    "matched_rule": diag.matched_rule,
                    "residual": diag.residual,
                },
            )
            rt.ipdss, reqs = step_ipdss(
                rt.ipdss, DiagnosisReady(asset=rt.spec.id, t=t, diagnosis=diag),
                cfg.safety_margin_steps,
            )
            requests.extend(reqs)
            est: RulEstimate | None = None
            try:
                trend = fit_trend(rt.history, kind.trend_window)
                rt.trend = trend
                try:
                    est = estimate_rul(
                        trend,
                        h,
                        kind.thresholds.predicted_level,
                        kind.slope_epsilon,
                        asset=rt.spec.id,
                        t=t,
                    )
                except AlreadyFailed:
                    est = RulEstimate(asset=rt.spec.id, t=t, rul_steps=0.0, band=None, basis=trend)
            except InsufficientData:
                pass
            if est is not None:
                rt.last_rul = est
                self._emit(
                    batch,
                    t,
                    "rul",
                    {
                        "asset": rt.spec.id,
                        "rul_steps": est.rul_steps,
                        "band_lower": None if est.band is None else est.band[0],
                        "band_upper": None if est.band is None else est.band[1],
                        "slope": est.basis.slope,
                        "intercept": est.basis.intercept,
                        "residual_sigma": est.basis.residual_sigma,
                        "window_len": est.basis.window_len,
                        "t_ref": est.basis.t_ref,
                    },
                )
                rt.ipdss, reqs = step_ipdss(
                    rt.ipdss, RulReady(asset=rt.spec.id, t=t, estimate=est),
                    cfg.safety_margin_steps,
                )
                requests.extend(reqs)
                for req in reqs:
                    if req.kind == RequestKind.PLAN_CORRECTIVE:
                        rec = recommend(diag, est, cfg, now=t)
                        rt.last_recommendation = rec
                        self._emit(
                            batch,
                            t,
                            "recommendation",
                            {
                                "asset": rt.spec.id,
                                "primary_action": rec.primary.action.value,
                                "primary_due": rec.primary.due,
                                "alternatives": [
                                    {
                                        "action": a.action.value,
                                        "due": a.due,
                                        "projected_cost": a.projected_cost,
                                        "projected_risk": a.projected_risk,
                                    }
                                    for a in rec.alternatives
                                ],
                                "rationale": {
                                    "diagnosis_source": rec.rationale.diagnosis_source,
                                    "fault_label": rec.rationale.fault_label,
                                    "rul_steps": rec.rationale.rul_steps,
                                },
                            },
                        )

        # stage 7: execute due actions (operator queue first, then planned, then emergency)
        due_now = [q for q in self._queue if q.due <= t and q.action.asset == rt.spec.id]
        for q in sorted(due_now, key=lambda q: q.order):
            self._queue.remove(q)
            self._execute(rt, t, q.action.kind, q.origin, q.action.amount, batch, due=q.due)
        pending = rt.ipdss.pending
        if pending is not None and pending.due <= t:
            self._execute(rt, t, pending.action, ORIGIN_PLANNED, 0.0, batch, due=pending.due)
        for req in requests:
            if req.kind == RequestKind.EMERGENCY_CORRECTIVE:
                self._execute(rt, t, ActionKind.REPLACE, ORIGIN_EMERGENCY, 0.0, batch, due=t)

    # -- read model for the API -----------------------------------------------

    def asset_summary(self, rt: AssetRuntime) -> dict[str, Any]:
        rul = rt.last_rul
        pending = rt.ipdss.pending
        return {
            "id": rt.spec.id,
            "kind": rt.spec.kind,
            "t": self.clock,
            "condition": rt.condition.label,
            "h": rt.last_h,
            "failed": rt.sim.failed,
            "rul": None
            if rul is None or rul.rul_steps is None
            else {
                "steps": rul.rul_steps,
                "band": None if rul.band is None else [rul.band[0], rul.band[1]],
                "t": rul.t,
            },
            "pending": None
            if pending is None
            else {"action": pending.action.value, "due": pending.due},
        }

    def recommendation_payload(self, rt: AssetRuntime) -> dict[str, Any] | None:
        rec = rt.last_recommendation
        if rec is None:
            return None
        return {
            "asset": rec.asset,
            "t": rec.t,
            "primary_action": rec.primary.action.value,
            "primary_due": rec.primary.due,
            "alternatives": [
                {
                    "action": a.action.value,
                    "due": a.due,
                    "projected_cost": a.projected_cost,
                    "projected_risk": a.projected_risk,
                }
                for a in rec.alternatives
            ],
            "rationale": {
                "diagnosis_source": rec.rationale.diagnosis_source,
                "fault_label": rec.rationale.fault_label,
                "rul_steps": rec.rationale.rul_steps,
            },
        }

    def alarms_since(self, since_seq: int) -> list[EventRecord]:
        return [e for e in self.history if e.kind == "alert" and e.seq > since_seq]

    def events_since(self, since_seq: int) -> list[EventRecord]:
        return [e for e in self.history if e.seq > since_seq]


# --- log reading and replay ---------------------------------------------------


def read_log(path: str | Path) -> list[EventRecord]:
    """Read and validate an NDJSON log: seq must run 1, 2, 3, ... with no gaps."""
    events: list[EventRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                event = decode_event(line)
            except Exception as exc:
                raise CorruptLog(f"line {lineno}: {exc}") from exc
            expected = len(events) + 1
            if event.seq != expected:
                raise CorruptLog(f"line {lineno}: seq {event.seq}, expected {expected}")
            events.append(event)
    return events


def operator_script(events: list[EventRecord]) -> list[tuple[int, MaintenanceAction]]:
    """Extract operator-submitted actions (t, action) from a log."""
    script = []
    for e in events:
        if e.kind == "action" and e.payload.get("origin") == ORIGIN_OPERATOR:
            script.append(
                (
                    e.t,
                    MaintenanceAction(
                        asset=e.payload["asset"],
                        kind=ActionKind(e.payload["action"]),
                        amount=float(e.payload.get("amount") or 0.0),
                    ),
                )
            )
    return script


def replay(
    scenario: Scenario,
    events: list[EventRecord],
    *,
    master_seed: int | None = None,
    horizon: int | None = None,
) -> tuple[Engine, int]:
    """Rebuild engine state from a log by deterministic re-simulation.

    Returns the engine positioned at the last complete tick plus the number
    of log lines belonging to complete ticks. Raises :class:`CorruptLog`
    when the log cannot be a prefix of this scenario's deterministic run.
    Operator actions found in the log are re-injected at their recorded
    steps; a trailing partial tick (crash before its policy_tick) is
    tolerated and regenerates identically on resume.
    """
    complete = 0
    for i, e in enumerate(events):
        if e.kind == "policy_tick":
            complete = i + 1
    ticks = sum(1 for e in events[:complete] if e.kind == "policy_tick")
    engine = Engine(scenario, master_seed=master_seed, horizon=horizon)
    if ticks > engine.horizon:
        raise CorruptLog(f"log has {ticks} ticks but horizon is {engine.horizon}")
    script = operator_script(events)
    regenerated: list[EventRecord] = []
    for step in range(1, ticks + 1):
        for at, action in script:
            if at == step:
                engine.submit_action(action, due=at, origin=ORIGIN_OPERATOR)
        regenerated.extend(engine.tick())
    for given, made in zip(events[:complete], regenerated):
        if encode_event(given) != encode_event(made):
            raise CorruptLog(
                f"log diverges from deterministic replay at seq {given.seq}: "
                f"{encode_event(given)!r} != {encode_event(made)!r}"
            )
    # verify the partial tail is a prefix of the next tick without disturbing state
    tail = events[complete:]
    if tail:
        import copy

        probe = copy.deepcopy(engine)
        if probe.clock >= probe.horizon:
            raise CorruptLog("trailing events beyond the final tick")
        for at, action in script:
            if at == probe.clock + 1:
                probe.submit_action(action, due=at, origin=ORIGIN_OPERATOR)
        next_batch = probe.tick()
        if len(tail) > len(next_batch):
            raise CorruptLog("trailing partial tick longer than a full tick")
        for given, made in zip(tail, next_batch):
            if encode_event(given) != encode_event(made):
                raise CorruptLog(
                    f"partial tick diverges from replay at seq {given.seq}"
                )
    return engine, complete
