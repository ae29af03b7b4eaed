"""Scenario configuration: asset fleets, channel chains, and policy costs.

A scenario fully determines a run together with a master seed: which assets
exist, how their channels are sensed and filtered, the condition thresholds,
the diagnosis rules and seed cases per asset kind, and the maintenance cost
model. Scenarios load from YAML files or by built-in name:

- ``railyard-default``: 12 assets, 4 per kind (wheel wear, pantograph strip,
  track geometry), with noise and shocks.
- ``deterministic-drift``: one noiseless unit-channel asset with drift 0.01
  over 300 steps, used by the policy-comparison oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import yaml

from .decision import PolicyConfig, PolicyCosts
from .diagnosis import CaseRecord, LinearWearModel, Rule, RuleClause
from .errors import ConfigError
from .events import ChannelId, TedsRecord, check_identifier
from .monitor import Thresholds
from .prognostics import DEFAULT_SLOPE_EPSILON, DEFAULT_TREND_WINDOW
from .signals import parse_expression
from .simulator import AssetProfile


@dataclass(frozen=True)
class FilterSpec:
    """Per-channel filter: none, moving_average(window), or ewma(alpha)."""

    kind: str = "none"
    window: int = 5
    alpha: float = 0.3

    def __post_init__(self) -> None:
        if self.kind not in ("none", "moving_average", "ewma"):
            raise ConfigError(f"unknown filter kind {self.kind!r}")
        if self.kind == "moving_average" and self.window < 1:
            raise ConfigError("moving_average window must be >= 1")
        if self.kind == "ewma" and not 0 < self.alpha <= 1:
            raise ConfigError("ewma alpha must be in (0, 1]")


@dataclass(frozen=True)
class ChannelSpec:
    teds: TedsRecord
    filter: FilterSpec = field(default_factory=FilterSpec)
    weight: float = 1.0


@dataclass(frozen=True)
class VirtualChannelSpec:
    name: ChannelId
    expr: str

    def __post_init__(self) -> None:
        check_identifier(self.name, "virtual channel name")
        parse_expression(self.expr)  # fail fast on bad config


@dataclass(frozen=True)
class KindProfile:
    """Everything shared by all assets of one kind."""

    kind: str
    channels: tuple[ChannelSpec, ...]
    nominal_drift: float
    virtual_channels: tuple[VirtualChannelSpec, ...] = ()
    rules: tuple[Rule, ...] = ()
    seed_cases: tuple[CaseRecord, ...] = ()
    model_channel: ChannelId | None = None  # defaults to the first channel
    model_sigma: float = 0.05
    model_k_sigma: float = 3.0
    thresholds: Thresholds = field(default_factory=Thresholds)
    trend_window: int = DEFAULT_TREND_WINDOW
    slope_epsilon: float = DEFAULT_SLOPE_EPSILON
    tau: float = 0.15
    spectrum_window: int | None = None  # accepted for chain configs; no pipeline consumer

    def __post_init__(self) -> None:
        if not self.channels:
            raise ConfigError(f"kind {self.kind!r} must declare at least one channel")
        if self.nominal_drift <= 0:
            raise ConfigError(f"kind {self.kind!r}: nominal_drift must be > 0")
        total = sum(c.weight for c in self.channels)
        if total <= 0:
            raise ConfigError(f"kind {self.kind!r}: channel weights must sum > 0")
        if self.spectrum_window is not None and not 2 <= self.spectrum_window <= 65536:
            raise ConfigError("spectrum_window must be in [2, 65536]")

    @property
    def channel_order(self) -> tuple[ChannelId, ...]:
        return tuple(c.teds.channel for c in self.channels)

    @property
    def teds_by_channel(self) -> dict[ChannelId, TedsRecord]:
        return {c.teds.channel: c.teds for c in self.channels}

    @property
    def weights(self) -> dict[ChannelId, float]:
        total = sum(c.weight for c in self.channels)
        return {c.teds.channel: c.weight / total for c in self.channels}

    def wear_model(self) -> LinearWearModel:
        channel = self.model_channel or self.channels[0].teds.channel
        teds = self.teds_by_channel.get(channel)
        if teds is None:
            raise ConfigError(f"model channel {channel!r} not declared for kind {self.kind}")
        return LinearWearModel(
            channel=channel,
            nominal=teds.nominal,
            failure_value=teds.failure_value,
            drift=self.nominal_drift,
        )


@dataclass(frozen=True)
class AssetSpec:
    id: str
    kind: str
    drift: float
    noise_sigma: float = 0.0
    shock_rate: float = 0.0
    shock_size: float = 0.0
    failure_threshold: float = 1.0

    def __post_init__(self) -> None:
        check_identifier(self.id, "asset id")


@dataclass(frozen=True)
class Scenario:
    name: str
    master_seed: int
    horizon_steps: int
    assets: tuple[AssetSpec, ...]
    profiles: dict[str, KindProfile]
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    record_cases: bool = True

    def __post_init__(self) -> None:
        if self.horizon_steps < 1:
            raise ConfigError("horizon_steps must be >= 1")
        seen: set[str] = set()
        for a in self.assets:
            if a.id in seen:
                raise ConfigError(f"duplicate asset id {a.id!r}")
            seen.add(a.id)
            if a.kind not in self.profiles:
                raise ConfigError(f"asset {a.id}: unknown kind {a.kind!r}")

    def profile_for(self, asset: AssetSpec) -> AssetProfile:
        kind = self.profiles[asset.kind]
        return AssetProfile(
            kind=asset.kind,
            drift=asset.drift,
            noise_sigma=asset.noise_sigma,
            shock_rate=asset.shock_rate,
            shock_size=asset.shock_size,
            failure_threshold=asset.failure_threshold,
            channels=tuple(c.teds for c in kind.channels),
        )


# --- built-in kinds ---------------------------------------------------------


def _wheel_wear_profile() -> KindProfile:
    flange = TedsRecord(
        channel="flange_thickness",
        quantity="wheel_flange_thickness",
        units="mm",
        range_min=18.0,
        range_max=35.0,
        nominal=32.5,
        failure_value=24.0,
        placement="onboard_self",
        op_low=25.0,
    )
    hollow = TedsRecord(
        channel="tread_hollow",
        quantity="wheel_tread_hollow_depth",
        units="mm",
        range_min=-1.0,
        range_max=6.0,
        nominal=0.0,
        failure_value=4.0,
        placement="onboard_self",
        op_high=3.6,
    )
    return KindProfile(
        kind="wheel_wear",
        nominal_drift=0.005,
        channels=(
            ChannelSpec(teds=flange, filter=FilterSpec(kind="ewma", alpha=0.3), weight=0.7),
            ChannelSpec(teds=hollow, filter=FilterSpec(kind="ewma", alpha=0.3), weight=0.3),
        ),
        rules=(
            Rule(
                id="thin-flange",
                clauses=(RuleClause("flange_thickness", "<", 27.0),),
                fault_label="worn_flange",
                cause="flange material loss from curve running",
            ),
            Rule(
                id="hollow-tread",
                clauses=(RuleClause("tread_hollow", ">", 2.6),),
                fault_label="hollow_tread",
                cause="tread concavity from straight-track running",
            ),
        ),
    )


def _pantograph_profile() -> KindProfile:
    strip = TedsRecord(
        channel="strip_thickness",
        quantity="pantograph_contact_strip_thickness",
        units="mm",
        range_min=4.0,
        range_max=32.0,
        nominal=30.0,
        failure_value=10.0,
        placement="onboard_infrastructure",
        op_low=13.0,
    )
    force = TedsRecord(
        channel="contact_force_var",
        quantity="contact_force_variation",
        units="N",
        range_min=0.0,
        range_max=45.0,
        nominal=3.0,
        failure_value=28.0,
        placement="onboard_infrastructure",
        op_high=24.0,
    )
    return KindProfile(
        kind="pantograph_strip",
        nominal_drift=0.006,
        channels=(
            ChannelSpec(teds=strip, filter=FilterSpec(kind="ewma", alpha=0.35), weight=0.6),
            ChannelSpec(teds=force, filter=FilterSpec(kind="moving_average", window=5), weight=0.4),
        ),
        rules=(
            Rule(
                id="strip-wear",
                clauses=(RuleClause("strip_thickness", "<", 16.0),),
                fault_label="worn_contact_strip",
                cause="carbon strip abrasion against the contact line",
            ),
            Rule(
                id="unstable-contact",
                clauses=(
                    RuleClause("contact_force_var", ">", 20.0),
                    RuleClause("strip_thickness", "<", 24.0),
                ),
                fault_label="unstable_contact",
                cause="force oscillation from uneven strip surface",
            ),
        ),
    )


def _track_geometry_profile() -> KindProfile:
    gauge = TedsRecord(
        channel="gauge_dev",
        quantity="track_gauge_deviation",
        units="mm",
        range_min=-6.0,
        range_max=22.0,
        nominal=0.0,
        failure_value=14.0,
        placement="wayside",
        op_high=12.0,
    )
    twist = TedsRecord(
        channel="twist",
        quantity="track_twist",
        units="mm/m",
        range_min=-2.0,
        range_max=14.0,
        nominal=0.0,
        failure_value=9.0,
        placement="wayside",
        op_high=7.8,
    )
    return KindProfile(
        kind="track_geometry",
        nominal_drift=0.004,
        channels=(
            ChannelSpec(teds=gauge, filter=FilterSpec(kind="moving_average", window=7), weight=0.5),
            ChannelSpec(teds=twist, filter=FilterSpec(kind="moving_average", window=7), weight=0.5),
        ),
        virtual_channels=(
            VirtualChannelSpec(name="geometry_index", expr="(gauge_dev / 14 + twist / 9) / 2"),
        ),
        rules=(
            Rule(
                id="geometry-degraded",
                clauses=(RuleClause("geometry_index", ">", 0.72),),
                fault_label="geometry_fault",
                cause="combined gauge and twist drift beyond tolerance",
            ),
        ),
    )


def builtin_profiles() -> dict[str, KindProfile]:
    profiles = [_wheel_wear_profile(), _pantograph_profile(), _track_geometry_profile()]
    return {p.kind: p for p in profiles}


def railyard_default() -> Scenario:
    """The documented default fleet: 12 assets, 4 per built-in kind."""
    assets: list[AssetSpec] = []
    fleet = (
        ("wheel_wear", "wheel", 0.005, 0.04),
        ("pantograph_strip", "panto", 0.006, 0.10),
        ("track_geometry", "track", 0.004, 0.05),
    )
    for kind, prefix, base_drift, noise in fleet:
        for i in range(4):
            assets.append(
                AssetSpec(
                    id=f"{prefix}-{i + 1:02d}",
                    kind=kind,
                    drift=base_drift * (1.0 + 0.12 * i),
                    noise_sigma=noise,
                    shock_rate=0.012,
                    shock_size=0.06,
                )
            )
    return Scenario(
        name="railyard-default",
        master_seed=42,
        horizon_steps=360,
        assets=tuple(assets),
        profiles=builtin_profiles(),
        policy=PolicyConfig(
            policy="condition_based",
            costs=PolicyCosts(
                inspect=0.5,
                preventive=10.0,
                corrective=60.0,
                downtime_per_step=2.0,
                stock_per_part_step=0.05,
            ),
            mtbf_steps=200.0,
            safety_margin_steps=2,
            spare_lead_steps=5,
            repair_lead_steps=3,
        ),
    )


def deterministic_scenario() -> Scenario:
    """One noiseless asset on a unit channel; measured h equals true h exactly."""
    unit = TedsRecord(
        channel="wear_index",
        quantity="normalized_wear",
        units="ratio",
        range_min=-0.5,
        range_max=1.5,
        nominal=0.0,
        failure_value=1.0,
        placement="wayside",
    )
    profile = KindProfile(
        kind="demo_linear",
        nominal_drift=0.01,
        channels=(ChannelSpec(teds=unit, filter=FilterSpec(kind="none"), weight=1.0),),
        model_sigma=0.05,
    )
    return Scenario(
        name="deterministic-drift",
        master_seed=0,
        horizon_steps=300,
        assets=(AssetSpec(id="demo-01", kind="demo_linear", drift=0.01),),
        profiles={"demo_linear": profile},
        policy=PolicyConfig(
            policy="condition_based",
            costs=PolicyCosts(
                inspect=0.0,
                preventive=1.0,
                corrective=10.0,
                downtime_per_step=0.0,
                stock_per_part_step=0.0,
            ),
            mtbf_steps=100.0,
            safety_margin_steps=2,
            spare_lead_steps=5,
            repair_lead_steps=0,
        ),
        record_cases=False,
    )


BUILTIN_SCENARIOS = {
    "railyard-default": railyard_default,
    "deterministic-drift": deterministic_scenario,
}


# --- YAML (de)serialization --------------------------------------------------


def _teds_to_dict(t: TedsRecord) -> dict[str, Any]:
    out: dict[str, Any] = {
        "channel": t.channel,
        "quantity": t.quantity,
        "units": t.units,
        "range_min": t.range_min,
        "range_max": t.range_max,
        "nominal": t.nominal,
        "failure_value": t.failure_value,
        "placement": t.placement,
    }
    if t.op_low is not None:
        out["op_low"] = t.op_low
    if t.op_high is not None:
        out["op_high"] = t.op_high
    return out


def _filter_to_dict(f: FilterSpec) -> dict[str, Any]:
    if f.kind == "moving_average":
        return {"kind": f.kind, "window": f.window}
    if f.kind == "ewma":
        return {"kind": f.kind, "alpha": f.alpha}
    return {"kind": "none"}


def scenario_to_dict(s: Scenario) -> dict[str, Any]:
    return {
        "name": s.name,
        "master_seed": s.master_seed,
        "horizon_steps": s.horizon_steps,
        "record_cases": s.record_cases,
        "policy": {
            "policy": s.policy.policy,
            "costs": {
                "inspect": s.policy.costs.inspect,
                "preventive": s.policy.costs.preventive,
                "corrective": s.policy.costs.corrective,
                "downtime_per_step": s.policy.costs.downtime_per_step,
                "stock_per_part_step": s.policy.costs.stock_per_part_step,
            },
            "mtbf_steps": s.policy.mtbf_steps,
            "interval_steps": s.policy.interval_steps,
            "safety_margin_steps": s.policy.safety_margin_steps,
            "spare_lead_steps": s.policy.spare_lead_steps,
            "repair_lead_steps": s.policy.repair_lead_steps,
        },
        "profiles": {
            kind: {
                "nominal_drift": p.nominal_drift,
                "channels": [
                    {
                        "teds": _teds_to_dict(c.teds),
                        "filter": _filter_to_dict(c.filter),
                        "weight": c.weight,
                    }
                    for c in p.channels
                ],
                "virtual_channels": [
                    {"name": v.name, "expr": v.expr} for v in p.virtual_channels
                ],
                "rules": [
                    {
                        "id": r.id,
                        "fault_label": r.fault_label,
                        "cause": r.cause,
                        "when": [
                            {"channel": c.channel, "op": c.op, "value": c.value}
                            for c in r.clauses
                        ],
                    }
                    for r in p.rules
                ],
                "seed_cases": [
                    {
                        "id": c.id,
                        "features": list(c.features),
                        "problem": c.problem,
                        "cause": c.cause,
                        "solution": c.solution,
                    }
                    for c in p.seed_cases
                ],
                "model_channel": p.model_channel,
                "model_sigma": p.model_sigma,
                "model_k_sigma": p.model_k_sigma,
                "thresholds": {
                    "base": p.thresholds.base_level,
                    "alarm": p.thresholds.alarm_level,
                    "predicted": p.thresholds.predicted_level,
                },
                "trend_window": p.trend_window,
                "slope_epsilon": p.slope_epsilon,
                "tau": p.tau,
                "spectrum_window": p.spectrum_window,
            }
            for kind, p in s.profiles.items()
        },
        "assets": [
            {
                "id": a.id,
                "kind": a.kind,
                "drift": a.drift,
                "noise_sigma": a.noise_sigma,
                "shock_rate": a.shock_rate,
                "shock_size": a.shock_size,
                "failure_threshold": a.failure_threshold,
            }
            for a in s.assets
        ],
    }


def _require(mapping: dict[str, Any], key: str, where: str) -> Any:
    if key not in mapping:
        raise ConfigError(f"missing {key!r} in {where}")
    return mapping[key]


def scenario_from_dict(data: dict[str, Any]) -> Scenario:
    if not isinstance(data, dict):
        raise ConfigError("scenario document must be a mapping")
    try:
        profiles: dict[str, KindProfile] = {}
        for kind, p in _require(data, "profiles", "scenario").items():
            channels = []
            for c in _require(p, "channels", f"profile {kind}"):
                teds_data = dict(_require(c, "teds", f"profile {kind} channel"))
                channels.append(
                    ChannelSpec(
                        teds=TedsRecord(**teds_data),
                        filter=FilterSpec(**c.get("filter", {"kind": "none"})),
                        weight=float(c.get("weight", 1.0)),
                    )
                )
            rules = tuple(
                Rule(
                    id=r["id"],
                    fault_label=r["fault_label"],
                    cause=r.get("cause", ""),
                    clauses=tuple(
                        RuleClause(channel=cl["channel"], op=cl["op"], value=float(cl["value"]))
                        for cl in r["when"]
                    ),
                )
                for r in p.get("rules", [])
            )
            seed_cases = tuple(
                CaseRecord(
                    id=c["id"],
                    features=tuple(float(x) for x in c["features"]),
                    problem=c["problem"],
                    cause=c.get("cause", ""),
                    solution=c.get("solution", "replace"),
                )
                for c in p.get("seed_cases", [])
            )
            th = p.get("thresholds", {})
            profiles[kind] = KindProfile(
                kind=kind,
                nominal_drift=float(_require(p, "nominal_drift", f"profile {kind}")),
                channels=tuple(channels),
                virtual_channels=tuple(
                    VirtualChannelSpec(name=v["name"], expr=v["expr"])
                    for v in p.get("virtual_channels", [])
                ),
                rules=rules,
                seed_cases=seed_cases,
                model_channel=p.get("model_channel"),
                model_sigma=float(p.get("model_sigma", 0.05)),
                model_k_sigma=float(p.get("model_k_sigma", 3.0)),
                thresholds=Thresholds(
                    base_level=float(th.get("base", 0.3)),
                    alarm_level=float(th.get("alarm", 0.6)),
                    predicted_level=float(th.get("predicted", 0.9)),
                ),
                trend_window=int(p.get("trend_window", DEFAULT_TREND_WINDOW)),
                slope_epsilon=float(p.get("slope_epsilon", DEFAULT_SLOPE_EPSILON)),
                tau=float(p.get("tau", 0.15)),
                spectrum_window=p.get("spectrum_window"),
            )
        policy_data = data.get("policy", {})
        costs_data = policy_data.get("costs", {})
        policy = PolicyConfig(
            policy=policy_data.get("policy", "condition_based"),
            costs=PolicyCosts(
                inspect=float(costs_data.get("inspect", 0.5)),
                preventive=float(costs_data.get("preventive", 10.0)),
                corrective=float(costs_data.get("corrective", 50.0)),
                downtime_per_step=float(costs_data.get("downtime_per_step", 1.0)),
                stock_per_part_step=float(costs_data.get("stock_per_part_step", 0.05)),
            ),
            mtbf_steps=float(policy_data.get("mtbf_steps", 250.0)),
            interval_steps=policy_data.get("interval_steps"),
            safety_margin_steps=int(policy_data.get("safety_margin_steps", 2)),
            spare_lead_steps=int(policy_data.get("spare_lead_steps", 5)),
            repair_lead_steps=int(policy_data.get("repair_lead_steps", 0)),
        )
        assets = tuple(
            AssetSpec(
                id=a["id"],
                kind=a["kind"],
                drift=float(a["drift"]),
                noise_sigma=float(a.get("noise_sigma", 0.0)),
                shock_rate=float(a.get("shock_rate", 0.0)),
                shock_size=float(a.get("shock_size", 0.0)),
                failure_threshold=float(a.get("failure_threshold", 1.0)),
            )
            for a in _require(data, "assets", "scenario")
        )
        return Scenario(
            name=str(data.get("name", "unnamed")),
            master_seed=int(_require(data, "master_seed", "scenario")),
            horizon_steps=int(_require(data, "horizon_steps", "scenario")),
            assets=assets,
            profiles=profiles,
            policy=policy,
            record_cases=bool(data.get("record_cases", True)),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad scenario document: {exc}") from exc


def load_scenario(path_or_name: str) -> Scenario:
    """Load a scenario from a YAML file path or a built-in name."""
    if path_or_name in BUILTIN_SCENARIOS:
        return BUILTIN_SCENARIOS[path_or_name]()
    path = Path(path_or_name)
    if not path.exists():
        raise ConfigError(
            f"scenario {path_or_name!r} is neither a file nor one of {sorted(BUILTIN_SCENARIOS)}"
        )
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse scenario file {path}: {exc}") from exc
    return scenario_from_dict(data)


def save_scenario(s: Scenario, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(scenario_to_dict(s), sort_keys=False), encoding="utf-8")
