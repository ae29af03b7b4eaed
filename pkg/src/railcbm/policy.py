"""Maintenance-policy cost harness: corrective vs time-based vs condition-based.

Each policy runs the same ground-truth degradation per seed (seed i uses
master seed ``scenario.master_seed + i``) under one costing convention:

- ``corrective_only``: no monitoring; a failed asset waits ``repair_lead_steps``
  (accruing downtime cost) and is then replaced at corrective cost. One spare
  per asset is stocked at all times (unpredictable demand).
- ``time_based``: additionally replaces every ``interval_steps`` at preventive
  cost (end-of-step convention: the replacement happens right after the step's
  wear, at every multiple of the interval). Spares are ordered per action and
  held for ``spare_lead_steps``.
- ``condition_based``: drives the full pipeline engine; planned and emergency
  replacements from the decision layer are priced preventive and corrective
  respectively, repairs after actual failures corrective. Spares are ordered
  per replacement and held for ``spare_lead_steps``.

``mean_spare_stock`` is the time-average number of spare parts held.
"""

from __future__ import annotations

from dataclasses import dataclass, replace as dc_replace

from .decision import PolicyConfig, PolicyReport
from .engine import (
    Engine,
    ORIGIN_CORRECTIVE,
    ORIGIN_EMERGENCY,
    ORIGIN_OPERATOR,
    ORIGIN_PLANNED,
)
from .errors import ConfigError
from .scenario import Scenario
from .simulator import ActionKind, AssetState, MaintenanceAction, advance_asset, apply_action


@dataclass
class PolicyOutcome:
    total_cost: float = 0.0
    unplanned_failures: int = 0
    preventive_count: int = 0
    downtime_steps: int = 0
    spare_part_steps: float = 0.0


def _run_blind(scenario: Scenario, cfg: PolicyConfig, master_seed: int) -> PolicyOutcome:
    """Corrective-only and time-based policies: ground truth only, no pipeline."""
    time_based = cfg.policy == "time_based"
    interval = cfg.effective_interval
    costs = cfg.costs
    out = PolicyOutcome()
    states = [
        AssetState.create(a.id, scenario.profile_for(a), master_seed) for a in scenario.assets
    ]
    countdown = {s.id: -1 for s in states}
    for t in range(1, scenario.horizon_steps + 1):
        for state in states:
            if state.failed:
                countdown[state.id] -= 1
                out.downtime_steps += 1
                out.total_cost += costs.downtime_per_step
                if countdown[state.id] <= 0:
                    apply_action(state, MaintenanceAction(state.id, ActionKind.REPLACE))
                    out.total_cost += costs.corrective
                    if time_based:  # corrective_only stock is the always-on spare below
                        out.spare_part_steps += cfg.spare_lead_steps
                continue
            advance_asset(state)
            if state.failed:
                out.unplanned_failures += 1
                if cfg.repair_lead_steps == 0:
                    apply_action(state, MaintenanceAction(state.id, ActionKind.REPLACE))
                    out.total_cost += costs.corrective
                    if time_based:
                        out.spare_part_steps += cfg.spare_lead_steps
                else:
                    countdown[state.id] = cfg.repair_lead_steps
                continue
            if time_based and t % interval == 0:
                apply_action(state, MaintenanceAction(state.id, ActionKind.REPLACE))
                out.total_cost += costs.preventive
                out.preventive_count += 1
                out.spare_part_steps += cfg.spare_lead_steps
        if not time_based:
            out.spare_part_steps += len(states)  # one spare per asset, always stocked
    out.total_cost += costs.stock_per_part_step * out.spare_part_steps
    return out


def _run_condition_based(scenario: Scenario, cfg: PolicyConfig, master_seed: int) -> PolicyOutcome:
    run_scenario = dc_replace(scenario, policy=cfg)
    engine = Engine(run_scenario, master_seed=master_seed)
    engine.run()
    costs = cfg.costs
    out = PolicyOutcome()
    for act in engine.executed:
        if act.kind == ActionKind.INSPECT:
            out.total_cost += costs.inspect
            continue
        if act.origin == ORIGIN_PLANNED:
            out.total_cost += costs.preventive
            out.preventive_count += 1
        elif act.origin in (ORIGIN_EMERGENCY, ORIGIN_CORRECTIVE):
            out.total_cost += costs.corrective
        elif act.origin == ORIGIN_OPERATOR:
            out.total_cost += costs.preventive
        if act.kind == ActionKind.REPLACE:
            out.spare_part_steps += cfg.spare_lead_steps
    out.unplanned_failures = engine.stats.unplanned_failures
    out.downtime_steps = engine.stats.downtime_steps
    out.total_cost += costs.downtime_per_step * out.downtime_steps
    out.total_cost += costs.stock_per_part_step * out.spare_part_steps
    return out


def run_policy_once(scenario: Scenario, cfg: PolicyConfig, seed_index: int) -> PolicyOutcome:
    master_seed = scenario.master_seed + seed_index
    if cfg.policy == "condition_based":
        return _run_condition_based(scenario, cfg, master_seed)
    return _run_blind(scenario, cfg, master_seed)


def evaluate_policy(scenario: Scenario, cfg: PolicyConfig, n_seeds: int = 1) -> PolicyReport:
    """Aggregate one policy's costs over ``n_seeds`` seeded runs."""
    if n_seeds < 1:
        raise ConfigError(f"n_seeds must be >= 1, got {n_seeds}")
    outcomes = [run_policy_once(scenario, cfg, i) for i in range(n_seeds)]
    n = float(n_seeds)
    horizon = float(scenario.horizon_steps)
    return PolicyReport(
        policy=cfg.policy,
        seeds=n_seeds,
        mean_total_cost=sum(o.total_cost for o in outcomes) / n,
        unplanned_failures=sum(o.unplanned_failures for o in outcomes) / n,
        preventive_count=sum(o.preventive_count for o in outcomes) / n,
        downtime_steps=sum(o.downtime_steps for o in outcomes) / n,
        mean_spare_stock=sum(o.spare_part_steps for o in outcomes) / n / horizon,
    )


def compare_policies(scenario: Scenario, n_seeds: int = 1) -> list[PolicyReport]:
    """Evaluate all three policies with the scenario's cost model."""
    reports = []
    for policy in ("corrective_only", "time_based", "condition_based"):
        cfg = dc_replace(scenario.policy, policy=policy)
        reports.append(evaluate_policy(scenario, cfg, n_seeds))
    return reports
