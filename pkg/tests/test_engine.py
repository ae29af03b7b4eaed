import math
from dataclasses import replace as dc_replace

import pytest

from railcbm.decision import PolicyConfig, PolicyCosts
from railcbm.engine import Engine, ORIGIN_OPERATOR, operator_script, read_log, replay
from railcbm.errors import CorruptLog, NotFound, StateError
from railcbm.events import TedsRecord, encode_event
from railcbm.monitor import ConditionState, Thresholds
from railcbm.scenario import (
    AssetSpec,
    ChannelSpec,
    FilterSpec,
    KindProfile,
    Scenario,
    deterministic_scenario,
    railyard_default,
)
from railcbm.simulator import ActionKind, MaintenanceAction

UNIT = TedsRecord("wear", "normalized_wear", "ratio", -0.5, 1.5, 0.0, 1.0, "wayside")


def unit_scenario(drift=0.007, horizon=200, noise=0.0, seed=0, **asset_kw):
    profile = KindProfile(
        kind="unit",
        nominal_drift=drift,
        channels=(ChannelSpec(teds=UNIT, filter=FilterSpec(kind="none"), weight=1.0),),
    )
    return Scenario(
        name="unit-test",
        master_seed=seed,
        horizon_steps=horizon,
        assets=(AssetSpec(id="u-1", kind="unit", drift=drift, noise_sigma=noise, **asset_kw),),
        profiles={"unit": profile},
        policy=PolicyConfig(
            policy="condition_based",
            costs=PolicyCosts(0.0, 1.0, 10.0, 0.0, 0.0),
            mtbf_steps=2.0 / drift,
        ),
        record_cases=False,
    )


def test_degraded_crossing_matches_threshold_arithmetic():
    # oracle: first step with drift*t >= base level
    drift = 0.007
    scenario = unit_scenario(drift=drift, horizon=60)
    engine = Engine(scenario)
    engine.run()
    changes = [e for e in engine.history if e.kind == "state_change"]
    expected_step = math.ceil(0.3 / drift)  # 43
    assert changes[0].t == expected_step
    assert changes[0].payload == {"asset": "u-1", "from": "normal", "to": "degraded"}


def test_zero_assets_tick_emits_exactly_one_policy_tick():
    scenario = Scenario(
        name="empty", master_seed=0, horizon_steps=5, assets=(), profiles={},
    )
    engine = Engine(scenario)
    events = engine.tick()
    assert len(events) == 1
    assert events[0].kind == "policy_tick"
    assert events[0].seq == 1 and events[0].t == 1


def test_two_runs_same_seed_byte_identical(tmp_path):
    scenario = railyard_default()
    logs = []
    for run in range(2):
        path = tmp_path / f"run{run}.ndjson"
        engine = Engine(scenario, horizon=80, log_path=path)
        engine.run()
        engine.close()
        logs.append(path.read_bytes())
    assert logs[0] == logs[1]


def test_different_seeds_diverge():
    scenario = railyard_default()
    a = Engine(scenario, master_seed=1, horizon=60)
    b = Engine(scenario, master_seed=2, horizon=60)
    a.run()
    b.run()
    assert [encode_event(e) for e in a.history] != [encode_event(e) for e in b.history]


def test_monitoring_rate_doubles_at_degraded():
    scenario = unit_scenario(drift=0.007, horizon=50)
    engine = Engine(scenario)
    engine.run(42)  # one step before the degraded crossing at 43
    per_tick_before = [e for e in engine.tick() if e.kind == "measurement"]  # t=43
    assert len(per_tick_before) == 1  # still sampled once on the crossing tick itself
    per_tick_after = [e for e in engine.tick() if e.kind == "measurement"]  # t=44
    assert len(per_tick_after) == 2  # doubled monitoring from the next tick on
    assert [e.payload["sample"] for e in per_tick_after] == [0, 1]


def test_full_cycle_emits_alarm_diagnosis_rul_recommendation_action():
    scenario = deterministic_scenario()
    engine = Engine(scenario)
    engine.run(90)
    kinds = {e.kind for e in engine.history}
    assert {"measurement", "state_change", "diagnosis", "rul", "recommendation",
            "action", "policy_tick"} <= kinds
    actions = [e for e in engine.history if e.kind == "action"]
    assert actions[0].payload["origin"] == "planned"
    assert actions[0].t == 88
    # after the planned replace the asset drops back to normal
    assert engine.assets["demo-01"].condition == ConditionState.NORMAL


def test_operator_action_executes_next_tick_and_resets_health():
    scenario = unit_scenario(drift=0.007, horizon=100)
    engine = Engine(scenario)
    engine.run(50)
    h_before = engine.assets["u-1"].last_h
    assert h_before > 0.3
    effective = engine.submit_action(
        MaintenanceAction("u-1", ActionKind.REPLACE), due=0
    )
    assert effective == 51  # due in the past is executed on the next tick
    events = engine.tick()
    assert any(
        e.kind == "action" and e.payload["origin"] == ORIGIN_OPERATOR for e in events
    )
    engine.tick()
    assert engine.assets["u-1"].last_h < 0.1


def test_submit_action_unknown_asset():
    engine = Engine(unit_scenario())
    with pytest.raises(NotFound):
        engine.submit_action(MaintenanceAction("ghost", ActionKind.REPLACE), due=1)


def test_what_if_requires_alarm():
    engine = Engine(unit_scenario(drift=0.007, horizon=100))
    with pytest.raises(NotFound):
        engine.what_if("ghost", ActionKind.REPLACE, 0)
    engine.run(10)
    with pytest.raises(StateError):
        engine.what_if("u-1", ActionKind.REPLACE, 0)
    engine.run(80)  # alarm at ceil(0.6/0.007)=86
    out = engine.what_if("u-1", ActionKind.REPLACE, 0)
    assert out.projected_cost == pytest.approx(1.0)
    again = engine.what_if("u-1", ActionKind.REPLACE, 0)
    assert out == again  # pure: no state mutated, identical projections


def test_tick_past_horizon_is_state_error():
    engine = Engine(unit_scenario(horizon=3))
    engine.run()
    with pytest.raises(StateError):
        engine.tick()


def test_alarms_since_matches_brute_force_filter():
    scenario = railyard_default()
    engine = Engine(scenario, horizon=120)
    engine.run()
    for since in (0, 10, engine.seq // 2, engine.seq):
        got = engine.alarms_since(since)
        expected = [e for e in engine.history if e.kind == "alert" and e.seq > since]
        assert got == expected


# --- replay ---------------------------------------------------------------------


def test_replay_empty_log_is_initial_state():
    scenario = unit_scenario()
    engine, consumed = replay(scenario, [])
    assert consumed == 0
    assert engine.clock == 0
    assert engine.seq == 0


def test_run_replay_run_equals_uninterrupted(tmp_path):
    scenario = dc_replace(railyard_default(), horizon_steps=200)
    script = [(50, MaintenanceAction("wheel-01", ActionKind.REPLACE))]

    # uninterrupted 200 ticks
    full = Engine(scenario)
    for step in range(1, 201):
        for at, action in script:
            if at == step:
                full.submit_action(action, due=at, origin=ORIGIN_OPERATOR)
        full.tick()
    full_lines = [encode_event(e) for e in full.history]

    # 100 ticks, persist, replay, 100 more
    path = tmp_path / "part.ndjson"
    first = Engine(scenario, log_path=path)
    for step in range(1, 101):
        for at, action in script:
            if at == step:
                first.submit_action(action, due=at, origin=ORIGIN_OPERATOR)
        first.tick()
    first.close()

    events = read_log(path)
    resumed, consumed = replay(scenario, events)
    assert consumed == len(events)
    assert resumed.clock == 100
    for _ in range(100):
        resumed.tick()
    resumed_lines = [encode_event(e) for e in resumed.history]
    assert resumed_lines == full_lines


def test_replay_detects_seq_gap(tmp_path):
    scenario = unit_scenario(horizon=20)
    path = tmp_path / "gap.ndjson"
    engine = Engine(scenario, log_path=path)
    engine.run()
    engine.close()
    lines = path.read_text().splitlines()
    del lines[29]  # drop seq 30
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(CorruptLog):
        read_log(path)


def test_replay_detects_divergence():
    scenario = unit_scenario(horizon=20)
    engine = Engine(scenario)
    engine.run()
    events = list(engine.history)
    tampered = events[:30] + [dc_replace(events[30], payload={**events[30].payload})]
    tampered[30].payload["value"] = 123.456  # not what the deterministic run produced
    with pytest.raises(CorruptLog):
        replay(scenario, tampered + events[31:])


def test_replay_tolerates_partial_trailing_tick(tmp_path):
    scenario = unit_scenario(horizon=30)
    engine = Engine(scenario)
    engine.run(11)
    # cut mid-tick: drop the final policy_tick so tick 11 is incomplete
    events = engine.history[:-1]
    resumed, consumed = replay(scenario, events)
    assert resumed.clock == 10
    assert consumed < len(events)
    # continuing regenerates the dropped tail identically
    regenerated = resumed.tick()
    tail = events[consumed:]
    assert [encode_event(e) for e in regenerated[: len(tail)]] == [
        encode_event(e) for e in tail
    ]


def test_replay_rejects_corrupt_partial_tail():
    scenario = unit_scenario(horizon=30)
    engine = Engine(scenario)
    engine.run(11)
    events = list(engine.history[:-1])
    events[-1] = dc_replace(events[-1], payload={**events[-1].payload, "value": -9.0})
    with pytest.raises(CorruptLog):
        replay(scenario, events)


def test_operator_script_extraction():
    scenario = unit_scenario(horizon=60)
    engine = Engine(scenario)
    engine.run(20)
    engine.submit_action(MaintenanceAction("u-1", ActionKind.RESTORE, amount=0.05), due=21)
    engine.run(10)
    script = operator_script(engine.history)
    assert script == [(21, MaintenanceAction("u-1", ActionKind.RESTORE, amount=0.05))]


def test_crash_consistency_any_line_boundary(tmp_path):
    # every truncated prefix must replay to a valid state
    scenario = unit_scenario(drift=0.02, horizon=40)
    engine = Engine(scenario)
    engine.run()
    events = list(engine.history)
    for cut in range(0, len(events), 7):
        prefix = events[:cut]
        resumed, consumed = replay(scenario, prefix)
        assert consumed <= len(prefix)
        assert resumed.clock == sum(1 for e in prefix[:consumed] if e.kind == "policy_tick")
