import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from railcbm.errors import ConfigError
from railcbm.events import Measurement, TedsRecord
from railcbm.monitor import (
    Alert,
    ConditionState,
    ConditionTransition,
    Thresholds,
    check_limits,
    classify_condition,
    transition,
)

TH = Thresholds(base_level=0.3, alarm_level=0.6, predicted_level=0.9)


def test_classification_examples():
    assert classify_condition(0.10, TH) == ConditionState.NORMAL
    assert classify_condition(0.60, TH) == ConditionState.ALARM  # inclusive boundary
    assert classify_condition(0.95, TH) == ConditionState.PREDICTED


def test_all_boundaries_go_to_the_more_severe_state():
    assert classify_condition(0.3, TH) == ConditionState.DEGRADED
    assert classify_condition(0.6, TH) == ConditionState.ALARM
    assert classify_condition(0.9, TH) == ConditionState.PREDICTED
    assert classify_condition(0.0, TH) == ConditionState.NORMAL
    assert classify_condition(1.0, TH) == ConditionState.PREDICTED


def test_classification_domain_errors():
    for h in (-0.01, 1.01, float("nan"), float("inf")):
        with pytest.raises(ValueError):
            classify_condition(h, TH)


def test_threshold_ordering_enforced():
    with pytest.raises(ConfigError):
        Thresholds(base_level=0.6, alarm_level=0.3, predicted_level=0.9)
    with pytest.raises(ConfigError):
        Thresholds(base_level=0.0, alarm_level=0.5, predicted_level=0.9)
    with pytest.raises(ConfigError):
        Thresholds(base_level=0.2, alarm_level=0.5, predicted_level=1.1)


@given(st.floats(0, 1), st.floats(0, 1))
@settings(max_examples=200, deadline=None)
def test_classification_is_monotone(h1, h2):
    lo, hi = sorted((h1, h2))
    assert classify_condition(lo, TH) <= classify_condition(hi, TH)


def test_condition_order_and_labels():
    assert ConditionState.NORMAL < ConditionState.DEGRADED < ConditionState.ALARM < ConditionState.PREDICTED
    assert ConditionState.ALARM.label == "alarm"
    assert ConditionState.from_label("predicted") == ConditionState.PREDICTED


# --- limits -------------------------------------------------------------------

TEDS = TedsRecord(
    channel="f",
    quantity="q",
    units="u",
    range_min=0.0,
    range_max=150.0,
    nominal=10.0,
    failure_value=140.0,
    placement="wayside",
    op_high=100.0,
)


def m(value, t=0):
    return Measurement(asset="a", channel="f", t=t, value=value)


def test_upper_limit_alert():
    alert = check_limits(m(120.0), TEDS)
    assert alert == Alert("a", "f", 0, "upper", 120.0, 100.0)


def test_within_limits_no_alert():
    assert check_limits(m(80.0), TEDS) is None


def test_lower_limit_alert_uses_tightest_bound():
    teds = TedsRecord("f", "q", "u", 0.0, 150.0, 100.0, 10.0, "wayside", op_low=20.0)
    alert = check_limits(m(5.0), teds)
    assert alert is not None and alert.limit_kind == "lower" and alert.limit == 20.0


def test_channel_mismatch_is_config_error():
    with pytest.raises(ConfigError):
        check_limits(Measurement("a", "other", 0, 1.0), TEDS)


def test_limit_alerts_match_brute_force_filter():
    rng = random.Random(17)
    samples = [m(rng.uniform(-20, 180), t=i) for i in range(10_000)]
    alerts = [check_limits(s, TEDS) for s in samples]
    got = [(a.t, a.limit_kind) for a in alerts if a is not None]
    expected = []
    for s in samples:
        if s.value > 100.0:
            expected.append((s.t, "upper"))
        elif s.value < 0.0:
            expected.append((s.t, "lower"))
    assert got == expected


# --- transitions ----------------------------------------------------------------


def test_no_change_no_events():
    assert transition(ConditionState.NORMAL, ConditionState.NORMAL) == []


def test_skipping_levels_emits_intermediates_in_order():
    out = transition(ConditionState.NORMAL, ConditionState.ALARM)
    assert out == [
        ConditionTransition(ConditionState.NORMAL, ConditionState.DEGRADED),
        ConditionTransition(ConditionState.DEGRADED, ConditionState.ALARM),
    ]


def test_downward_transition_is_single_event():
    out = transition(ConditionState.PREDICTED, ConditionState.NORMAL)
    assert out == [ConditionTransition(ConditionState.PREDICTED, ConditionState.NORMAL)]


def test_monotone_trajectory_matches_crossing_scan_oracle():
    rng = random.Random(23)
    # random nondecreasing h trajectory from 0 to 1
    hs = sorted(rng.uniform(0, 1) for _ in range(400))
    hs = [0.0] + hs + [1.0]

    events = []
    prev = classify_condition(hs[0], TH)
    for h in hs[1:]:
        new = classify_condition(h, TH)
        events.extend(transition(prev, new))
        prev = new

    # oracle: sorted threshold crossings of the trajectory
    crossings = []
    levels = [TH.base_level, TH.alarm_level, TH.predicted_level]
    reached = 0
    for h in hs:
        while reached < 3 and h >= levels[reached]:
            crossings.append(
                ConditionTransition(ConditionState(reached), ConditionState(reached + 1))
            )
            reached += 1
    assert events == crossings
    assert [e.to_state for e in events] == sorted([e.to_state for e in events])
