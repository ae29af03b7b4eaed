import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from railcbm.errors import AlreadyFailed, InsufficientData
from railcbm.prognostics import TrendModel, estimate_rul, fit_trend, project_health
from railcbm.simulator import AssetProfile, AssetState, advance_asset, ground_truth_failure_step
from railcbm.events import TedsRecord


def test_exact_line_fit():
    trend = fit_trend([(0, 0.1), (1, 0.2), (2, 0.3)], window=3)
    assert trend.slope == pytest.approx(0.1, abs=1e-12)
    assert trend.intercept == pytest.approx(0.1, abs=1e-12)
    assert trend.residual_sigma == 0.0
    assert trend.t_ref == 2
    assert trend.window_len == 3


def test_constant_history_has_zero_slope():
    trend = fit_trend([(t, 0.4) for t in range(10)], window=10)
    assert trend.slope == pytest.approx(0.0, abs=1e-15)
    assert trend.residual_sigma == 0.0


def test_two_point_window_has_zero_sigma():
    trend = fit_trend([(3, 0.1), (7, 0.5)], window=2)
    assert trend.residual_sigma == 0.0
    assert trend.slope == pytest.approx(0.1, abs=1e-12)


def test_fit_uses_only_trailing_window():
    history = [(t, 99.0) for t in range(50)] + [(t, 0.01 * t) for t in range(50, 80)]
    trend = fit_trend(history, window=30)
    assert trend.slope == pytest.approx(0.01, abs=1e-12)
    assert trend.window_len == 30


def test_insufficient_data():
    with pytest.raises(InsufficientData):
        fit_trend([(0, 0.1)], window=5)
    with pytest.raises(InsufficientData):
        fit_trend([(2, 0.1), (2, 0.2)], window=5)
    with pytest.raises(ValueError):
        fit_trend([(0, 0.1), (1, 0.2)], window=1)


def test_noisy_fit_matches_closed_form_oracle():
    rng = random.Random(51)
    ts = list(range(100, 200))
    hs = [0.002 * t + 0.05 + rng.gauss(0, 0.01) for t in ts]
    trend = fit_trend(list(zip(ts, hs)), window=100)
    slope_o, intercept_o = np.polyfit(ts, hs, 1)
    assert trend.slope == pytest.approx(slope_o, abs=1e-10)
    assert trend.intercept == pytest.approx(intercept_o, abs=1e-10)
    residuals = [h - (intercept_o + slope_o * t) for t, h in zip(ts, hs)]
    assert trend.residual_sigma == pytest.approx(np.std(residuals, ddof=1), rel=1e-9)


# --- rul -------------------------------------------------------------------------


def make_trend(slope, intercept=0.0, sigma=0.0, t_ref=0):
    return TrendModel(slope=slope, intercept=intercept, residual_sigma=sigma,
                      window_len=30, t_ref=t_ref)


def test_rul_linear_extrapolation():
    est = estimate_rul(make_trend(0.1), h_now=0.5, h_fail=1.0)
    assert est.rul_steps == pytest.approx(5.0, abs=1e-12)
    assert est.band is None  # sigma 0: no band


def test_rul_absent_when_no_trend():
    est = estimate_rul(make_trend(0.0), h_now=0.5, h_fail=1.0)
    assert est.rul_steps is None
    assert est.band is None
    est = estimate_rul(make_trend(1e-9), h_now=0.5, h_fail=1.0, slope_epsilon=1e-6)
    assert est.rul_steps is None


def test_rul_already_failed_signal():
    with pytest.raises(AlreadyFailed):
        estimate_rul(make_trend(0.1), h_now=0.95, h_fail=0.9)


def test_band_brackets_the_point_estimate():
    est = estimate_rul(make_trend(0.05, sigma=0.01), h_now=0.6, h_fail=0.9)
    assert est.band is not None
    lower, upper = est.band
    assert lower <= est.rul_steps <= upper
    # oracle arithmetic: (0.3 -/+ 0.02) / 0.05
    assert lower == pytest.approx((0.3 - 0.02) / 0.05)
    assert upper == pytest.approx((0.3 + 0.02) / 0.05)


def test_band_lower_clamped_at_zero():
    est = estimate_rul(make_trend(0.05, sigma=0.2), h_now=0.85, h_fail=0.9)
    assert est.band[0] == 0.0


def test_rul_from_simulator_ground_truth_noiseless():
    teds = TedsRecord("w", "q", "u", -0.5, 1.5, 0.0, 1.0, "wayside")
    for drift in (0.005, 0.0105, 0.02, 0.0333):
        profile = AssetProfile(kind="t", drift=drift, channels=(teds,))
        true_fail = ground_truth_failure_step(profile, master_seed=0)
        state = AssetState.create("a", profile, 0)
        history = []
        for t in range(1, int(0.7 / drift)):
            advance_asset(state)
            history.append((t, state.true_h))
        trend = fit_trend(history, window=30)
        t_now, h_now = history[-1]
        est = estimate_rul(trend, h_now=h_now, h_fail=1.0)
        assert abs((t_now + est.rul_steps) - true_fail) <= 1.0


def test_scale_consistency():
    # multiplying h values and h_fail by c leaves rul unchanged
    base = estimate_rul(make_trend(0.02), h_now=0.4, h_fail=0.8)
    for c in (0.5, 2.0, 7.5):
        scaled = estimate_rul(make_trend(0.02 * c), h_now=0.4 * c, h_fail=0.8 * c)
        assert scaled.rul_steps == pytest.approx(base.rul_steps, rel=1e-12)


@given(st.floats(0.0, 0.89), st.floats(0.001, 0.2))
@settings(max_examples=200, deadline=None)
def test_monotone_response_in_h_now(h_now, slope):
    trend = make_trend(slope)
    a = estimate_rul(trend, h_now=h_now, h_fail=0.9).rul_steps
    b = estimate_rul(trend, h_now=min(h_now + 0.05, 0.9), h_fail=0.9).rul_steps
    assert b <= a


# --- projection ------------------------------------------------------------------


def test_projection_example():
    trend = make_trend(0.1, intercept=0.0, t_ref=2)
    out = project_health(trend, horizon=3)
    assert out == [(3, pytest.approx(0.3)), (4, pytest.approx(0.4)), (5, pytest.approx(0.5))]


def test_projection_clamps_at_one():
    trend = make_trend(0.9, intercept=0.0, t_ref=0)
    out = project_health(trend, horizon=4)
    assert out[-1][1] == 1.0
    assert all(0 <= h <= 1 for _, h in out)


def test_projection_horizon_error():
    with pytest.raises(ValueError):
        project_health(make_trend(0.1), horizon=0)


def test_projection_crossing_agrees_with_rul():
    # internal consistency: the projection crosses h_fail within 1 step of the RUL
    trend = make_trend(0.013, intercept=0.2, t_ref=10)
    h_now = 0.2 + 0.013 * 10
    est = estimate_rul(trend, h_now=h_now, h_fail=0.9)
    projections = project_health(trend, horizon=100)
    crossing = next(t for t, h in projections if h >= 0.9)
    assert abs((crossing - trend.t_ref) - est.rul_steps) <= 1.0
