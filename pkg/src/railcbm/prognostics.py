"""Degradation trend fitting and remaining-useful-life estimation.

The trend is an ordinary least-squares line over a trailing window of the
health history. RUL is the extrapolated crossing of the failure level; the
confidence band projects the crossing of h_now +/- 2 sigma of the fit
residuals (a simple, monotone band, not a rigorous prediction interval).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import AlreadyFailed, InsufficientData
from .events import AssetId

# residual spreads below this are floating-point dust from exact fits;
# treating them as zero keeps band presence deterministic
_SIGMA_FLOOR = 1e-12

DEFAULT_TREND_WINDOW = 30
DEFAULT_SLOPE_EPSILON = 1e-6


@dataclass(frozen=True)
class TrendModel:
    slope: float
    intercept: float
    residual_sigma: float
    window_len: int
    t_ref: int


@dataclass(frozen=True)
class RulEstimate:
    """Point RUL in steps plus optional (lower, upper) band; None means no trend."""

    asset: AssetId
    t: int
    rul_steps: float | None
    band: tuple[float, float] | None
    basis: TrendModel


def fit_trend(history: Sequence[tuple[int, float]], window: int = DEFAULT_TREND_WINDOW) -> TrendModel:
    """Least-squares line over the trailing ``window`` points of (t, h)."""
    if window < 2:
        raise ValueError(f"window must be >= 2, got {window}")
    points = list(history[-window:])
    ts = [float(t) for t, _ in points]
    hs = [float(h) for _, h in points]
    n = len(points)
    if n < 2 or len(set(ts)) < 2:
        raise InsufficientData(f"need >= 2 distinct time points, got {n}")
    sx = math.fsum(ts)
    sy = math.fsum(hs)
    sxx = math.fsum(t * t for t in ts)
    sxy = math.fsum(t * h for t, h in zip(ts, hs))
    denom = n * sxx - sx * sx
    slope = (n * sxy - sx * sy) / denom
    intercept = (sy - slope * sx) / n
    residuals = [h - (intercept + slope * t) for t, h in zip(ts, hs)]
    if n > 2:
        mean_r = math.fsum(residuals) / n
        var = math.fsum((r - mean_r) ** 2 for r in residuals) / (n - 1)
        sigma = math.sqrt(var)
    else:
        sigma = 0.0
    if sigma < _SIGMA_FLOOR:
        sigma = 0.0
    return TrendModel(
        slope=slope,
        intercept=intercept,
        residual_sigma=sigma,
        window_len=n,
        t_ref=int(points[-1][0]),
    )


def estimate_rul(
    trend: TrendModel,
    h_now: float,
    h_fail: float,
    slope_epsilon: float = DEFAULT_SLOPE_EPSILON,
    *,
    asset: AssetId = "",
    t: int | None = None,
) -> RulEstimate:
    """Extrapolate the trend to the failure level.

    Raises :class:`AlreadyFailed` when h_now exceeds h_fail; callers treat
    that as RUL zero.
    """
    if slope_epsilon <= 0:
        raise ValueError(f"slope_epsilon must be > 0, got {slope_epsilon}")
    if h_now > h_fail:
        raise AlreadyFailed(f"h_now {h_now} already exceeds failure level {h_fail}")
    at = trend.t_ref if t is None else t
    if trend.slope <= slope_epsilon:
        return RulEstimate(asset=asset, t=at, rul_steps=None, band=None, basis=trend)
    rul = (h_fail - h_now) / trend.slope
    band: tuple[float, float] | None = None
    if trend.residual_sigma > 0:
        lower = max(0.0, (h_fail - (h_now + 2 * trend.residual_sigma)) / trend.slope)
        upper = (h_fail - (h_now - 2 * trend.residual_sigma)) / trend.slope
        band = (lower, upper)
    return RulEstimate(asset=asset, t=at, rul_steps=rul, band=band, basis=trend)


def project_health(trend: TrendModel, horizon: int) -> list[tuple[int, float]]:
    """Projected (t, h) for the next ``horizon`` steps, clamped to [0, 1]."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    out = []
    for k in range(1, horizon + 1):
        t = trend.t_ref + k
        h = trend.intercept + trend.slope * t
        out.append((t, min(max(h, 0.0), 1.0)))
    return out
