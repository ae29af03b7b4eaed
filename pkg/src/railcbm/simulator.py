"""Ground-truth degradation simulator for railway assets.

Each asset carries a latent health value ``true_h`` that grows by a linear
drift plus occasional Bernoulli shock jumps, and fails when it crosses the
profile's failure threshold. Sensors read noisy channel values linearly
mapped between the TEDS nominal and failure values. The latent health is
deliberately kept out of the pipeline-facing surface; tests and the policy
harness read it through :func:`inspect_true_health`.

Randomness comes from named per-asset streams seeded from
``(master_seed, asset_id, stream)``; degradation draws and observation noise
use separate streams, so how often an asset is sampled never perturbs its
ground-truth trajectory, and assets can be advanced in any order.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, field
from enum import Enum

from .errors import ConfigError, StateError
from .events import AssetId, Measurement, TedsRecord, check_identifier


class ActionKind(str, Enum):
    REPLACE = "replace"
    RESTORE = "restore"
    INSPECT = "inspect"


@dataclass(frozen=True)
class MaintenanceAction:
    """A committed maintenance intervention on one asset."""

    asset: AssetId
    kind: ActionKind
    amount: float = 0.0  # restore depth on the health scale; ignored otherwise

    def __post_init__(self) -> None:
        if self.kind == ActionKind.RESTORE and self.amount < 0:
            raise ConfigError("restore amount must be >= 0")


@dataclass(frozen=True)
class AssetProfile:
    """Degradation and sensing parameters for one asset."""

    kind: str
    drift: float
    noise_sigma: float = 0.0
    shock_rate: float = 0.0
    shock_size: float = 0.0
    failure_threshold: float = 1.0
    channels: tuple[TedsRecord, ...] = ()

    def __post_init__(self) -> None:
        if self.drift <= 0:
            raise ConfigError(f"drift must be > 0, got {self.drift}")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        if not 0 <= self.shock_rate <= 1:
            raise ConfigError("shock_rate must be in [0, 1]")
        if self.shock_rate > 0 and self.shock_size <= 0:
            raise ConfigError("shock_size must be > 0 when shocks are enabled")
        if self.failure_threshold <= 0:
            raise ConfigError("failure_threshold must be > 0")

    def channel(self, channel_id: str) -> TedsRecord:
        for teds in self.channels:
            if teds.channel == channel_id:
                return teds
        raise ConfigError(f"unknown channel {channel_id!r} for kind {self.kind!r}")


def derive_stream_seed(master_seed: int, *names: str) -> int:
    """Stable 64-bit seed for a named stream under one master seed."""
    text = f"{master_seed}|" + "|".join(names)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass
class AssetState:
    """Mutable ground truth for one asset plus its private random streams."""

    id: AssetId
    profile: AssetProfile
    true_h: float = 0.0
    failed: bool = False
    age_steps: int = 0
    degradation_rng: random.Random = field(default_factory=random.Random)
    noise_rng: random.Random = field(default_factory=random.Random)

    @classmethod
    def create(cls, asset_id: AssetId, profile: AssetProfile, master_seed: int) -> "AssetState":
        check_identifier(asset_id, "asset id")
        return cls(
            id=asset_id,
            profile=profile,
            degradation_rng=random.Random(
                derive_stream_seed(master_seed, asset_id, "degradation")
            ),
            noise_rng=random.Random(derive_stream_seed(master_seed, asset_id, "noise")),
        )


def advance_asset(state: AssetState) -> bool:
    """Advance one step of wear; returns whether a shock jump occurred."""
    if state.failed:
        raise StateError(f"asset {state.id} has failed; repair before advancing")
    p = state.profile
    occurred = p.shock_rate > 0 and state.degradation_rng.random() < p.shock_rate
    state.true_h += p.drift
    if occurred:
        state.true_h += p.shock_size
    state.age_steps += 1
    state.failed = state.true_h >= p.failure_threshold
    return occurred


def sample_channel(state: AssetState, teds: TedsRecord, t: int) -> Measurement:
    """Read one noisy sensor value for a channel of this asset at step ``t``."""
    if teds not in state.profile.channels:
        raise ConfigError(
            f"channel {teds.channel!r} does not belong to asset {state.id}"
        )
    span = teds.failure_value - teds.nominal
    value = teds.nominal + state.true_h * span
    if state.profile.noise_sigma > 0:
        value += state.noise_rng.gauss(0.0, state.profile.noise_sigma)
    value = min(max(value, teds.range_min), teds.range_max)
    return Measurement(asset=state.id, channel=teds.channel, t=t, value=value)


def apply_action(state: AssetState, action: MaintenanceAction) -> None:
    """Execute a committed maintenance action against ground truth."""
    if action.asset != state.id:
        raise ConfigError(f"action targets {action.asset}, asset is {state.id}")
    if action.kind == ActionKind.REPLACE:
        state.true_h = 0.0
        state.failed = False
        state.age_steps = 0
    elif action.kind == ActionKind.RESTORE:
        state.true_h = max(0.0, state.true_h - action.amount)
        state.failed = state.true_h >= state.profile.failure_threshold
        # keep the wear curve consistent: age reflects the restored health
        state.age_steps = int(round(state.true_h / state.profile.drift))
    elif action.kind == ActionKind.INSPECT:
        pass
    else:  # pragma: no cover - enum is closed
        raise ConfigError(f"unknown action kind {action.kind!r}")


def inspect_true_health(state: AssetState) -> float:
    """Ground-truth health, for tests and the policy harness only.

    Pipeline stages must never call this; they see only noisy measurements.
    """
    return state.true_h


def ground_truth_failure_step(
    profile: AssetProfile, master_seed: int, asset_id: str = "probe", max_steps: int = 10_000_000
) -> int:
    """First step at which a fresh asset with this profile fails."""
    state = AssetState.create(asset_id, profile, master_seed)
    for t in range(1, max_steps + 1):
        advance_asset(state)
        if state.failed:
            return t
    if not math.isfinite(profile.drift) or profile.drift <= 0:  # pragma: no cover
        raise ConfigError("profile never fails")
    raise ConfigError(f"no failure within {max_steps} steps")
