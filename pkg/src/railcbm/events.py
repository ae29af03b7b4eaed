"""Shared vocabulary types, the interchange event record, and its codec.

Every pipeline stage communicates through ``EventRecord`` values serialized
as NDJSON: one record per line, UTF-8, LF-terminated. Encoding is canonical
(top-level key order ``seq,t,kind,payload``, payload keys sorted, floats as
shortest round-trip decimals), so equal records always produce byte-equal
lines and whole logs can be compared and replayed exactly.

Payload shapes by kind:

- ``measurement``: asset, channel, sample, value
- ``alert``: asset, channel, limit, limit_kind, observed
- ``state_change``: asset, from, to
- ``diagnosis``: asset, source, fault_label, cause, matched_case,
  matched_rule, residual
- ``rul``: asset, rul_steps, band_lower, band_upper, slope, intercept,
  residual_sigma, window_len, t_ref
- ``recommendation``: asset, primary_action, primary_due, alternatives,
  rationale
- ``action``: asset, action, amount, origin, due
- ``policy_tick``: (empty)
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any

from .errors import ConfigError, EncodingError, SchemaError

AssetId = str
ChannelId = str
CaseId = str
RuleId = str

EVENT_KINDS = (
    "measurement",
    "alert",
    "state_change",
    "diagnosis",
    "rul",
    "recommendation",
    "action",
    "policy_tick",
)

PLACEMENTS = ("wayside", "onboard_self", "onboard_infrastructure")

MAX_ID_LEN = 64


def check_identifier(value: str, what: str = "identifier") -> str:
    """Validate an opaque id: non-empty ASCII, at most 64 chars."""
    if not isinstance(value, str) or not value:
        raise ConfigError(f"{what} must be a non-empty string")
    if len(value) > MAX_ID_LEN:
        raise ConfigError(f"{what} {value!r} exceeds {MAX_ID_LEN} chars")
    if not value.isascii():
        raise ConfigError(f"{what} {value!r} must be ASCII")
    return value


@dataclass(frozen=True)
class Measurement:
    """One timestamped sensor sample on a channel of an asset."""

    asset: AssetId
    channel: ChannelId
    t: int
    value: float

    def __post_init__(self) -> None:
        if self.t < 0:
            raise ConfigError(f"measurement t must be >= 0, got {self.t}")
        if not math.isfinite(self.value):
            raise ConfigError(f"measurement value must be finite, got {self.value}")


@dataclass(frozen=True)
class TedsRecord:
    """Self-describing channel metadata: quantity, units, ranges, placement.

    ``op_low``/``op_high`` are optional operational limits inside the physical
    range; the condition monitor alerts when a sample crosses them.
    """

    channel: ChannelId
    quantity: str
    units: str
    range_min: float
    range_max: float
    nominal: float
    failure_value: float
    placement: str
    op_low: float | None = None
    op_high: float | None = None

    def __post_init__(self) -> None:
        check_identifier(self.channel, "channel")
        if not self.range_min < self.range_max:
            raise ConfigError(
                f"channel {self.channel}: range_min must be < range_max"
            )
        if self.nominal == self.failure_value:
            raise ConfigError(
                f"channel {self.channel}: nominal must differ from failure_value"
            )
        if self.placement not in PLACEMENTS:
            raise ConfigError(
                f"channel {self.channel}: placement {self.placement!r} not one of {PLACEMENTS}"
            )


@dataclass(frozen=True)
class EventRecord:
    """One log entry: strictly increasing seq, step t, kind, and payload."""

    seq: int
    t: int
    kind: str
    payload: dict[str, Any]


def _check_event(event: EventRecord) -> None:
    if not isinstance(event.seq, int) or isinstance(event.seq, bool) or event.seq < 1:
        raise EncodingError(f"seq must be an integer >= 1, got {event.seq!r}")
    if not isinstance(event.t, int) or isinstance(event.t, bool) or event.t < 0:
        raise EncodingError(f"t must be an integer >= 0, got {event.t!r}")
    if event.kind not in EVENT_KINDS:
        raise EncodingError(f"unknown event kind {event.kind!r}")
    if not isinstance(event.payload, dict):
        raise EncodingError("payload must be a mapping")


def encode_event(event: EventRecord) -> str:
    """Serialize an event to one canonical NDJSON line (no trailing newline)."""
    _check_event(event)
    try:
        body = json.dumps(
            event.payload,
            sort_keys=True,
            separators=(",", ":"),
            allow_nan=False,
            ensure_ascii=True,
        )
    except (ValueError, TypeError) as exc:
        raise EncodingError(f"payload not encodable: {exc}") from exc
    return f'{{"seq":{event.seq},"t":{event.t},"kind":"{event.kind}","payload":{body}}}'


def _reject_constant(name: str) -> float:
    raise SchemaError(f"non-finite constant {name!r} in event line")


def decode_event(line: str) -> EventRecord:
    """Parse one NDJSON line into an :class:`EventRecord`.

    Never raises anything but :class:`SchemaError` on malformed input.
    """
    if not isinstance(line, str) or not line.strip():
        raise SchemaError("empty event line")
    try:
        obj = json.loads(line, parse_constant=_reject_constant)
    except SchemaError:
        raise
    except Exception as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise SchemaError("event line is not a JSON object")
    if set(obj.keys()) != {"seq", "t", "kind", "payload"}:
        raise SchemaError(f"unexpected keys {sorted(obj.keys())}")
    seq, t, kind, payload = obj["seq"], obj["t"], obj["kind"], obj["payload"]
    if not isinstance(seq, int) or isinstance(seq, bool) or seq < 1:
        raise SchemaError(f"seq must be an integer >= 1, got {seq!r}")
    if not isinstance(t, int) or isinstance(t, bool) or t < 0:
        raise SchemaError(f"t must be an integer >= 0, got {t!r}")
    if kind not in EVENT_KINDS:
        raise SchemaError(f"unknown event kind {kind!r}")
    if not isinstance(payload, dict):
        raise SchemaError("payload must be a JSON object")
    return EventRecord(seq=seq, t=t, kind=kind, payload=payload)
