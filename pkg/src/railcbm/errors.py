"""Shared exception types for the CBM engine."""


class CbmError(Exception):
    """Base class for all engine errors."""


class EncodingError(CbmError):
    """Event cannot be serialized (non-finite numbers, bad types)."""


class SchemaError(CbmError):
    """Line cannot be decoded into a valid event record."""


class StateError(CbmError):
    """Operation not valid for the current asset state."""


class ConfigError(CbmError):
    """Bad scenario, channel, weight, or expression configuration."""


class AlignmentError(CbmError):
    """Series operands do not share t0, dt, and length."""


class InsufficientData(CbmError):
    """Not enough distinct points to fit a trend."""


class AlreadyFailed(CbmError):
    """Health is already at or past the failure level; RUL is zero."""


class NotFound(CbmError):
    """Unknown asset or resource."""


class RoutingError(CbmError):
    """Event delivered to a state machine owned by a different asset."""


class CorruptLog(CbmError):
    """Event log has a sequence gap or diverges from deterministic replay."""
