"""Condition-based maintenance engine for simulated railway assets."""

from .decision import PolicyConfig, PolicyCosts, PolicyReport
from .engine import Engine, read_log, replay
from .events import EventRecord, Measurement, TedsRecord, decode_event, encode_event
from .monitor import ConditionState, Thresholds
from .policy import compare_policies, evaluate_policy
from .scenario import Scenario, load_scenario

__all__ = [
    "ConditionState",
    "Engine",
    "EventRecord",
    "Measurement",
    "PolicyConfig",
    "PolicyCosts",
    "PolicyReport",
    "Scenario",
    "TedsRecord",
    "Thresholds",
    "compare_policies",
    "decode_event",
    "encode_event",
    "evaluate_policy",
    "load_scenario",
    "read_log",
    "replay",
]
