"""Driving-policy DSL: grammar, safety gate, and cooperative-yield interpreter."""

from .intents import ActionIntent, make_intent
from .parser import (
    LmpProgram,
    ParseError,
    QUERY_NAMES,
    ACTION_NAMES,
    parse_program,
    pretty_print,
)
from .gate import GateLimits, GateVerdict, safety_gate, check_source
from .interpreter import ExecutionHandle, Yielded, Finished, Faulted, start_execution

__all__ = [
    "ActionIntent",
    "make_intent",
    "LmpProgram",
    "ParseError",
    "QUERY_NAMES",
    "ACTION_NAMES",
    "parse_program",
    "pretty_print",
    "GateLimits",
    "GateVerdict",
    "safety_gate",
    "check_source",
    "ExecutionHandle",
    "Yielded",
    "Finished",
    "Faulted",
    "start_execution",
]
