"""Two-stage safety gate for generated policy programs.

Stage one is format: the program must parse. Stage two is parameter
verification: every yielded action whose arguments are compile-time
constants is checked against the configured bounds and the current lane
context, so an out-of-range program never reaches the executor.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..sensing import ContextSnapshot
from .parser import (
    Binary,
    Bool,
    Call,
    Direction,
    Expr,
    LmpProgram,
    Num,
    ParseError,
    Unary,
    YieldAction,
    _walk_stmts,
    parse_program,
)

STAGE_FORMAT = "format"
STAGE_PARAMETER = "parameter"


@dataclass(frozen=True)
class GateLimits:
    limit_factor: float = 1.1   # tolerated fraction above the posted limit
    max_headway: float = 10.0   # s


@dataclass(frozen=True)
class GateVerdict:
    accepted: bool
    stage: str
    reason: str = ""

    def __post_init__(self) -> None:
        if not self.accepted and not self.reason:
            raise ValueError("rejected verdict requires a reason")


def _fold_constant(e: Expr) -> float | bool | str | None:
    """Evaluate literal-only expressions; None when not statically known."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Bool):
        return e.value
    if isinstance(e, Direction):
        return e.value
    if isinstance(e, Unary):
        inner = _fold_constant(e.operand)
        if isinstance(inner, (int, float)) and not isinstance(inner, bool):
            return -inner if e.op == "-" else None
        return None
    if isinstance(e, Binary) and e.op in ("+", "-", "*", "/"):
        left = _fold_constant(e.left)
        right = _fold_constant(e.right)
        if (
            isinstance(left, (int, float)) and not isinstance(left, bool)
            and isinstance(right, (int, float)) and not isinstance(right, bool)
        ):
            if e.op == "+":
                return left + right
            if e.op == "-":
                return left - right
            if e.op == "*":
                return left * right
            if e.op == "/":
                return left / right if right != 0 else None
    return None


def _check_action(call: Call, snapshot: ContextSnapshot, limits: GateLimits) -> str | None:
    """Return a rejection reason, or None when the action passes."""
    folded = [_fold_constant(a) for a in call.args]
    if call.name == "proceed":
        speed = folded[0]
        if isinstance(speed, (int, float)) and not isinstance(speed, bool):
            cap = limits.limit_factor * snapshot.speed_limit
            if speed <= 0:
                return f"proceed speed {speed:g} m/s must be positive"
            if speed > cap:
                return (
                    f"proceed speed {speed:g} m/s exceeds {cap:g} m/s "
                    f"({limits.limit_factor:g} x speed limit)"
                )
    elif call.name == "follow_lead":
        headway = folded[0]
        if isinstance(headway, (int, float)) and not isinstance(headway, bool):
            if not 0 < headway <= limits.max_headway:
                return f"follow_lead headway {headway:g} s outside (0, {limits.max_headway:g}]"
    elif call.name == "change_lane":
        direction = folded[0]
        if direction == "left" and snapshot.lane_index == 0:
            return "already in the leftmost lane, cannot change left"
        if direction == "right" and snapshot.lane_index == snapshot.lane_count - 1:
            return "already in the rightmost lane, cannot change right"
    elif call.name == "turn":
        if not snapshot.at_intersection:
            return "no intersection exit ahead, turn is not available"
    return None


def safety_gate(
    program: LmpProgram, snapshot: ContextSnapshot, limits: GateLimits | None = None
) -> GateVerdict:
    """Stage-two parameter verification over a parsed program."""
    limits = limits if limits is not None else GateLimits()
    for stmt in _walk_stmts(program.body):
        if isinstance(stmt, YieldAction):
            reason = _check_action(stmt.call, snapshot, limits)
            if reason is not None:
                return GateVerdict(accepted=False, stage=STAGE_PARAMETER, reason=reason)
    return GateVerdict(accepted=True, stage=STAGE_PARAMETER)


def check_source(
    source: str, snapshot: ContextSnapshot, limits: GateLimits | None = None
) -> tuple[LmpProgram | None, GateVerdict]:
    """Run both stages on raw source; stage one failures map to format verdicts."""
    try:
        program = parse_program(source)
    except ParseError as exc:
        return None, GateVerdict(accepted=False, stage=STAGE_FORMAT, reason=str(exc))
    return program, safety_gate(program, snapshot, limits)
