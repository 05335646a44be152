"""Cooperative-yield interpreter for parsed policy programs.

Each resume supplies a fresh context snapshot; the program runs until its
next ``yield``, reading queries against that snapshot, and hands the yielded
intent back to the executor. A step budget bounds interpreter work per
resume so a misbehaving policy cannot stall the simulation loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

from ..sensing import ContextSnapshot
from .intents import ActionIntent, make_intent
from .parser import (
    Assign,
    Binary,
    Bool,
    Call,
    Direction,
    Expr,
    If,
    LmpProgram,
    Name,
    Num,
    Pass,
    Return,
    Stmt,
    Unary,
    While,
    YieldAction,
)

STEP_BUDGET = 10_000

Value = float | bool | str | tuple


class DslFault(Exception):
    """Runtime fault inside a policy program."""


class _ReturnSignal(Exception):
    pass


@dataclass(frozen=True)
class Yielded:
    intent: ActionIntent


@dataclass(frozen=True)
class Finished:
    pass


@dataclass(frozen=True)
class Faulted:
    reason: str


ResumeResult = Yielded | Finished | Faulted


class _Ctx:
    __slots__ = ("snapshot", "steps", "env")

    def __init__(self) -> None:
        self.snapshot: ContextSnapshot | None = None
        self.steps = 0
        self.env: dict[str, Value] = {}

    def count(self) -> None:
        self.steps += 1
        if self.steps > STEP_BUDGET:
            raise DslFault(f"step budget exceeded ({STEP_BUDGET} steps per resume)")


def _eval_query(name: str, snapshot: ContextSnapshot) -> Value:
    if name == "check_front_vehicle":
        fv = snapshot.front_vehicle
        if fv is None:
            return (False, math.inf, 0.0)
        return (True, fv.distance, fv.speed)
    if name == "check_speed_limit":
        return snapshot.speed_limit
    if name == "current_speed":
        return snapshot.ego_speed
    if name == "current_lane":
        return (float(snapshot.lane_index), float(snapshot.lane_count))
    if name == "at_intersection":
        return snapshot.at_intersection
    raise DslFault(f"unknown query {name!r}")


def _as_number(value: Value, context: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DslFault(f"{context} expects a number, got {value!r}")
    return float(value)


def _eval(e: Expr, ctx: _Ctx) -> Value:
    ctx.count()
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Bool):
        return e.value
    if isinstance(e, Direction):
        return e.value
    if isinstance(e, Name):
        if e.id not in ctx.env:
            raise DslFault(f"name {e.id!r} read before assignment")
        return ctx.env[e.id]
    if isinstance(e, Call):
        assert ctx.snapshot is not None
        return _eval_query(e.name, ctx.snapshot)
    if isinstance(e, Unary):
        val = _eval(e.operand, ctx)
        if e.op == "not":
            return not bool(val)
        return -_as_number(val, "unary minus")
    if isinstance(e, Binary):
        if e.op == "and":
            return bool(_eval(e.left, ctx)) and bool(_eval(e.right, ctx))
        if e.op == "or":
            return bool(_eval(e.left, ctx)) or bool(_eval(e.right, ctx))
        left = _eval(e.left, ctx)
        right = _eval(e.right, ctx)
        if e.op in ("==", "!="):
            equal = left == right
            return equal if e.op == "==" else not equal
        lnum = _as_number(left, f"operator {e.op!r}")
        rnum = _as_number(right, f"operator {e.op!r}")
        if e.op == "+":
            return lnum + rnum
        if e.op == "-":
            return lnum - rnum
        if e.op == "*":
            return lnum * rnum
        if e.op == "/":
            if rnum == 0.0:
                raise DslFault("division by zero")
            return lnum / rnum
        if e.op == "<":
            return lnum < rnum
        if e.op == "<=":
            return lnum <= rnum
        if e.op == ">":
            return lnum > rnum
        if e.op == ">=":
            return lnum >= rnum
    raise DslFault(f"cannot evaluate expression {e!r}")


def _exec_stmt(s: Stmt, ctx: _Ctx) -> Iterator[ActionIntent]:
    ctx.count()
    if isinstance(s, Assign):
        value = _eval(s.value, ctx)
        if len(s.targets) == 1:
            ctx.env[s.targets[0]] = value
        else:
            if not isinstance(value, tuple) or len(value) != len(s.targets):
                raise DslFault(
                    f"cannot unpack {value!r} into {len(s.targets)} names"
                )
            for name, item in zip(s.targets, value):
                ctx.env[name] = item
    elif isinstance(s, YieldAction):
        args = [_eval(a, ctx) for a in s.call.args]
        try:
            intent = make_intent(s.call.name, args)
        except ValueError as exc:
            raise DslFault(str(exc)) from exc
        yield intent
    elif isinstance(s, Return):
        raise _ReturnSignal()
    elif isinstance(s, Pass):
        pass
    elif isinstance(s, If):
        for cond, body in s.branches:
            if bool(_eval(cond, ctx)):
                yield from _exec_block(body, ctx)
                return
        if s.orelse:
            yield from _exec_block(s.orelse, ctx)
    elif isinstance(s, While):
        while bool(_eval(s.cond, ctx)):
            yield from _exec_block(s.body, ctx)
    else:
        raise DslFault(f"cannot execute statement {s!r}")


def _exec_block(stmts: tuple[Stmt, ...], ctx: _Ctx) -> Iterator[ActionIntent]:
    for s in stmts:
        yield from _exec_stmt(s, ctx)


class ExecutionHandle:
    """Owns one program run; resume with a snapshot to get the next intent."""

    def __init__(self, program: LmpProgram):
        self.program = program
        self._ctx = _Ctx()
        self._gen = _exec_block(program.body, self._ctx)
        self._done: ResumeResult | None = None

    def resume(self, snapshot: ContextSnapshot) -> ResumeResult:
        if self._done is not None:
            return self._done
        self._ctx.snapshot = snapshot
        self._ctx.steps = 0
        try:
            intent = next(self._gen)
        except StopIteration:
            self._done = Finished()
            return self._done
        except _ReturnSignal:
            self._done = Finished()
            return self._done
        except DslFault as exc:
            self._done = Faulted(reason=str(exc))
            return self._done
        except ZeroDivisionError as exc:  # defensive; _eval guards already
            self._done = Faulted(reason=str(exc))
            return self._done
        return Yielded(intent=intent)


def start_execution(program: LmpProgram) -> ExecutionHandle:
    return ExecutionHandle(program)
