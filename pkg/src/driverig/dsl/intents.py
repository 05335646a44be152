"""Action intents: what a policy asks the vehicle to do until completion.

Every intent carries an explicit timeout so no policy can wedge the executor;
the completion predicates themselves are evaluated by the executor, which has
world access.
"""

from __future__ import annotations

from dataclasses import dataclass, field

DIRECTIONS = ("left", "right", "straight")
LANE_DIRECTIONS = ("left", "right")

# kind -> (parameter name, parameter type, default timeout s, completion summary)
INTENT_SPECS: dict[str, tuple[tuple[str, ...], float, str]] = {
    "proceed": (("speed",), 30.0, "reached speed band"),
    "stop": ((), 30.0, "stopped"),
    "follow_lead": (("time_headway",), 30.0, "following settled"),
    "change_lane": (("direction",), 15.0, "lane settled"),
    "turn": (("direction",), 40.0, "turn done"),
    "pull_over": ((), 40.0, "stopped in rightmost lane"),
}


@dataclass(frozen=True)
class ActionIntent:
    kind: str
    params: dict[str, float | str] = field(default_factory=dict)
    timeout: float = 30.0
    completion: str = ""

    def param(self, name: str) -> float | str:
        return self.params[name]


def make_intent(kind: str, args: list[float | str]) -> ActionIntent:
    """Build a validated intent from a DSL action call."""
    if kind not in INTENT_SPECS:
        raise ValueError(f"unknown action {kind!r}")
    param_names, timeout, completion = INTENT_SPECS[kind]
    if len(args) != len(param_names):
        raise ValueError(f"{kind}() takes {len(param_names)} argument(s), got {len(args)}")
    params: dict[str, float | str] = {}
    for name, value in zip(param_names, args):
        if name == "direction":
            if value not in DIRECTIONS:
                raise ValueError(f"{kind}() direction must be one of {DIRECTIONS}, got {value!r}")
            if kind == "change_lane" and value not in LANE_DIRECTIONS:
                raise ValueError("change_lane() direction must be left or right")
            params[name] = value
        else:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValueError(f"{kind}() argument {name} must be a number, got {value!r}")
            params[name] = float(value)
    return ActionIntent(kind=kind, params=params, timeout=timeout, completion=completion)
