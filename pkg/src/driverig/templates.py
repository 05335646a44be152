"""Prompt templates: system messages, few-shot exemplars, history framing.

The response dialect is pinned here; agents and the response parser both
read from this module, and reports cite ``template_hash()`` so results can
be traced to the exact prompt text that produced them.
"""

from __future__ import annotations

import hashlib

SYSTEM_MESSAGE = """\
You are an autonomous vehicle with adaptive cruise control and lane keeping \
assist always enabled. You receive a situation description and a passenger \
command, and you answer with a driving policy program.

Reply in exactly this form:
Thought: <short reasoning about what the passenger wants>
```
<policy program>
```

The policy language supports assignments, if/elif/else, while loops,
arithmetic, comparisons, and yielding these actions:
    proceed(speed_ms), stop(), follow_lead(time_headway_s),
    change_lane(left), change_lane(right),
    turn(left), turn(right), turn(straight), pull_over()
Available queries:
    check_front_vehicle() -> (present, distance_m, speed_ms)
    check_speed_limit() -> speed_ms
    current_speed() -> speed_ms
    current_lane() -> (index, count)
    at_intersection() -> flag
Speeds are in meters per second. Do not exceed the posted speed limit.
"""

MATRIX_SYSTEM_MESSAGE = """\
You are the motion-control tuner of an autonomous vehicle. Based on the
situation description, the passenger command, and any history, reply with
updated controller parameters in exactly this form:
Thought: <short reasoning>
K_p=<value> K_i=<value> K_d=<value>
W_l=<value> W_h=<value> W_s=<value>

Row one tunes the longitudinal PID controller; row two sets the lateral
MPC weights for lateral error, heading error, and steering effort. Prefer
conservative values in adverse weather.
"""

# Few-shot triples for the 3-shot learning setting.
EXEMPLARS: list[dict[str, str]] = [
    {
        "query": "Could you drive more conservatively?",
        "thought": (
            "The driver wants me to drive more conservatively but does not "
            "have any specific lane preference, so I should reduce my speed "
            "and keep my current lane."
        ),
        "output": "limit = check_speed_limit()\nyield proceed(limit * 0.7)\n",
    },
    {
        "query": "Turn left at the intersection ahead.",
        "thought": (
            "The driver asks for a left turn at the coming junction, so I "
            "take the left exit when the intersection allows it."
        ),
        "output": "yield turn(left)\n",
    },
    {
        "query": "Pass the car in front and come back.",
        "thought": (
            "The driver wants to overtake the slower lead: move one lane "
            "left, speed up to pass, then return and resume following."
        ),
        "output": (
            "limit = check_speed_limit()\n"
            "yield change_lane(left)\n"
            "yield proceed(limit)\n"
            "yield change_lane(right)\n"
            "yield follow_lead(1.5)\n"
        ),
    },
]

EXEMPLAR_HEADER = "Here are some examples of how you need to react."

HISTORY_PREAMBLE = (
    "Apart from the requirements I provided before, here I will provide you "
    "with the history dialogues between the driver and the vehicle. You will "
    "need to learn what the driver wants and needs."
)
HISTORY_HEADER = "The history command, action, and driver's feedback are:"

CONTEXT_HEADER = "Context:"
COMMAND_HEADER = "Command:"


def render_exemplars(exemplars: list[dict[str, str]]) -> str:
    blocks = [EXEMPLAR_HEADER]
    for ex in exemplars:
        blocks.append(
            f"Query: {ex['query']}\n"
            f"Thought: {ex['thought']}\n"
            "Action:\n"
            "```\n"
            f"{ex['output']}"
            "```"
        )
    return "\n".join(blocks)


def render_history_entry(instruction: str, policy: str, feedback: str | None) -> str:
    lines = [f"Command: {instruction}", "Action:", "```", policy.rstrip("\n"), "```"]
    if feedback:
        lines.append(f"Evaluation: {feedback}")
    return "\n".join(lines)


def template_hash() -> str:
    """Stable digest of every template in this module."""
    payload = "\x1e".join(
        [SYSTEM_MESSAGE, MATRIX_SYSTEM_MESSAGE, EXEMPLAR_HEADER, HISTORY_PREAMBLE,
         HISTORY_HEADER, CONTEXT_HEADER, COMMAND_HEADER]
        + [f"{e['query']}\x1f{e['thought']}\x1f{e['output']}" for e in EXEMPLARS]
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]
