"""Scoring: TTC/SV/TE, comfort, weighted driving scores, RC/IP/DS, alignment.

Every operation here is a pure function of the trace and configuration, and
every score lands in [0, 100] for valid inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .control import ActionMatrix, ParamBounds, PARAMETER_BOUNDS
from .geometry import Vec2, heading_vec, project_on_polyline
from .scenario import OFF_ROUTE_TOLERANCE, RouteSpec
from .trace import RunTrace


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class ScoreWeights:
    """All scoring knobs in one place.

    ``lampilot`` weighs (TTC, SV, TE); ``talk2drive`` weighs
    (S_tau, S_sigma, S_accel, S_jerk). Both must sum to one.
    """

    lampilot: tuple[float, float, float] = (0.4, 0.3, 0.3)
    talk2drive: tuple[float, float, float, float] = (0.3, 0.7 / 3, 0.7 / 3, 0.7 / 3)
    gamma: float = 20.0       # sensitivity of baseline-relative sub-scores
    sigma_safe: float = 5.0   # m/s, maximum safe speed deviation
    tau_c: float = 1.5        # s, hard TTC threshold

    def __post_init__(self) -> None:
        if abs(sum(self.lampilot) - 1.0) > 1e-9:
            raise EvaluationError(f"lampilot weights must sum to 1, got {self.lampilot}")
        if abs(sum(self.talk2drive) - 1.0) > 1e-9:
            raise EvaluationError(f"talk2drive weights must sum to 1, got {self.talk2drive}")
        if self.gamma <= 0 or self.sigma_safe <= 0 or self.tau_c <= 0:
            raise EvaluationError("gamma, sigma_safe, and tau_c must be positive")


@dataclass(frozen=True)
class ComfortMetrics:
    abar_x: float  # mean |longitudinal accel|, m/s^2
    jbar_x: float  # mean |longitudinal jerk|, m/s^3
    abar_y: float  # mean |lateral accel|, m/s^2
    jbar_y: float  # mean |lateral jerk|, m/s^3
    sv_x: float    # longitudinal speed variance, m^2/s^2
    sv_y: float    # lateral speed variance, m^2/s^2


@dataclass(frozen=True)
class ComfortBaseline:
    """Reference values a run is scored against (all strictly positive)."""

    speed_variance: float
    abar: float
    jbar: float

    def __post_init__(self) -> None:
        if min(self.speed_variance, self.abar, self.jbar) <= 0:
            raise EvaluationError("baseline values must be > 0")


@dataclass
class ScoreCard:
    scenario_id: str = ""
    category: str = ""
    tau_min: float = math.inf
    ttc: float = 100.0
    sv: float = 100.0
    te: float = 0.0
    score: float = 0.0
    mu: float = 0.0
    sigma: float = 0.0
    comfort: ComfortMetrics | None = None
    completed: bool = False
    completion_time: float = 0.0
    collisions: int = 0
    rc: float = 0.0
    ip: float = 1.0
    ds: float = 0.0
    latency: float = 0.0
    command_alignment: float | None = None
    scenario_alignment: float | None = None
    gate_rejections: int = 0
    notes: str = ""

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "category": self.category,
            "safety": {"tau_min": self.tau_min, "ttc": self.ttc, "sv": self.sv,
                       "sigma": self.sigma, "collisions": self.collisions},
            "comfort": None if self.comfort is None else {
                "abar_x": self.comfort.abar_x, "jbar_x": self.comfort.jbar_x,
                "abar_y": self.comfort.abar_y, "jbar_y": self.comfort.jbar_y,
                "sv_x": self.comfort.sv_x, "sv_y": self.comfort.sv_y,
            },
            "time_efficiency": {"te": self.te, "completed": self.completed,
                                "completion_time": self.completion_time,
                                "latency": self.latency},
            "alignment": {"command": self.command_alignment,
                          "scenario": self.scenario_alignment},
            "driving": {"score": self.score, "rc": self.rc, "ip": self.ip, "ds": self.ds},
            "gate_rejections": self.gate_rejections,
            "notes": self.notes,
        }


# --- TTC -------------------------------------------------------------------


def ttc_pairwise(p0: Vec2, v0: Vec2, p_i: Vec2, v_i: Vec2) -> float | None:
    """Signed time to collision; None when relative velocity is zero."""
    dv = v0 - v_i
    denom = dv.dot(dv)
    if denom == 0.0:
        return None
    dp = p0 - p_i
    return -dp.dot(dv) / denom


def ttc_min(trace: RunTrace) -> float:
    """Minimum positive pairwise TTC over ticks 1..T; +inf when none exists."""
    if not trace.frames:
        raise EvaluationError("empty trace")
    best = math.inf
    for frame in trace.frames:
        if frame.tick < 1:
            continue
        ego = next(v for v in frame.vehicles if v.id == trace.ego_id)
        p0, v0 = ego.position, ego.velocity()
        for other in frame.vehicles:
            if other.id == trace.ego_id:
                continue
            tau = ttc_pairwise(p0, v0, other.position, other.velocity())
            if tau is not None and 0 < tau < best:
                best = tau
    return best


def ttc_score(tau_min: float) -> float:
    if tau_min > 2.0:
        return 100.0
    if tau_min > 0.0:
        return max(0.0, 100.0 - 1.0 / tau_min)
    return 0.0


# --- speed statistics --------------------------------------------------------


def speed_stats(trace: RunTrace) -> tuple[float, float]:
    """Population mean and standard deviation of ego speed over ticks 1..T."""
    speeds = [s.speed for s in trace.ego_states()[1:]]
    if not speeds:
        raise EvaluationError("trace has no steps to evaluate")
    t = len(speeds)
    mu = sum(speeds) / t
    var = sum((s - mu) ** 2 for s in speeds) / t
    return mu, math.sqrt(var)


def sv_score(sigma: float, sigma_safe: float) -> float:
    if sigma_safe <= 0:
        raise EvaluationError("sigma_safe must be > 0")
    return max(0.0, 100.0 * (1.0 - sigma / sigma_safe))


def te_score(completion_time: float, time_limit: float) -> float:
    if time_limit <= 0:
        raise EvaluationError("time_limit must be > 0")
    return max(0.0, 100.0 * (1.0 - completion_time / time_limit))


def lampilot_score(card: ScoreCard, weights: ScoreWeights, completed: bool | None = None) -> float:
    """Per-scenario weighted score, gated to zero when the task failed."""
    completed = card.completed if completed is None else completed
    if not completed:
        return 0.0
    w_ttc, w_sv, w_te = weights.lampilot
    return w_ttc * card.ttc + w_sv * card.sv + w_te * card.te


# --- comfort -----------------------------------------------------------------


def comfort_metrics(trace: RunTrace) -> ComfortMetrics:
    """Finite-difference accel/jerk/speed-variance in the ego frame."""
    states = trace.ego_states()
    if len(states) < 4:
        raise EvaluationError("comfort metrics need at least 3 simulation steps")
    dt = trace.dt
    velocities = [
        (b.position - a.position).scaled(1.0 / dt) for a, b in zip(states[:-1], states[1:])
    ]
    frames = states[1:]  # velocity sample i belongs to frame i+1

    def project(vec: Vec2, heading: float) -> tuple[float, float]:
        u = heading_vec(heading)
        return vec.dot(u), vec.dot(u.left_normal())

    comps = [project(v, s.heading) for v, s in zip(velocities, frames)]
    accels = [
        ((b - a).scaled(1.0 / dt), s.heading)
        for a, b, s in zip(velocities[:-1], velocities[1:], frames[1:])
    ]
    accel_comps = [project(vec, heading) for vec, heading in accels]
    jerk_vecs = [
        ((b[0] - a[0]).scaled(1.0 / dt), s.heading)
        for a, b, s in zip(accels[:-1], accels[1:], frames[2:])
    ]
    jerk_comps = [project(vec, heading) for vec, heading in jerk_vecs]

    def mean_abs(values: list[float]) -> float:
        return sum(abs(v) for v in values) / len(values)

    def variance(values: list[float]) -> float:
        mu = sum(values) / len(values)
        return sum((v - mu) ** 2 for v in values) / len(values)

    return ComfortMetrics(
        abar_x=mean_abs([a for a, _ in accel_comps]),
        jbar_x=mean_abs([j for j, _ in jerk_comps]),
        abar_y=mean_abs([a for _, a in accel_comps]),
        jbar_y=mean_abs([j for _, j in jerk_comps]),
        sv_x=variance([c for c, _ in comps]),
        sv_y=variance([c for _, c in comps]),
    )


def talk2drive_score(
    card: ScoreCard,
    baseline: ComfortBaseline,
    weights: ScoreWeights,
) -> float:
    """Weighted sum of the four sub-scores against a human-driving baseline."""
    if card.comfort is None:
        raise EvaluationError("score card carries no comfort metrics")
    s_tau = 100.0 if card.tau_min >= weights.tau_c else 0.0

    def relative(value: float, base: float) -> float:
        return min(100.0, max(0.0, 100.0 - weights.gamma * value / base))

    subs = (
        s_tau,
        relative(card.comfort.sv_x, baseline.speed_variance),
        relative(card.comfort.abar_x, baseline.abar),
        relative(card.comfort.jbar_x, baseline.jbar),
    )
    return sum(w * s for w, s in zip(weights.talk2drive, subs))


# --- infractions / CARLA-style metrics ---------------------------------------

DEFAULT_PENALTIES = {
    "collision": 0.60,
    "red_light_violation": 0.70,
    "off_route": 0.85,
    "speed_limit_violation": 0.90,
}


@dataclass
class InfractionLedger:
    events: list[str] = field(default_factory=list)
    penalties: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_PENALTIES))

    def __post_init__(self) -> None:
        for kind, coeff in self.penalties.items():
            if not 0 < coeff <= 1:
                raise EvaluationError(f"penalty coefficient for {kind} must be in (0, 1]")

    def add(self, kind: str) -> None:
        if kind not in self.penalties:
            raise EvaluationError(f"unknown infraction kind {kind!r}")
        self.events.append(kind)


def infraction_penalty(ledger: InfractionLedger) -> float:
    ip = 1.0
    for event in ledger.events:
        ip *= ledger.penalties[event]
    return ip


def driving_score(rc: float, ip: float) -> float:
    """DS = (RC/100) * IP expressed in points (0..100)."""
    return (rc / 100.0) * ip * 100.0


def detect_infractions(
    trace: RunTrace,
    route: RouteSpec,
    speed_limit: float,
    penalties: dict[str, float] | None = None,
) -> InfractionLedger:
    """Scan a trace for collision, sustained speeding, and off-route episodes."""
    ledger = InfractionLedger(penalties=dict(penalties or DEFAULT_PENALTIES))
    seen_pairs: set[tuple[str, str]] = set()
    for event in trace.collision_events():
        if event.ids not in seen_pairs:
            seen_pairs.add(event.ids)
            ledger.add("collision")
    min_ticks = max(1, int(round(1.0 / trace.dt)))
    speeding = 0
    off_route = 0
    for state in trace.ego_states():
        speeding = speeding + 1 if state.speed > 1.05 * speed_limit else 0
        if speeding == min_ticks:
            ledger.add("speed_limit_violation")
        lateral = abs(project_on_polyline(route.waypoints, state.position).lateral)
        off_route = off_route + 1 if lateral > OFF_ROUTE_TOLERANCE else 0
        if off_route == min_ticks:
            ledger.add("off_route")
    return ledger


# --- alignment ----------------------------------------------------------------


def alignment_score(value: float, bounds: ParamBounds) -> float:
    """Piecewise ramp: 0 outside [min, max], 100 inside [lower, upper)."""
    if value < bounds.minimum or value > bounds.maximum:
        return 0.0
    if value < bounds.lower:
        return 100.0 * (value - bounds.minimum) / (bounds.lower - bounds.minimum)
    if value < bounds.upper:
        return 100.0
    return 100.0 * (bounds.maximum - value) / (bounds.maximum - bounds.upper)


def command_alignment(
    matrix: ActionMatrix,
    ranges: dict[str, ParamBounds] | None = None,
    weights: dict[str, float] | None = None,
) -> float:
    """Weighted average of the per-parameter piecewise alignment scores."""
    ranges = ranges if ranges is not None else PARAMETER_BOUNDS
    names = ActionMatrix.PARAM_NAMES
    if weights is None:
        weights = {name: 1.0 for name in names}
    total_w = sum(weights[name] for name in names)
    if total_w <= 0:
        raise EvaluationError("alignment weights must sum to a positive value")
    return sum(
        weights[name] * alignment_score(getattr(matrix, name), ranges[name]) for name in names
    ) / total_w


def conservativeness_index(
    matrix: ActionMatrix, ranges: dict[str, ParamBounds] | None = None
) -> float:
    """Lower is more conservative: weaker longitudinal gains, heavier steer penalty."""
    ranges = ranges if ranges is not None else PARAMETER_BOUNDS

    def norm(name: str) -> float:
        b = ranges[name]
        return (getattr(matrix, name) - b.minimum) / (b.maximum - b.minimum)

    gain = (norm("kp") + norm("ki") + norm("kd")) / 3.0
    return gain - norm("ws")


def scenario_alignment(
    param_sets: dict[str, ActionMatrix],
    ranges: dict[str, ParamBounds] | None = None,
) -> float | None:
    """Share of adverse-weather parameter sets more conservative than sunny's."""
    if "sunny" not in param_sets:
        raise EvaluationError("scenario alignment needs the sunny reference set")
    reference = conservativeness_index(param_sets["sunny"], ranges)
    adverse = [m for w, m in sorted(param_sets.items()) if w != "sunny"]
    if not adverse:
        return None
    hits = sum(1 for m in adverse if conservativeness_index(m, ranges) < reference)
    return 100.0 * hits / len(adverse)


# --- takeover bookkeeping -------------------------------------------------------


def takeover_rate(trips: Sequence[bool | int]) -> float | None:
    """Fraction of trips with at least one manual intervention; None if no trips."""
    if not trips:
        return None
    return sum(1 for t in trips if t) / len(trips)


def takeover_reduction(base: float, ours: float) -> float | None:
    """Percent reduction of the takeover rate relative to a baseline."""
    if base == 0:
        return None
    return (base - ours) / base * 100.0
