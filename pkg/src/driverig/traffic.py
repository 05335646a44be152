"""Background-driver behavior (IDM + MOBIL) and instruction-blind baselines.

Background vehicles are pure functions of the world plus their own seeded
parameters, so a suite run is replayable tick for tick.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .control import steer_along_path
from .world import Control, VehicleState, WorldState

Direction = str  # "keep" | "left" | "right"


@dataclass(frozen=True)
class IdmParams:
    desired_speed: float        # v0, m/s
    time_headway: float = 1.5   # s
    min_gap: float = 2.0        # m
    max_accel: float = 1.5      # m/s^2
    comfort_decel: float = 2.0  # m/s^2
    exponent: float = 4.0

    def __post_init__(self) -> None:
        for name in ("desired_speed", "time_headway", "min_gap", "max_accel", "comfort_decel"):
            if getattr(self, name) <= 0:
                raise ValueError(f"IdmParams.{name} must be positive")
        if self.exponent < 1:
            raise ValueError("IdmParams.exponent must be >= 1")


@dataclass(frozen=True)
class MobilParams:
    politeness: float = 0.3          # p in [0, 1]
    accel_gain_threshold: float = 0.1  # m/s^2
    # Must stay below the IDM emergency floor (2 * comfort_decel) or the
    # safety criterion can never trip.
    safe_decel: float = 2.0          # b_safe, m/s^2

    def __post_init__(self) -> None:
        if not 0 <= self.politeness <= 1:
            raise ValueError("politeness must be in [0, 1]")
        if self.safe_decel <= 0:
            raise ValueError("safe_decel must be > 0")


def idm_acceleration(v: float, gap: float, v_lead: float, params: IdmParams) -> float:
    """Car-following acceleration; ``gap = inf`` means a free road.

    The dynamic part of the desired gap is floored at zero (an opening gap
    never shrinks the demand below the standstill distance); without the
    floor the acceleration is not monotone in the ego speed. A non-positive
    gap returns the emergency floor (twice the comfortable deceleration)
    rather than raising.
    """
    emergency = -2.0 * params.comfort_decel
    if gap <= 0:
        return emergency
    free_term = (v / params.desired_speed) ** params.exponent
    if math.isinf(gap):
        accel = params.max_accel * (1.0 - free_term)
    else:
        dynamic = v * params.time_headway + (
            v * (v - v_lead) / (2.0 * math.sqrt(params.max_accel * params.comfort_decel))
        )
        s_star = params.min_gap + max(0.0, dynamic)
        accel = params.max_accel * (1.0 - free_term - (s_star / gap) ** 2)
    return max(emergency, accel)


@dataclass(frozen=True)
class LaneView:
    """What the ego would face in a candidate lane."""

    lead_gap: float = math.inf
    lead_speed: float = 0.0
    follower_gap: float = math.inf
    follower_speed: float = 0.0
    follower_current_accel: float = 0.0
    occupied: bool = False  # a vehicle sits alongside the ego's slot


def mobil_decide(
    v: float,
    current_lead_gap: float,
    current_lead_speed: float,
    left: LaneView | None,
    right: LaneView | None,
    idm: IdmParams,
    mobil: MobilParams,
) -> Direction:
    """MOBIL incentive/safety decision; ties resolve keep > left > right."""
    a_now = idm_acceleration(v, current_lead_gap, current_lead_speed, idm)

    def incentive(view: LaneView) -> float | None:
        if view.occupied or view.lead_gap <= 0 or view.follower_gap <= 0:
            return None  # occupied/overlapping slot
        a_new = idm_acceleration(v, view.lead_gap, view.lead_speed, idm)
        if math.isinf(view.follower_gap):
            follower_gain = 0.0
        else:
            a_follower_new = idm_acceleration(view.follower_speed, view.follower_gap, v, idm)
            if a_follower_new < -mobil.safe_decel:
                return None  # safety criterion
            follower_gain = a_follower_new - view.follower_current_accel
        return (a_new - a_now) + mobil.politeness * follower_gain

    best: Direction = "keep"
    best_gain = mobil.accel_gain_threshold
    for direction, view in (("left", left), ("right", right)):
        if view is None:
            continue
        gain = incentive(view)
        if gain is not None and gain > best_gain:
            best, best_gain = direction, gain
    return best


def find_lead(world: WorldState, vehicle: VehicleState, lane: int) -> tuple[float, float]:
    """Bumper gap and speed of the nearest vehicle ahead in a lane.

    Looks through the straight exit of the current segment so followers do
    not lose their lead inside a junction box. Returns (inf, 0) when clear.
    """
    seg = world.road.segment(vehicle.segment_id)
    ego_s = seg.along(vehicle.position)
    straight = world.road.connections.get((vehicle.segment_id, "straight"))
    best_gap, best_speed = math.inf, 0.0
    for other in world.vehicles:
        if other.id == vehicle.id:
            continue
        if other.segment_id == vehicle.segment_id and other.lane_index == lane:
            gap = seg.along(other.position) - ego_s - (other.length + vehicle.length) / 2.0
        elif straight is not None and other.segment_id == straight and other.lane_index == lane:
            exit_seg = world.road.segment(straight)
            ahead = (seg.length - ego_s) + (exit_seg.start - seg.end).norm() + exit_seg.along(
                other.position
            )
            gap = ahead - (other.length + vehicle.length) / 2.0
        else:
            continue
        if 0 < gap < best_gap:
            best_gap, best_speed = gap, other.speed
    return best_gap, best_speed


def lane_view(
    world: WorldState, vehicle: VehicleState, lane: int, idm: IdmParams
) -> LaneView | None:
    """Build the MOBIL observation for an adjacent lane; None if absent."""
    seg = world.road.segment(vehicle.segment_id)
    if not 0 <= lane < seg.lane_count:
        return None
    ego_s = seg.along(vehicle.position)
    lead_gap, lead_speed = find_lead(world, vehicle, lane)
    follower_gap, follower_speed = math.inf, 0.0
    follower: VehicleState | None = None
    occupied = False
    for other in world.vehicles:
        if other.id == vehicle.id or other.segment_id != vehicle.segment_id:
            continue
        if other.lane_index != lane:
            continue
        half_sum = (other.length + vehicle.length) / 2.0
        separation = ego_s - seg.along(other.position)
        if abs(separation) < half_sum + 0.5:
            occupied = True  # alongside; the slot is not open
            continue
        gap = separation - half_sum
        if 0 < gap < follower_gap:
            follower_gap, follower_speed = gap, other.speed
            follower = other
    follower_accel = 0.0
    if follower is not None:
        f_gap, f_speed = find_lead(world, follower, lane)
        follower_accel = idm_acceleration(follower.speed, f_gap, f_speed, idm)
    return LaneView(
        lead_gap=lead_gap,
        lead_speed=lead_speed,
        follower_gap=follower_gap,
        follower_speed=follower_speed,
        follower_current_accel=follower_accel,
        occupied=occupied,
    )


@dataclass
class DriverModel:
    """IDM longitudinal control with optional MOBIL lane changes.

    Drives one vehicle; used both for background traffic and for the two
    instruction-blind baseline agents (which simply never read the
    scenario instruction).
    """

    idm: IdmParams
    mobil: MobilParams | None = None   # None disables lane changes
    target_lane: int | None = None
    cooldown_ticks: int = 0
    settled_eps: float = 0.15          # m, lane-settle tolerance

    def act(self, world: WorldState, vehicle_id: str, dt: float) -> Control:
        vehicle = world.vehicle(vehicle_id)
        seg = world.road.segment(vehicle.segment_id)
        if self.target_lane is None or not 0 <= self.target_lane < seg.lane_count:
            self.target_lane = vehicle.lane_index

        changing = self.target_lane != vehicle.lane_index or self.cooldown_ticks > 0
        if self.cooldown_ticks > 0:
            self.cooldown_ticks -= 1
        if self.mobil is not None and not changing and seg.lane_count > 1:
            decision = mobil_decide(
                vehicle.speed,
                *find_lead(world, vehicle, vehicle.lane_index),
                lane_view(world, vehicle, vehicle.lane_index - 1, self.idm),
                lane_view(world, vehicle, vehicle.lane_index + 1, self.idm),
                self.idm,
                self.mobil,
            )
            if decision == "left":
                self.target_lane = vehicle.lane_index - 1
                self.cooldown_ticks = int(3.0 / dt)
            elif decision == "right":
                self.target_lane = vehicle.lane_index + 1
                self.cooldown_ticks = int(3.0 / dt)

        # Follow the nearer constraint of current and target lane while moving over.
        gap, lead_speed = find_lead(world, vehicle, vehicle.lane_index)
        if self.target_lane != vehicle.lane_index:
            gap2, lead_speed2 = find_lead(world, vehicle, self.target_lane)
            if gap2 < gap:
                gap, lead_speed = gap2, lead_speed2
        accel = idm_acceleration(vehicle.speed, gap, lead_speed, self.idm)
        steer = steer_along_path(
            seg.lane_center(self.target_lane), vehicle.position, vehicle.heading, vehicle.speed
        )
        return Control(accel=accel, steer=steer)


def background_driver(rng, speed_limit: float) -> DriverModel:
    """Seeded driver with parameters jittered +-20% around the defaults."""
    def jitter(value: float) -> float:
        return value * (0.8 + 0.4 * rng.random())

    idm = IdmParams(
        desired_speed=jitter(speed_limit),
        time_headway=jitter(1.5),
        min_gap=jitter(2.0),
        max_accel=jitter(1.5),
        comfort_decel=jitter(2.0),
        exponent=4.0,
    )
    return DriverModel(idm=idm, mobil=None)


def baseline_agent(kind: str, speed_limit: float) -> DriverModel:
    """Instruction-blind ego baseline: plain IDM or IDM+MOBIL."""
    idm = IdmParams(desired_speed=speed_limit)
    if kind == "idm":
        return DriverModel(idm=idm, mobil=None)
    if kind == "mobil":
        return DriverModel(idm=idm, mobil=MobilParams())
    raise ValueError(f"unknown baseline kind {kind!r}")
