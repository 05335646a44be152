"""Fixed-step multi-vehicle world with kinematic bicycle dynamics.

Stepping is pure: identical (world, controls) inputs produce bit-identical
outputs, which the whole benchmark relies on for replayability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .geometry import Vec2, heading_vec, rects_overlap, wrap_angle
from .road import RoadNetwork

DT = 0.1                 # s, fixed simulation step
WHEELBASE = 2.5          # m
V_MAX = 40.0             # m/s
STEER_MAX = 0.6          # rad
VEHICLE_LENGTH = 4.5     # m
VEHICLE_WIDTH = 1.8      # m


class DynamicsError(ValueError):
    """Raised for non-finite or out-of-range dynamics inputs."""


class ConfigurationError(ValueError):
    """Raised when stepping inputs are inconsistent with the world."""


@dataclass(frozen=True)
class Control:
    accel: float  # m/s^2
    steer: float  # rad


@dataclass(frozen=True)
class VehicleState:
    id: str
    position: Vec2
    heading: float   # rad, normalized to (-pi, pi]
    speed: float     # m/s, in [0, V_MAX]
    segment_id: str
    lane_index: int
    length: float = VEHICLE_LENGTH
    width: float = VEHICLE_WIDTH
    role: str = "background"  # "ego" | "background"

    def velocity(self) -> Vec2:
        return heading_vec(self.heading).scaled(self.speed)


@dataclass(frozen=True)
class CollisionEvent:
    time: float
    ids: tuple[str, str]      # sorted pair
    relative_speed: float     # m/s


@dataclass(frozen=True)
class WorldState:
    road: RoadNetwork
    vehicles: tuple[VehicleState, ...]
    time: float
    tick: int
    seed: int

    def vehicle(self, vehicle_id: str) -> VehicleState:
        for v in self.vehicles:
            if v.id == vehicle_id:
                return v
        raise KeyError(f"unknown vehicle id {vehicle_id!r}")

    def ego(self) -> VehicleState:
        for v in self.vehicles:
            if v.role == "ego":
                return v
        raise KeyError("world has no ego vehicle")


def advance_vehicle(
    state: VehicleState,
    control: Control,
    dt: float,
    wheelbase: float = WHEELBASE,
    v_max: float = V_MAX,
    steer_max: float = STEER_MAX,
) -> VehicleState:
    """Kinematic bicycle update: explicit Euler at the current speed."""
    if dt <= 0:
        raise DynamicsError(f"dt must be > 0, got {dt}")
    if not (math.isfinite(control.accel) and math.isfinite(control.steer)):
        raise DynamicsError(f"non-finite control {control}")
    if abs(control.steer) > steer_max + 1e-12:
        raise DynamicsError(f"steer {control.steer} exceeds limit {steer_max}")
    v = state.speed
    x = state.position.x + v * math.cos(state.heading) * dt
    y = state.position.y + v * math.sin(state.heading) * dt
    heading = wrap_angle(state.heading + (v / wheelbase) * math.tan(control.steer) * dt)
    speed = min(v_max, max(0.0, v + control.accel * dt))
    return replace(state, position=Vec2(x, y), heading=heading, speed=speed)


def _updated_location(road: RoadNetwork, vehicle: VehicleState) -> VehicleState:
    """Refresh segment (straight-through or turn completion) and lane index."""
    seg = road.segment(vehicle.segment_id)
    seg_id = vehicle.segment_id
    if seg.along(vehicle.position) > seg.length - 1e-9:
        for _, exit_id in sorted(road.exits_from(vehicle.segment_id).items()):
            exit_seg = road.segment(exit_id)
            if exit_seg.along(vehicle.position) < 0.0:
                continue
            if abs(exit_seg.lateral_offset(vehicle.position)) > exit_seg.lane_width * exit_seg.lane_count:
                continue
            if abs(wrap_angle(vehicle.heading - exit_seg.heading)) > math.pi / 4:
                continue
            seg_id = exit_id
            seg = exit_seg
            break
    lane = seg.nearest_lane(vehicle.position)
    if seg_id != vehicle.segment_id or lane != vehicle.lane_index:
        return replace(vehicle, segment_id=seg_id, lane_index=lane)
    return vehicle


def detect_collisions(vehicles: tuple[VehicleState, ...], time: float) -> list[CollisionEvent]:
    """Oriented-rectangle overlap over all pairs, one event per sorted pair."""
    events: list[CollisionEvent] = []
    ordered = sorted(vehicles, key=lambda v: v.id)
    for i, a in enumerate(ordered):
        for b in ordered[i + 1:]:
            if rects_overlap(
                a.position, a.heading, a.length, a.width,
                b.position, b.heading, b.length, b.width,
            ):
                rel = (a.velocity() - b.velocity()).norm()
                events.append(CollisionEvent(time=time, ids=(a.id, b.id), relative_speed=rel))
    return events


def step_world(
    world: WorldState, controls: dict[str, Control], dt: float = DT
) -> tuple[WorldState, list[CollisionEvent]]:
    """Advance every vehicle by one step and report overlapping pairs."""
    missing = [v.id for v in world.vehicles if v.id not in controls]
    if missing:
        raise ConfigurationError(f"missing controls for vehicles {missing}")
    new_tick = world.tick + 1
    new_time = new_tick * dt
    advanced = tuple(
        _updated_location(world.road, advance_vehicle(v, controls[v.id], dt))
        for v in world.vehicles
    )
    events = detect_collisions(advanced, new_time)
    new_world = replace(world, vehicles=advanced, time=new_time, tick=new_tick)
    return new_world, events
