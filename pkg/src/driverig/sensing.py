"""Ego-centric context extraction and its natural-language rendering."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import wrap_angle
from .world import VehicleState, WorldState

SENSING_RANGE = 100.0  # m

WEATHER_CONDITIONS = ("sunny", "rain", "fog", "snow", "night")
TRAFFIC_DENSITIES = ("light", "moderate", "heavy")


@dataclass(frozen=True)
class FrontVehicle:
    distance: float          # m, bumper to bumper, > 0
    speed: float             # m/s
    bearing_deg: float       # line-of-sight angle off the ego heading
    relative_heading_deg: float


@dataclass(frozen=True)
class ContextSnapshot:
    ego_speed: float
    front_vehicle: FrontVehicle | None
    lane_index: int
    lane_count: int
    speed_limit: float
    at_intersection: bool
    weather: str = "sunny"
    traffic_density: str = "light"

    def __post_init__(self) -> None:
        if self.weather not in WEATHER_CONDITIONS:
            raise ValueError(f"unknown weather {self.weather!r}")
        if self.traffic_density not in TRAFFIC_DENSITIES:
            raise ValueError(f"unknown traffic density {self.traffic_density!r}")
        if self.front_vehicle is not None and self.front_vehicle.distance <= 0:
            raise ValueError("front vehicle distance must be > 0")


def _front_vehicle(world: WorldState, ego: VehicleState) -> FrontVehicle | None:
    seg = world.road.segment(ego.segment_id)
    ego_s = seg.along(ego.position)
    best: tuple[float, VehicleState] | None = None
    for v in world.vehicles:
        if v.id == ego.id or v.segment_id != ego.segment_id or v.lane_index != ego.lane_index:
            continue
        gap = seg.along(v.position) - ego_s - (v.length + ego.length) / 2.0
        if gap <= 0 or gap > SENSING_RANGE:
            continue
        if best is None or gap < best[0]:
            best = (gap, v)
    if best is None:
        return None
    gap, lead = best
    los = lead.position - ego.position
    bearing = wrap_angle(math.atan2(los.y, los.x) - ego.heading)
    rel_heading = wrap_angle(lead.heading - ego.heading)
    return FrontVehicle(
        distance=max(gap, 0.01),
        speed=lead.speed,
        bearing_deg=math.degrees(bearing),
        relative_heading_deg=math.degrees(rel_heading),
    )


def sensor_snapshot(
    world: WorldState,
    ego_id: str,
    weather: str = "sunny",
    traffic_density: str = "light",
) -> ContextSnapshot:
    """Ego context: nearest same-lane vehicle ahead plus static road facts."""
    ego = world.vehicle(ego_id)
    seg = world.road.segment(ego.segment_id)
    return ContextSnapshot(
        ego_speed=ego.speed,
        front_vehicle=_front_vehicle(world, ego),
        lane_index=ego.lane_index,
        lane_count=seg.lane_count,
        speed_limit=seg.speed_limit,
        at_intersection=bool(world.road.exits_from(ego.segment_id)),
        weather=weather,
        traffic_density=traffic_density,
    )


def snapshot_from_dict(data: dict) -> ContextSnapshot:
    """Build a snapshot from a plain mapping (CLI and recorded streams)."""
    fv = data.get("front_vehicle")
    front = None
    if fv is not None:
        front = FrontVehicle(
            distance=float(fv["distance"]),
            speed=float(fv["speed"]),
            bearing_deg=float(fv.get("bearing_deg", 0.0)),
            relative_heading_deg=float(fv.get("relative_heading_deg", 0.0)),
        )
    return ContextSnapshot(
        ego_speed=float(data["ego_speed"]),
        front_vehicle=front,
        lane_index=int(data["lane_index"]),
        lane_count=int(data["lane_count"]),
        speed_limit=float(data["speed_limit"]),
        at_intersection=bool(data.get("at_intersection", False)),
        weather=data.get("weather", "sunny"),
        traffic_density=data.get("traffic_density", "light"),
    )


def _kmh(speed_ms: float) -> str:
    return f"{speed_ms * 3.6:.1f}"


def describe_scene(snapshot: ContextSnapshot) -> str:
    """Fixed-template scene description, one fact per line, speeds in km/h."""
    lines: list[str] = []
    fv = snapshot.front_vehicle
    if fv is not None:
        lines.append(f"There is a vehicle at a distance of {fv.distance:.1f} m.")
        lines.append(f"A vehicle in front of you is running at {_kmh(fv.speed)} km/h.")
    lines.append(f"Your current speed is {_kmh(snapshot.ego_speed)} km/h.")
    lines.append(f"The speed limit is {_kmh(snapshot.speed_limit)} km/h.")
    lines.append(f"The weather is {snapshot.weather}.")
    lines.append(f"You are in lane {snapshot.lane_index + 1} of {snapshot.lane_count}.")
    if snapshot.at_intersection:
        lines.append("You are approaching an intersection.")
    lines.append(f"The traffic is {snapshot.traffic_density}.")
    return "\n".join(lines)
