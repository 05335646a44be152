"""Scenario schema, seeded suite generation, goal predicates, route progress.

Suites are generated to match the benchmark's category mix exactly at the
paper scale (4,900) and by largest-remainder apportionment at any other
total, with per-scenario seeds derived from the suite seed so regeneration
is byte-identical.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass

import yaml

from .geometry import Vec2, polyline_length, project_on_polyline
from .road import RoadNetwork, Segment, crossroads, straight_highway
from .trace import RunTrace
from .traffic import DriverModel, IdmParams, MobilParams
from .world import VehicleState, WorldState

SCENARIO_SCHEMA = "driverig-scenario v1"

CATEGORIES = ("distance", "speed", "pull_over", "routing", "lane_change", "overtake")
# Benchmark category sizes at the published 4,900-scenario scale.
CATEGORY_COUNTS = {
    "distance": 1200,
    "speed": 1200,
    "pull_over": 200,
    "routing": 1500,
    "lane_change": 400,
    "overtake": 400,
}
PAPER_TOTAL = 4900

HIGHWAY_TIME_LIMIT = 30.0
INTERSECTION_TIME_LIMIT = 60.0
OFF_ROUTE_TOLERANCE = 10.0  # m, lateral distance beyond which progress freezes


class SuiteConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GoalSpec:
    """Goal predicate: a kind plus its parameters and a hold requirement."""

    kind: str
    params: dict
    hold_duration: float = 0.0


@dataclass(frozen=True)
class RouteSpec:
    waypoints: list[Vec2]
    total_length: float

    def __post_init__(self) -> None:
        if self.total_length <= 0:
            raise ValueError("route total_length must be > 0")


@dataclass(frozen=True)
class Scenario:
    id: str
    category: str
    setting: str               # "highway" | "intersection"
    instruction: str
    directness: str            # "I" | "II" | "III"
    initial: WorldState
    goal: GoalSpec
    time_limit: float
    seed: int
    weather: str = "sunny"
    traffic_density: str = "light"

    def __post_init__(self) -> None:
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if self.category == "routing" and self.setting != "intersection":
            raise ValueError("routing scenarios must use the intersection setting")
        words = len(self.instruction.split())
        if not 2 <= words <= 14:
            raise ValueError(f"instruction must be 2-14 words, got {words}: {self.instruction!r}")


# --- instruction banks ----------------------------------------------------

# (directness level, template) per category; templates may reference the
# scenario parameters by name.
INSTRUCTION_BANK: dict[str, list[tuple[str, str]]] = {
    "distance": [
        ("I", "Keep a gap of about {gap:.0f} meters to the car ahead."),
        ("I", "Maintain a {gap:.0f} meter following distance."),
        ("II", "You are following the car ahead too closely."),
        ("II", "Leave more room to the vehicle in front."),
        ("III", "I get nervous when we tailgate like this."),
        ("III", "That car ahead is making me uneasy."),
    ],
    "speed": [
        ("I", "Drive at about {speed_kmh:.0f} kilometers per hour."),
        ("I", "Set the speed to {speed_kmh:.0f} kilometers per hour."),
        ("II", "You are driving a little bit slow now."),
        ("II", "I do not think we should drive this slow."),
        ("III", "I'm really in a hurry now."),
        ("III", "I am going to be late for my work."),
    ],
    "pull_over": [
        ("I", "Pull over to the side of the road."),
        ("I", "Please stop the car on the right side."),
        ("II", "I need you to stop somewhere safe."),
        ("II", "Find a safe spot and stop soon."),
        ("III", "I feel sick, I need some air."),
        ("III", "Something fell out of my bag back there."),
    ],
    "routing": [
        ("I", "Turn {direction} at the intersection ahead."),
        ("I", "Take a {direction} turn at the junction."),
        ("II", "We need to head {direction} up ahead."),
        ("II", "Our destination is to the {direction} of this crossing."),
        ("III", "I believe the nicer route goes {direction} here."),
        ("III", "Everything we need is {direction} of this junction."),
    ],
    "routing_straight": [
        ("I", "Go straight through the intersection ahead."),
        ("I", "Continue straight at the junction."),
        ("II", "No turns here, keep heading this way."),
        ("II", "Our destination is straight through this crossing."),
        ("III", "I think it is quicker to stay on this road."),
        ("III", "The road ahead looks fine to me."),
    ],
    "lane_change": [
        ("I", "Change to the {side} lane."),
        ("I", "Move one lane to the {side}."),
        ("II", "This lane seems slower than the {side} one."),
        ("II", "The {side} lane looks clearer to me."),
        ("III", "I always feel safer in the {side} lane."),
        ("III", "Traffic seems better over on the {side}."),
    ],
    "overtake": [
        ("I", "Overtake the vehicle ahead of us."),
        ("I", "Pass the car in front and come back."),
        ("II", "We have been stuck behind this car forever."),
        ("II", "This car ahead is really slowing us down."),
        ("III", "I wish we were not behind this car."),
        ("III", "We will never get there behind this driver."),
    ],
}


def _derive_seed(suite_seed: int, index: int) -> int:
    digest = hashlib.sha256(f"{suite_seed}:{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def _vehicle_seed(scenario_seed: int, vehicle_id: str) -> int:
    digest = hashlib.sha256(f"{scenario_seed}:{vehicle_id}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def apportion_categories(total: int) -> dict[str, int]:
    """Largest-remainder split of ``total`` over the benchmark proportions."""
    if total < 49:
        raise SuiteConfigError(f"suite size must be >= 49 to realize proportions, got {total}")
    raw = {c: total * n / PAPER_TOTAL for c, n in CATEGORY_COUNTS.items()}
    counts = {c: int(math.floor(v)) for c, v in raw.items()}
    shortfall = total - sum(counts.values())
    by_remainder = sorted(
        CATEGORIES, key=lambda c: (-(raw[c] - counts[c]), CATEGORIES.index(c))
    )
    for c in by_remainder[:shortfall]:
        counts[c] += 1
    return counts


# --- world builders -------------------------------------------------------


def _vehicle(
    vid: str,
    seg: Segment,
    lane: int,
    along: float,
    speed: float,
    role: str = "background",
) -> VehicleState:
    offset = seg.direction.left_normal().scaled(seg.lane_offset(lane))
    pos = seg.start + seg.direction.scaled(along) + offset
    return VehicleState(
        id=vid,
        position=pos,
        heading=seg.heading,
        speed=speed,
        segment_id=seg.id,
        lane_index=lane,
        role=role,
    )


def _pick_instruction(rng: random.Random, bank_key: str, **params) -> tuple[str, str]:
    level, template = rng.choice(INSTRUCTION_BANK[bank_key])
    return template.format(**params), level


def _pick_weather(rng: random.Random) -> str:
    return rng.choices(
        ["sunny", "rain", "fog", "snow", "night"], weights=[0.6, 0.1, 0.1, 0.1, 0.1]
    )[0]


def _build_scenario(index: int, category: str, seed: int) -> Scenario:
    rng = random.Random(seed)
    weather = _pick_weather(rng)
    sid = f"{index:04d}-{category}"
    if category == "routing":
        road = crossroads()
        seg = road.segment("in_e")
        ego_along = seg.length - rng.uniform(60.0, 100.0)
        ego = _vehicle("ego", seg, 0, ego_along, 10.0, role="ego")
        vehicles = [ego]
        if rng.random() < 0.5:
            vehicles.append(_vehicle("car1", seg, 0, ego_along + rng.uniform(25.0, 40.0), 8.0))
        out_seg = road.segment("out_e")
        vehicles.append(_vehicle("car2", out_seg, 0, rng.uniform(10.0, 60.0), 12.0))
        direction = rng.choice(["left", "right", "straight"])
        exit_id = road.connections[("in_e", direction)]
        bank = "routing_straight" if direction == "straight" else "routing"
        instruction, level = _pick_instruction(rng, bank, direction=direction)
        goal = GoalSpec(kind="exit", params={"segment": exit_id, "min_along": 3.0})
        world = WorldState(road=road, vehicles=tuple(vehicles), time=0.0, tick=0, seed=seed)
        return Scenario(
            id=sid, category=category, setting="intersection", instruction=instruction,
            directness=level, initial=world, goal=goal,
            time_limit=INTERSECTION_TIME_LIMIT, seed=seed, weather=weather,
            traffic_density="light",
        )

    road = straight_highway()
    seg = road.segment("main")
    vehicles: list[VehicleState] = []
    if category == "distance":
        ego = _vehicle("ego", seg, 1, 50.0, 12.0, role="ego")
        gap0 = rng.uniform(30.0, 50.0)
        v_lead = rng.uniform(8.0, 13.0)
        lead = _vehicle("car1", seg, 1, 50.0 + gap0 + ego.length, v_lead)
        vehicles = [ego, lead]
        if rng.random() < 0.5:
            vehicles.append(
                _vehicle("car2", seg, rng.choice([0, 2]), rng.uniform(20.0, 200.0),
                         seg.speed_limit * rng.uniform(1.0, 1.2))
            )
        gap = rng.choice([10.0, 15.0, 20.0, 25.0, 30.0])
        band = max(2.0, 0.15 * gap)
        instruction, level = _pick_instruction(rng, "distance", gap=gap)
        goal = GoalSpec(
            kind="target_gap",
            params={"lead_id": "car1", "gap": gap, "band": band},
            hold_duration=3.0,
        )
    elif category == "speed":
        lane = rng.choice([0, 1, 2])
        ego = _vehicle("ego", seg, lane, 50.0, rng.uniform(8.0, 12.0), role="ego")
        vehicles = [ego]
        for i, other_lane in enumerate(l for l in (0, 1, 2) if l != lane):
            if rng.random() < 0.5:
                vehicles.append(
                    _vehicle(f"car{i + 1}", seg, other_lane, rng.uniform(80.0, 250.0),
                             seg.speed_limit * rng.uniform(1.0, 1.2))
                )
        target = rng.uniform(13.0, 20.0)
        instruction, level = _pick_instruction(rng, "speed", speed_kmh=target * 3.6)
        goal = GoalSpec(
            kind="speed_band",
            params={"low": target - 1.0, "high": target + 1.0},
            hold_duration=3.0,
        )
    elif category == "pull_over":
        lane = rng.choice([0, 1])
        ego = _vehicle("ego", seg, lane, 50.0, 10.0, role="ego")
        vehicles = [ego]
        if rng.random() < 0.5:
            vehicles.append(
                _vehicle("car1", seg, 0, rng.uniform(150.0, 300.0),
                         seg.speed_limit * rng.uniform(1.0, 1.2))
            )
        instruction, level = _pick_instruction(rng, "pull_over")
        goal = GoalSpec(kind="pull_over", params={}, hold_duration=2.0)
    elif category == "lane_change":
        lane = rng.choice([0, 1, 2])
        if lane == 0:
            side = "right"
        elif lane == 2:
            side = "left"
        else:
            side = rng.choice(["left", "right"])
        target_lane = lane + (1 if side == "right" else -1)
        ego = _vehicle("ego", seg, lane, 50.0, 12.0, role="ego")
        lead = _vehicle("car1", seg, lane, 50.0 + rng.uniform(30.0, 45.0), 8.0)
        vehicles = [ego, lead]
        instruction, level = _pick_instruction(rng, "lane_change", side=side)
        goal = GoalSpec(kind="target_lane", params={"lane": target_lane}, hold_duration=1.0)
    elif category == "overtake":
        ego = _vehicle("ego", seg, 1, 50.0, 12.0, role="ego")
        v_lead = rng.uniform(5.0, 8.0)
        lead = _vehicle("car1", seg, 1, 50.0 + rng.uniform(22.0, 30.0) + ego.length, v_lead)
        vehicles = [ego, lead]
        if rng.random() < 0.3:
            vehicles.append(
                _vehicle("car2", seg, 1, rng.uniform(250.0, 400.0),
                         seg.speed_limit * rng.uniform(1.0, 1.2))
            )
        instruction, level = _pick_instruction(rng, "overtake")
        goal = GoalSpec(
            kind="overtake",
            params={"lead_id": "car1", "margin": 10.0, "lane": 1},
        )
    else:
        raise SuiteConfigError(f"unknown category {category!r}")

    world = WorldState(road=road, vehicles=tuple(vehicles), time=0.0, tick=0, seed=seed)
    density = "light" if len(vehicles) <= 3 else "moderate"
    return Scenario(
        id=sid, category=category, setting="highway", instruction=instruction,
        directness=level, initial=world, goal=goal, time_limit=HIGHWAY_TIME_LIMIT,
        seed=seed, weather=weather, traffic_density=density,
    )


def generate_suite(seed: int, total: int) -> list[Scenario]:
    """Seeded scenario suite matching the benchmark's category proportions."""
    counts = apportion_categories(total)
    order: list[str] = []
    for category in CATEGORIES:
        order.extend([category] * counts[category])
    scenarios = [
        _build_scenario(i, category, _derive_seed(seed, i))
        for i, category in enumerate(order)
    ]
    return scenarios


def scenario_drivers(scenario: Scenario) -> dict[str, DriverModel]:
    """Seeded background drivers; designated leads never change lanes."""
    designated = {scenario.goal.params.get("lead_id")}
    drivers: dict[str, DriverModel] = {}
    for v in scenario.initial.vehicles:
        if v.role == "ego":
            continue
        rng = random.Random(_vehicle_seed(scenario.seed, v.id))

        def jitter(value: float) -> float:
            return value * (0.8 + 0.4 * rng.random())

        idm = IdmParams(
            desired_speed=max(v.speed, 0.01),
            time_headway=jitter(1.5),
            min_gap=jitter(2.0),
            max_accel=jitter(1.5),
            comfort_decel=jitter(2.0),
            exponent=4.0,
        )
        seg = scenario.initial.road.segment(v.segment_id)
        mobil = None
        if v.id not in designated and seg.lane_count > 1:
            mobil = MobilParams(politeness=0.3, accel_gain_threshold=0.2, safe_decel=2.0)
        drivers[v.id] = DriverModel(idm=idm, mobil=mobil)
    return drivers


# --- routes ----------------------------------------------------------------


def scenario_route(scenario: Scenario) -> RouteSpec:
    """Reference route for RC: ego lane ahead, or approach + turn + exit."""
    world = scenario.initial
    ego = world.ego()
    seg = world.road.segment(ego.segment_id)
    if scenario.goal.kind == "exit":
        direction = next(
            d for d, target in world.road.exits_from(ego.segment_id).items()
            if target == scenario.goal.params["segment"]
        )
        exit_seg = world.road.segment(scenario.goal.params["segment"])
        lane = seg.lane_count - 1 if direction == "right" else 0
        entry = seg.lane_center(lane)
        start = project_on_polyline(entry, ego.position).point
        path = world.road.turn_path(ego.segment_id, direction)
        exit_lane = exit_seg.lane_count - 1 if direction == "right" else 0
        waypoints = [start, entry[1]] + path[1:] + [exit_seg.lane_center(exit_lane)[1]]
    else:
        start_s = seg.along(ego.position)
        end_s = min(seg.length, start_s + 400.0)
        d = seg.direction
        off = d.left_normal().scaled(seg.lane_offset(ego.lane_index))
        waypoints = [
            seg.start + d.scaled(start_s) + off,
            seg.start + d.scaled(end_s) + off,
        ]
    return RouteSpec(waypoints=waypoints, total_length=polyline_length(waypoints))


def route_progress(route: RouteSpec, trace: RunTrace) -> float:
    """Route completion percent: monotone arc-length progress of the ego."""
    best = 0.0
    for state in trace.ego_states():
        proj = project_on_polyline(route.waypoints, state.position)
        if abs(proj.lateral) > OFF_ROUTE_TOLERANCE:
            continue  # off-route: progress frozen at the last on-route value
        best = max(best, proj.arc_length)
    return min(100.0, 100.0 * best / route.total_length)


# --- goal evaluation --------------------------------------------------------


def _frame_predicate(scenario: Scenario, vehicles: dict[str, VehicleState]) -> bool:
    goal = scenario.goal
    ego = vehicles["ego"]
    road = scenario.initial.road
    seg = road.segment(ego.segment_id)
    if goal.kind == "target_gap":
        lead = vehicles.get(str(goal.params["lead_id"]))
        if lead is None or lead.segment_id != ego.segment_id or lead.lane_index != ego.lane_index:
            return False
        gap = seg.along(lead.position) - seg.along(ego.position) - (lead.length + ego.length) / 2.0
        return abs(gap - float(goal.params["gap"])) <= float(goal.params["band"])
    if goal.kind == "speed_band":
        return float(goal.params["low"]) <= ego.speed <= float(goal.params["high"])
    if goal.kind == "pull_over":
        return ego.lane_index == seg.lane_count - 1 and ego.speed < 0.1
    if goal.kind == "exit":
        if ego.segment_id != goal.params["segment"]:
            return False
        exit_seg = road.segment(str(goal.params["segment"]))
        return exit_seg.along(ego.position) >= float(goal.params["min_along"])
    if goal.kind == "target_lane":
        return ego.lane_index == int(goal.params["lane"])
    if goal.kind == "overtake":
        lead = vehicles.get(str(goal.params["lead_id"]))
        if lead is None or ego.lane_index != int(goal.params["lane"]):
            return False
        if lead.segment_id != ego.segment_id:
            return False
        ahead = seg.along(ego.position) - seg.along(lead.position)
        return ahead >= float(goal.params["margin"])
    raise ValueError(f"unknown goal kind {goal.kind!r}")


def goal_satisfied(scenario: Scenario, trace: RunTrace) -> tuple[bool, float]:
    """Completion flag and first satisfaction time for a finished run.

    Completion requires the goal predicate to hold for the goal's hold
    duration, no collision anywhere in the trace, and satisfaction at or
    before the scenario time limit.
    """
    if trace.has_collision():
        return False, scenario.time_limit
    need = max(1, int(round(scenario.goal.hold_duration / trace.dt)))
    consecutive = 0
    for frame in trace.frames:
        vehicles = {v.id: v for v in frame.vehicles}
        if _frame_predicate(scenario, vehicles):
            consecutive += 1
            if consecutive >= need:
                if frame.time <= scenario.time_limit:
                    return True, frame.time
                return False, scenario.time_limit
        else:
            consecutive = 0
    return False, scenario.time_limit


# --- suite file I/O ---------------------------------------------------------


def _world_to_dict(world: WorldState) -> dict:
    road_kind = "crossroads" if world.road.connections else "highway"
    seg = next(iter(world.road.segments.values()))
    road: dict = {"kind": road_kind, "speed_limit": seg.speed_limit, "lane_width": seg.lane_width}
    if road_kind == "highway":
        road["lanes"] = seg.lane_count
        road["length"] = seg.length
    return {
        "road": road,
        "seed": world.seed,
        "vehicles": [
            {
                "id": v.id,
                "x": v.position.x,
                "y": v.position.y,
                "heading": v.heading,
                "speed": v.speed,
                "segment": v.segment_id,
                "lane": v.lane_index,
                "length": v.length,
                "width": v.width,
                "role": v.role,
            }
            for v in world.vehicles
        ],
    }


def _world_from_dict(data: dict) -> WorldState:
    road_data = data["road"]
    if road_data["kind"] == "highway":
        road = straight_highway(
            lanes=int(road_data["lanes"]),
            length=float(road_data["length"]),
            lane_width=float(road_data["lane_width"]),
            speed_limit=float(road_data["speed_limit"]),
        )
    elif road_data["kind"] == "crossroads":
        road = crossroads(
            lane_width=float(road_data["lane_width"]),
            speed_limit=float(road_data["speed_limit"]),
        )
    else:
        raise SuiteConfigError(f"unknown road kind {road_data['kind']!r}")
    vehicles = tuple(
        VehicleState(
            id=v["id"],
            position=Vec2(float(v["x"]), float(v["y"])),
            heading=float(v["heading"]),
            speed=float(v["speed"]),
            segment_id=v["segment"],
            lane_index=int(v["lane"]),
            length=float(v["length"]),
            width=float(v["width"]),
            role=v["role"],
        )
        for v in data["vehicles"]
    )
    return WorldState(road=road, vehicles=vehicles, time=0.0, tick=0, seed=int(data["seed"]))


def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "schema": SCENARIO_SCHEMA,
        "id": scenario.id,
        "category": scenario.category,
        "setting": scenario.setting,
        "instruction": scenario.instruction,
        "directness": scenario.directness,
        "weather": scenario.weather,
        "traffic_density": scenario.traffic_density,
        "time_limit": scenario.time_limit,
        "seed": scenario.seed,
        "goal": {
            "kind": scenario.goal.kind,
            "params": dict(scenario.goal.params),
            "hold_duration": scenario.goal.hold_duration,
        },
        "initial": _world_to_dict(scenario.initial),
    }


def scenario_from_dict(data: dict) -> Scenario:
    if data.get("schema") != SCENARIO_SCHEMA:
        raise SuiteConfigError(f"unsupported scenario schema {data.get('schema')!r}")
    return Scenario(
        id=data["id"],
        category=data["category"],
        setting=data["setting"],
        instruction=data["instruction"],
        directness=data["directness"],
        initial=_world_from_dict(data["initial"]),
        goal=GoalSpec(
            kind=data["goal"]["kind"],
            params=dict(data["goal"]["params"]),
            hold_duration=float(data["goal"]["hold_duration"]),
        ),
        time_limit=float(data["time_limit"]),
        seed=int(data["seed"]),
        weather=data["weather"],
        traffic_density=data["traffic_density"],
    )


def save_suite(scenarios: list[Scenario], path: str) -> None:
    docs = [scenario_to_dict(s) for s in scenarios]
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump_all(docs, fh, sort_keys=True, default_flow_style=False)


def load_suite(path: str) -> list[Scenario]:
    with open(path, "r", encoding="utf-8") as fh:
        return [scenario_from_dict(doc) for doc in yaml.safe_load_all(fh) if doc]
