import math

import pytest

from driverig.geometry import Vec2
from driverig.road import straight_highway
from driverig.sensing import ContextSnapshot, FrontVehicle, describe_scene, sensor_snapshot, snapshot_from_dict
from driverig.world import VehicleState, WorldState


def vehicle(vid, x, lane=1, speed=10.0, role="background"):
    y = {0: 4.0, 1: 0.0, 2: -4.0}[lane]
    return VehicleState(
        id=vid, position=Vec2(x, y), heading=0.0, speed=speed,
        segment_id="main", lane_index=lane, role=role,
    )


def world_with(*vehicles):
    return WorldState(road=straight_highway(), vehicles=tuple(vehicles), time=0.0, tick=0, seed=0)


def test_lone_ego_has_no_front_vehicle():
    world = world_with(vehicle("ego", 50.0, role="ego"))
    snap = sensor_snapshot(world, "ego")
    assert snap.front_vehicle is None
    assert snap.lane_count == 3
    assert snap.speed_limit == 25.0


def test_front_vehicle_distance_and_speed():
    world = world_with(
        vehicle("ego", 50.0, speed=20.0, role="ego"),
        vehicle("lead", 50.0 + 50.0 + 4.5, speed=10.0),
    )
    snap = sensor_snapshot(world, "ego")
    assert snap.front_vehicle is not None
    assert math.isclose(snap.front_vehicle.distance, 50.0)
    assert math.isclose(snap.front_vehicle.speed, 10.0)


def test_adjacent_lane_vehicle_ignored():
    world = world_with(
        vehicle("ego", 50.0, lane=1, role="ego"),
        vehicle("side", 100.0, lane=0),
    )
    assert sensor_snapshot(world, "ego").front_vehicle is None


def test_vehicle_beyond_sensing_range_ignored():
    world = world_with(
        vehicle("ego", 0.0, role="ego"),
        vehicle("far", 200.0),
    )
    assert sensor_snapshot(world, "ego").front_vehicle is None


def test_nearest_of_two_leads_wins():
    world = world_with(
        vehicle("ego", 0.0, role="ego"),
        vehicle("near", 30.0, speed=5.0),
        vehicle("far", 60.0, speed=15.0),
    )
    snap = sensor_snapshot(world, "ego")
    assert math.isclose(snap.front_vehicle.speed, 5.0)


def test_unknown_ego_id_raises():
    world = world_with(vehicle("ego", 0.0, role="ego"))
    with pytest.raises(KeyError):
        sensor_snapshot(world, "ghost")


def make_snapshot(**kwargs):
    base = dict(
        ego_speed=40.0 / 3.6,
        front_vehicle=FrontVehicle(6.8, 38.0 / 3.6, 1.9, 0.0),
        lane_index=1,
        lane_count=3,
        speed_limit=60.0 / 3.6,
        at_intersection=False,
    )
    base.update(kwargs)
    return ContextSnapshot(**base)


def test_describe_scene_front_vehicle_line():
    text = describe_scene(make_snapshot())
    assert "A vehicle in front of you is running at 38.0 km/h." in text
    assert "There is a vehicle at a distance of 6.8 m." in text


def test_describe_scene_speed_and_limit_lines():
    text = describe_scene(make_snapshot())
    assert "Your current speed is 40.0 km/h." in text
    assert "The speed limit is 60.0 km/h." in text
    assert "The weather is sunny." in text


def test_describe_scene_omits_absent_front_vehicle():
    text = describe_scene(make_snapshot(front_vehicle=None))
    assert "vehicle in front" not in text
    assert "distance" not in text


def test_describe_scene_total_over_enum_space():
    for weather in ("sunny", "rain", "fog", "snow", "night"):
        for density in ("light", "moderate", "heavy"):
            snap = make_snapshot(weather=weather, traffic_density=density, at_intersection=True)
            text = describe_scene(snap)
            assert f"The weather is {weather}." in text
            assert f"The traffic is {density}." in text
            assert "You are approaching an intersection." in text


def test_front_vehicle_ordering_is_stable():
    lines = describe_scene(make_snapshot()).splitlines()
    assert lines[0].startswith("There is a vehicle")
    assert lines[1].startswith("A vehicle in front")
    assert lines[2].startswith("Your current speed")
    assert lines[3].startswith("The speed limit")
    assert lines[4].startswith("The weather")


def test_snapshot_round_trip_from_dict():
    snap = make_snapshot(weather="fog")
    data = {
        "ego_speed": snap.ego_speed,
        "front_vehicle": {
            "distance": snap.front_vehicle.distance,
            "speed": snap.front_vehicle.speed,
            "bearing_deg": snap.front_vehicle.bearing_deg,
            "relative_heading_deg": snap.front_vehicle.relative_heading_deg,
        },
        "lane_index": snap.lane_index,
        "lane_count": snap.lane_count,
        "speed_limit": snap.speed_limit,
        "at_intersection": snap.at_intersection,
        "weather": snap.weather,
        "traffic_density": snap.traffic_density,
    }
    assert snapshot_from_dict(data) == snap


def test_invalid_weather_rejected():
    with pytest.raises(ValueError):
        make_snapshot(weather="hail")
