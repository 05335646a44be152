import math

import pytest
from hypothesis import given, settings, strategies as st

from driverig.geometry import Vec2
from driverig.road import straight_highway, crossroads
from driverig.world import (
    Control,
    DynamicsError,
    ConfigurationError,
    V_MAX,
    VehicleState,
    WorldState,
    advance_vehicle,
    step_world,
)


def make_vehicle(vid="v", x=0.0, y=0.0, heading=0.0, speed=10.0, lane=1, seg="main", role="background"):
    return VehicleState(
        id=vid, position=Vec2(x, y), heading=heading, speed=speed,
        segment_id=seg, lane_index=lane, role=role,
    )


def make_world(*vehicles, road=None):
    return WorldState(
        road=road or straight_highway(),
        vehicles=tuple(vehicles),
        time=0.0,
        tick=0,
        seed=1,
    )


def test_straight_line_integration():
    v = make_vehicle(speed=10.0)
    out = advance_vehicle(v, Control(accel=0.0, steer=0.0), 0.1)
    assert math.isclose(out.position.x, 1.0)
    assert out.heading == v.heading
    assert out.speed == 10.0


def test_speed_clamped_at_zero():
    v = make_vehicle(speed=0.0)
    out = advance_vehicle(v, Control(accel=-1.0, steer=0.0), 0.1)
    assert out.speed == 0.0
    assert out.position.x == 0.0  # no reverse


def test_heading_update_matches_hand_value():
    v = make_vehicle(speed=10.0)
    out = advance_vehicle(v, Control(accel=0.0, steer=0.1), 0.1, wheelbase=2.5)
    expected = 10.0 / 2.5 * math.tan(0.1) * 0.1
    assert math.isclose(out.heading, expected, rel_tol=1e-12)


def test_speed_clamped_at_vmax():
    v = make_vehicle(speed=V_MAX)
    out = advance_vehicle(v, Control(accel=5.0, steer=0.0), 0.1)
    assert out.speed == V_MAX


def test_non_finite_control_rejected():
    v = make_vehicle()
    with pytest.raises(DynamicsError):
        advance_vehicle(v, Control(accel=math.nan, steer=0.0), 0.1)
    with pytest.raises(DynamicsError):
        advance_vehicle(v, Control(accel=0.0, steer=0.9), 0.1)
    with pytest.raises(DynamicsError):
        advance_vehicle(v, Control(accel=0.0, steer=0.0), 0.0)


def test_step_world_requires_all_controls():
    world = make_world(make_vehicle("a"), make_vehicle("b", x=50.0))
    with pytest.raises(ConfigurationError):
        step_world(world, {"a": Control(0.0, 0.0)})


def test_distant_parallel_vehicles_no_collision():
    world = make_world(
        make_vehicle("a", x=0.0, lane=0, y=4.0),
        make_vehicle("b", x=100.0, lane=2, y=-4.0),
    )
    zero = {vid: Control(0.0, 0.0) for vid in ("a", "b")}
    _, events = step_world(world, zero)
    assert events == []


def test_collision_reported_once_with_sorted_ids():
    world = make_world(
        make_vehicle("zed", x=0.0, speed=10.0),
        make_vehicle("amy", x=4.0, speed=0.0),
    )
    controls = {"zed": Control(0.0, 0.0), "amy": Control(0.0, 0.0)}
    _, events = step_world(world, controls)
    assert len(events) == 1
    assert events[0].ids == ("amy", "zed")
    assert math.isclose(events[0].relative_speed, 10.0)


def test_step_world_deterministic():
    def run():
        world = make_world(make_vehicle("a", speed=12.0), make_vehicle("b", x=30.0, speed=8.0))
        controls = {"a": Control(0.5, 0.01), "b": Control(-0.2, -0.01)}
        for _ in range(100):
            world, _ = step_world(world, controls)
        return world

    assert run() == run()


def test_time_tick_consistency():
    world = make_world(make_vehicle("a"))
    for _ in range(173):
        world, _ = step_world(world, {"a": Control(0.0, 0.0)})
    assert abs(world.time - world.tick * 0.1) < 1e-9


@settings(max_examples=50, deadline=None)
@given(
    speed=st.floats(min_value=0, max_value=V_MAX),
    accel=st.floats(min_value=-5, max_value=5),
    steer=st.floats(min_value=-0.6, max_value=0.6),
)
def test_no_teleportation(speed, accel, steer):
    v = make_vehicle(speed=speed)
    out = advance_vehicle(v, Control(accel=accel, steer=steer), 0.1)
    displacement = (out.position - v.position).norm()
    assert displacement <= V_MAX * 0.1 + 1e-9


def test_straight_through_segment_transition():
    road = crossroads()
    seg = road.segment("in_e")
    v = VehicleState(
        id="a", position=seg.end - seg.direction.scaled(1.0), heading=seg.heading,
        speed=10.0, segment_id="in_e", lane_index=0,
    )
    world = make_world(v, road=road)
    for _ in range(40):
        world, _ = step_world(world, {"a": Control(0.0, 0.0)})
    assert world.vehicle("a").segment_id == "out_e"
