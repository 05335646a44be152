import math

import pytest
from hypothesis import given, strategies as st

from driverig.geometry import (
    Vec2,
    polyline_length,
    project_on_polyline,
    rects_overlap,
    sample_arc,
    wrap_angle,
)

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)


def test_vec2_rejects_non_finite():
    with pytest.raises(ValueError):
        Vec2(math.nan, 0.0)
    with pytest.raises(ValueError):
        Vec2(0.0, math.inf)


@given(st.floats(min_value=-50, max_value=50))
def test_wrap_angle_range(a):
    wrapped = wrap_angle(a)
    assert -math.pi < wrapped <= math.pi
    assert math.isclose(math.sin(wrapped), math.sin(a), abs_tol=1e-9)
    assert math.isclose(math.cos(wrapped), math.cos(a), abs_tol=1e-9)


def test_rect_overlap_separated_lanes():
    # Two cars in adjacent 4 m lanes do not touch.
    assert not rects_overlap(Vec2(0, 0), 0.0, 4.5, 1.8, Vec2(0, 4), 0.0, 4.5, 1.8)


def test_rect_overlap_bumper_contact():
    assert rects_overlap(Vec2(0, 0), 0.0, 4.5, 1.8, Vec2(4.0, 0), 0.0, 4.5, 1.8)
    assert not rects_overlap(Vec2(0, 0), 0.0, 4.5, 1.8, Vec2(5.0, 0), 0.0, 4.5, 1.8)


def test_rect_overlap_rotated():
    # A crossing car at 90 degrees overlaps when centered on the same point.
    assert rects_overlap(Vec2(0, 0), 0.0, 4.5, 1.8, Vec2(0, 0), math.pi / 2, 4.5, 1.8)


@given(finite, finite, finite, finite)
def test_rect_overlap_symmetric(ax, ay, bx, by):
    a, b = Vec2(ax, ay), Vec2(bx, by)
    assert rects_overlap(a, 0.3, 4.5, 1.8, b, 1.1, 4.5, 1.8) == rects_overlap(
        b, 1.1, 4.5, 1.8, a, 0.3, 4.5, 1.8
    )


def test_projection_midpoint():
    line = [Vec2(0, 0), Vec2(10, 0)]
    proj = project_on_polyline(line, Vec2(5, 2))
    assert math.isclose(proj.arc_length, 5.0)
    assert math.isclose(proj.lateral, 2.0)  # left of travel is positive
    assert not proj.clamped


def test_projection_clamps_past_end():
    line = [Vec2(0, 0), Vec2(10, 0)]
    proj = project_on_polyline(line, Vec2(12, -1))
    assert math.isclose(proj.arc_length, 10.0)
    assert proj.clamped


def test_polyline_length_two_segments():
    assert math.isclose(polyline_length([Vec2(0, 0), Vec2(3, 0), Vec2(3, 4)]), 7.0)


def test_sample_arc_endpoints_and_radius():
    pts = sample_arc(Vec2(0, 0), 10.0, -math.pi / 2, 0.0, step=1.0)
    assert math.isclose(pts[0].x, 0.0, abs_tol=1e-9) and math.isclose(pts[0].y, -10.0)
    assert math.isclose(pts[-1].x, 10.0) and math.isclose(pts[-1].y, 0.0, abs_tol=1e-9)
    for p in pts:
        assert math.isclose(p.norm(), 10.0, rel_tol=1e-12)
