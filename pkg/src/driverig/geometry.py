"""Planar geometry primitives shared by the simulator and controllers."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class Vec2:
    """Point or vector in the road plane, metres."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite Vec2 components ({self.x}, {self.y})")

    def __add__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x - other.x, self.y - other.y)

    def scaled(self, k: float) -> "Vec2":
        return Vec2(self.x * k, self.y * k)

    def dot(self, other: "Vec2") -> float:
        return self.x * other.x + self.y * other.y

    def cross(self, other: "Vec2") -> float:
        return self.x * other.y - self.y * other.x

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def left_normal(self) -> "Vec2":
        return Vec2(-self.y, self.x)


def unit(v: Vec2) -> Vec2:
    n = v.norm()
    if n == 0.0:
        raise ValueError("cannot normalize zero vector")
    return Vec2(v.x / n, v.y / n)


def heading_vec(heading: float) -> Vec2:
    return Vec2(math.cos(heading), math.sin(heading))


def wrap_angle(a: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


def rect_corners(center: Vec2, heading: float, length: float, width: float) -> list[Vec2]:
    """Corners of an oriented rectangle centred on ``center``."""
    u = heading_vec(heading)
    n = u.left_normal()
    hl, hw = 0.5 * length, 0.5 * width
    return [
        center + u.scaled(hl) + n.scaled(hw),
        center + u.scaled(hl) + n.scaled(-hw),
        center + u.scaled(-hl) + n.scaled(-hw),
        center + u.scaled(-hl) + n.scaled(hw),
    ]


def _project_polygon(axis: Vec2, corners: list[Vec2]) -> tuple[float, float]:
    vals = [axis.dot(c) for c in corners]
    return min(vals), max(vals)


def rects_overlap(
    center_a: Vec2,
    heading_a: float,
    length_a: float,
    width_a: float,
    center_b: Vec2,
    heading_b: float,
    length_b: float,
    width_b: float,
) -> bool:
    """Separating-axis test between two oriented rectangles (zero margin)."""
    # Cheap reject: circumscribed circles.
    ra = 0.5 * math.hypot(length_a, width_a)
    rb = 0.5 * math.hypot(length_b, width_b)
    if (center_a - center_b).norm() > ra + rb:
        return False
    ca = rect_corners(center_a, heading_a, length_a, width_a)
    cb = rect_corners(center_b, heading_b, length_b, width_b)
    axes = [
        heading_vec(heading_a),
        heading_vec(heading_a).left_normal(),
        heading_vec(heading_b),
        heading_vec(heading_b).left_normal(),
    ]
    for axis in axes:
        amin, amax = _project_polygon(axis, ca)
        bmin, bmax = _project_polygon(axis, cb)
        if amax < bmin or bmax < amin:
            return False
    return True


@dataclass(frozen=True)
class Projection:
    """Result of projecting a point onto a polyline."""

    point: Vec2          # closest point on the polyline
    arc_length: float    # distance along the polyline to that point
    tangent: Vec2        # unit tangent of the supporting segment
    lateral: float       # signed offset, positive to the left of travel
    clamped: bool        # true when the projection hit either endpoint


def project_on_polyline(points: list[Vec2], p: Vec2) -> Projection:
    """Closest-point projection of ``p`` onto the polyline ``points``."""
    if len(points) < 2:
        raise ValueError("polyline needs at least two points")
    best: Projection | None = None
    best_d2 = math.inf
    s_base = 0.0
    for a, b in zip(points[:-1], points[1:]):
        seg = b - a
        seg_len = seg.norm()
        if seg_len == 0.0:
            continue
        t = (p - a).dot(seg) / (seg_len * seg_len)
        t_clamped = min(1.0, max(0.0, t))
        q = a + seg.scaled(t_clamped)
        d2 = (p - q).dot(p - q)
        if d2 < best_d2 - 1e-12:
            tangent = unit(seg)
            best = Projection(
                point=q,
                arc_length=s_base + t_clamped * seg_len,
                tangent=tangent,
                lateral=tangent.cross(p - q),
                clamped=(t != t_clamped),
            )
            best_d2 = d2
        s_base += seg_len
    assert best is not None
    return best


def polyline_length(points: list[Vec2]) -> float:
    return sum((b - a).norm() for a, b in zip(points[:-1], points[1:]))


def sample_arc(
    center: Vec2, radius: float, angle_start: float, angle_end: float, step: float = 1.0
) -> list[Vec2]:
    """Points on a circular arc, spaced at most ``step`` metres apart."""
    sweep = angle_end - angle_start
    n = max(2, int(math.ceil(abs(sweep) * radius / step)) + 1)
    return [
        Vec2(
            center.x + radius * math.cos(angle_start + sweep * i / (n - 1)),
            center.y + radius * math.sin(angle_start + sweep * i / (n - 1)),
        )
        for i in range(n)
    ]
