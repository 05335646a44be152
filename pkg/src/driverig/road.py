"""Road network: straight multi-lane segments plus an optional crossroads.

Lane indices run from 0 at the leftmost lane to ``lane_count - 1`` at the
rightmost. Lane centerlines are offset from the segment reference line along
its left normal, so a segment's geometry is fully described by two endpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .geometry import Vec2, sample_arc, unit, wrap_angle

EXIT_DIRECTIONS = ("left", "right", "straight")


@dataclass(frozen=True)
class Segment:
    """One straight, one-way stretch of road."""

    id: str
    start: Vec2
    end: Vec2
    lane_count: int
    lane_width: float
    speed_limit: float

    def __post_init__(self) -> None:
        if self.lane_count < 1:
            raise ValueError(f"segment {self.id}: lane_count must be >= 1")
        if self.speed_limit <= 0:
            raise ValueError(f"segment {self.id}: speed_limit must be > 0")
        if (self.end - self.start).norm() == 0.0:
            raise ValueError(f"segment {self.id}: zero length")

    @property
    def length(self) -> float:
        return (self.end - self.start).norm()

    @property
    def direction(self) -> Vec2:
        return unit(self.end - self.start)

    @property
    def heading(self) -> float:
        d = self.direction
        return math.atan2(d.y, d.x)

    def lane_offset(self, lane: int) -> float:
        """Signed left-normal offset of a lane center from the reference line."""
        return ((self.lane_count - 1) / 2.0 - lane) * self.lane_width

    def lane_center(self, lane: int) -> list[Vec2]:
        if not 0 <= lane < self.lane_count:
            raise ValueError(f"segment {self.id}: lane {lane} out of range")
        n = self.direction.left_normal()
        off = n.scaled(self.lane_offset(lane))
        return [self.start + off, self.end + off]

    def lateral_offset(self, p: Vec2) -> float:
        """Left-normal offset of a point from the reference line."""
        return self.direction.left_normal().dot(p - self.start)

    def along(self, p: Vec2) -> float:
        """Arc length of the projection of a point onto the reference line."""
        return self.direction.dot(p - self.start)

    def nearest_lane(self, p: Vec2) -> int:
        raw = (self.lane_count - 1) / 2.0 - self.lateral_offset(p) / self.lane_width
        return min(self.lane_count - 1, max(0, round(raw)))


@dataclass
class RoadNetwork:
    """Segments plus the connectivity of at most one two-way intersection."""

    segments: dict[str, Segment]
    connections: dict[tuple[str, str], str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for (seg_id, direction), target in self.connections.items():
            if seg_id not in self.segments or target not in self.segments:
                raise ValueError(f"connection ({seg_id}, {direction}) references unknown segment")
            if direction not in EXIT_DIRECTIONS:
                raise ValueError(f"unknown exit direction {direction!r}")
        approach_ids = {seg_id for seg_id, _ in self.connections}
        for seg_id in approach_ids:
            have = {d for d in EXIT_DIRECTIONS if (seg_id, d) in self.connections}
            if have != set(EXIT_DIRECTIONS):
                raise ValueError(f"approach {seg_id} must have left/right/straight exits")

    def segment(self, seg_id: str) -> Segment:
        return self.segments[seg_id]

    def exits_from(self, seg_id: str) -> dict[str, str]:
        return {d: self.connections[(seg_id, d)] for d in EXIT_DIRECTIONS if (seg_id, d) in self.connections}

    def has_exit(self, seg_id: str, direction: str) -> bool:
        return (seg_id, direction) in self.connections

    def turn_path(self, seg_id: str, direction: str) -> list[Vec2]:
        """Waypoints from the end of an approach lane onto the exit lane.

        Straight connections are a line across the junction box; turns are
        circular arcs tangent to both lane centerlines.
        """
        exit_id = self.connections[(seg_id, direction)]
        seg, exit_seg = self.segments[seg_id], self.segments[exit_id]
        # Turns use the single-lane centerline of approach and exit.
        p_a = seg.lane_center(seg.lane_count - 1)[1] if direction == "right" else seg.lane_center(0)[1]
        p_b = exit_seg.lane_center(exit_seg.lane_count - 1)[0] if direction == "right" else exit_seg.lane_center(0)[0]
        u_a, u_b = seg.direction, exit_seg.direction
        if direction == "straight":
            return [p_a, p_b]
        # Arc center sits on the normal lines through both tangent points:
        # (C - p_a) . u_a = 0 and (C - p_b) . u_b = 0.
        det = u_a.x * u_b.y - u_a.y * u_b.x
        if abs(det) < 1e-9:
            return [p_a, p_b]
        ca = u_a.dot(p_a)
        cb = u_b.dot(p_b)
        cx = (ca * u_b.y - cb * u_a.y) / det
        cy = (cb * u_a.x - ca * u_b.x) / det
        center = Vec2(cx, cy)
        radius = (p_a - center).norm()
        a0 = math.atan2(p_a.y - center.y, p_a.x - center.x)
        a1 = math.atan2(p_b.y - center.y, p_b.x - center.x)
        sweep = wrap_angle(a1 - a0)
        if direction == "left" and sweep < 0:
            sweep += 2.0 * math.pi
        if direction == "right" and sweep > 0:
            sweep -= 2.0 * math.pi
        return sample_arc(center, radius, a0, a0 + sweep, step=1.0)


def straight_highway(
    lanes: int = 3,
    length: float = 600.0,
    lane_width: float = 4.0,
    speed_limit: float = 25.0,
) -> RoadNetwork:
    """One-way multi-lane highway along +x, reference line on y = 0."""
    seg = Segment(
        id="main",
        start=Vec2(0.0, 0.0),
        end=Vec2(length, 0.0),
        lane_count=lanes,
        lane_width=lane_width,
        speed_limit=speed_limit,
    )
    return RoadNetwork(segments={seg.id: seg})


def crossroads(
    arm_length: float = 150.0,
    lane_width: float = 4.0,
    speed_limit: float = 15.0,
    junction_half: float = 8.0,
) -> RoadNetwork:
    """Two-way crossroads: one lane per direction, right-hand traffic.

    Approach segments are named ``in_<compass>`` and exits ``out_<compass>``
    by direction of travel; every approach connects to the three exits that
    do not double back.
    """
    w = lane_width / 2.0
    j = junction_half
    far = junction_half + arm_length

    def seg(seg_id: str, start: Vec2, end: Vec2) -> Segment:
        return Segment(
            id=seg_id, start=start, end=end,
            lane_count=1, lane_width=lane_width, speed_limit=speed_limit,
        )

    segments = {
        "in_e": seg("in_e", Vec2(-far, -w), Vec2(-j, -w)),
        "out_e": seg("out_e", Vec2(j, -w), Vec2(far, -w)),
        "in_w": seg("in_w", Vec2(far, w), Vec2(j, w)),
        "out_w": seg("out_w", Vec2(-j, w), Vec2(-far, w)),
        "in_n": seg("in_n", Vec2(w, -far), Vec2(w, -j)),
        "out_n": seg("out_n", Vec2(w, j), Vec2(w, far)),
        "in_s": seg("in_s", Vec2(-w, far), Vec2(-w, j)),
        "out_s": seg("out_s", Vec2(-w, -j), Vec2(-w, -far)),
    }
    connections = {
        ("in_e", "straight"): "out_e",
        ("in_e", "left"): "out_n",
        ("in_e", "right"): "out_s",
        ("in_w", "straight"): "out_w",
        ("in_w", "left"): "out_s",
        ("in_w", "right"): "out_n",
        ("in_n", "straight"): "out_n",
        ("in_n", "left"): "out_w",
        ("in_n", "right"): "out_e",
        ("in_s", "straight"): "out_s",
        ("in_s", "left"): "out_e",
        ("in_s", "right"): "out_w",
    }
    return RoadNetwork(segments=segments, connections=connections)
