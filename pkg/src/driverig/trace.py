"""Timestamped kinematic/event log of a run, with a stable line export.

Export format (version ``driverig-trace v1``), line-delimited:

* vehicle rows: ``tick,time,vehicle_id,x,y,heading,speed,lane_index,segment_id,role,length,width``
* event rows:   ``tick,time,!collision,id_a,id_b,relative_speed``

Rows are ordered by tick, vehicles sorted by id within a tick, events after
the vehicle rows of their tick. Floats use ``repr`` so a re-import is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .geometry import Vec2
from .world import CollisionEvent, VehicleState, WorldState

TRACE_SCHEMA = "driverig-trace v1"


@dataclass(frozen=True)
class TraceFrame:
    tick: int
    time: float
    vehicles: tuple[VehicleState, ...]
    events: tuple[CollisionEvent, ...] = ()


@dataclass
class RunTrace:
    ego_id: str
    dt: float
    frames: list[TraceFrame] = field(default_factory=list)

    def append_world(self, world: WorldState, events: list[CollisionEvent] | None = None) -> None:
        self.frames.append(
            TraceFrame(
                tick=world.tick,
                time=world.time,
                vehicles=world.vehicles,
                events=tuple(events or ()),
            )
        )

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def duration(self) -> float:
        return self.frames[-1].time if self.frames else 0.0

    def ego_states(self) -> list[VehicleState]:
        return [f.vehicles[self._index_of(self.ego_id, f)] for f in self.frames]

    def vehicle_states(self, vehicle_id: str) -> list[VehicleState]:
        return [f.vehicles[self._index_of(vehicle_id, f)] for f in self.frames]

    @staticmethod
    def _index_of(vehicle_id: str, frame: TraceFrame) -> int:
        for i, v in enumerate(frame.vehicles):
            if v.id == vehicle_id:
                return i
        raise KeyError(f"vehicle {vehicle_id!r} missing from frame {frame.tick}")

    def collision_events(self) -> list[CollisionEvent]:
        return [e for f in self.frames for e in f.events]

    def has_collision(self) -> bool:
        return any(f.events for f in self.frames)

    def to_lines(self) -> list[str]:
        lines = [f"# {TRACE_SCHEMA}", f"# ego={self.ego_id} dt={self.dt!r}"]
        for f in self.frames:
            for v in sorted(f.vehicles, key=lambda v: v.id):
                lines.append(
                    f"{f.tick},{f.time!r},{v.id},{v.position.x!r},{v.position.y!r},"
                    f"{v.heading!r},{v.speed!r},{v.lane_index},{v.segment_id},{v.role},"
                    f"{v.length!r},{v.width!r}"
                )
            for e in f.events:
                lines.append(
                    f"{f.tick},{f.time!r},!collision,{e.ids[0]},{e.ids[1]},{e.relative_speed!r}"
                )
        return lines

    @classmethod
    def from_lines(cls, lines: list[str]) -> "RunTrace":
        if not lines or lines[0].strip() != f"# {TRACE_SCHEMA}":
            raise ValueError(f"not a {TRACE_SCHEMA} stream")
        header = lines[1].strip().removeprefix("# ").split()
        ego_id = header[0].removeprefix("ego=")
        dt = float(header[1].removeprefix("dt="))
        trace = cls(ego_id=ego_id, dt=dt)
        frames: dict[int, dict] = {}
        for line in lines[2:]:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            tick = int(parts[0])
            bucket = frames.setdefault(tick, {"time": float(parts[1]), "vehicles": [], "events": []})
            if parts[2] == "!collision":
                bucket["events"].append(
                    CollisionEvent(
                        time=float(parts[1]), ids=(parts[3], parts[4]), relative_speed=float(parts[5])
                    )
                )
            else:
                bucket["vehicles"].append(
                    VehicleState(
                        id=parts[2],
                        position=Vec2(float(parts[3]), float(parts[4])),
                        heading=float(parts[5]),
                        speed=float(parts[6]),
                        lane_index=int(parts[7]),
                        segment_id=parts[8],
                        role=parts[9],
                        length=float(parts[10]),
                        width=float(parts[11]),
                    )
                )
        for tick in sorted(frames):
            b = frames[tick]
            trace.frames.append(
                TraceFrame(
                    tick=tick,
                    time=b["time"],
                    vehicles=tuple(b["vehicles"]),
                    events=tuple(b["events"]),
                )
            )
        return trace
