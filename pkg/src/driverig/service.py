"""Cockpit service: session lifecycle over HTTP plus a WebSocket frame stream.

Message schemas (version ``driverig-cockpit v1``):

* ``POST /sessions`` body ``{user, scenario_index?, latency_ticks?, shots?}``
  -> ``{session_id, hello}`` where ``hello`` carries scenario metadata and
  road geometry.
* ``GET /sessions/{id}`` -> ``{hello, frame, events, report}`` — everything a
  client needs to reconstruct its view mid-session.
* ``POST /sessions/{id}/step`` body ``{ticks}`` -> ``{frames: [...]}``
  (manual pacing; rejected while a wall-clock pacer owns the session).
* ``POST /sessions/{id}/command`` body ``{text}`` -> ``{status}``.
* ``POST /sessions/{id}/takeover`` / ``/release`` -> ``{mode, takeovers}``.
* ``POST /sessions/{id}/feedback`` body ``{text}`` -> ``{status}``.
* ``GET /sessions/{id}/memory`` -> ``{records: [...]}``.
* ``GET /sessions/{id}/report`` -> score card dict.
* ``WS /sessions/{id}/frames`` -> ``{type: hello}`` then one ``{type: frame}``
  per tick; the socket also accepts the mutation messages
  ``{type: command|takeover|release|feedback|step, ...}``.

All simulation mutations run on the event loop, one flow per session.
"""

from __future__ import annotations

import asyncio
import itertools
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from pydantic import BaseModel

from .agent import Backend
from .cockpit import Session
from .harness import build_backend, default_scripted_backend
from .memory import MemoryStore
from .scenario import Scenario, generate_suite, load_suite
from .world import DT

PROTOCOL_VERSION = "driverig-cockpit v1"


@dataclass
class ServiceConfig:
    suite_path: str | None = None
    backend: dict | None = None       # backend spec for new sessions
    memory_dir: str | None = None
    pace: float = 0.0                 # frames per wall second; 0 = manual stepping
    suite_seed: int = 7
    suite_size: int = 49
    scenarios: list[Scenario] = field(default_factory=list)

    def resolve_scenarios(self) -> list[Scenario]:
        if self.scenarios:
            return self.scenarios
        if self.suite_path:
            self.scenarios = load_suite(self.suite_path)
        else:
            self.scenarios = generate_suite(self.suite_seed, self.suite_size)
        return self.scenarios


class CreateSessionRequest(BaseModel):
    user: str = "driver"
    scenario_index: int = 0
    scenario_id: str | None = None
    latency_ticks: int = 0
    shots: int = 0


class TextRequest(BaseModel):
    text: str


class StepRequest(BaseModel):
    ticks: int = 1


def _road_geometry(scenario: Scenario) -> dict:
    road = scenario.initial.road
    return {
        "segments": [
            {
                "id": seg.id,
                "start": [seg.start.x, seg.start.y],
                "end": [seg.end.x, seg.end.y],
                "lane_count": seg.lane_count,
                "lane_width": seg.lane_width,
                "speed_limit": seg.speed_limit,
            }
            for seg in sorted(road.segments.values(), key=lambda s: s.id)
        ],
        "connections": [
            {"from": a, "direction": d, "to": b} for (a, d), b in sorted(road.connections.items())
        ],
    }


def _hello(session: Session) -> dict:
    return {
        "type": "hello",
        "protocol": PROTOCOL_VERSION,
        "session_id": session.session_id,
        "user": session.user_id,
        "scenario": {
            "id": session.scenario.id,
            "category": session.scenario.category,
            "setting": session.scenario.setting,
            "instruction": session.scenario.instruction,
            "weather": session.scenario.weather,
            "time_limit": session.scenario.time_limit,
        },
        "road": _road_geometry(session.scenario),
        "dt": DT,
    }


@dataclass
class _LiveSession:
    session: Session
    subscribers: list[asyncio.Queue] = field(default_factory=list)
    pacer: asyncio.Task | None = None

    def broadcast(self, frame: dict) -> None:
        for queue in self.subscribers:
            if queue.full():
                try:
                    queue.get_nowait()  # drop the oldest; newest wins
                except asyncio.QueueEmpty:
                    pass
            queue.put_nowait(frame)

    def step(self, ticks: int) -> list[dict]:
        frames = []
        for _ in range(ticks):
            frame = self.session.tick()
            self.broadcast(frame)
            frames.append(frame)
        return frames


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    scenarios = config.resolve_scenarios()
    store = MemoryStore(config.memory_dir)
    app = FastAPI(title="driverig cockpit", version=PROTOCOL_VERSION)
    live: dict[str, _LiveSession] = {}
    counter = itertools.count(1)

    def make_backend() -> Backend:
        if config.backend is None:
            return default_scripted_backend()
        return build_backend(config.backend)

    def get_live(session_id: str) -> _LiveSession:
        if session_id not in live:
            raise HTTPException(status_code=404, detail=f"no session {session_id}")
        return live[session_id]

    async def pace_loop(entry: _LiveSession) -> None:
        assert config.pace > 0
        interval = 1.0 / config.pace
        try:
            while True:
                entry.step(1)
                await asyncio.sleep(interval)
        except asyncio.CancelledError:
            pass

    @app.post("/sessions")
    async def create_session(request: CreateSessionRequest) -> dict:
        if request.scenario_id is not None:
            matches = [s for s in scenarios if s.id == request.scenario_id]
            if not matches:
                raise HTTPException(status_code=404, detail=f"no scenario {request.scenario_id}")
            scenario = matches[0]
        else:
            if not 0 <= request.scenario_index < len(scenarios):
                raise HTTPException(status_code=400, detail="scenario_index out of range")
            scenario = scenarios[request.scenario_index]
        session_id = f"s{next(counter):04d}"
        session = Session(
            session_id,
            request.user,
            scenario,
            make_backend(),
            store=store,
            latency_ticks=request.latency_ticks,
            shots=request.shots,
        )
        entry = _LiveSession(session=session)
        live[session_id] = entry
        if config.pace > 0:
            entry.pacer = asyncio.create_task(pace_loop(entry))
        return {"session_id": session_id, "hello": _hello(session)}

    @app.get("/sessions/{session_id}")
    async def get_session(session_id: str) -> dict:
        entry = get_live(session_id)
        return {
            "hello": _hello(entry.session),
            "frame": entry.session.frame(),
            "events": entry.session.event_log(),
            "report": entry.session.report(),
        }

    @app.post("/sessions/{session_id}/step")
    async def step_session(session_id: str, request: StepRequest) -> dict:
        entry = get_live(session_id)
        if entry.pacer is not None:
            raise HTTPException(status_code=409, detail="session is wall-clock paced")
        if not 1 <= request.ticks <= 10_000:
            raise HTTPException(status_code=400, detail="ticks must be in [1, 10000]")
        frames = entry.step(request.ticks)
        return {"frames": frames}

    @app.post("/sessions/{session_id}/command")
    async def submit_command(session_id: str, request: TextRequest) -> dict:
        entry = get_live(session_id)
        status = entry.session.submit_command(request.text)
        return {"status": status}

    @app.post("/sessions/{session_id}/takeover")
    async def takeover(session_id: str) -> dict:
        entry = get_live(session_id)
        entry.session.takeover()
        return {"mode": entry.session.mode, "takeovers": entry.session.takeovers}

    @app.post("/sessions/{session_id}/release")
    async def release(session_id: str) -> dict:
        entry = get_live(session_id)
        entry.session.release()
        return {"mode": entry.session.mode, "takeovers": entry.session.takeovers}

    @app.post("/sessions/{session_id}/feedback")
    async def submit_feedback(session_id: str, request: TextRequest) -> dict:
        entry = get_live(session_id)
        status = entry.session.submit_feedback(request.text)
        return {"status": status}

    @app.get("/sessions/{session_id}/memory")
    async def memory_profile(session_id: str) -> dict:
        entry = get_live(session_id)
        profile = store.profile(entry.session.user_id)
        return {
            "user": profile.user_id,
            "records": [
                {
                    "record_id": r.record_id,
                    "instruction": r.instruction,
                    "policy": r.policy,
                    "scene": r.scene,
                    "feedback": r.feedback,
                    "timestamp": r.timestamp,
                }
                for r in profile.records
            ],
        }

    @app.get("/sessions/{session_id}/report")
    async def session_report(session_id: str) -> dict:
        entry = get_live(session_id)
        return entry.session.report()

    @app.delete("/sessions/{session_id}")
    async def close_session(session_id: str) -> dict:
        entry = get_live(session_id)
        if entry.pacer is not None:
            entry.pacer.cancel()
        entry.session.close()
        del live[session_id]
        return {"closed": session_id}

    @app.websocket("/sessions/{session_id}/frames")
    async def frame_stream(websocket: WebSocket, session_id: str) -> None:
        await websocket.accept()
        if session_id not in live:
            await websocket.close(code=4004, reason=f"no session {session_id}")
            return
        entry = live[session_id]
        queue: asyncio.Queue = asyncio.Queue(maxsize=256)
        entry.subscribers.append(queue)
        await websocket.send_json(_hello(entry.session))

        async def reader() -> None:
            while True:
                message = await websocket.receive_json()
                kind = message.get("type")
                if kind == "command":
                    entry.session.submit_command(message.get("text", ""))
                elif kind == "takeover":
                    entry.session.takeover()
                elif kind == "release":
                    entry.session.release()
                elif kind == "feedback":
                    entry.session.submit_feedback(message.get("text", ""))
                elif kind == "step" and entry.pacer is None:
                    entry.step(int(message.get("ticks", 1)))

        reader_task = asyncio.create_task(reader())
        try:
            while True:
                frame = await queue.get()
                await websocket.send_json(frame)
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            reader_task.cancel()
            if queue in entry.subscribers:
                entry.subscribers.remove(queue)

    return app
