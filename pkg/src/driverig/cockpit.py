"""Live human-in-the-loop session: stepping, commands, takeover, feedback.

One stepping flow owns all session state. Commands and feedback enter
through small queues consumed between ticks, completions are applied
exactly once at a tick boundary, and the event log is append-only and
sufficient to replay the whole session against the same seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .agent import AgentExchange, Backend, BackendError, build_prompt, run_exchange
from .dsl import check_source, start_execution
from .dsl.gate import GateVerdict
from .evaluator import DEFAULT_PENALTIES, ScoreWeights, ttc_pairwise
from .executor import EgoPilot, default_cruise_intent
from .harness import score_run
from .memory import MemoryStore, retrieve
from .scenario import Scenario, scenario_drivers
from .sensing import sensor_snapshot
from .templates import SYSTEM_MESSAGE
from .trace import RunTrace
from .traffic import DriverModel, IdmParams
from .world import DT, Control, step_world


@dataclass(frozen=True)
class SessionEvent:
    tick: int
    kind: str      # command | queued | exchange | verdict | swap | matrix | takeover
    #              # | release | feedback | notice | fault
    payload: dict


@dataclass
class PendingExchange:
    exchange: AgentExchange
    instruction: str
    apply_at_tick: int


class Session:
    """One user, one scenario, one live world."""

    def __init__(
        self,
        session_id: str,
        user_id: str,
        scenario: Scenario,
        backend: Backend,
        store: MemoryStore | None = None,
        latency_ticks: int = 0,
        shots: int = 0,
        weights: ScoreWeights | None = None,
    ):
        self.session_id = session_id
        self.user_id = user_id
        self.scenario = scenario
        self.backend = backend
        self.store = store if store is not None else MemoryStore(None)
        self.latency_ticks = latency_ticks
        self.shots = shots
        self.weights = weights if weights is not None else ScoreWeights()

        self.world = scenario.initial
        self.drivers = scenario_drivers(scenario)
        self.pilot = EgoPilot()
        self.pilot.set_default_intent(default_cruise_intent(), 0)
        limit = scenario.initial.road.segment(scenario.initial.ego().segment_id).speed_limit
        self._takeover_driver = DriverModel(idm=IdmParams(desired_speed=limit))
        self.trace = RunTrace(ego_id="ego", dt=DT)
        self.trace.append_world(self.world)

        self.mode = "auto"  # "auto" | "taken_over"
        self.takeovers = 0
        self.pending: PendingExchange | None = None
        self.queued_command: str | None = None
        self.events: list[SessionEvent] = []
        self.exchanges: list[tuple[AgentExchange, str, int | None]] = []  # (exchange, I, record id)
        self.tau_min = math.inf
        self.collisions = 0
        self.closed = False
        self.last_thought = ""
        self.last_verdict: GateVerdict | None = None

    # -- event plumbing ----------------------------------------------------

    def _log(self, kind: str, **payload) -> SessionEvent:
        event = SessionEvent(tick=self.world.tick, kind=kind, payload=payload)
        self.events.append(event)
        return event

    # -- user actions (consumed between ticks) ------------------------------

    def submit_command(self, text: str) -> str:
        """Dispatch an instruction, or queue it (depth one, newest wins)."""
        if self.pending is not None:
            self.queued_command = text
            self._log("command", text=text, status="queued")
            return "queued"
        self._log("command", text=text, status="dispatched")
        self._dispatch(text)
        return "dispatched"

    def _dispatch(self, text: str) -> None:
        snapshot = sensor_snapshot(
            self.world, "ego", self.scenario.weather, self.scenario.traffic_density
        )
        history = retrieve(self.store.profile(self.user_id), text)
        bundle = build_prompt(
            SYSTEM_MESSAGE, snapshot, text, history=history, shots=self.shots
        )
        try:
            exchange = run_exchange(self.backend, bundle)
        except BackendError as exc:
            self._log("notice", text=f"backend unavailable: {exc}")
            return
        self.pending = PendingExchange(
            exchange=exchange,
            instruction=text,
            apply_at_tick=self.world.tick + max(1, self.latency_ticks),
        )

    def takeover(self) -> None:
        if self.mode != "taken_over":
            self.mode = "taken_over"
            self.takeovers += 1
            self._log("takeover", count=self.takeovers)

    def release(self) -> None:
        if self.mode == "taken_over":
            self.mode = "auto"
            self._log("release")

    def submit_feedback(self, text: str) -> str:
        """Attach feedback to the most recent exchange and persist it."""
        if not self.exchanges:
            self._log("notice", text="feedback ignored: no exchange yet")
            return "ignored"
        exchange, instruction, record_id = self.exchanges[-1]
        policy = exchange.program if exchange.program is not None else exchange.raw
        if record_id is None:
            rec = self.store.add_record(
                self.user_id,
                instruction=instruction,
                policy=policy,
                scene=exchange.bundle.context,
                feedback=text,
            )
            self.exchanges[-1] = (exchange, instruction, rec.record_id)
        else:
            self.store.set_feedback(self.user_id, record_id, text)
        self._log("feedback", text=text, instruction=instruction)
        return "stored"

    def close(self) -> None:
        """Trip end: commit exchanges that never received feedback."""
        if self.closed:
            return
        self.closed = True
        for i, (exchange, instruction, record_id) in enumerate(self.exchanges):
            if record_id is None and exchange.program is not None:
                rec = self.store.add_record(
                    self.user_id,
                    instruction=instruction,
                    policy=exchange.program,
                    scene=exchange.bundle.context,
                )
                self.exchanges[i] = (exchange, instruction, rec.record_id)
        self._log("closed")

    # -- stepping ------------------------------------------------------------

    def _apply_pending(self) -> None:
        assert self.pending is not None
        exchange = self.pending.exchange
        instruction = self.pending.instruction
        self.pending = None
        self.exchanges.append((exchange, instruction, None))
        self.last_thought = exchange.thought
        self._log(
            "exchange",
            instruction=instruction,
            thought=exchange.thought,
            latency=exchange.latency,
            backend=exchange.backend_id,
            error=exchange.error,
        )
        if exchange.error:
            self.last_verdict = GateVerdict(accepted=False, stage="format", reason=exchange.error)
            self._log("verdict", accepted=False, stage="format", reason=exchange.error)
            return
        if exchange.matrix is not None:
            clamps = self.pilot.apply_matrix(exchange.matrix)
            self.last_verdict = GateVerdict(accepted=True, stage="parameter")
            self._log(
                "matrix",
                applied=self.pilot.matrix.as_dict(),
                clamped=[c.parameter for c in clamps],
            )
            self._log("verdict", accepted=True, stage="parameter", reason="")
            return
        snapshot = sensor_snapshot(
            self.world, "ego", self.scenario.weather, self.scenario.traffic_density
        )
        program, verdict = check_source(exchange.program or "", snapshot)
        self.last_verdict = verdict
        self._log(
            "verdict", accepted=verdict.accepted, stage=verdict.stage, reason=verdict.reason
        )
        if verdict.accepted and program is not None:
            self.pilot.attach_program(start_execution(program), self.world.tick)
            self._log("swap", tick=self.world.tick)

    def tick(self) -> dict:
        """Advance one simulation step and return the rendered frame."""
        if self.pending is not None and self.world.tick >= self.pending.apply_at_tick:
            self._apply_pending()
            if self.queued_command is not None and self.pending is None:
                text = self.queued_command
                self.queued_command = None
                self._dispatch(text)
        snapshot = sensor_snapshot(
            self.world, "ego", self.scenario.weather, self.scenario.traffic_density
        )
        if self.mode == "taken_over":
            ego_control = self._takeover_driver.act(self.world, "ego", DT)
        else:
            ego_control = self.pilot.control(self.world, "ego", snapshot)
        controls: dict[str, Control] = {"ego": ego_control}
        for vid, driver in self.drivers.items():
            controls[vid] = driver.act(self.world, vid, DT)
        before = len(self.events)
        self.world, collisions = step_world(self.world, controls)
        self.trace.append_world(self.world, collisions)
        if collisions:
            self.collisions += len({e.ids for e in collisions})
            for event in collisions:
                self._log("notice", text=f"collision between {event.ids[0]} and {event.ids[1]}")
        self._update_tau()
        if self.pilot.program_state == "faulted" and self.pilot.fault_reason:
            self._log("fault", reason=self.pilot.fault_reason)
            self.pilot.fault_reason = ""
        return self.frame(events_from=before)

    def _update_tau(self) -> None:
        ego = self.world.ego()
        for other in self.world.vehicles:
            if other.id == ego.id:
                continue
            tau = ttc_pairwise(
                ego.position, ego.velocity(), other.position, other.velocity()
            )
            if tau is not None and 0 < tau < self.tau_min:
                self.tau_min = tau

    # -- views ----------------------------------------------------------------

    def frame(self, events_from: int | None = None) -> dict:
        new_events = (
            [
                {"tick": e.tick, "kind": e.kind, "payload": e.payload}
                for e in self.events[events_from:]
            ]
            if events_from is not None
            else []
        )
        return {
            "type": "frame",
            "session_id": self.session_id,
            "tick": self.world.tick,
            "time": self.world.time,
            "mode": self.mode,
            "pending": self.pending is not None,
            "takeovers": self.takeovers,
            "vehicles": [
                {
                    "id": v.id,
                    "x": v.position.x,
                    "y": v.position.y,
                    "heading": v.heading,
                    "speed": v.speed,
                    "lane": v.lane_index,
                    "segment": v.segment_id,
                    "length": v.length,
                    "width": v.width,
                    "role": v.role,
                }
                for v in self.world.vehicles
            ],
            "scores": {
                "tau_min": None if math.isinf(self.tau_min) else self.tau_min,
                "collisions": self.collisions,
                "event_count": len(self.events),
            },
            "last_thought": self.last_thought,
            "last_verdict": None
            if self.last_verdict is None
            else {
                "accepted": self.last_verdict.accepted,
                "stage": self.last_verdict.stage,
                "reason": self.last_verdict.reason,
            },
            "events": new_events,
        }

    def report(self) -> dict:
        card = score_run(
            self.scenario,
            self.trace,
            self.weights,
            penalties=DEFAULT_PENALTIES,
            latency=self.exchanges[-1][0].latency if self.exchanges else 0.0,
        )
        data = card.to_dict()
        data["takeovers"] = self.takeovers
        data["takeover_rate"] = 1.0 if self.takeovers > 0 else 0.0
        return data

    def event_log(self) -> list[dict]:
        return [{"tick": e.tick, "kind": e.kind, "payload": e.payload} for e in self.events]


USER_EVENT_KINDS = ("command", "takeover", "release", "feedback")


def replay_session(
    scenario: Scenario,
    backend: Backend,
    event_log: list[dict],
    ticks: int,
    store: MemoryStore | None = None,
    latency_ticks: int = 0,
    shots: int = 0,
) -> Session:
    """Re-run a session by applying the logged user events at their ticks."""
    session = Session(
        "replay", "replay-user", scenario, backend,
        store=store, latency_ticks=latency_ticks, shots=shots,
    )
    by_tick: dict[int, list[dict]] = {}
    for entry in event_log:
        if entry["kind"] in USER_EVENT_KINDS:
            by_tick.setdefault(entry["tick"], []).append(entry)
    for _ in range(ticks):
        for entry in by_tick.get(session.world.tick, ()):
            kind = entry["kind"]
            if kind == "command":
                session.submit_command(entry["payload"]["text"])
            elif kind == "takeover":
                session.takeover()
            elif kind == "release":
                session.release()
            elif kind == "feedback":
                session.submit_feedback(entry["payload"]["text"])
        session.tick()
    return session
