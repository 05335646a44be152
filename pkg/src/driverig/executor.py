"""Drives the ego vehicle: turns yielded intents into per-tick controls.

The pilot owns the program handle, resumes it when the active intent
completes (at most once per tick), and falls back to a stop intent when the
program faults. Longitudinal control is the personalized PID (or IDM when
following); lateral control is the personalized MPC tracking a lane
centerline or a junction turn path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .control import (
    ActionMatrix,
    ClampReport,
    DEFAULT_MATRIX,
    PidState,
    apply_action_matrix,
    pid_step,
    steer_along_path,
)
from .dsl.intents import ActionIntent, make_intent
from .dsl.interpreter import ExecutionHandle, Faulted, Finished, Yielded
from .geometry import Vec2, wrap_angle
from .sensing import ContextSnapshot
from .traffic import IdmParams, find_lead, idm_acceleration
from .world import Control, VehicleState, WorldState

A_MAX = 3.0          # m/s^2, vehicle-level acceleration bound
TURN_SPEED = 5.0     # m/s through a junction
SPEED_BAND = 0.3     # m/s, proceed completion tolerance
STOP_SPEED = 0.1     # m/s
SETTLE_LAT = 0.15    # m
SETTLE_HEAD = 0.05   # rad
LIMIT_FACTOR = 1.1   # dynamic speeds are capped at this fraction over the limit


@dataclass
class _IntentRun:
    """Runtime state for one active intent."""

    intent: ActionIntent
    start_tick: int
    target_lane: int | None = None
    merge_started: bool = False
    turn_path: list[Vec2] | None = None
    exit_segment: str | None = None
    hold_ticks: int = 0
    done: bool = False

    def age(self, tick: int, dt: float) -> float:
        return (tick - self.start_tick) * dt


@dataclass
class EgoPilot:
    """Executes one vehicle's policy programs and intents."""

    matrix: ActionMatrix = DEFAULT_MATRIX
    dt: float = 0.1
    wheelbase: float = 2.5
    horizon: int = 10
    fallback_kind: str = "stop"
    handle: ExecutionHandle | None = None
    run: _IntentRun | None = None
    pid: PidState = field(default_factory=PidState)
    follow_params: IdmParams | None = None
    program_state: str = "idle"  # idle | running | finished | faulted
    fault_reason: str = ""
    swap_log: list[int] = field(default_factory=list)

    def attach_program(self, handle: ExecutionHandle, tick: int) -> None:
        """Swap in a freshly gated program; it resumes on the next control."""
        self.handle = handle
        self.program_state = "running"
        self.run = None
        self.pid = PidState()
        self.swap_log.append(tick)

    def set_default_intent(self, intent: ActionIntent, tick: int) -> None:
        self.run = _IntentRun(intent=intent, start_tick=tick)

    def apply_matrix(self, matrix: ActionMatrix) -> list[ClampReport]:
        applied, clamps = apply_action_matrix(matrix)
        self.matrix = applied
        self.pid = PidState()
        return clamps

    def control_callable(self, ego_id: str):
        """Adapter matching the harness ego_control(world, snapshot) signature."""
        return lambda world, snapshot: self.control(world, ego_id, snapshot)

    # -- intent lifecycle -------------------------------------------------

    def _resume(self, snapshot: ContextSnapshot, world: WorldState, ego: VehicleState) -> None:
        assert self.handle is not None
        result = self.handle.resume(snapshot)
        if isinstance(result, Yielded):
            self.run = _IntentRun(intent=result.intent, start_tick=world.tick)
            self._prepare(world, ego)
        elif isinstance(result, Finished):
            self.program_state = "finished"  # hold the last intent's behavior
        elif isinstance(result, Faulted):
            self.program_state = "faulted"
            self.fault_reason = result.reason
            fallback = make_intent(self.fallback_kind, [])
            self.run = _IntentRun(intent=fallback, start_tick=world.tick)

    def _prepare(self, world: WorldState, ego: VehicleState) -> None:
        """Resolve world-dependent parameters at intent start."""
        assert self.run is not None
        intent = self.run.intent
        seg = world.road.segment(ego.segment_id)
        if intent.kind == "change_lane":
            offset = -1 if intent.param("direction") == "left" else 1
            self.run.target_lane = min(seg.lane_count - 1, max(0, ego.lane_index + offset))
        elif intent.kind == "turn":
            direction = str(intent.param("direction"))
            if world.road.has_exit(ego.segment_id, direction):
                exit_id = world.road.connections[(ego.segment_id, direction)]
                path = world.road.turn_path(ego.segment_id, direction)
                lane = seg.lane_count - 1 if direction == "right" else 0
                exit_seg = world.road.segment(exit_id)
                entry = seg.lane_center(lane)
                tail = exit_seg.lane_center(
                    exit_seg.lane_count - 1 if direction == "right" else 0
                )
                self.run.turn_path = [entry[0]] + path + [tail[1]]
                self.run.exit_segment = exit_id
            else:
                self.run.done = True  # no exit here; nothing to execute
        elif intent.kind == "pull_over":
            self.run.target_lane = seg.lane_count - 1

    def _complete(self, world: WorldState, ego: VehicleState, snapshot: ContextSnapshot) -> bool:
        assert self.run is not None
        run = self.run
        intent = run.intent
        if run.done:
            return True
        if run.age(world.tick, self.dt) > intent.timeout:
            return True
        seg = world.road.segment(ego.segment_id)
        if intent.kind == "proceed":
            target = self._proceed_target(intent, seg.speed_limit)
            return abs(ego.speed - target) <= SPEED_BAND
        if intent.kind == "stop":
            return ego.speed <= STOP_SPEED
        if intent.kind == "follow_lead":
            gap, lead_speed = find_lead(world, ego, ego.lane_index)
            if math.isinf(gap):
                return abs(ego.speed - seg.speed_limit) <= SPEED_BAND
            desired = 2.0 + ego.speed * float(intent.param("time_headway"))
            settled = abs(gap - desired) <= max(1.0, 0.1 * desired) and abs(
                ego.speed - lead_speed
            ) <= 0.5
            run.hold_ticks = run.hold_ticks + 1 if settled else 0
            return run.hold_ticks >= 10
        if intent.kind == "change_lane":
            target = run.target_lane if run.target_lane is not None else ego.lane_index
            if not run.merge_started or ego.lane_index != target:
                return False
            lat = abs(seg.lateral_offset(ego.position) - seg.lane_offset(target))
            head = abs(wrap_angle(ego.heading - seg.heading))
            return lat <= SETTLE_LAT and head <= SETTLE_HEAD
        if intent.kind == "turn":
            if run.exit_segment is None:
                return True
            return ego.segment_id == run.exit_segment and world.road.segment(
                run.exit_segment
            ).along(ego.position) >= 3.0
        if intent.kind == "pull_over":
            rightmost = seg.lane_count - 1
            lat = abs(seg.lateral_offset(ego.position) - seg.lane_offset(rightmost))
            return ego.lane_index == rightmost and lat <= 0.3 and ego.speed <= STOP_SPEED
        return False

    # -- per-kind control -------------------------------------------------

    @staticmethod
    def _proceed_target(intent: ActionIntent, speed_limit: float) -> float:
        return min(max(0.0, float(intent.param("speed"))), LIMIT_FACTOR * speed_limit)

    def _speed_accel(self, target: float, speed: float) -> float:
        gains = (self.matrix.kp, self.matrix.ki, self.matrix.kd)
        alpha, self.pid = pid_step(self.pid, target - speed, self.dt, gains, a_max=A_MAX)
        return alpha

    def _lane_keep_steer(self, world: WorldState, ego: VehicleState, lane: int) -> float:
        seg = world.road.segment(ego.segment_id)
        lane = min(seg.lane_count - 1, max(0, lane))
        return steer_along_path(
            seg.lane_center(lane),
            ego.position,
            ego.heading,
            ego.speed,
            weights=(self.matrix.wl, self.matrix.wh, self.matrix.ws),
            horizon=self.horizon,
            dt=self.dt,
            wheelbase=self.wheelbase,
        )

    def _merge_clear(self, world: WorldState, ego: VehicleState, lane: int) -> bool:
        seg = world.road.segment(ego.segment_id)
        ego_s = seg.along(ego.position)
        lead_gap, _ = find_lead(world, ego, lane)
        if lead_gap < max(5.0, 0.8 * ego.speed):
            return False
        for other in world.vehicles:
            if other.id == ego.id or other.segment_id != ego.segment_id:
                continue
            if other.lane_index != lane:
                continue
            back_gap = ego_s - seg.along(other.position) - (other.length + ego.length) / 2.0
            if 0 <= back_gap < max(5.0, 0.8 * other.speed):
                return False
        return True

    def control(
        self, world: WorldState, ego_id: str, snapshot: ContextSnapshot
    ) -> Control:
        ego = world.vehicle(ego_id)
        if self.program_state == "running" and self.handle is not None:
            if self.run is None or self._complete(world, ego, snapshot):
                self._resume(snapshot, world, ego)
        if self.run is None:
            return Control(accel=self._speed_accel(0.0, ego.speed),
                           steer=self._lane_keep_steer(world, ego, ego.lane_index))
        intent = self.run.intent
        seg = world.road.segment(ego.segment_id)
        if intent.kind == "proceed":
            accel = self._speed_accel(self._proceed_target(intent, seg.speed_limit), ego.speed)
            steer = self._lane_keep_steer(world, ego, ego.lane_index)
        elif intent.kind == "stop":
            accel = self._speed_accel(0.0, ego.speed)
            steer = self._lane_keep_steer(world, ego, ego.lane_index)
        elif intent.kind == "follow_lead":
            params = self.follow_params or IdmParams(desired_speed=seg.speed_limit)
            params = IdmParams(
                desired_speed=params.desired_speed,
                time_headway=float(intent.param("time_headway")),
                min_gap=params.min_gap,
                max_accel=params.max_accel,
                comfort_decel=params.comfort_decel,
                exponent=params.exponent,
            )
            gap, lead_speed = find_lead(world, ego, ego.lane_index)
            accel = idm_acceleration(ego.speed, gap, lead_speed, params)
            steer = self._lane_keep_steer(world, ego, ego.lane_index)
        elif intent.kind == "change_lane":
            target = self.run.target_lane if self.run.target_lane is not None else ego.lane_index
            if not self.run.merge_started and self._merge_clear(world, ego, target):
                self.run.merge_started = True
            lane = target if self.run.merge_started else ego.lane_index
            gap, lead_speed = find_lead(world, ego, ego.lane_index)
            gap2, lead_speed2 = find_lead(world, ego, target)
            if gap2 < gap:
                gap, lead_speed = gap2, lead_speed2
            hold = IdmParams(desired_speed=max(ego.speed, 1.0))
            accel = idm_acceleration(ego.speed, gap, lead_speed, hold)
            steer = self._lane_keep_steer(world, ego, lane)
        elif intent.kind == "turn":
            if self.run.turn_path is not None:
                steer = steer_along_path(
                    self.run.turn_path,
                    ego.position,
                    ego.heading,
                    ego.speed,
                    weights=(self.matrix.wl, self.matrix.wh, self.matrix.ws),
                    horizon=self.horizon,
                    dt=self.dt,
                    wheelbase=self.wheelbase,
                )
            else:
                steer = self._lane_keep_steer(world, ego, ego.lane_index)
            on_exit = self.run.exit_segment == ego.segment_id
            target = seg.speed_limit if on_exit else min(TURN_SPEED, seg.speed_limit)
            accel = self._speed_accel(target, ego.speed)
        elif intent.kind == "pull_over":
            rightmost = seg.lane_count - 1
            if ego.lane_index < rightmost:
                target = ego.lane_index + 1
                if not self.run.merge_started and self._merge_clear(world, ego, target):
                    self.run.merge_started = True
                lane = target if self.run.merge_started else ego.lane_index
                if self.run.merge_started and ego.lane_index == target:
                    self.run.merge_started = False  # continue to the next lane over
                accel = self._speed_accel(min(5.0, seg.speed_limit), ego.speed)
                steer = self._lane_keep_steer(world, ego, lane)
            else:
                accel = self._speed_accel(0.0, ego.speed)
                steer = self._lane_keep_steer(world, ego, rightmost)
        else:
            accel, steer = 0.0, 0.0
        accel = min(A_MAX, max(-A_MAX, accel))
        return Control(accel=accel, steer=steer)


def default_cruise_intent() -> ActionIntent:
    """Adaptive-cruise default used before any program is attached."""
    return make_intent("follow_lead", [1.5])
