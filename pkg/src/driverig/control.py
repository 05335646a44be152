"""Longitudinal PID and lateral linear-MPC controllers.

The six tunable parameters — PID gains (kp, ki, kd) and MPC weights
(wl, wh, ws) — arrive as a 2x3 action matrix from the language agent and are
clamped into a shared bounds table. The same table drives the evaluator's
command-alignment score, so there is a single source of truth for what a
"reasonable" parameter is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Vec2, project_on_polyline, wrap_angle


class MatrixRejected(ValueError):
    """Raised when an action matrix contains non-finite entries."""


class ControllerConfigError(ValueError):
    """Raised for degenerate controller configuration (e.g. all-zero weights)."""


@dataclass(frozen=True)
class ActionMatrix:
    """2x3 parameter block: PID gains on row one, MPC weights on row two."""

    kp: float
    ki: float
    kd: float
    wl: float  # lateral-error weight (Q)
    wh: float  # heading-error weight (Q)
    ws: float  # steering-effort weight (R)

    PARAM_NAMES = ("kp", "ki", "kd", "wl", "wh", "ws")

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in self.PARAM_NAMES}


@dataclass(frozen=True)
class ParamBounds:
    """Breakpoints for one parameter: hard range and preferred band."""

    minimum: float
    lower: float
    upper: float
    maximum: float

    def __post_init__(self) -> None:
        if not (self.minimum < self.lower <= self.upper < self.maximum):
            raise ControllerConfigError(
                f"degenerate bounds (min={self.minimum}, lower={self.lower}, "
                f"upper={self.upper}, max={self.maximum})"
            )


# Shared bounds table: controllers clamp into [minimum, maximum]; the
# command-alignment score treats [lower, upper) as the full-credit band.
PARAMETER_BOUNDS: dict[str, ParamBounds] = {
    "kp": ParamBounds(0.1, 0.4, 1.2, 2.0),
    "ki": ParamBounds(0.0, 0.02, 0.2, 0.5),
    "kd": ParamBounds(0.0, 0.05, 0.5, 1.0),
    "wl": ParamBounds(0.1, 0.5, 3.0, 6.0),
    "wh": ParamBounds(0.1, 0.5, 3.0, 6.0),
    "ws": ParamBounds(0.05, 0.2, 2.0, 5.0),
}

DEFAULT_MATRIX = ActionMatrix(kp=0.8, ki=0.1, kd=0.2, wl=1.0, wh=1.0, ws=1.0)


@dataclass(frozen=True)
class ClampReport:
    parameter: str
    requested: float
    applied: float


def apply_action_matrix(
    matrix: ActionMatrix,
    bounds: dict[str, ParamBounds] | None = None,
) -> tuple[ActionMatrix, list[ClampReport]]:
    """Clamp every entry into its configured range, reporting each clamp.

    Non-finite entries reject the whole matrix so the caller can keep its
    previous configuration.
    """
    bounds = bounds if bounds is not None else PARAMETER_BOUNDS
    values = matrix.as_dict()
    for name, value in values.items():
        if not math.isfinite(value):
            raise MatrixRejected(f"non-finite entry {name}={value}")
    clamps: list[ClampReport] = []
    applied: dict[str, float] = {}
    for name, value in values.items():
        b = bounds[name]
        clamped = min(b.maximum, max(b.minimum, value))
        if clamped != value:
            clamps.append(ClampReport(parameter=name, requested=value, applied=clamped))
        applied[name] = clamped
    return ActionMatrix(**applied), clamps


@dataclass(frozen=True)
class PidState:
    integral: float = 0.0     # accumulated error * dt
    prev_error: float = 0.0


def pid_step(
    state: PidState,
    e_v: float,
    dt: float,
    gains: tuple[float, float, float],
    a_max: float = 10.0,
) -> tuple[float, PidState]:
    """One discrete PID update on the speed error.

    The integral accumulates before clamping (anti-windup bound a_max/ki);
    the output is clamped to [-a_max, a_max].
    """
    if dt <= 0:
        raise ControllerConfigError(f"dt must be > 0, got {dt}")
    kp, ki, kd = gains
    integral = state.integral + e_v * dt
    if ki > 0:
        windup = a_max / ki
        integral = min(windup, max(-windup, integral))
    derivative = (e_v - state.prev_error) / dt
    alpha = kp * e_v + ki * integral + kd * derivative
    alpha = min(a_max, max(-a_max, alpha))
    return alpha, PidState(integral=integral, prev_error=e_v)


@dataclass(frozen=True)
class ErrorState:
    """Tracking error for the lateral controller, left-positive lateral."""

    e_lat: float   # m
    e_head: float  # rad, wrapped to (-pi, pi]
    v: float       # m/s, linearization speed
    off_route_end: bool = False


def track_error(waypoints: list[Vec2], position: Vec2, heading: float, speed: float) -> ErrorState:
    """Nearest-segment projection error against a waypoint path."""
    if len(waypoints) < 2:
        raise ControllerConfigError("route needs at least two waypoints")
    proj = project_on_polyline(waypoints, position)
    tangent_heading = math.atan2(proj.tangent.y, proj.tangent.x)
    return ErrorState(
        e_lat=proj.lateral,
        e_head=wrap_angle(heading - tangent_heading),
        v=speed,
        off_route_end=proj.clamped,
    )


_GAIN_CACHE: dict[tuple, tuple[float, float]] = {}


def _mpc_gain(
    v: float, horizon: int, dt: float, weights: tuple[float, float, float], wheelbase: float
) -> tuple[float, float]:
    """First-move feedback gain of the unconstrained MPC: delta = g . e.

    The linearization speed is quantized to 1 mm/s so the cached gain is a
    pure function of the key (cache eviction can never change a result).
    """
    v = round(v, 3)
    key = (v, horizon, dt, weights, wheelbase)
    hit = _GAIN_CACHE.get(key)
    if hit is not None:
        return hit
    wl, wh, ws = weights
    a = np.array([[1.0, v * dt], [0.0, 1.0]])
    b = np.array([[0.0], [v * dt / wheelbase]])
    n = horizon
    sx = np.zeros((2 * n, 2))
    su = np.zeros((2 * n, n))
    a_pow = np.eye(2)
    for k in range(n):
        a_pow = a_pow @ a
        sx[2 * k: 2 * k + 2, :] = a_pow
        blk = b
        for j in range(k, -1, -1):
            su[2 * k: 2 * k + 2, j: j + 1] = blk
            blk = a @ blk
    q_bar = np.diag([wl, wh] * n)
    h = su.T @ q_bar @ su + ws * np.eye(n)
    g = su.T @ q_bar @ sx
    try:
        gain = -np.linalg.solve(h, g)
    except np.linalg.LinAlgError as exc:
        raise ControllerConfigError("singular MPC normal matrix (all weights zero?)") from exc
    first = (float(gain[0, 0]), float(gain[0, 1]))
    if len(_GAIN_CACHE) > 8192:
        _GAIN_CACHE.clear()
    _GAIN_CACHE[key] = first
    return first


def mpc_steering(
    error: ErrorState,
    horizon: int,
    dt: float,
    weights: tuple[float, float, float],
    wheelbase: float,
    steer_max: float = 0.6,
) -> float:
    """Front steering angle minimizing the quadratic tracking cost.

    Error dynamics e+ = A e + B delta with A = [[1, v dt], [0, 1]] and
    B = [0, v dt / L]; the stacked unconstrained QP is solved exactly and the
    first move is clamped to the steering limit.
    """
    if horizon < 1:
        raise ControllerConfigError(f"horizon must be >= 1, got {horizon}")
    wl, wh, ws = weights
    if wl == 0.0 and wh == 0.0 and ws == 0.0:
        raise ControllerConfigError("all MPC weights are zero")
    if error.v <= 0.0:
        return 0.0
    g_lat, g_head = _mpc_gain(error.v, horizon, dt, weights, wheelbase)
    delta = g_lat * error.e_lat + g_head * error.e_head
    return min(steer_max, max(-steer_max, delta))


def mpc_plan_cost(
    e0: tuple[float, float],
    deltas: list[float],
    v: float,
    dt: float,
    weights: tuple[float, float, float],
    wheelbase: float,
) -> float:
    """Cost of a steering sequence under the prediction model (test oracle)."""
    wl, wh, ws = weights
    e_lat, e_head = e0
    cost = 0.0
    for d in deltas:
        new_lat = e_lat + v * dt * e_head
        new_head = e_head + (v * dt / wheelbase) * d
        e_lat, e_head = new_lat, new_head
        cost += wl * e_lat * e_lat + wh * e_head * e_head + ws * d * d
    return cost


def mpc_plan(
    e0: tuple[float, float],
    horizon: int,
    v: float,
    dt: float,
    weights: tuple[float, float, float],
    wheelbase: float,
) -> list[float]:
    """Full optimal steering sequence (unclamped), for optimality checks."""
    wl, wh, ws = weights
    a = np.array([[1.0, v * dt], [0.0, 1.0]])
    b = np.array([[0.0], [v * dt / wheelbase]])
    n = horizon
    sx = np.zeros((2 * n, 2))
    su = np.zeros((2 * n, n))
    a_pow = np.eye(2)
    for k in range(n):
        a_pow = a_pow @ a
        sx[2 * k: 2 * k + 2, :] = a_pow
        blk = b
        for j in range(k, -1, -1):
            su[2 * k: 2 * k + 2, j: j + 1] = blk
            blk = a @ blk
    q_bar = np.diag([wl, wh] * n)
    h = su.T @ q_bar @ su + ws * np.eye(n)
    g = su.T @ q_bar @ sx
    u = -np.linalg.solve(h, g) @ np.array(e0)
    return [float(x) for x in u]


def steer_along_path(
    waypoints: list[Vec2],
    position: Vec2,
    heading: float,
    speed: float,
    weights: tuple[float, float, float] = (DEFAULT_MATRIX.wl, DEFAULT_MATRIX.wh, DEFAULT_MATRIX.ws),
    horizon: int = 10,
    dt: float = 0.1,
    wheelbase: float = 2.5,
    steer_max: float = 0.6,
    lat_accel_max: float = 5.0,
) -> float:
    """Tracking error, MPC steering, and a comfort clamp on lateral accel.

    The clamp keeps the small-angle linearization honest at highway speed:
    without it a large lateral error at 25 m/s saturates the steering and
    whips the heading.
    """
    err = track_error(waypoints, position, heading, speed)
    if speed > 0:
        steer_max = min(steer_max, math.atan(lat_accel_max * wheelbase / (speed * speed)))
    return mpc_steering(err, horizon, dt, weights, wheelbase, steer_max=steer_max)
