import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from driverig.control import ActionMatrix, DEFAULT_MATRIX, PARAMETER_BOUNDS
from driverig.evaluator import (
    ComfortBaseline,
    ComfortMetrics,
    EvaluationError,
    InfractionLedger,
    ScoreCard,
    ScoreWeights,
    alignment_score,
    command_alignment,
    comfort_metrics,
    conservativeness_index,
    driving_score,
    infraction_penalty,
    lampilot_score,
    scenario_alignment,
    speed_stats,
    sv_score,
    takeover_rate,
    takeover_reduction,
    talk2drive_score,
    te_score,
    ttc_min,
    ttc_pairwise,
    ttc_score,
)
from driverig.geometry import Vec2
from driverig.trace import RunTrace, TraceFrame
from driverig.world import VehicleState


def ego_trace(speeds, headings=None, lead=None):
    """Trace with the ego following a speed profile (x integrates speed)."""
    trace = RunTrace(ego_id="ego", dt=0.1)
    x = 0.0
    heading = 0.0
    for tick, speed in enumerate(speeds):
        if headings is not None:
            heading = headings[tick]
        if tick > 0:
            x += speeds[tick - 1] * 0.1 * math.cos(heading)
        vehicles = [
            VehicleState(id="ego", position=Vec2(x, 0.0), heading=heading, speed=speed,
                         segment_id="main", lane_index=1, role="ego")
        ]
        if lead is not None:
            lx, lspeed = lead
            vehicles.append(
                VehicleState(id="lead", position=Vec2(lx + lspeed * tick * 0.1, 0.0),
                             heading=0.0, speed=lspeed, segment_id="main", lane_index=1)
            )
        trace.frames.append(TraceFrame(tick=tick, time=tick * 0.1, vehicles=tuple(vehicles)))
    return trace


# --- TTC ----------------------------------------------------------------------


def test_ttc_pairwise_head_on_closing():
    tau = ttc_pairwise(Vec2(0, 0), Vec2(20, 0), Vec2(50, 0), Vec2(10, 0))
    assert tau == pytest.approx(5.0)


def test_ttc_pairwise_opening_gap_negative():
    tau = ttc_pairwise(Vec2(0, 0), Vec2(10, 0), Vec2(50, 0), Vec2(20, 0))
    assert tau < 0


def test_ttc_pairwise_equal_velocities_excluded():
    assert ttc_pairwise(Vec2(0, 0), Vec2(10, 0), Vec2(50, 0), Vec2(10, 0)) is None


def test_ttc_min_lone_ego_is_infinite():
    trace = ego_trace([10.0] * 5)
    assert math.isinf(ttc_min(trace))
    assert ttc_score(ttc_min(trace)) == 100.0


def test_ttc_min_constant_pair():
    trace = ego_trace([20.0] * 5, lead=(50.0 + 4.5, 10.0))
    # closing at 10 m/s from 50 m: tau shrinks as the gap closes; the
    # minimum is at the last frame.
    taus = []
    for frame in trace.frames[1:]:
        ego, lead = frame.vehicles
        taus.append(ttc_pairwise(ego.position, ego.velocity(), lead.position, lead.velocity()))
    assert ttc_min(trace) == pytest.approx(min(t for t in taus if t > 0))


def test_ttc_min_brute_force_scan():
    rng = random.Random(4)
    trace = RunTrace(ego_id="ego", dt=0.1)
    for tick in range(30):
        vehicles = [
            VehicleState(id="ego", position=Vec2(rng.uniform(0, 100), rng.uniform(-4, 4)),
                         heading=rng.uniform(-0.3, 0.3), speed=rng.uniform(0, 30),
                         segment_id="main", lane_index=1, role="ego"),
            VehicleState(id="a", position=Vec2(rng.uniform(0, 100), rng.uniform(-4, 4)),
                         heading=rng.uniform(-0.3, 0.3), speed=rng.uniform(0, 30),
                         segment_id="main", lane_index=1),
            VehicleState(id="b", position=Vec2(rng.uniform(0, 100), rng.uniform(-4, 4)),
                         heading=rng.uniform(-0.3, 0.3), speed=rng.uniform(0, 30),
                         segment_id="main", lane_index=0),
        ]
        trace.frames.append(TraceFrame(tick=tick, time=tick * 0.1, vehicles=tuple(vehicles)))
    brute = math.inf
    for frame in trace.frames:
        if frame.tick < 1:
            continue
        ego = frame.vehicles[0]
        for other in frame.vehicles[1:]:
            tau = ttc_pairwise(ego.position, ego.velocity(), other.position, other.velocity())
            if tau is not None and 0 < tau < brute:
                brute = tau
    assert ttc_min(trace) == brute


def test_ttc_score_branches():
    assert ttc_score(3.0) == 100.0
    assert ttc_score(0.5) == pytest.approx(98.0)
    assert ttc_score(-1.0) == 0.0
    assert ttc_score(0.005) == 0.0  # clamped by max(0, .)


@given(st.floats(min_value=-10, max_value=10), st.floats(min_value=0, max_value=5))
def test_ttc_score_monotone(tau, bump):
    assert ttc_score(tau + bump) >= ttc_score(tau)


# --- SV / TE -------------------------------------------------------------------


def test_speed_stats_constant():
    mu, sigma = speed_stats(ego_trace([10.0] * 6))
    assert mu == pytest.approx(10.0)
    assert sigma == pytest.approx(0.0)


def test_speed_stats_population_formula():
    mu, sigma = speed_stats(ego_trace([0.0, 8.0, 12.0]))  # steps are {8, 12}
    assert mu == pytest.approx(10.0)
    assert sigma == pytest.approx(2.0)


def test_speed_stats_empty_trace_errors():
    with pytest.raises(EvaluationError):
        speed_stats(ego_trace([10.0]))  # only the initial frame, zero steps


def test_sv_te_boundaries():
    assert sv_score(0.0, 5.0) == 100.0
    assert sv_score(5.0, 5.0) == 0.0
    assert sv_score(1.25, 5.0) == pytest.approx(75.0)
    assert te_score(0.0, 30.0) == 100.0
    assert te_score(30.0, 30.0) == 0.0


def test_lampilot_score_gating_and_weights():
    card = ScoreCard(ttc=100.0, sv=100.0, te=100.0, completed=True)
    weights = ScoreWeights()
    assert lampilot_score(card, weights) == pytest.approx(100.0)
    card2 = ScoreCard(ttc=90.0, sv=80.0, te=70.0, completed=False)
    assert lampilot_score(card2, weights) == 0.0
    assert lampilot_score(card2, weights, completed=True) == pytest.approx(
        0.4 * 90 + 0.3 * 80 + 0.3 * 70
    )


def test_lampilot_score_linear_superposition():
    weights = ScoreWeights()
    a = ScoreCard(ttc=60.0, sv=40.0, te=20.0, completed=True)
    b = ScoreCard(ttc=20.0, sv=40.0, te=60.0, completed=True)
    mid = ScoreCard(ttc=40.0, sv=40.0, te=40.0, completed=True)
    assert lampilot_score(mid, weights) == pytest.approx(
        0.5 * lampilot_score(a, weights) + 0.5 * lampilot_score(b, weights)
    )


def test_weights_must_sum_to_one():
    with pytest.raises(EvaluationError):
        ScoreWeights(lampilot=(0.5, 0.3, 0.3))


# --- comfort --------------------------------------------------------------------


def test_comfort_constant_velocity_all_zero():
    m = comfort_metrics(ego_trace([10.0] * 10))
    assert m.abar_x == pytest.approx(0.0, abs=1e-9)
    assert m.jbar_x == pytest.approx(0.0, abs=1e-9)
    assert m.abar_y == pytest.approx(0.0, abs=1e-9)
    assert m.jbar_y == pytest.approx(0.0, abs=1e-9)


def test_comfort_constant_accel():
    speeds = [10.0 + tick * 0.1 for tick in range(12)]  # 1 m/s^2 ramp
    m = comfort_metrics(ego_trace(speeds))
    assert m.abar_x == pytest.approx(1.0, rel=1e-6)
    assert m.jbar_x == pytest.approx(0.0, abs=1e-6)


def test_comfort_jerk_spike_at_knee():
    # Ramp at 1 m/s^2 then plateau: jerk spike of da/dt at the knee. The
    # oracle differences the displacement-based velocity samples, i.e. the
    # speeds that actually moved the vehicle (the final frame's speed never
    # produces displacement inside the trace).
    speeds = [10.0 + 0.1 * min(t, 5) for t in range(12)]
    m = comfort_metrics(ego_trace(speeds))
    moved = speeds[:-1]
    accels = [(b - a) / 0.1 for a, b in zip(moved[:-1], moved[1:])]
    jerks = [(b - a) / 0.1 for a, b in zip(accels[:-1], accels[1:])]
    assert m.jbar_x == pytest.approx(sum(abs(j) for j in jerks) / len(jerks), rel=1e-6)


def test_comfort_needs_enough_ticks():
    with pytest.raises(EvaluationError):
        comfort_metrics(ego_trace([10.0] * 3))


# --- Talk2Drive score -------------------------------------------------------------


def baseline_equal_card(tau_min):
    comfort = ComfortMetrics(abar_x=0.35, jbar_x=2.83, abar_y=0.0, jbar_y=0.0,
                             sv_x=2.91, sv_y=0.0)
    return ScoreCard(tau_min=tau_min, comfort=comfort)


BASELINE = ComfortBaseline(speed_variance=2.91, abar=0.35, jbar=2.83)


def test_talk2drive_baseline_equal_scores_86():
    score = talk2drive_score(baseline_equal_card(3.26), BASELINE, ScoreWeights())
    assert score == pytest.approx(86.0, abs=0.01)


def test_talk2drive_ttc_failure_scores_56():
    score = talk2drive_score(baseline_equal_card(1.14), BASELINE, ScoreWeights())
    assert score == pytest.approx(56.0, abs=0.01)


def test_talk2drive_perfect_run_scores_100():
    comfort = ComfortMetrics(abar_x=0.0, jbar_x=0.0, abar_y=0.0, jbar_y=0.0, sv_x=0.0, sv_y=0.0)
    card = ScoreCard(tau_min=math.inf, comfort=comfort)
    assert talk2drive_score(card, BASELINE, ScoreWeights()) == pytest.approx(100.0)


def test_talk2drive_subscores_clamped():
    comfort = ComfortMetrics(abar_x=100.0, jbar_x=100.0, abar_y=0.0, jbar_y=0.0,
                             sv_x=100.0, sv_y=0.0)
    card = ScoreCard(tau_min=5.0, comfort=comfort)
    assert talk2drive_score(card, BASELINE, ScoreWeights()) == pytest.approx(30.0)


# --- infractions -------------------------------------------------------------------


def test_no_infractions_ip_one():
    assert infraction_penalty(InfractionLedger()) == 1.0
    assert driving_score(73.0, 1.0) == pytest.approx(73.0)


def test_two_infractions_product():
    ledger = InfractionLedger()
    ledger.add("collision")
    ledger.add("red_light_violation")
    assert infraction_penalty(ledger) == pytest.approx(0.42, abs=1e-12)


def test_driving_score_convention():
    assert driving_score(50.0, 0.5) == pytest.approx(25.0)


def test_ip_order_invariant_and_non_increasing():
    rng = random.Random(0)
    kinds = list(InfractionLedger().penalties)
    for _ in range(200):
        events = [rng.choice(kinds) for _ in range(rng.randint(0, 6))]
        a = InfractionLedger(events=list(events))
        shuffled = list(events)
        rng.shuffle(shuffled)
        b = InfractionLedger(events=shuffled)
        assert infraction_penalty(a) == pytest.approx(infraction_penalty(b), abs=1e-15)
        running = InfractionLedger()
        last = 1.0
        for e in events:
            running.add(e)
            now = infraction_penalty(running)
            assert now <= last + 1e-15
            last = now


def test_penalty_coefficients_validated():
    with pytest.raises(EvaluationError):
        InfractionLedger(penalties={"collision": 0.0})


# --- alignment ----------------------------------------------------------------------


def test_command_alignment_in_band_is_100():
    assert command_alignment(DEFAULT_MATRIX) == 100.0


def test_command_alignment_midpoint_ramp():
    b = PARAMETER_BOUNDS["kp"]
    mid = (b.minimum + b.lower) / 2
    matrix = ActionMatrix(kp=mid, ki=0.1, kd=0.2, wl=1.0, wh=1.0, ws=1.0)
    assert command_alignment(matrix) == pytest.approx((5 * 100 + 50) / 6)


def test_command_alignment_out_of_range_zero():
    b = PARAMETER_BOUNDS["kp"]
    matrix = ActionMatrix(kp=b.maximum + 1.0, ki=0.1, kd=0.2, wl=1.0, wh=1.0, ws=1.0)
    assert command_alignment(matrix) == pytest.approx(500 / 6)


def test_alignment_continuity_at_all_knots():
    for name, b in PARAMETER_BOUNDS.items():
        for knot in (b.minimum, b.lower, b.upper, b.maximum):
            eps = 1e-9 * max(1.0, abs(knot))
            left = alignment_score(max(b.minimum - 1, knot - eps), b)
            right = alignment_score(min(b.maximum + 1, knot + eps), b)
            at = alignment_score(knot, b)
            assert abs(at - left) < 1e-5 or knot == b.minimum
            assert abs(at - right) < 1e-5 or knot == b.maximum


def test_scenario_alignment_tally():
    sunny = DEFAULT_MATRIX
    conservative = ActionMatrix(kp=0.45, ki=0.05, kd=0.1, wl=1.0, wh=1.0, ws=2.5)
    aggressive = ActionMatrix(kp=1.8, ki=0.4, kd=0.9, wl=1.0, wh=1.0, ws=0.1)
    sets = {"sunny": sunny, "rain": conservative, "fog": conservative,
            "snow": conservative, "night": aggressive}
    assert scenario_alignment(sets) == pytest.approx(75.0)
    assert scenario_alignment({"sunny": sunny, "rain": conservative}) == 100.0
    assert scenario_alignment({"sunny": sunny, "rain": aggressive}) == 0.0
    assert scenario_alignment({"sunny": sunny}) is None
    assert conservativeness_index(conservative) < conservativeness_index(sunny)


# --- takeover -------------------------------------------------------------------------


def test_takeover_rate_and_reduction():
    assert takeover_rate([True, False, False, False]) == 0.25
    assert takeover_rate([]) is None
    assert takeover_reduction(19.44, 5.56) == pytest.approx(71.4, abs=0.1)
    assert takeover_reduction(0.14, 0.07) == pytest.approx(50.0)
    assert takeover_reduction(0.2, 0.2) == 0.0
    assert takeover_reduction(0.0, 0.0) is None


# --- range fuzz ------------------------------------------------------------------------


@settings(max_examples=100, deadline=None)
@given(
    speeds=st.lists(st.floats(min_value=0, max_value=40), min_size=5, max_size=40),
    tau=st.floats(min_value=-5, max_value=10),
)
def test_all_scores_in_range(speeds, tau):
    trace = ego_trace(speeds)
    mu, sigma = speed_stats(trace)
    weights = ScoreWeights()
    assert 0 <= ttc_score(tau) <= 100
    assert 0 <= sv_score(sigma, weights.sigma_safe) <= 100
    assert 0 <= te_score(min(len(speeds) * 0.1, 30.0), 30.0) <= 100
    metrics = comfort_metrics(trace)
    card = ScoreCard(tau_min=tau, comfort=metrics, ttc=ttc_score(tau),
                     sv=sv_score(sigma, weights.sigma_safe), te=50.0, completed=True)
    assert 0 <= lampilot_score(card, weights) <= 100
    assert 0 <= talk2drive_score(card, BASELINE, weights) <= 100
