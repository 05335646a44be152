"""Benchmark orchestration: run agents over suites and aggregate score cards.

Agents come in three families: instruction-blind rule-based baselines, a
privileged oracle that writes the right program from the goal spec (the
upper reference), and language agents that go through the full prompt ->
backend -> parse -> gate -> execute pipeline.
"""

from __future__ import annotations

import hashlib
import json
import math
import multiprocessing
import os
from dataclasses import dataclass, field

from . import templates
from .agent import (
    AgentExchange,
    Backend,
    BackendError,
    PromptBundle,
    RemoteBackend,
    ReplayBackend,
    ScriptedBackend,
    build_prompt,
    render_response,
    run_exchange,
)
from .dsl import check_source, start_execution
from .evaluator import (
    DEFAULT_PENALTIES,
    ScoreCard,
    ScoreWeights,
    comfort_metrics,
    detect_infractions,
    driving_score,
    infraction_penalty,
    lampilot_score,
    speed_stats,
    sv_score,
    te_score,
    ttc_min,
    ttc_score,
)
from .executor import EgoPilot, default_cruise_intent
from .memory import MemoryStore
from .scenario import (
    Scenario,
    goal_satisfied,
    load_suite,
    route_progress,
    scenario_drivers,
    scenario_route,
)
from .sensing import sensor_snapshot
from .trace import RunTrace
from .world import DT, Control, WorldState, step_world

REPORT_SCHEMA = "driverig-report v1"

AGENT_KINDS = ("idm", "mobil", "oracle", "dsl")


@dataclass(frozen=True)
class RunConfig:
    suite_path: str
    agent: str = "idm"
    backend: dict | None = None       # {"kind": "scripted"|"replay"|"remote", ...}
    shots: int = 0
    feedback: bool = False
    regen_budget: int = 2
    weights: ScoreWeights = field(default_factory=ScoreWeights)
    penalties: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_PENALTIES))
    parallelism: int = 1
    output_dir: str | None = None
    memory_dir: str | None = None
    user: str = "bench"
    strict: bool = False

    def __post_init__(self) -> None:
        if self.agent not in AGENT_KINDS:
            raise ValueError(f"agent must be one of {AGENT_KINDS}, got {self.agent!r}")
        if self.shots not in (0, 3):
            raise ValueError(f"shots must be 0 or 3, got {self.shots}")
        if self.agent == "dsl" and self.backend is None:
            raise ValueError("dsl agent needs a backend spec")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")

    def to_dict(self) -> dict:
        return {
            "suite_path": self.suite_path,
            "agent": self.agent,
            "backend": self.backend,
            "shots": self.shots,
            "feedback": self.feedback,
            "regen_budget": self.regen_budget,
            "weights": {
                "lampilot": list(self.weights.lampilot),
                "talk2drive": list(self.weights.talk2drive),
                "gamma": self.weights.gamma,
                "sigma_safe": self.weights.sigma_safe,
                "tau_c": self.weights.tau_c,
            },
            "penalties": dict(sorted(self.penalties.items())),
            "parallelism": self.parallelism,
            "user": self.user,
            "strict": self.strict,
        }


def config_hash(config: RunConfig) -> str:
    payload = json.dumps(config.to_dict(), sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def build_backend(spec: dict) -> Backend:
    kind = spec.get("kind")
    if kind == "scripted":
        if "rules" in spec:
            return ScriptedBackend(
                rules=[tuple(r) for r in spec["rules"]],
                default=spec.get("default"),
                scope=spec.get("scope", "instruction"),
            )
        return default_scripted_backend()
    if kind == "replay":
        return ReplayBackend.from_file(spec["path"])
    if kind == "remote":
        return RemoteBackend(
            url=spec["url"],
            model=spec.get("model", "default"),
            api_key_env=spec.get("api_key_env", "RIG_API_KEY"),
            timeout=float(spec.get("timeout", 30.0)),
        )
    raise ValueError(f"unknown backend kind {kind!r}")


# --- canned policies ----------------------------------------------------------


def _canned(thought: str, program: str) -> str:
    return render_response(thought, program=program)

_OVERTAKE_PROGRAM = (
    "limit = check_speed_limit()\n"
    "yield change_lane(left)\n"
    "yield proceed(limit)\n"
    "yield change_lane(right)\n"
    "yield follow_lead(1.5)\n"
)


def default_scripted_backend() -> ScriptedBackend:
    """Keyword-matched conservative policies for offline closed-loop runs."""
    rules = [
        ("*pull over*", _canned("The driver wants me to stop at the roadside.", "yield pull_over()\n")),
        ("*stop the car*", _canned("The driver asks for a roadside stop.", "yield pull_over()\n")),
        ("*safe spot*", _canned("Find a safe place to stop.", "yield pull_over()\n")),
        ("*need some air*", _canned("The passenger feels unwell; stop safely.", "yield pull_over()\n")),
        ("*fell out*", _canned("Something was lost; stop safely.", "yield pull_over()\n")),
        ("*turn left*", _canned("Take the left exit.", "yield turn(left)\n")),
        ("*turn right*", _canned("Take the right exit.", "yield turn(right)\n")),
        ("*straight*", _canned("Continue through the junction.", "yield turn(straight)\n")),
        ("*head left*", _canned("Head left at the junction.", "yield turn(left)\n")),
        ("*head right*", _canned("Head right at the junction.", "yield turn(right)\n")),
        ("*goes left*", _canned("The route goes left.", "yield turn(left)\n")),
        ("*goes right*", _canned("The route goes right.", "yield turn(right)\n")),
        ("*left of this*", _canned("Destination is left of here.", "yield turn(left)\n")),
        ("*right of this*", _canned("Destination is right of here.", "yield turn(right)\n")),
        ("*stay on this road*", _canned("Stay on the current road.", "yield turn(straight)\n")),
        ("*road ahead looks fine*", _canned("Keep going straight.", "yield turn(straight)\n")),
        ("*left lane*", _canned("Move one lane left.", "yield change_lane(left)\n")),
        ("*right lane*", _canned("Move one lane right.", "yield change_lane(right)\n")),
        ("*to the left*", _canned("Move one lane left.", "yield change_lane(left)\n")),
        ("*to the right*", _canned("Move one lane right.", "yield change_lane(right)\n")),
        ("*over on the left*", _canned("Move one lane left.", "yield change_lane(left)\n")),
        ("*over on the right*", _canned("Move one lane right.", "yield change_lane(right)\n")),
        ("*overtake*", _canned("Pass the slower car and return.", _OVERTAKE_PROGRAM)),
        ("*pass the car*", _canned("Pass the slower car and return.", _OVERTAKE_PROGRAM)),
        ("*stuck behind*", _canned("Pass the slower car and return.", _OVERTAKE_PROGRAM)),
        ("*slowing us down*", _canned("Pass the slower car and return.", _OVERTAKE_PROGRAM)),
        ("*behind this*", _canned("Pass the slower car and return.", _OVERTAKE_PROGRAM)),
        ("*gap*", _canned("Keep a generous following distance.", "yield follow_lead(2.0)\n")),
        ("*following distance*", _canned("Adjust following distance.", "yield follow_lead(2.0)\n")),
        ("*too close*", _canned("Back off from the lead vehicle.", "yield follow_lead(2.5)\n")),
        ("*tailgat*", _canned("Back off from the lead vehicle.", "yield follow_lead(2.5)\n")),
        ("*more room*", _canned("Back off from the lead vehicle.", "yield follow_lead(2.5)\n")),
        ("*making me uneasy*", _canned("Back off from the lead vehicle.", "yield follow_lead(2.5)\n")),
        ("*kilometers per hour*", _canned(
            "Cruise near the requested speed.",
            "limit = check_speed_limit()\nyield proceed(limit * 0.7)\n",
        )),
        ("*hurry*", _canned("Speed up within the limit.",
                            "limit = check_speed_limit()\nyield proceed(limit)\n")),
        ("*late*", _canned("Speed up within the limit.",
                           "limit = check_speed_limit()\nyield proceed(limit)\n")),
        ("*slow*", _canned("Speed up within the limit.",
                           "limit = check_speed_limit()\nyield proceed(limit)\n")),
        ("*conservativ*", _canned(
            "Slow down and keep the lane.",
            "limit = check_speed_limit()\nyield proceed(limit * 0.7)\n",
        )),
    ]
    fallback = _canned("Keep a safe adaptive-cruise behavior.", "yield follow_lead(1.5)\n")
    return ScriptedBackend(rules=rules, default=fallback)


def oracle_program(scenario: Scenario) -> str:
    """Hand-written per-category policy, parameterized from the goal spec."""
    goal = scenario.goal
    world = scenario.initial
    seg = world.road.segment(world.ego().segment_id)
    if goal.kind == "target_gap":
        lead = world.vehicle(str(goal.params["lead_id"]))
        v_lead = max(lead.speed, 1.0)
        factor = math.sqrt(max(0.0, 1.0 - (v_lead / seg.speed_limit) ** 4))
        headway = (float(goal.params["gap"]) * factor - 2.0) / v_lead
        headway = min(9.9, max(0.2, headway))
        return f"yield follow_lead({headway:.4f})\n"
    if goal.kind == "speed_band":
        target = (float(goal.params["low"]) + float(goal.params["high"])) / 2.0
        return f"yield proceed({target:.4f})\n"
    if goal.kind == "pull_over":
        return "yield pull_over()\n"
    if goal.kind == "exit":
        direction = next(
            d for d, target in world.road.exits_from(world.ego().segment_id).items()
            if target == goal.params["segment"]
        )
        return f"yield turn({direction})\nyield follow_lead(1.5)\n"
    if goal.kind == "target_lane":
        side = "left" if int(goal.params["lane"]) < world.ego().lane_index else "right"
        return f"yield change_lane({side})\n"
    if goal.kind == "overtake":
        return _OVERTAKE_PROGRAM
    raise ValueError(f"no oracle policy for goal kind {goal.kind!r}")


# --- closed-loop simulation -----------------------------------------------------


def simulate(
    scenario: Scenario,
    ego_control,
    dt: float = DT,
    stop_on_collision: bool = True,
) -> RunTrace:
    """Run one scenario to its time limit; ego_control(world, snapshot) -> Control."""
    world: WorldState = scenario.initial
    drivers = scenario_drivers(scenario)
    trace = RunTrace(ego_id="ego", dt=dt)
    trace.append_world(world)
    for _ in range(int(round(scenario.time_limit / dt))):
        snapshot = sensor_snapshot(world, "ego", scenario.weather, scenario.traffic_density)
        controls: dict[str, Control] = {"ego": ego_control(world, snapshot)}
        for vid, driver in drivers.items():
            controls[vid] = driver.act(world, vid, dt)
        world, events = step_world(world, controls, dt)
        trace.append_world(world, events)
        if events and stop_on_collision:
            break
    return trace


def score_run(
    scenario: Scenario,
    trace: RunTrace,
    weights: ScoreWeights,
    penalties: dict[str, float],
    latency: float = 0.0,
    gate_rejections: int = 0,
    notes: str = "",
) -> ScoreCard:
    completed, completion_time = goal_satisfied(scenario, trace)
    tau = ttc_min(trace)
    mu, sigma = speed_stats(trace)
    route = scenario_route(scenario)
    rc = route_progress(route, trace)
    limit = scenario.initial.road.segment(scenario.initial.ego().segment_id).speed_limit
    ledger = detect_infractions(trace, route, limit, penalties)
    ip = infraction_penalty(ledger)
    card = ScoreCard(
        scenario_id=scenario.id,
        category=scenario.category,
        tau_min=tau,
        ttc=ttc_score(tau),
        sv=sv_score(sigma, weights.sigma_safe),
        te=te_score(completion_time if completed else scenario.time_limit, scenario.time_limit),
        mu=mu,
        sigma=sigma,
        comfort=comfort_metrics(trace) if len(trace.frames) >= 4 else None,
        completed=completed,
        completion_time=completion_time,
        collisions=len({e.ids for e in trace.collision_events()}),
        rc=rc,
        ip=ip,
        ds=driving_score(rc, ip),
        latency=latency,
        gate_rejections=gate_rejections,
        notes=notes,
    )
    card.score = lampilot_score(card, weights)
    return card


@dataclass
class ScenarioOutcome:
    card: ScoreCard
    trace: RunTrace
    exchanges: list[AgentExchange] = field(default_factory=list)
    program: str | None = None


def run_baseline_scenario(scenario: Scenario, kind: str, config: RunConfig) -> ScenarioOutcome:
    from .traffic import baseline_agent  # local import to keep module deps flat

    limit = scenario.initial.road.segment(scenario.initial.ego().segment_id).speed_limit
    driver = baseline_agent(kind, limit)
    trace = simulate(scenario, lambda world, snap: driver.act(world, "ego", DT))
    card = score_run(scenario, trace, config.weights, config.penalties)
    return ScenarioOutcome(card=card, trace=trace)


def run_oracle_scenario(scenario: Scenario, config: RunConfig) -> ScenarioOutcome:
    source = oracle_program(scenario)
    snapshot = sensor_snapshot(
        scenario.initial, "ego", scenario.weather, scenario.traffic_density
    )
    program, verdict = check_source(source, snapshot)
    pilot = EgoPilot()
    rejections = 0
    if verdict.accepted and program is not None:
        pilot.attach_program(start_execution(program), 0)
    else:
        rejections = 1
        pilot.set_default_intent(default_cruise_intent(), 0)
    trace = simulate(scenario, pilot.control_callable("ego"))
    card = score_run(
        scenario, trace, config.weights, config.penalties, gate_rejections=rejections
    )
    return ScenarioOutcome(card=card, trace=trace, program=source)


def _dsl_attempt(
    scenario: Scenario,
    backend: Backend,
    config: RunConfig,
    history: list,
) -> tuple[ScenarioOutcome, AgentExchange, PromptBundle]:
    snapshot = sensor_snapshot(
        scenario.initial, "ego", scenario.weather, scenario.traffic_density
    )
    bundle = build_prompt(
        templates.SYSTEM_MESSAGE,
        snapshot,
        scenario.instruction,
        history=history,
        directness=scenario.directness,
        shots=config.shots,
    )
    exchange = run_exchange(backend, bundle)
    pilot = EgoPilot()
    rejections = 0
    notes = ""
    program_source: str | None = None
    if exchange.error:
        rejections = 1
        notes = f"format rejection: {exchange.error}"
        pilot.set_default_intent(default_cruise_intent(), 0)
    elif exchange.matrix is not None:
        pilot.apply_matrix(exchange.matrix)
        pilot.set_default_intent(default_cruise_intent(), 0)
    else:
        assert exchange.program is not None
        program, verdict = check_source(exchange.program, snapshot)
        if verdict.accepted and program is not None:
            pilot.attach_program(start_execution(program), 0)
            program_source = exchange.program
        else:
            rejections = 1
            notes = f"gate rejection ({verdict.stage}): {verdict.reason}"
            pilot.set_default_intent(default_cruise_intent(), 0)
    trace = simulate(scenario, pilot.control_callable("ego"))
    card = score_run(
        scenario,
        trace,
        config.weights,
        config.penalties,
        latency=exchange.latency,
        gate_rejections=rejections,
        notes=notes,
    )
    outcome = ScenarioOutcome(
        card=card, trace=trace, exchanges=[exchange], program=program_source
    )
    return outcome, exchange, bundle


def run_dsl_scenario(
    scenario: Scenario,
    backend: Backend,
    config: RunConfig,
    store: MemoryStore | None = None,
) -> ScenarioOutcome:
    history = []
    if store is not None:
        from .memory import retrieve

        history = retrieve(store.profile(config.user), scenario.instruction)
    outcome, _, _ = _dsl_attempt(scenario, backend, config, history)
    return outcome


def run_scenario(scenario: Scenario, config: RunConfig, backend: Backend | None = None) -> ScenarioOutcome:
    if config.agent in ("idm", "mobil"):
        return run_baseline_scenario(scenario, config.agent, config)
    if config.agent == "oracle":
        return run_oracle_scenario(scenario, config)
    assert backend is not None
    return run_dsl_scenario(scenario, backend, config)


# --- suite level -----------------------------------------------------------------


@dataclass
class SuiteReport:
    rows: list[dict]
    aggregates: dict
    config: dict
    config_hash: str
    template_hash: str
    failures: list[dict] = field(default_factory=list)
    iteration_log: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        payload = {
            "schema": REPORT_SCHEMA,
            "config": self.config,
            "config_hash": self.config_hash,
            "template_hash": self.template_hash,
            "aggregates": self.aggregates,
            "rows": self.rows,
            "failures": self.failures,
            "iteration_log": self.iteration_log,
        }
        return json.dumps(payload, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "SuiteReport":
        data = json.loads(text)
        if data.get("schema") != REPORT_SCHEMA:
            raise ValueError(f"unsupported report schema {data.get('schema')!r}")
        return cls(
            rows=data["rows"],
            aggregates=data["aggregates"],
            config=data["config"],
            config_hash=data["config_hash"],
            template_hash=data["template_hash"],
            failures=data.get("failures", []),
            iteration_log=data.get("iteration_log", []),
        )


def aggregate_rows(rows: list[dict]) -> dict:
    """Suite aggregates, recomputable from the rows at any time.

    The suite driving score is the mean of completion-gated per-scenario
    scores; TE averages over completed scenarios only (incomplete runs have
    no completion time), which is flagged here rather than hidden.
    """
    n = len(rows)
    if n == 0:
        return {"scenarios": 0}
    completed = [r for r in rows if r["time_efficiency"]["completed"]]
    collided = [r for r in rows if r["safety"]["collisions"] > 0]

    def mean(values: list[float]) -> float:
        return sum(values) / len(values) if values else 0.0

    return {
        "scenarios": n,
        "collision_rate": len(collided) / n,
        "completion_rate": len(completed) / n,
        "mean_ttc": mean([r["safety"]["ttc"] for r in rows]),
        "mean_sv": mean([r["safety"]["sv"] for r in rows]),
        "mean_te_completed": mean([r["time_efficiency"]["te"] for r in completed]),
        "driving_score": mean([r["driving"]["score"] for r in rows]),
        "mean_rc": mean([r["driving"]["rc"] for r in rows]),
        "mean_ip": mean([r["driving"]["ip"] for r in rows]),
        "mean_ds": mean([r["driving"]["ds"] for r in rows]),
        "mean_latency": mean([r["time_efficiency"]["latency"] for r in rows]),
        "gate_rejections": sum(r["gate_rejections"] for r in rows),
        "score_gating": "per-scenario scores are zeroed unless the task completed",
    }


def _run_one(args: tuple[Scenario, RunConfig]) -> tuple[str, dict | None, str | None]:
    scenario, config = args
    try:
        backend = build_backend(config.backend) if config.agent == "dsl" else None
        outcome = run_scenario(scenario, config, backend)
        return scenario.id, outcome.card.to_dict(), None
    except BackendError as exc:
        return scenario.id, None, f"backend-failed: {exc}"
    except Exception as exc:  # per-scenario isolation
        return scenario.id, None, f"{type(exc).__name__}: {exc}"


def run_suite(config: RunConfig, scenarios: list[Scenario] | None = None) -> SuiteReport:
    if scenarios is None:
        scenarios = load_suite(config.suite_path)
    if config.feedback:
        return feedback_loop_run(config, scenarios=scenarios)
    jobs = [(s, config) for s in scenarios]
    if config.parallelism > 1:
        with multiprocessing.Pool(config.parallelism) as pool:
            results = pool.map(_run_one, jobs)
    else:
        results = [_run_one(job) for job in jobs]
    rows = []
    failures = []
    for scenario_id, row, error in sorted(results, key=lambda r: r[0]):
        if row is not None:
            rows.append(row)
        else:
            failures.append({"scenario_id": scenario_id, "error": error})
    report = SuiteReport(
        rows=rows,
        aggregates=aggregate_rows(rows),
        config=config.to_dict(),
        config_hash=config_hash(config),
        template_hash=templates.template_hash(),
        failures=failures,
    )
    _maybe_write(config, report)
    return report


# --- feedback loop ----------------------------------------------------------------


def rubric_feedback(scenario: Scenario, trace: RunTrace) -> tuple[bool, str]:
    """Scripted stand-in for a human rater: goal-distance commentary."""
    completed, _ = goal_satisfied(scenario, trace)
    if completed:
        return True, "That was exactly what I wanted."
    if trace.has_collision():
        return False, "You crashed the car. Be much more careful."
    goal = scenario.goal
    ego = trace.ego_states()[-1]
    if goal.kind == "speed_band":
        low, high = float(goal.params["low"]), float(goal.params["high"])
        if ego.speed < low:
            return False, f"Too slow. I wanted about {0.5 * (low + high) * 3.6:.0f} km/h."
        return False, f"Too fast. I wanted about {0.5 * (low + high) * 3.6:.0f} km/h."
    if goal.kind == "target_gap":
        return False, f"Keep the gap near {float(goal.params['gap']):.0f} meters, please."
    if goal.kind == "pull_over":
        return False, "You never stopped at the roadside."
    if goal.kind == "exit":
        return False, "That was not the turn I asked for."
    if goal.kind == "target_lane":
        return False, "We never settled into the lane I asked for."
    if goal.kind == "overtake":
        return False, "We are still behind that car."
    return False, "You did not do what I asked."


def feedback_loop_run(
    config: RunConfig,
    feedback_source=None,
    scenarios: list[Scenario] | None = None,
) -> SuiteReport:
    """Serial suite run with the command -> execute -> feedback -> memory cycle."""
    if scenarios is None:
        scenarios = load_suite(config.suite_path)
    feedback_source = feedback_source or rubric_feedback
    backend = build_backend(config.backend) if config.backend else default_scripted_backend()
    store = MemoryStore(config.memory_dir)
    rows: list[dict] = []
    failures: list[dict] = []
    iteration_log: list[dict] = []
    from .memory import retrieve

    for scenario in scenarios:
        try:
            profile = store.profile(config.user)
            retrieved = retrieve(profile, scenario.instruction)
            attempts = 0
            outcome, exchange, bundle = _dsl_attempt(scenario, backend, config, retrieved)
            positive, feedback = feedback_source(scenario, outcome.trace)
            while not positive and attempts < config.regen_budget:
                attempts += 1
                failed_record = _exchange_record(profile, scenario, exchange, feedback)
                history = retrieved + [failed_record]
                outcome, exchange, bundle = _dsl_attempt(scenario, backend, config, history)
                positive, feedback = feedback_source(scenario, outcome.trace)
            if positive and exchange.program is not None:
                store.add_record(
                    config.user,
                    instruction=scenario.instruction,
                    policy=exchange.program,
                    scene=bundle.context,
                    feedback=feedback,
                )
            iteration_log.append(
                {
                    "scenario_id": scenario.id,
                    "regenerations": attempts,
                    "positive": positive,
                    "feedback": feedback,
                    "committed": positive and exchange.program is not None,
                    "memory_hits": len(retrieved),
                }
            )
            rows.append(outcome.card.to_dict())
        except BackendError as exc:
            failures.append({"scenario_id": scenario.id, "error": f"backend-failed: {exc}"})
        except Exception as exc:
            failures.append({"scenario_id": scenario.id, "error": f"{type(exc).__name__}: {exc}"})
    rows.sort(key=lambda r: r["scenario_id"])
    report = SuiteReport(
        rows=rows,
        aggregates=aggregate_rows(rows),
        config=config.to_dict(),
        config_hash=config_hash(config),
        template_hash=templates.template_hash(),
        failures=failures,
        iteration_log=iteration_log,
    )
    _maybe_write(config, report)
    return report


def _exchange_record(profile, scenario: Scenario, exchange: AgentExchange, feedback: str):
    from .memory import MemoryRecord

    return MemoryRecord(
        record_id=-1,
        user_id=profile.user_id,
        instruction=scenario.instruction,
        policy=exchange.program or exchange.raw,
        scene=exchange.bundle.context,
        feedback=feedback,
        timestamp=profile.next_timestamp(),
    ).with_embedding()


# --- rendering ---------------------------------------------------------------------

_AGG_ORDER = [
    "scenarios", "collision_rate", "completion_rate", "mean_ttc", "mean_sv",
    "mean_te_completed", "driving_score", "mean_rc", "mean_ip", "mean_ds",
    "mean_latency", "gate_rejections",
]


def render_report(
    report: SuiteReport, style: str = "table", baseline: SuiteReport | None = None
) -> str:
    """Plain-text rendering with a stable column order."""
    if style not in ("table", "lines"):
        raise ValueError(f"unknown style {style!r}")
    agg = report.aggregates
    base = baseline.aggregates if baseline is not None else None

    def fmt(value) -> str:
        if isinstance(value, float):
            return f"{value:.3f}"
        return str(value)

    if style == "lines":
        lines = [f"config={report.config_hash} templates={report.template_hash}"]
        for key in _AGG_ORDER:
            if key in agg:
                line = f"{key}={fmt(agg[key])}"
                if base is not None and key in base and isinstance(agg[key], (int, float)):
                    line += f" delta={agg[key] - base[key]:+.3f}"
                lines.append(line)
        for row in report.rows:
            lines.append(
                f"{row['scenario_id']} completed={row['time_efficiency']['completed']} "
                f"score={fmt(row['driving']['score'])} ds={fmt(row['driving']['ds'])}"
            )
        return "\n".join(lines) + "\n"

    header = ["metric", "value"] + (["delta_vs_baseline"] if base is not None else [])
    rows = []
    for key in _AGG_ORDER:
        if key in agg:
            row = [key, fmt(agg[key])]
            if base is not None:
                if key in base and isinstance(agg[key], (int, float)):
                    row.append(f"{agg[key] - base[key]:+.3f}")
                else:
                    row.append("-")
            rows.append(row)
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(header, widths)),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    lines.append("")
    lines.append(f"config={report.config_hash} templates={report.template_hash}")
    return "\n".join(lines) + "\n"


def _maybe_write(config: RunConfig, report: SuiteReport) -> None:
    if config.output_dir is None:
        return
    os.makedirs(config.output_dir, exist_ok=True)
    path = os.path.join(config.output_dir, f"report-{config.agent}-{config_hash(config)}.json")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
