"""Two-vehicle lane-change experiments driven by the decision models.

Protocol per episode: perturb the initial states, let each agent pick an
action from the reward matrix (assuming it leads), predict the other vehicle
polynomially under the action it is expected to take, then run both agents'
receding-horizon planners in lockstep with fresh observations at 1 Hz.  An
agent that satisfies a non-final objective replans toward the action that
maximizes its own true reward; completion times are the last entries into the
goal ball around that true objective.  The signed metric multiplies the
summed completion times by the best true reward either agent received, so
its sign records whether the interaction was a conflict.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .game import (
    AGGRESSIVE,
    COL,
    PASSIVE,
    ROW,
    Category,
    DecisionOutcome,
    ModelKind,
    RewardMatrix,
    SocialModel,
    decide,
    detect_conflict,
    lane_change_matrix,
    validate_matrix,
)
from .planner import InfeasibleStart, PlannerConfig, plan
from .vehicle import (
    ControlInput,
    DiscretizedTrajectory,
    GoalState,
    ManeuverOffset,
    VehicleParams,
    VehicleState,
    destination,
    fit_polynomial,
    sample,
    step,
)


class EpisodeError(RuntimeError):
    """Episode aborted; carries the failing context."""


@dataclass(frozen=True)
class ScenarioConfig:
    lane_width: float = 3.7
    car_length: float = 4.5
    initial_speed: float = 15.0
    speed_limit: float = 15.0
    longitudinal_jitter: float = 4.5  # +- range around y = 0
    lateral_jitter: float = 0.925  # +- range around the lane center (lw / 4)
    # maneuvers indexed by matrix action: [passive, aggressive]
    row_maneuvers: tuple[ManeuverOffset, ManeuverOffset] = (
        ManeuverOffset(0.0, -10.0),  # decelerate
        ManeuverOffset(3.7, 0.0),  # lane change
    )
    col_maneuvers: tuple[ManeuverOffset, ManeuverOffset] = (
        ManeuverOffset(0.0, -5.0),  # give way
        ManeuverOffset(0.0, 0.0),  # continue
    )
    goal_tolerance: float = 0.5
    replan_period: float = 1.0
    dt: float = 0.2
    max_time: float = 30.0
    prediction_horizon: float = 4.0
    matrix: RewardMatrix = field(default_factory=lane_change_matrix)
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    # episodes replan every second with a warm start, so a leaner budget than
    # the standalone planner default keeps sweeps tractable
    planner: PlannerConfig = field(
        default_factory=lambda: PlannerConfig(
            penalty_initial=100.0, penalty_growth=10.0, penalty_rounds=3,
            max_iterations=60,
        )
    )


@dataclass(frozen=True)
class ExperimentRecord:
    t_complete_row: float | None
    t_complete_col: float | None
    total_time: float | None
    actions: tuple[int, int]
    rewards: tuple[float, float]
    signed_time: float | None
    conflict: bool
    category: Category
    timeout: bool
    seed: int

    def to_dict(self) -> dict:
        return {
            "t_complete_row": self.t_complete_row,
            "t_complete_col": self.t_complete_col,
            "total_time": self.total_time,
            "actions": list(self.actions),
            "rewards": list(self.rewards),
            "signed_time": self.signed_time,
            "conflict": self.conflict,
            "category": self.category.value,
            "timeout": self.timeout,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class SweepGrid:
    kind: ModelKind
    coefficients: tuple[float, ...]
    mean_signed_time: tuple[tuple[float | None, ...], ...]
    conflict: tuple[tuple[bool, ...], ...]
    completed: tuple[tuple[int, ...], ...]
    failed: tuple[tuple[bool, ...], ...]
    reps: int
    seeds: tuple[tuple[tuple[int, ...], ...], ...]

    def to_dict(self) -> dict:
        return {
            "model": self.kind.value,
            "coeffs": list(self.coefficients),
            "grid": [list(row) for row in self.mean_signed_time],
            "conflict": [list(row) for row in self.conflict],
            "completed": [list(row) for row in self.completed],
            "failed": [list(row) for row in self.failed],
            "reps": self.reps,
            "seeds": [[list(cell) for cell in row] for row in self.seeds],
        }


def conflict_grid(
    kind: ModelKind, coefficients: Sequence[float], m: RewardMatrix
) -> list[list[DecisionOutcome]]:
    """Decision-level outcome for every coefficient pair (no simulation)."""
    validate_matrix(m)
    return [
        [detect_conflict(SocialModel.of_kind(kind, c1, c2), m) for c2 in coefficients]
        for c1 in coefficients
    ]


def count_conflicts(grid: list[list[DecisionOutcome]]) -> tuple[int, int]:
    flat = [o for row in grid for o in row]
    n_conflict = sum(o.conflict for o in flat)
    return n_conflict, len(flat) - n_conflict


def goal_distance(s: VehicleState, goal: GoalState, weights) -> float:
    """Weighted goal norm over (x, v, theta); y enters only when pinned."""
    wx, wy, wv, wth = weights
    d = (
        wx * (s.x - goal.x) ** 2
        + wv * (s.v - goal.v) ** 2
        + wth * (s.theta - goal.theta) ** 2
    )
    if goal.y is not None:
        d += wy * (s.y - goal.y) ** 2
    return math.sqrt(d)


def episode_seed(base_seed: int, i: int, j: int, rep: int) -> int:
    """Stable per-episode seed derived from the sweep cell coordinates."""
    ss = np.random.SeedSequence([int(base_seed), int(i), int(j), int(rep)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


class _Agent:
    """Controller state for one vehicle in an episode."""

    def __init__(self, agent_id, state, action, true_action, sc):
        self.id = agent_id
        self.state = state
        self.action = action
        self.true_action = true_action
        maneuvers = sc.row_maneuvers if agent_id == ROW else sc.col_maneuvers
        self.maneuvers = maneuvers
        self.goal = destination(state, maneuvers[action])
        self.in_true_phase = action == true_action
        self.expected_other: GoalState | None = None  # fixed at decision time
        self.prediction: DiscretizedTrajectory | None = None
        self.prediction_poly = None
        self.prediction_step = 0
        self.controls: tuple[ControlInput, ...] = ()
        self.plan_offset = 0  # sim step at which the current plan started
        self.last_obs: VehicleState | None = None
        self.last_obs_step = 0
        self.t_complete: float | None = None
        self.inside = False
        self.plan_failures = 0


def _predict(agent: _Agent, sc: ScenarioConfig, now_step: int) -> None:
    """Refit the other-vehicle polynomial from the latest observation."""
    horizon = sc.prediction_horizon
    if agent.prediction_poly is not None:
        elapsed = (now_step - agent.prediction_step) * sc.dt
        accel = agent.prediction_poly.accel(min(max(elapsed, 0.0), horizon))
    else:
        accel = (0.0, 0.0)
    try:
        poly = fit_polynomial(agent.last_obs, accel, agent.expected_other, horizon)
    except ValueError as exc:
        raise EpisodeError(
            f"prediction failed at t={now_step * sc.dt:.1f}s for agent "
            f"{agent.id}: {exc}"
        ) from exc
    agent.prediction_poly = poly
    agent.prediction = sample(poly, sc.dt)
    agent.prediction_step = now_step


def _replan(agent: _Agent, sc: ScenarioConfig, now_step: int) -> None:
    n = sc.planner.horizon_steps
    view = agent.prediction.window(now_step - agent.prediction_step, n + 1)
    shift = now_step - agent.plan_offset
    warm = None
    if agent.controls and 0 < shift < len(agent.controls):
        tail = agent.controls[shift:]
        warm = np.array([[u.accel for u in tail], [u.steer for u in tail]])
    elif agent.controls and shift == 0:
        warm = np.array(
            [[u.accel for u in agent.controls], [u.steer for u in agent.controls]]
        )
    try:
        result = plan(agent.state, agent.goal, view, sc.planner, sc.vehicle, warm)
        agent.controls = result.controls
        agent.plan_offset = now_step
    except InfeasibleStart:
        # prediction mismatch put us inside the safety ellipse: brake hard,
        # straightening the heading, until the next observation
        agent.plan_failures += 1
        lo, hi = sc.planner.steer_bounds
        steer = min(max(0.5 * (math.pi / 2 - agent.state.theta), lo), hi)
        brake = ControlInput(sc.planner.accel_bounds[0], steer)
        agent.controls = tuple([brake] * n)
        agent.plan_offset = now_step
    except (ValueError, FloatingPointError) as exc:
        raise EpisodeError(
            f"planner failed at t={now_step * sc.dt:.1f}s for agent "
            f"{agent.id}: {exc}"
        ) from exc


def _control_at(agent: _Agent, now_step: int) -> ControlInput:
    idx = now_step - agent.plan_offset
    if idx < len(agent.controls):
        return agent.controls[idx]
    return ControlInput(0.0, 0.0)


def run_experiment(
    model: SocialModel,
    sc: ScenarioConfig | None = None,
    seed: int = 0,
    trace: list | None = None,
) -> ExperimentRecord:
    """Run one seeded episode and report its completion metrics.

    ``trace``, when given, collects per-step rows
    ``(t, agent, x, y, v, theta, phase)``.
    """
    sc = sc or ScenarioConfig()
    m = validate_matrix(sc.matrix)
    outcome = detect_conflict(model, m)
    rng = np.random.default_rng(seed)

    lw = sc.lane_width
    centers = (lw / 2.0, 3.0 * lw / 2.0)
    states = []
    for agent_id in (ROW, COL):
        x = centers[agent_id] + rng.uniform(-sc.lateral_jitter, sc.lateral_jitter)
        y = rng.uniform(-sc.longitudinal_jitter, sc.longitudinal_jitter)
        states.append(VehicleState(x, y, sc.initial_speed, math.pi / 2.0))

    actions = (decide(model, m, ROW), decide(model, m, COL))
    # whichever antidiagonal cell an agent picked, it expects the other to
    # play that cell's complementary role
    expected = tuple(
        PASSIVE if actions[a] == AGGRESSIVE else AGGRESSIVE for a in (ROW, COL)
    )
    # validation guarantees the aggressive action maximizes each agent's own
    # true reward
    agents = [
        _Agent(ROW, states[0], actions[0], AGGRESSIVE, sc),
        _Agent(COL, states[1], actions[1], AGGRESSIVE, sc),
    ]
    for agent, other in ((agents[0], agents[1]), (agents[1], agents[0])):
        other_maneuver = other.maneuvers[expected[agent.id]]
        agent.expected_other = destination(other.state, other_maneuver)

    replan_steps = max(1, round(sc.replan_period / sc.dt))
    max_steps = int(round(sc.max_time / sc.dt))
    weights = sc.planner.weights
    eps = sc.goal_tolerance

    def observe_and_plan(step_k: int) -> None:
        for agent, other in ((agents[0], agents[1]), (agents[1], agents[0])):
            agent.last_obs = other.state
            agent.last_obs_step = step_k
            _predict(agent, sc, step_k)
            _replan(agent, sc, step_k)

    def log(step_k: int) -> None:
        if trace is None:
            return
        for agent in agents:
            trace.append(
                (
                    step_k * sc.dt,
                    "row" if agent.id == ROW else "col",
                    agent.state.x,
                    agent.state.y,
                    agent.state.v,
                    agent.state.theta,
                    "true" if agent.in_true_phase else "initial",
                )
            )

    log(0)
    k = 0
    while k < max_steps:
        if k % replan_steps == 0:
            observe_and_plan(k)
        controls = [_control_at(a, k) for a in agents]
        for agent, u in zip(agents, controls):
            agent.state = step(agent.state, u, sc.dt, sc.vehicle)
        k += 1
        t_now = k * sc.dt
        log(k)

        for agent in agents:
            if not agent.in_true_phase:
                if goal_distance(agent.state, agent.goal, weights) < eps:
                    agent.in_true_phase = True
                    agent.goal = destination(
                        agent.state, agent.maneuvers[agent.true_action]
                    )
                    _replan(agent, sc, k)
            if agent.in_true_phase:
                inside = goal_distance(agent.state, agent.goal, weights) < eps
                if inside and not agent.inside:
                    agent.t_complete = t_now
                agent.inside = inside

        if all(a.in_true_phase and a.inside for a in agents):
            break

    done = all(a.in_true_phase and a.inside for a in agents)
    timeout = not done
    r1 = m.row_reward(actions[0], actions[1])
    r2 = m.col_reward(actions[0], actions[1])
    if done:
        total = agents[0].t_complete + agents[1].t_complete
        signed = max(r1, r2) * total
    else:
        total = None
        signed = None
    return ExperimentRecord(
        t_complete_row=agents[0].t_complete if done else None,
        t_complete_col=agents[1].t_complete if done else None,
        total_time=total,
        actions=actions,
        rewards=(r1, r2),
        signed_time=signed,
        conflict=outcome.conflict,
        category=outcome.category,
        timeout=timeout,
        seed=seed,
    )


def write_trace_csv(trace: list, path, manifest: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if manifest:
            fh.write(f"# manifest: {manifest}\n")
        writer = csv.writer(fh)
        writer.writerow(["t", "agent", "x", "y", "v", "theta", "phase"])
        for row in trace:
            writer.writerow(
                [format(row[0], ".6g"), row[1]]
                + [format(v, ".6g") for v in row[2:6]]
                + [row[6]]
            )


def _sweep_cell(args):
    kind_value, c1, c2, sc, seeds = args
    model = SocialModel.of_kind(ModelKind(kind_value), c1, c2)
    try:
        records = [run_experiment(model, sc, seed) for seed in seeds]
    except EpisodeError:
        return None, 0, True
    completed = [r for r in records if not r.timeout]
    mean = (
        sum(r.signed_time for r in completed) / len(completed) if completed else None
    )
    return mean, len(completed), False


def run_sweep(
    kind: ModelKind,
    coefficients: Sequence[float],
    reps: int,
    sc: ScenarioConfig | None = None,
    base_seed: int = 0,
    jobs: int = 1,
) -> SweepGrid:
    """Seeded grid of episodes; cell means over completed repetitions.

    Episode seeds derive only from (base_seed, cell, rep), so the grid is
    independent of the worker count and bit-reproducible.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    sc = sc or ScenarioConfig()
    coeffs = tuple(float(c) for c in coefficients)
    seeds = tuple(
        tuple(
            tuple(episode_seed(base_seed, i, j, r) for r in range(reps))
            for j in range(len(coeffs))
        )
        for i in range(len(coeffs))
    )
    grid_outcomes = conflict_grid(kind, coeffs, sc.matrix)
    tasks = [
        (kind.value, c1, c2, sc, seeds[i][j])
        for i, c1 in enumerate(coeffs)
        for j, c2 in enumerate(coeffs)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_cell, tasks))
    else:
        results = [_sweep_cell(t) for t in tasks]

    n = len(coeffs)
    means = tuple(
        tuple(results[i * n + j][0] for j in range(n)) for i in range(n)
    )
    completed = tuple(
        tuple(results[i * n + j][1] for j in range(n)) for i in range(n)
    )
    failed = tuple(
        tuple(results[i * n + j][2] for j in range(n)) for i in range(n)
    )
    conflict = tuple(
        tuple(grid_outcomes[i][j].conflict for j in range(n)) for i in range(n)
    )
    return SweepGrid(
        kind=kind,
        coefficients=coeffs,
        mean_signed_time=means,
        conflict=conflict,
        completed=completed,
        failed=failed,
        reps=reps,
        seeds=seeds,
    )
