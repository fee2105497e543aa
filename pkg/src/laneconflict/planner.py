"""Receding-horizon trajectory optimization against a predicted other vehicle.

Single-shooting direct transcription: the decision variables are the control
sequence, states follow from the bicycle model, and inequality constraints
(road edges, speed, heading, collision ellipse) enter as escalating quadratic
penalties.  Descent uses numerically estimated gradients in a control space
scaled to the box bounds, with a backtracking step; control bounds are
enforced exactly by projection.  Deterministic: no randomness anywhere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .vehicle import (
    ControlInput,
    DiscretizedTrajectory,
    VehicleParams,
    VehicleState,
    step,
)


class InfeasibleStart(ValueError):
    """Own state already violates the collision ellipse at the first step."""


@dataclass(frozen=True)
class PlannerConfig:
    dt: float = 0.2
    horizon_steps: int = 20
    weights: tuple[float, float, float, float] = (1.0, 0.0, 1.0, 10.0)
    accel_bounds: tuple[float, float] = (-3.0, 3.0)
    steer_bounds: tuple[float, float] = (-0.0175, 0.0175)
    x_bounds: tuple[float, float] = (0.0, 7.4)
    v_bounds: tuple[float, float] = (0.0, 15.0)
    theta_bounds: tuple[float, float] = (math.pi / 4.0, 3.0 * math.pi / 4.0)
    ellipse: tuple[float, float] = (2.0, 6.0)
    penalty_initial: float = 100.0
    penalty_growth: float = 10.0
    penalty_rounds: int = 5
    max_iterations: int = 160
    gradient_tol: float = 1e-6
    fd_step: float = 1e-6
    feasibility_tol: float = 1e-3


@dataclass(frozen=True)
class PlanResult:
    controls: tuple[ControlInput, ...]
    states: tuple[VehicleState, ...]
    cost: float
    max_violation: dict[str, float]
    feasible: bool
    budget_exhausted: bool
    penalty_history: tuple[tuple[float, ...], ...]
    config: PlannerConfig
    params: VehicleParams


@dataclass(frozen=True)
class AuditReport:
    max_violation: dict[str, float]
    states: tuple[VehicleState, ...]
    max_state_error: float


@njit(cache=True)
def _eval_batch(
    U,  # (B, 2, N) physical controls
    x0, y0, v0, th0,
    dt, wheelbase,
    wx, wy, wv, wth,
    gx, gv, gth, gy, has_gy,
    xlo, xhi, vlo, vhi, thlo, thhi,
    rx, ry,
    ox, oy,  # other vehicle positions, length N+1
    mu,
    out_p, out_j,
):
    B = U.shape[0]
    N = U.shape[2]
    xspan = xhi - xlo
    vspan = vhi - vlo
    thspan = thhi - thlo
    for b in range(B):
        x = x0
        y = y0
        v = v0
        th = th0
        J = 0.0
        pen = 0.0
        for k in range(N + 1):
            J += wx * (x - gx) ** 2 + wv * (v - gv) ** 2 + wth * (th - gth) ** 2
            if has_gy:
                J += wy * (y - gy) ** 2
            viol = (xlo - x) / xspan
            if (x - xhi) / xspan > viol:
                viol = (x - xhi) / xspan
            if viol > 0.0:
                pen += viol * viol
            viol = (vlo - v) / vspan
            if (v - vhi) / vspan > viol:
                viol = (v - vhi) / vspan
            if viol > 0.0:
                pen += viol * viol
            viol = (thlo - th) / thspan
            if (th - thhi) / thspan > viol:
                viol = (th - thhi) / thspan
            if viol > 0.0:
                pen += viol * viol
            dxo = (x - ox[k]) / rx
            dyo = (y - oy[k]) / ry
            g = 1.0 - dxo * dxo - dyo * dyo
            if g > 0.0:
                pen += g * g
            if k < N:
                a = U[b, 0, k]
                d = U[b, 1, k]
                nx = x + v * math.cos(th + d) * dt
                ny = y + v * math.sin(th + d) * dt
                nth = th + (2.0 * v / wheelbase) * math.sin(d) * dt
                nv = v + a * dt
                if nv < 0.0:
                    nv = 0.0
                x, y, v, th = nx, ny, nv, nth
        out_j[b] = J
        out_p[b] = J + mu * pen


def _other_positions(other: DiscretizedTrajectory, n_steps: int):
    states = [other.state_at_step(k) for k in range(n_steps + 1)]
    ox = np.array([s.x for s in states])
    oy = np.array([s.y for s in states])
    return ox, oy


class _Evaluator:
    """Penalty objective over physical control batches for one plan call."""

    def __init__(self, own, goal, ox, oy, cfg, params):
        self.args = (
            own.x, own.y, own.v, own.theta,
            cfg.dt, params.wheelbase,
            cfg.weights[0], cfg.weights[1], cfg.weights[2], cfg.weights[3],
            goal.x, goal.v, goal.theta,
            goal.y if goal.y is not None else 0.0,
            goal.y is not None and cfg.weights[1] != 0.0,
            cfg.x_bounds[0], cfg.x_bounds[1],
            cfg.v_bounds[0], cfg.v_bounds[1],
            cfg.theta_bounds[0], cfg.theta_bounds[1],
            cfg.ellipse[0], cfg.ellipse[1],
            ox, oy,
        )

    def __call__(self, U: np.ndarray, mu: float):
        out_p = np.empty(U.shape[0])
        out_j = np.empty(U.shape[0])
        _eval_batch(U, *self.args, mu, out_p, out_j)
        return out_p, out_j


def _rollout(own: VehicleState, controls, dt: float, params: VehicleParams):
    states = [own]
    for u in controls:
        states.append(step(states[-1], u, dt, params))
    return tuple(states)


def constraint_report(
    controls, states, other: DiscretizedTrajectory, cfg: PlannerConfig
) -> dict[str, float]:
    """Signed, normalized per-family constraint maxima (<= 0 means satisfied).

    Box families are normalized by their bound span; the collision value is
    the dimensionless ellipse overlap itself.
    """
    rx, ry = cfg.ellipse

    def box_max(values, bounds):
        lo, hi = bounds
        span = hi - lo
        return max(max(lo - v, v - hi) / span for v in values)

    report = {
        "x": box_max([s.x for s in states], cfg.x_bounds),
        "v": box_max([s.v for s in states], cfg.v_bounds),
        "theta": box_max([s.theta for s in states], cfg.theta_bounds),
        "accel": box_max([u.accel for u in controls], cfg.accel_bounds),
        "steer": box_max([u.steer for u in controls], cfg.steer_bounds),
    }
    worst = -math.inf
    for k, s in enumerate(states):
        o = other.state_at_step(k)
        g = 1.0 - ((s.x - o.x) / rx) ** 2 - ((s.y - o.y) / ry) ** 2
        worst = max(worst, g)
    report["collision"] = worst
    return report


def plan(
    own: VehicleState,
    goal,
    other: DiscretizedTrajectory,
    cfg: PlannerConfig | None = None,
    params: VehicleParams | None = None,
    warm_start=None,
) -> PlanResult:
    """Optimize a control sequence toward the goal against the predicted other.

    ``warm_start`` may carry a previous control sequence (shorter sequences
    are zero-padded).  Raises :class:`InfeasibleStart` when the initial state
    already overlaps the other vehicle's ellipse; otherwise always returns a
    plan, with ``feasible``/``budget_exhausted`` flags and per-family
    violation maxima for the caller to inspect.
    """
    cfg = cfg or PlannerConfig()
    params = params or VehicleParams()
    N = cfg.horizon_steps
    ox, oy = _other_positions(other, N)
    rx, ry = cfg.ellipse
    g0 = 1.0 - ((own.x - ox[0]) / rx) ** 2 - ((own.y - oy[0]) / ry) ** 2
    if g0 > 0.0:
        raise InfeasibleStart(
            f"initial state overlaps the other vehicle's ellipse (value {g0:.4g})"
        )

    evaluate = _Evaluator(own, goal, ox, oy, cfg, params)

    lo = np.array([cfg.accel_bounds[0], cfg.steer_bounds[0]])[:, None]
    hi = np.array([cfg.accel_bounds[1], cfg.steer_bounds[1]])[:, None]
    center = (lo + hi) / 2.0
    half = (hi - lo) / 2.0

    u = np.zeros((2, N))
    if warm_start is not None:
        ws = np.asarray(warm_start, dtype=float)
        if ws.shape[0] != 2:
            ws = ws.T
        m = min(N, ws.shape[1])
        u[:, :m] = ws[:, :m]
    # scaled coordinates: the box maps to [-1, 1] so gradient steps treat
    # acceleration and steering on an equal footing
    z = np.clip((u - center) / half, -1.0, 1.0)

    n_dim = 2 * N
    h = cfg.fd_step
    alpha = 0.05
    ladder = np.array([4.0, 2.0, 1.0, 0.5, 0.25, 0.125, 1.0 / 32, 1.0 / 128])
    history: list[tuple[float, ...]] = []
    budget_exhausted = False

    mu = cfg.penalty_initial
    for _ in range(cfg.penalty_rounds):
        p_cur, _ = evaluate((center + z[None] * half), mu)
        p_cur = float(p_cur[0])
        round_hist = [p_cur]
        hit_budget = True
        for _ in range(cfg.max_iterations):
            # forward differences in scaled space, batched over coordinates;
            # perturb inward at the upper bound so the step is never clipped away
            zf = z.reshape(n_dim)
            h_vec = np.where(zf + h <= 1.0, h, -h)
            Z = np.repeat(zf.reshape(1, n_dim), n_dim + 1, axis=0)
            Z[1:][np.diag_indices(n_dim)] += h_vec
            p_all, _ = evaluate(center + Z.reshape(-1, 2, N) * half, mu)
            grad = (p_all[1:] - p_all[0]) / h_vec
            # projected-gradient norm respects active bounds
            pg = z.reshape(-1) - np.clip(z.reshape(-1) - grad, -1.0, 1.0)
            if math.sqrt(float(pg @ pg)) < cfg.gradient_tol:
                hit_budget = False
                break
            steps = alpha * ladder
            cand = np.clip(
                z.reshape(1, n_dim) - steps[:, None] * grad[None, :], -1.0, 1.0
            )
            p_cand, _ = evaluate(center + cand.reshape(-1, 2, N) * half, mu)
            best = int(np.argmin(p_cand))
            if p_cand[best] >= p_cur:
                hit_budget = False
                break
            z = cand[best].reshape(2, N)
            p_cur = float(p_cand[best])
            round_hist.append(p_cur)
            alpha = min(max(alpha * ladder[best], 1e-8), 10.0)
        history.append(tuple(round_hist))
        budget_exhausted = hit_budget
        mu *= cfg.penalty_growth

    u = center + z * half
    controls = tuple(ControlInput(float(a), float(d)) for a, d in u.T)
    states = _rollout(own, controls, cfg.dt, params)
    violations = constraint_report(controls, states, other, cfg)
    _, j_final = evaluate(u[None], 0.0)
    return PlanResult(
        controls=controls,
        states=states,
        cost=float(j_final[0]),
        max_violation=violations,
        feasible=max(violations.values()) < cfg.feasibility_tol,
        budget_exhausted=budget_exhausted,
        penalty_history=tuple(history),
        config=cfg,
        params=params,
    )


def audit(
    result: PlanResult,
    other: DiscretizedTrajectory,
    cfg: PlannerConfig | None = None,
) -> AuditReport:
    """Recompute states and every constraint family from the stored controls.

    Uses the scalar dynamics directly, independent of the solver's batched
    arithmetic; the reconstructed states and violation maxima must agree with
    the embedded ones.
    """
    cfg = cfg or result.config
    states = _rollout(result.states[0], result.controls, cfg.dt, result.params)
    err = max(
        max(abs(a.x - b.x), abs(a.y - b.y), abs(a.v - b.v), abs(a.theta - b.theta))
        for a, b in zip(states, result.states)
    )
    return AuditReport(
        max_violation=constraint_report(result.controls, states, other, cfg),
        states=states,
        max_state_error=err,
    )
