"""Kinematic bicycle dynamics and polynomial trajectory prediction.

Coordinates: x is lateral (across lanes), y longitudinal (along the road),
heading theta measured from the +x axis so straight-ahead driving is
theta = pi/2.  Predicted trajectories pair a quintic lateral polynomial with
a quartic longitudinal one; the longitudinal end position is deliberately
left free since a maneuver only pins the lateral offset and speed change.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

ZERO_SPEED = 1e-9


class SingularSystem(ValueError):
    """Polynomial boundary conditions cannot be solved."""


@dataclass(frozen=True)
class VehicleState:
    x: float
    y: float
    v: float
    theta: float


@dataclass(frozen=True)
class ControlInput:
    accel: float
    steer: float


@dataclass(frozen=True)
class VehicleParams:
    wheelbase: float = 2.7
    body_length: float = 4.5
    body_width: float = 1.8


@dataclass(frozen=True)
class ManeuverOffset:
    """Intended change in lateral position and speed."""

    dx: float
    dv: float


@dataclass(frozen=True)
class GoalState:
    """Maneuver destination; ``y`` is None when the longitudinal position is free."""

    x: float
    v: float
    theta: float
    y: float | None = None


def step(s: VehicleState, u: ControlInput, dt: float, p: VehicleParams) -> VehicleState:
    """One discrete bicycle-model step; pre-update v and theta throughout.

    Speed clamps at zero (no reverse motion).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    return VehicleState(
        x=s.x + s.v * math.cos(s.theta + u.steer) * dt,
        y=s.y + s.v * math.sin(s.theta + u.steer) * dt,
        v=max(0.0, s.v + u.accel * dt),
        theta=s.theta + (2.0 * s.v / p.wheelbase) * math.sin(u.steer) * dt,
    )


def destination(s: VehicleState, m: ManeuverOffset) -> GoalState:
    """Destination the maneuver implies from the state where it was decided."""
    return GoalState(x=s.x + m.dx, v=s.v + m.dv, theta=s.theta, y=None)


@dataclass(frozen=True)
class PolyTrajectory:
    """Quintic-x / quartic-y trajectory over [0, duration].

    Coefficients are highest order first.  ``theta0`` is kept as the heading
    fallback for samples where the parametric speed vanishes.
    """

    x_coeffs: tuple[float, ...]
    y_coeffs: tuple[float, ...]
    duration: float
    theta0: float

    def position(self, t: float) -> tuple[float, float]:
        return float(np.polyval(self.x_coeffs, t)), float(np.polyval(self.y_coeffs, t))

    def velocity(self, t: float) -> tuple[float, float]:
        dx = np.polyval(np.polyder(np.asarray(self.x_coeffs)), t)
        dy = np.polyval(np.polyder(np.asarray(self.y_coeffs)), t)
        return float(dx), float(dy)

    def accel(self, t: float) -> tuple[float, float]:
        ddx = np.polyval(np.polyder(np.asarray(self.x_coeffs), 2), t)
        ddy = np.polyval(np.polyder(np.asarray(self.y_coeffs), 2), t)
        return float(ddx), float(ddy)


@dataclass(frozen=True)
class DiscretizedTrajectory:
    """States at k*dt; extrapolates at constant speed and heading past the end."""

    states: tuple[VehicleState, ...]
    dt: float

    def __len__(self) -> int:
        return len(self.states)

    def state_at_step(self, k: int) -> VehicleState:
        if k < len(self.states):
            return self.states[k]
        last = self.states[-1]
        extra = (k - len(self.states) + 1) * self.dt
        return VehicleState(
            x=last.x + last.v * math.cos(last.theta) * extra,
            y=last.y + last.v * math.sin(last.theta) * extra,
            v=last.v,
            theta=last.theta,
        )

    def window(self, start: int, count: int) -> "DiscretizedTrajectory":
        """View of ``count`` states beginning at step ``start``."""
        return DiscretizedTrajectory(
            tuple(self.state_at_step(start + k) for k in range(count)), self.dt
        )


def fit_polynomial(
    init: VehicleState,
    init_accel: tuple[float, float],
    goal: GoalState,
    duration: float,
) -> PolyTrajectory:
    """Fit the trajectory polynomials to the maneuver boundary conditions.

    The lateral quintic pins position, velocity and acceleration at t = 0 and
    position, velocity and zero acceleration at t = duration; the
    longitudinal quartic pins everything except the final position.  Raises
    :class:`SingularSystem` for a non-positive duration or an unsolvable
    system; the solved coefficients are checked to reproduce all eleven
    conditions to 1e-6.
    """
    if duration <= 0:
        raise SingularSystem(f"duration must be positive, got {duration}")
    T = float(duration)
    vx0 = init.v * math.cos(init.theta)
    vy0 = init.v * math.sin(init.theta)
    vxT = goal.v * math.cos(goal.theta)
    vyT = goal.v * math.sin(goal.theta)
    ax0, ay0 = float(init_accel[0]), float(init_accel[1])

    ax_mat = np.array(
        [
            [0, 0, 0, 0, 0, 1],
            [0, 0, 0, 0, 1, 0],
            [0, 0, 0, 2, 0, 0],
            [T**5, T**4, T**3, T**2, T, 1],
            [5 * T**4, 4 * T**3, 3 * T**2, 2 * T, 1, 0],
            [20 * T**3, 12 * T**2, 6 * T, 2, 0, 0],
        ],
        dtype=float,
    )
    bx = np.array([init.x, vx0, ax0, goal.x, vxT, 0.0])

    ay_mat = np.array(
        [
            [0, 0, 0, 0, 1],
            [0, 0, 0, 1, 0],
            [0, 0, 2, 0, 0],
            [4 * T**3, 3 * T**2, 2 * T, 1, 0],
            [12 * T**2, 6 * T, 2, 0, 0],
        ],
        dtype=float,
    )
    by = np.array([init.y, vy0, ay0, vyT, 0.0])

    try:
        xc = np.linalg.solve(ax_mat, bx)
        yc = np.linalg.solve(ay_mat, by)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"boundary system is singular for T={T}") from exc
    traj = PolyTrajectory(tuple(xc), tuple(yc), T, init.theta)
    res = boundary_residuals(traj, init, (ax0, ay0), goal)
    if not np.all(np.isfinite(res)) or np.max(np.abs(res)) > 1e-6:
        raise SingularSystem(
            f"boundary residuals up to {np.max(np.abs(res)):.3g} for T={T}"
        )
    return traj


def boundary_residuals(
    traj: PolyTrajectory,
    init: VehicleState,
    init_accel: tuple[float, float],
    goal: GoalState,
) -> np.ndarray:
    """All eleven boundary-condition residuals, evaluated from the polynomials."""
    T = traj.duration
    x0, y0 = traj.position(0.0)
    vx0, vy0 = traj.velocity(0.0)
    ax0, ay0 = traj.accel(0.0)
    xT, _ = traj.position(T)
    vxT, vyT = traj.velocity(T)
    axT, ayT = traj.accel(T)
    return np.array(
        [
            x0 - init.x,
            y0 - init.y,
            vx0 - init.v * math.cos(init.theta),
            vy0 - init.v * math.sin(init.theta),
            ax0 - init_accel[0],
            ay0 - init_accel[1],
            xT - goal.x,
            vxT - goal.v * math.cos(goal.theta),
            vyT - goal.v * math.sin(goal.theta),
            axT,
            ayT,
        ]
    )


def sample(traj: PolyTrajectory, dt: float) -> DiscretizedTrajectory:
    """Discretize the trajectory, reconstructing speed and heading.

    v = hypot(dx, dy) and theta = atan2(dy, dx); where the parametric speed
    drops below ``ZERO_SPEED`` the heading is held from the previous sample.
    """
    if not (0 < dt <= traj.duration):
        raise ValueError(f"dt must lie in (0, {traj.duration}], got {dt}")
    count = int(math.floor(traj.duration / dt + 1e-9)) + 1
    states = []
    theta_prev = traj.theta0
    for k in range(count):
        t = k * dt
        x, y = traj.position(t)
        dx, dy = traj.velocity(t)
        v = math.hypot(dx, dy)
        if v < ZERO_SPEED:
            theta = theta_prev
        else:
            theta = math.atan2(dy, dx)
        states.append(VehicleState(x, y, v, theta))
        theta_prev = theta
    return DiscretizedTrajectory(tuple(states), dt)


def write_trajectory_csv(traj: DiscretizedTrajectory, path, manifest: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if manifest:
            fh.write(f"# manifest: {manifest}\n")
        writer = csv.writer(fh)
        writer.writerow(["t", "x", "y", "v", "theta"])
        for k, s in enumerate(traj.states):
            writer.writerow(
                [format(k * traj.dt, ".6g")]
                + [format(val, ".6g") for val in (s.x, s.y, s.v, s.theta)]
            )
