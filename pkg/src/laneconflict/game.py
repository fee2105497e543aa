"""Two-agent driving games on a 2x2 reward matrix.

Each agent privately prefers one antidiagonal cell: the row agent's best
outcome sits at (A2, B1), the column agent's at (A1, B2).  A social decision
model blends the two agents' rewards into effective rewards; each agent then
compares its own effective reward across the two antidiagonal cells and picks
the action leading toward the better one.  A conflict is any outcome where
both agents push for their own preferred cell or both give way.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import NamedTuple

import numpy as np

DEFAULT_SENTINEL = -1.0e9

# Agent ids and action indices.  Index 1 is always the agent's own aggressive
# action (A2 for the row agent, B2 for the column agent).
ROW = 0
COL = 1
PASSIVE = 0
AGGRESSIVE = 1

ACTION_NAMES = {ROW: ("A1", "A2"), COL: ("B1", "B2")}


class AmbiguousPreference(ValueError):
    """Reward matrix does not give both agents strict preferred cells."""


class DegenerateCoefficients(ValueError):
    """Model coefficients outside the admissible domain."""


class NonConvergence(RuntimeError):
    """Iterated reward blending did not settle within the budget."""


class ModelKind(str, Enum):
    BASELINE = "baseline"
    PURE_ALTRUISM = "pure_altruism"
    ALTRUISM = "altruism"
    AUGMENTED_ALTRUISM = "augmented_altruism"
    SVO = "svo"


class Category(str, Enum):
    """Joint outcome of the two agents' independent decisions."""

    BOTH_AGGRESSIVE = "both-aggressive"
    BOTH_PASSIVE = "both-passive"
    ROW_YIELDS = "agreement-row-yields"
    COL_YIELDS = "agreement-col-yields"

    @property
    def is_conflict(self) -> bool:
        return self in (Category.BOTH_AGGRESSIVE, Category.BOTH_PASSIVE)


Cell = tuple[float, float]


@dataclass(frozen=True)
class RewardMatrix:
    """2x2 game: ``cells[row_action][col_action] = (row reward, col reward)``."""

    cells: tuple[tuple[Cell, Cell], tuple[Cell, Cell]]

    @classmethod
    def from_rows(cls, rows) -> "RewardMatrix":
        if len(rows) != 2 or any(len(r) != 2 for r in rows):
            raise ValueError("reward matrix must be 2x2")
        cells = tuple(
            tuple((float(cell[0]), float(cell[1])) for cell in row) for row in rows
        )
        return cls(cells)  # type: ignore[arg-type]

    def row_reward(self, row_action: int, col_action: int) -> float:
        return self.cells[row_action][col_action][0]

    def col_reward(self, row_action: int, col_action: int) -> float:
        return self.cells[row_action][col_action][1]

    def agent_reward(self, agent: int, row_action: int, col_action: int) -> float:
        return self.cells[row_action][col_action][agent]

    def to_rows(self) -> list[list[list[float]]]:
        return [[list(cell) for cell in row] for row in self.cells]


def lane_change_matrix() -> RewardMatrix:
    """Lane-change experiment game: finite penalties on the diagonal.

    Rows are the merging car's actions (decelerate, lane-change); columns the
    other car's (give-way, continue).
    """
    return RewardMatrix.from_rows([[(-1, -1), (0, 1)], [(1, 0), (-1, -1)]])


def blocked_merge_matrix(sentinel: float = DEFAULT_SENTINEL) -> RewardMatrix:
    """Merge-or-brake game whose diagonal cells are catastrophic.

    The mutually undesirable cells carry a large-negative finite sentinel so
    all arithmetic stays total.
    """
    s = float(sentinel)
    return RewardMatrix.from_rows([[(s, s), (0, 1)], [(1, 0), (s, s)]])


def matrix_from_margins(row_gap: float, col_gap: float) -> RewardMatrix:
    """Build a valid matrix whose antidiagonal margins are the given gaps.

    The row agent wins ``row_gap`` over yielding, the column agent
    ``col_gap``; diagonal cells sit strictly below everything.
    """
    if row_gap <= 0 or col_gap <= 0:
        raise ValueError("margins must be positive")
    worst = -1.0 - abs(row_gap) - abs(col_gap)
    return RewardMatrix.from_rows(
        [[(worst, worst), (0.0, col_gap)], [(row_gap, 0.0), (worst, worst)]]
    )


def validate_matrix(m: RewardMatrix) -> RewardMatrix:
    """Check that each agent strictly prefers its antidiagonal cell.

    The row agent's reward at (A2,B1) must strictly exceed its reward in every
    other cell, and symmetrically for the column agent at (A1,B2).  Returns
    the matrix unchanged; raises :class:`AmbiguousPreference` naming the first
    violated inequality.
    """
    for value in (v for row in m.cells for cell in row for v in cell):
        if not math.isfinite(value):
            raise AmbiguousPreference(
                "rewards must be finite; store catastrophic cells as a "
                "large-negative sentinel"
            )
    checks = [
        (ROW, (AGGRESSIVE, PASSIVE), (PASSIVE, AGGRESSIVE)),
        (ROW, (AGGRESSIVE, PASSIVE), (PASSIVE, PASSIVE)),
        (ROW, (AGGRESSIVE, PASSIVE), (AGGRESSIVE, AGGRESSIVE)),
        (COL, (PASSIVE, AGGRESSIVE), (AGGRESSIVE, PASSIVE)),
        (COL, (PASSIVE, AGGRESSIVE), (PASSIVE, PASSIVE)),
        (COL, (PASSIVE, AGGRESSIVE), (AGGRESSIVE, AGGRESSIVE)),
    ]
    for agent, best, other in checks:
        r_best = m.agent_reward(agent, *best)
        r_other = m.agent_reward(agent, *other)
        if not r_best > r_other:
            name = "row" if agent == ROW else "col"
            raise AmbiguousPreference(
                f"{name} agent reward at ({ACTION_NAMES[ROW][best[0]]},"
                f"{ACTION_NAMES[COL][best[1]]})={r_best} must strictly exceed "
                f"({ACTION_NAMES[ROW][other[0]]},{ACTION_NAMES[COL][other[1]]})"
                f"={r_other}"
            )
    return m


@dataclass(frozen=True)
class SocialModel:
    """Decision model tag plus the two agents' coefficients.

    ``c1``/``c2`` are the row/column agents' blend coefficients: altruism
    weights in [0, 1] for the altruistic variants, orientation angles in
    [0, pi/2] radians for SVO.  Baseline carries no parameters.
    """

    kind: ModelKind
    c1: float = 0.0
    c2: float = 0.0

    def __post_init__(self):
        k = self.kind
        if k is ModelKind.BASELINE:
            return
        if k is ModelKind.SVO:
            lo, hi = 0.0, math.pi / 2
            unit = "radians"
        else:
            lo, hi = 0.0, 1.0
            unit = "coefficients"
        for c in (self.c1, self.c2):
            if not (lo <= c <= hi):
                raise DegenerateCoefficients(
                    f"{k.value} {unit} must lie in [{lo}, {hi:.6g}], got {c}"
                )
        if k is ModelKind.AUGMENTED_ALTRUISM and self.c1 * self.c2 >= 1.0:
            raise DegenerateCoefficients(
                "augmented altruism requires c1*c2 < 1; mutual full altruism "
                "has no steady state"
            )

    @classmethod
    def baseline(cls) -> "SocialModel":
        return cls(ModelKind.BASELINE)

    @classmethod
    def pure_altruism(cls, c1: float, c2: float | None = None) -> "SocialModel":
        """One shared coefficient, or one per agent."""
        return cls(ModelKind.PURE_ALTRUISM, c1, c1 if c2 is None else c2)

    @classmethod
    def altruism(cls, c1: float, c2: float) -> "SocialModel":
        return cls(ModelKind.ALTRUISM, c1, c2)

    @classmethod
    def augmented_altruism(cls, c1: float, c2: float) -> "SocialModel":
        return cls(ModelKind.AUGMENTED_ALTRUISM, c1, c2)

    @classmethod
    def svo(cls, theta1: float, theta2: float) -> "SocialModel":
        return cls(ModelKind.SVO, theta1, theta2)

    @classmethod
    def of_kind(cls, kind: ModelKind, c1: float = 0.0, c2: float = 0.0) -> "SocialModel":
        if kind is ModelKind.BASELINE:
            return cls.baseline()
        return cls(kind, c1, c2)


def effective_own(kind: ModelKind, c_own, c_other, r_own, r_other):
    """Effective reward one agent assigns to a joint outcome.

    ``c_own``/``c_other`` are the deciding agent's and the other agent's
    coefficients; values may be scalars or numpy arrays.  Baseline keeps the
    raw reward; the altruistic variants blend in the other agent's reward;
    augmented altruism is the steady state of the mutually iterated blend,

        r* = ((1 - c_own) r_own + c_own (1 - c_other) r_other) / (1 - c_own c_other)
    """
    if kind is ModelKind.BASELINE:
        return r_own
    if kind is ModelKind.PURE_ALTRUISM:
        return r_own + c_own * r_other
    if kind is ModelKind.ALTRUISM:
        return (1.0 - c_own) * r_own + c_own * r_other
    if kind is ModelKind.AUGMENTED_ALTRUISM:
        denom = 1.0 - c_own * c_other
        return ((1.0 - c_own) * r_own + c_own * (1.0 - c_other) * r_other) / denom
    if kind is ModelKind.SVO:
        return np.cos(c_own) * r_own + np.sin(c_own) * r_other
    raise ValueError(f"unknown model kind {kind!r}")


def effective_rewards(model: SocialModel, m: RewardMatrix) -> RewardMatrix:
    """Cell-wise transform of the whole matrix under both agents' blends."""
    if model.kind is ModelKind.AUGMENTED_ALTRUISM and model.c1 * model.c2 >= 1.0:
        raise DegenerateCoefficients("augmented altruism requires c1*c2 < 1")
    rows = []
    for i in (0, 1):
        row = []
        for j in (0, 1):
            r1, r2 = m.cells[i][j]
            e1 = effective_own(model.kind, model.c1, model.c2, r1, r2)
            e2 = effective_own(model.kind, model.c2, model.c1, r2, r1)
            row.append((float(e1), float(e2)))
        rows.append(tuple(row))
    return RewardMatrix(tuple(rows))  # type: ignore[arg-type]


class FixedPoint(NamedTuple):
    r1: float
    r2: float
    iterations: int


def augmented_fixed_point(
    r1: float,
    r2: float,
    c1: float,
    c2: float,
    tol: float = 1e-12,
    max_iterations: int = 10**6,
) -> FixedPoint:
    """Iterate the mutual reward blend to its steady state.

    Each sweep replaces the pair with

        r1' = (1 - c1) r1 + c1 r2_prev
        r2' = (1 - c2) r2 + c2 r1_prev

    starting from the raw rewards, and stops once successive iterates move by
    less than ``tol`` in both components.  Serves as the independent check on
    the closed-form steady state used by :func:`effective_own`.
    """
    if not (0.0 <= c1 <= 1.0 and 0.0 <= c2 <= 1.0):
        raise DegenerateCoefficients("coefficients must lie in [0, 1]")
    if c1 * c2 >= 1.0:
        raise DegenerateCoefficients("iteration has no steady state at c1*c2 = 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    x, y = float(r1), float(r2)
    for k in range(1, max_iterations + 1):
        nx = (1.0 - c1) * r1 + c1 * y
        ny = (1.0 - c2) * r2 + c2 * x
        if abs(nx - x) < tol and abs(ny - y) < tol:
            return FixedPoint(nx, ny, k)
        x, y = nx, ny
    raise NonConvergence(f"no fixed point within {max_iterations} iterations")


@dataclass(frozen=True)
class DecisionOutcome:
    row_choice: int
    col_choice: int
    conflict: bool
    category: Category


def decide(model: SocialModel, m: RewardMatrix, agent: int) -> int:
    """Action the agent takes when it assumes it moves first.

    Compares the agent's effective reward in its preferred antidiagonal cell
    against the opposing one; exact ties resolve to the aggressive action so
    equal-blend models still commit to a move.  Baseline agents are always
    aggressive (the raw matrix strictly prefers their own cell).
    """
    eff = effective_rewards(model, m)
    if agent == ROW:
        own_push = eff.row_reward(AGGRESSIVE, PASSIVE)
        own_yield = eff.row_reward(PASSIVE, AGGRESSIVE)
    elif agent == COL:
        own_push = eff.col_reward(PASSIVE, AGGRESSIVE)
        own_yield = eff.col_reward(AGGRESSIVE, PASSIVE)
    else:
        raise ValueError(f"agent must be ROW (0) or COL (1), got {agent}")
    return AGGRESSIVE if own_push >= own_yield else PASSIVE


def detect_conflict(model: SocialModel, m: RewardMatrix) -> DecisionOutcome:
    """Run both agents' decisions and classify the joint outcome."""
    row_choice = decide(model, m, ROW)
    col_choice = decide(model, m, COL)
    if row_choice == AGGRESSIVE and col_choice == AGGRESSIVE:
        category = Category.BOTH_AGGRESSIVE
    elif row_choice == PASSIVE and col_choice == PASSIVE:
        category = Category.BOTH_PASSIVE
    elif row_choice == PASSIVE:
        category = Category.ROW_YIELDS
    else:
        category = Category.COL_YIELDS
    return DecisionOutcome(row_choice, col_choice, category.is_conflict, category)


def load_matrix(source) -> RewardMatrix:
    """Load and validate a reward matrix from JSON.

    Accepts a path, a JSON string, or an already-parsed dict with keys
    ``cells`` (2x2 array of ``[r_row, r_col]`` pairs) and optional
    ``sentinel`` (number substituted for the string ``"-inf"``).
    """
    if isinstance(source, dict):
        doc = source
    else:
        text = Path(source).read_text() if Path(str(source)).exists() else str(source)
        doc = json.loads(text)
    if not isinstance(doc, dict) or "cells" not in doc:
        raise ValueError("matrix document must be an object with a 'cells' key")
    sentinel = float(doc.get("sentinel", DEFAULT_SENTINEL))

    def as_value(v) -> float:
        if isinstance(v, str):
            if v == "-inf":
                return sentinel
            raise ValueError(f"unsupported reward string {v!r}")
        return float(v)

    cells = doc["cells"]
    try:
        if len(cells) != 2 or any(len(row) != 2 for row in cells):
            raise ValueError
        rows = [
            [(as_value(cell[0]), as_value(cell[1])) for cell in row] for row in cells
        ]
    except (TypeError, IndexError, ValueError) as exc:
        raise ValueError(
            f"'cells' must be a 2x2 array of [r_row, r_col] pairs: {exc}"
        ) from None
    return validate_matrix(RewardMatrix.from_rows(rows))
