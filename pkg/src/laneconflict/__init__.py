"""laneconflict: altruism-weighted driving games, conflict areas, and
receding-horizon lane-change simulation."""

__version__ = "0.1.0"

from .aoc import (
    AocResult,
    GapPair,
    MonteCarloEstimate,
    RegionBounds,
    aoc_analytical,
    aoc_curve,
    aoc_monte_carlo,
    conflict_region_bounds,
    gaps,
)
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
    augmented_fixed_point,
    blocked_merge_matrix,
    decide,
    detect_conflict,
    effective_rewards,
    lane_change_matrix,
    load_matrix,
    matrix_from_margins,
    validate_matrix,
)
from .planner import PlannerConfig, PlanResult, audit, plan
from .sim import (
    ExperimentRecord,
    ScenarioConfig,
    SweepGrid,
    conflict_grid,
    run_experiment,
    run_sweep,
)
from .vehicle import (
    ControlInput,
    DiscretizedTrajectory,
    GoalState,
    ManeuverOffset,
    PolyTrajectory,
    VehicleParams,
    VehicleState,
    destination,
    fit_polynomial,
    sample,
    step,
)

__all__ = [name for name in dir() if not name.startswith("_")]
