"""Minimally invasive QP safety filters for heterogeneous planar robot teams."""

from .barrier import (
    AlreadyViolatedError,
    BarrierConfig,
    HalfspaceRow,
    NeighborInfo,
    as_ensemble,
    centralized_row,
    neighbor_radius,
    neighbors,
    pair_barrier,
    strategy_a_rows,
    strategy_b_rows,
    strategy_c_row,
)
from .dynamics import (
    AgentParams,
    AgentState,
    DegenerateGeometryError,
    RelativeState,
    relative_state,
    saturate_box,
    step,
)
from .estimator import LimitEstimator
from .qp import INFEASIBLE, OPTIMAL, QpProblem, QpSolution, brute_force_oracle, solve
from .sim import (
    MODES,
    AgentSetup,
    RunMetrics,
    Scenario,
    ScenarioError,
    StepRecord,
    TrajectoryLog,
    braking_fallback,
    compute_metrics,
    detect_deadlock,
    goal_controller,
    new_context,
    run,
    step_once,
)

__all__ = [
    "AgentParams",
    "AgentSetup",
    "AgentState",
    "AlreadyViolatedError",
    "BarrierConfig",
    "DegenerateGeometryError",
    "HalfspaceRow",
    "INFEASIBLE",
    "LimitEstimator",
    "MODES",
    "NeighborInfo",
    "OPTIMAL",
    "QpProblem",
    "QpSolution",
    "RelativeState",
    "RunMetrics",
    "Scenario",
    "ScenarioError",
    "StepRecord",
    "TrajectoryLog",
    "as_ensemble",
    "braking_fallback",
    "brute_force_oracle",
    "centralized_row",
    "compute_metrics",
    "detect_deadlock",
    "goal_controller",
    "neighbor_radius",
    "neighbors",
    "new_context",
    "pair_barrier",
    "relative_state",
    "run",
    "saturate_box",
    "solve",
    "step",
    "step_once",
    "strategy_a_rows",
    "strategy_b_rows",
    "strategy_c_row",
]

__version__ = "0.1.0"
