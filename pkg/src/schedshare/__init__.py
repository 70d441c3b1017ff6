"""Cost-sharing mechanisms on parallel-machine scheduling games.

A simulation and verification laboratory: an online assignment algorithm
with a provable constant competitive ratio, three cost-sharing protocols
built on it, and an equilibrium engine that measures stability and the
price of anarchy exactly.
"""

from .cost_model import (
    INFINITE,
    Instance,
    StepCostFunction,
    approximate_bounded,
    eval_cost,
    max_jump_ratio,
    merge_equal_segments,
    normalize,
)
from .delayed_opt import (
    AssignmentTrace,
    SegmentOrder,
    competitive_ratio,
    delayed_opt_assign,
    segment_order,
)
from .experiments import (
    ExpectedPoAReport,
    PoAReport,
    capacity_diagnostic,
    competitive_sweep,
    expected_poa,
    poa,
)
from .game_engine import ENUMERATION_GUARD, Game, Profile
from .mechanisms import (
    AgentUniverse,
    MechanismKind,
    MechanismSpec,
    select_disruptors,
    shares_capacitated,
    shares_step,
    shares_stochastic,
)
from .opt_oracle import OptOracle, ThresholdTable, opt_allocation, thresholds
from .shares import (
    INFINITE_SHARE,
    ZERO_SHARE,
    ShareValue,
    cumulative_cost,
    excess,
    last_segment,
    priority_agent,
)

__all__ = [
    "AgentUniverse",
    "AssignmentTrace",
    "ENUMERATION_GUARD",
    "ExpectedPoAReport",
    "Game",
    "INFINITE",
    "INFINITE_SHARE",
    "Instance",
    "MechanismKind",
    "MechanismSpec",
    "OptOracle",
    "PoAReport",
    "Profile",
    "SegmentOrder",
    "ShareValue",
    "StepCostFunction",
    "ThresholdTable",
    "ZERO_SHARE",
    "approximate_bounded",
    "capacity_diagnostic",
    "competitive_ratio",
    "competitive_sweep",
    "cumulative_cost",
    "delayed_opt_assign",
    "eval_cost",
    "excess",
    "expected_poa",
    "last_segment",
    "max_jump_ratio",
    "merge_equal_segments",
    "normalize",
    "opt_allocation",
    "poa",
    "priority_agent",
    "segment_order",
    "select_disruptors",
    "shares_capacitated",
    "shares_step",
    "shares_stochastic",
    "thresholds",
]

__version__ = "0.1.0"
