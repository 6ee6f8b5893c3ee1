"""Finite-horizon equilibrium synthesis for neuro-symbolic concurrent
stochastic games: model construction, unfolding, social-welfare backward
induction, exact constraint programs and frozen subgame improvement."""

from .benchmarks import BuiltModel, build
from .errors import ModelError, ResourceLimitError, SolverError
from .fsi import FsiConfig, freeze_partition, run_fsi
from .gbi import (
    EquilibriumSolution,
    run_gbi,
    run_minimax,
    social_welfare,
    solution_from_json,
    solution_to_json,
)
from .model import (
    Action,
    AgentSpec,
    AgentState,
    FeedForwardNet,
    GlobalState,
    NsCsg,
    RewardStructure,
    canonical_key,
    joint_actions,
    load_model_json,
    load_net_json,
    nn_forward,
    observe_all,
    random_net,
    successors,
)
from .nfg import (
    BimatrixGame,
    any_equilibrium,
    enumerate_ne,
    swce,
    swne,
    zero_sum_value,
)
from .speprog import (
    ConstraintSystem,
    assignment_from_solution,
    build_ce_system,
    build_ne_system,
    check_feasibility,
    coordinate_ascent_solve,
    evaluate_values,
    program_size,
    reinduction_solve,
    solve_exact_grid,
)
from .unfold import GameTree, Path, RegionGraph, path_value, stats, unfold_regions, unfold_tree
from .verify import best_response_value, check_spce, check_spne, simulate

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
