from .basis import EXAMPLE_1D_TERMS, ValueBasis, parse_monomial, quadratic_error_terms, variable_names
from .core import (
    ActorState,
    AgentLearner,
    BellmanEvaluator,
    BellmanSample,
    CostSpec,
    CriticState,
    CurrentBellman,
    GridLinearization,
    GridRankMonitor,
    LocalLinearization,
    actor_flow,
    bellman_error,
    critic_flow,
    g_sigma,
    grid_rank_metric,
    hj_residual_exact,
    normalization,
    policy,
    regressor,
    value,
)
from .grid import GRID_MODES, ExtrapolationGrid, build_grid
