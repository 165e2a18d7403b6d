from .configurations import AgentConfig, GridConfig, LeaderConfig, SimConfig, TopologyConfig
from .core import get_scenarios, load_config, scenario_defaults, validate_config
from .integrators import LinearPart, integrate, lawson_rk4, rk4
from .runner import (
    Simulation,
    StateLayout,
    build_context,
    build_extrapolation_grid,
    leader_state,
    run,
)
from .trace import TraceLog, trace_columns
