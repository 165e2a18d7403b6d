from .models import (
    AgentModel,
    LeaderModel,
    FormationSpec,
    PLANT_FAMILIES,
    build_agent_model,
    example_1d_model,
    exponential_leader,
    kinematic_wheel_model,
    linear_model,
)
from .core import (
    DriftTerms,
    NetworkGeometry,
    NetworkPlan,
    NetworkSnapshot,
    PlantContext,
    SubgraphGeometry,
    SubgraphState,
    build_block_gain,
    build_network_plan,
    build_relative_drift_stack,
    controls_from_mu,
    error_flow,
    matvec,
    mu_from_controls,
    neighborhood_error,
    pseudo_inverse,
    recover_states,
    relative_control_terms,
    stacked_error,
    state_flow,
    steady_state_mismatches,
    steady_state_residual,
)
