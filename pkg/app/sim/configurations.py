from typing import Dict, List, Optional, Tuple

import pydantic

from app import settings
from app.actor_critic import GRID_MODES, ValueBasis
from app.netgraph import DirectedNetwork, subgraph_index
from app.plant import PLANT_FAMILIES, build_agent_model


def _as_list(value):
    if value is None or isinstance(value, (list, tuple)):
        return value
    return [value]


class TopologyConfig(pydantic.BaseModel):
    """Directed communication graph; edge ``j>i`` means agent i hears agent j, source 0 is the leader."""
    n_agents: int = pydantic.Field(..., ge=1, description="Number of follower agents N")
    edges: List[Tuple[int, int]] = pydantic.Field(..., description="Edges as (source, target) pairs")
    weights: Optional[List[float]] = pydantic.Field(None, description="Edge weights, 1 when omitted")
    normalize: bool = pydantic.Field(False, description="Scale every agent's in-weights to sum to one")

    @pydantic.validator("edges", pre=True)
    def parse_edges(cls, v):
        edges = []
        for edge in _as_list(v) or []:
            if isinstance(edge, str):
                source, separator, target = edge.partition(">")
                if not separator:
                    raise ValueError(f"Edge '{edge}' must look like 'source>target'")
                try:
                    edge = (int(source), int(target))
                except ValueError:
                    raise ValueError(f"Edge '{edge}' must join integer node numbers")
            edges.append(edge)
        return edges

    @pydantic.validator("weights", pre=True)
    def weights_as_list(cls, v):
        return _as_list(v)

    @pydantic.validator("weights")
    def validate_weights(cls, v, values):
        if v is None:
            return v
        if "edges" in values and len(v) != len(values["edges"]):
            raise ValueError("topology.weights must give one weight per edge")
        if any(w <= 0 for w in v):
            raise ValueError("Edge weights must be positive")
        return v

    def build_network(self) -> DirectedNetwork:
        return DirectedNetwork.from_edges(self.n_agents, self.edges, normalize=self.normalize, weights=self.weights)


class LeaderConfig(pydantic.BaseModel):
    kind: str = pydantic.Field("exponential", description="Leader drift family")
    rate: float = pydantic.Field(0.0, description="r in f_0(x) = r x")
    initial: List[float] = pydantic.Field(..., min_items=1, description="x_0(0)")
    bound: Optional[float] = pydantic.Field(None, gt=0, description="Abort when |x_0| exceeds this bound")

    @pydantic.validator("initial", pre=True)
    def initial_as_list(cls, v):
        return _as_list(v)

    @pydantic.validator("kind")
    def validate_kind(cls, v):
        if v != "exponential":
            raise ValueError("Leader kind must be 'exponential'")
        return v


class GridConfig(pydantic.BaseModel):
    mode: str = pydantic.Field("product", description="product | random")
    own_errors: List[float] = pydantic.Field([-1.0, -0.5, 0.0, 0.5, 1.0], min_items=1)
    own_states: List[float] = pydantic.Field([0.0, 1.0, 2.0], min_items=1)
    neighbor_errors: List[float] = pydantic.Field([-0.5, 0.0, 0.5], min_items=1)

    @pydantic.validator("own_errors", "own_states", "neighbor_errors", pre=True)
    def values_as_list(cls, v):
        return _as_list(v)

    @pydantic.validator("mode")
    def validate_mode(cls, v):
        if v not in GRID_MODES:
            raise ValueError(f"Grid mode must be one of: {', '.join(GRID_MODES)}")
        return v


class AgentConfig(pydantic.BaseModel):
    family: str = pydantic.Field("example_1d", description="Plant family of the agent")
    theta: Optional[List[float]] = pydantic.Field(None, description="True drift parameters, row-major")
    offset: List[float] = pydantic.Field(..., description="Formation offset x_di0")
    initial_state: List[float] = pydantic.Field(..., description="x_i(0)")
    initial_observer: Optional[List[float]] = pydantic.Field(None, description="x̂_i(0), zeros when omitted")
    initial_theta: Optional[List[float]] = pydantic.Field(None, description="θ̂_i(0), zeros when omitted")
    basis: List[str] = pydantic.Field(..., min_items=1, description="Value basis terms")
    critic_weights: Optional[List[float]] = pydantic.Field(None, description="Ŵ_ci(0), ones when omitted")
    actor_weights: Optional[List[float]] = pydantic.Field(None, description="Ŵ_ai(0), critic weights when omitted")
    state_weight: float = pydantic.Field(10.0, gt=0, description="Q_i = q I")
    control_weight: float = pydantic.Field(0.1, gt=0, description="R_i = r I")
    eta_c1: float = pydantic.Field(0.1, gt=0)
    eta_c2: float = pydantic.Field(10.0, gt=0)
    eta_a1: float = pydantic.Field(5.0, gt=0)
    eta_a2: float = pydantic.Field(0.1, ge=0)
    nu: float = pydantic.Field(0.005, ge=0, description="Normalization gain ν_i")
    beta: float = pydantic.Field(0.5, ge=0, description="Forgetting rate β_i")
    gamma_initial: float = pydantic.Field(500.0, gt=0, description="Γ_i(0) = γ I")
    gamma_bound: float = pydantic.Field(1e4, gt=0, description="Saturation bound Γ̄_i")
    observer_gain: float = pydantic.Field(500.0, gt=0, description="k_i")
    k_theta: float = pydantic.Field(30.0, gt=0, description="Concurrent-learning gain k_θi")
    gamma_theta: float = pydantic.Field(1.0, gt=0, description="Γ_θi = γ I")
    stack_size: int = pydantic.Field(30, ge=1, description="History stack capacity M_θi")
    theta_bound: Optional[float] = pydantic.Field(None, gt=0, description="Reported only")
    epsilon_theta_bound: Optional[float] = pydantic.Field(None, ge=0, description="Reported only")

    @pydantic.validator(
        "theta", "offset", "initial_state", "initial_observer", "initial_theta", "basis", "critic_weights",
        "actor_weights", pre=True,
    )
    def values_as_list(cls, v):
        return _as_list(v)

    @pydantic.validator("family")
    def validate_family(cls, v):
        if v not in PLANT_FAMILIES:
            raise ValueError(f"Plant family must be one of: {', '.join(sorted(PLANT_FAMILIES))}")
        return v

    @pydantic.validator("critic_weights", "actor_weights")
    def weights_match_basis(cls, v, values):
        if v is not None and "basis" in values and len(v) != len(values["basis"]):
            raise ValueError("Weight vectors must have one entry per basis term")
        return v


class SimConfig(pydantic.BaseModel):
    scenario: Optional[str] = pydantic.Field(None, description="Scenario whose defaults the file extends")
    dt: float = pydantic.Field(..., gt=0, description="Step size (s)")
    t_final: float = pydantic.Field(..., ge=0, description="Horizon (s)")
    decimate: int = pydantic.Field(settings.DEFAULT_DECIMATE, ge=1, description="Steps per logged row")
    seed: int = pydantic.Field(0, description="Seeds random extrapolation grids")
    exact_model: bool = pydantic.Field(False, description="Freeze the identifiers at the true parameters")
    sg_window: int = pydantic.Field(settings.SG_WINDOW, ge=7)
    sg_order: int = pydantic.Field(settings.SG_ORDER, ge=1)
    history_interval: int = pydantic.Field(settings.HISTORY_INTERVAL, ge=1)
    rank_gate: float = pydantic.Field(settings.RANK_GATE_THRESHOLD, ge=0)
    topology: TopologyConfig
    leader: LeaderConfig
    grid: GridConfig = pydantic.Field(default_factory=GridConfig)
    agents: Dict[int, AgentConfig] = pydantic.Field(..., alias="agent")

    class Config:
        allow_population_by_field_name = True

    @pydantic.validator("sg_window")
    def window_is_odd(cls, v, values):
        if v % 2 == 0:
            raise ValueError("sg_window must be odd")
        return v

    @pydantic.validator("sg_order")
    def order_fits_window(cls, v, values):
        if "sg_window" in values and values["sg_window"] < v + 2:
            raise ValueError("sg_window must exceed sg_order + 1")
        return v

    @pydantic.root_validator(skip_on_failure=True)
    def validate_agents(cls, values):
        topology, leader, agents = values["topology"], values["leader"], values["agents"]
        expected = list(range(1, topology.n_agents + 1))
        if sorted(agents) != expected:
            raise ValueError(f"Agents must be numbered {expected}, got {sorted(agents)}")
        net = topology.build_network()
        n = len(leader.initial)
        for i, agent in agents.items():
            if len(agent.offset) != n or len(agent.initial_state) != n:
                raise ValueError(f"agent.{i}: offset and initial_state need {n} entries")
            if agent.initial_observer is not None and len(agent.initial_observer) != n:
                raise ValueError(f"agent.{i}: initial_observer needs {n} entries")
            try:
                model = build_agent_model(agent.family, agent.theta)
            except (TypeError, ValueError) as e:
                raise ValueError(f"agent.{i}: theta does not fit family '{agent.family}' ({e})")
            if model.state_dim != n:
                raise ValueError(f"agent.{i}: family '{agent.family}' has {model.state_dim} states, the leader has {n}")
            size = model.drift_basis.dimension * n
            if agent.initial_theta is not None and len(agent.initial_theta) != size:
                raise ValueError(f"agent.{i}: initial_theta needs {size} entries")
            ValueBasis.from_terms(subgraph_index(net, i), agent.basis, state_dim=n)
        return values

    def summary(self) -> dict:
        return {
            "scenario": self.scenario,
            "dt": self.dt,
            "t_final": self.t_final,
            "decimate": self.decimate,
            "seed": self.seed,
            "n_agents": self.topology.n_agents,
        }
