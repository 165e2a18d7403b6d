import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from app import settings
from app.netgraph import LEADER, DirectedNetwork, SubgraphIndex, formation_matrix, subgraph_index
from app.services.errors import AssumptionViolation, MissingState, SingularBlockGain, SpanningTreeError
from .models import AgentModel, Drift, FormationSpec, LeaderModel


logger = logging.getLogger(__name__)


def matvec(matrix: np.ndarray, vector: np.ndarray) -> np.ndarray:
    return np.einsum("...ij,...j->...i", matrix, vector)


def pseudo_inverse(matrix: np.ndarray, tolerance: float = None, check_rank: bool = True) -> np.ndarray:
    """Left inverse (MᵀM)⁻¹Mᵀ of a full-column-rank matrix, batched over leading axes.

    Without ``check_rank`` only an exactly singular MᵀM is reported.
    """
    tolerance = settings.RANK_TOLERANCE if tolerance is None else tolerance
    matrix = np.asarray(matrix, dtype=float)
    rows, cols = matrix.shape[-2:]
    if cols > rows:
        raise AssumptionViolation("Effectiveness matrix has more columns than rows", detail=f"{rows}x{cols}")
    if check_rank:
        singular_values = np.linalg.svd(matrix, compute_uv=False)
        if np.any(singular_values[..., -1] <= tolerance * singular_values[..., 0]):
            raise AssumptionViolation(
                "Effectiveness matrix is not full column rank",
                detail=f"smallest singular value {np.min(singular_values[..., -1]):.3g}",
            )
    transpose = np.swapaxes(matrix, -1, -2)
    try:
        return np.linalg.solve(transpose @ matrix, transpose)
    except np.linalg.LinAlgError:
        raise AssumptionViolation("Effectiveness matrix is not full column rank", detail="singular Gram matrix")


@dataclass(frozen=True)
class NetworkPlan:
    """Topology lookups resolved once: in-links with their weights and offsets, and input slices in agent order."""
    agents: Tuple[int, ...]
    links: Dict[int, np.ndarray]
    link_weights: Dict[int, np.ndarray]
    link_offsets: Dict[int, np.ndarray]
    total_gains: Dict[int, float]
    input_slices: Dict[int, slice]
    input_size: int
    subgraph_inputs: Dict[int, np.ndarray]
    formation_matrix: np.ndarray
    pinning: np.ndarray


def build_network_plan(
        net: DirectedNetwork,
        models: Mapping[int, AgentModel],
        formation: FormationSpec,
        indices: Mapping[int, SubgraphIndex],
) -> NetworkPlan:
    agents = tuple(net.agents)
    state_dim = formation.offsets.shape[1]
    input_slices = {}
    offset = 0
    for k in agents:
        input_slices[k] = slice(offset, offset + models[k].input_dim)
        offset += models[k].input_dim
    links = {k: np.array(net.in_links(k), dtype=int) for k in agents}
    return NetworkPlan(
        agents=agents,
        links=links,
        link_weights={k: np.array([net.weight(k, j) for j in links[k]], dtype=float) for k in agents},
        link_offsets={
            k: np.array([formation.relative(k, j) for j in links[k]], dtype=float).reshape(len(links[k]), state_dim)
            for k in agents
        },
        total_gains={k: net.total_gain(k) for k in agents},
        input_slices=input_slices,
        input_size=offset,
        subgraph_inputs={
            k: np.concatenate([np.arange(offset)[input_slices[j]] for j in sorted(indices[k].ordering)])
            for k in agents
        },
        formation_matrix=formation_matrix(net),
        pinning=np.asarray(net.pinning, dtype=float),
    )


@dataclass(frozen=True)
class PlantContext:
    """Everything an agent knows about the network: topology, models, leader drift and formation.

    ``drift_overrides`` replaces agent drifts, e.g. with identifier estimates.
    """
    net: DirectedNetwork
    models: Mapping[int, AgentModel]
    leader: LeaderModel
    formation: FormationSpec
    drift_overrides: Mapping[int, Drift] = field(default_factory=dict)
    indices: Optional[Dict[int, SubgraphIndex]] = None
    plan: Optional[NetworkPlan] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.indices is None:
            object.__setattr__(self, "indices", {i: subgraph_index(self.net, i) for i in self.net.agents})
        if self.plan is None:
            object.__setattr__(self, "plan", build_network_plan(self.net, self.models, self.formation, self.indices))

    @property
    def state_dim(self) -> int:
        return self.leader.state_dim

    def index(self, i: int) -> SubgraphIndex:
        return self.indices[i]

    def input_dim(self, j: int) -> int:
        return 0 if j == LEADER else self.models[j].input_dim

    def drift(self, j: int, x: np.ndarray) -> np.ndarray:
        if j == LEADER:
            return self.leader.drift(x)
        if j in self.drift_overrides:
            return self.drift_overrides[j](x)
        return self.models[j].drift(x)

    def effectiveness(self, j: int, x: np.ndarray) -> np.ndarray:
        return self.models[j].effectiveness(x)

    def with_drifts(self, drifts: Mapping[int, Drift]) -> "PlantContext":
        return replace(self, drift_overrides=dict(drifts))

    def with_estimates(self, weights: Mapping[int, np.ndarray]) -> "PlantContext":
        """Context whose agent drifts are θ̂_jᵀσ_θj for the given weights."""
        return self.with_drifts({j: self.models[j].drift_basis.drift(w) for j, w in weights.items()})


def _state_of(states: Mapping[int, np.ndarray], j: int, owner: int = None) -> np.ndarray:
    try:
        return states[j]
    except KeyError:
        raise MissingState(f"State of agent {j} is not available", agent=owner)


def neighborhood_error(
        i: int,
        all_states: Mapping[int, np.ndarray],
        leader_state: np.ndarray,
        formation: FormationSpec,
        net: DirectedNetwork,
) -> np.ndarray:
    x_i = _state_of(all_states, i, owner=i)
    error = np.zeros_like(np.asarray(x_i, dtype=float))
    for j in net.in_links(i):
        x_j = leader_state if j == LEADER else _state_of(all_states, j, owner=i)
        error = error + net.weight(i, j) * ((x_i - x_j) - formation.relative(i, j))
    return error


def stacked_error(
        all_states: np.ndarray,
        leader_state: np.ndarray,
        formation: FormationSpec,
        net: DirectedNetwork,
) -> np.ndarray:
    """((L + A_0) ⊗ I_n)(X - X_d - 1 ⊗ x_0) for states of shape (..., N, n)."""
    deviation = np.asarray(all_states, dtype=float) - formation.offsets - np.asarray(leader_state)[..., None, :]
    return np.einsum("ij,...jn->...in", formation_matrix(net), deviation)


def relative_control_terms(i: int, j: int, x_j: np.ndarray, context: PlantContext) -> Tuple[np.ndarray, np.ndarray]:
    """(f_ij, g_ij) such that the relative steady-state input is u_ij = f_ij + g_ij u_j."""
    shifted = x_j + context.formation.relative(i, j)
    try:
        g_plus = pseudo_inverse(context.effectiveness(i, shifted))
    except AssumptionViolation as e:
        raise AssumptionViolation(e.message, agent=i, detail=f"at the offset of agent {j}")
    f_ij = matvec(g_plus, context.drift(j, x_j) - context.drift(i, shifted))
    if j == LEADER:
        g_ij = np.zeros(g_plus.shape[:-1] + (0,))
    else:
        g_ij = g_plus @ context.effectiveness(j, x_j)
    return f_ij, g_ij


def steady_state_residual(
        i: int, j: int, x_j: np.ndarray, u_j: np.ndarray, context: PlantContext
) -> np.ndarray:
    """Mismatch between the offset copy of agent i driven by u_ij and agent j's own motion."""
    shifted = x_j + context.formation.relative(i, j)
    f_ij, g_ij = relative_control_terms(i, j, x_j, context)
    u_ij = f_ij if j == LEADER else f_ij + matvec(g_ij, u_j)
    own = context.drift(i, shifted) + matvec(context.effectiveness(i, shifted), u_ij)
    target = context.drift(j, x_j)
    if j != LEADER:
        target = target + matvec(context.effectiveness(j, x_j), u_j)
    return np.linalg.norm(own - target, axis=-1)


def steady_state_mismatches(
        context: PlantContext,
        states: Mapping[int, np.ndarray],
        controls: Mapping[int, np.ndarray],
        leader: np.ndarray,
        tolerance: float = None,
) -> Dict[Tuple[int, int], float]:
    """Links j -> i on which u_ij cannot reproduce agent j's motion at the offset x_dij; each is logged."""
    tolerance = settings.STEADY_STATE_TOLERANCE if tolerance is None else tolerance
    mismatches = {}
    for i in context.net.agents:
        for j in context.net.in_links(i):
            x_j = leader if j == LEADER else states[j]
            u_j = None if j == LEADER else controls[j]
            residual = float(steady_state_residual(i, j, x_j, u_j, context))
            if residual > tolerance:
                mismatches[(i, j)] = residual
                logger.warning(
                    f"Agent {i} cannot hold its offset to node {j}",
                    extra={"agent": i, "neighbor": j, "residual": residual},
                )
    return mismatches


def recover_states(
        context: PlantContext, i: int, errors: np.ndarray, own_state: np.ndarray
) -> Tuple[Dict[int, np.ndarray], np.ndarray]:
    """Member states of S_i and the leader state from e_{S_i} (λ_i order) and x_i.

    S_i is closed under in-neighbours, so e_{S_i} = M z with M the restriction of L + A_0 to S_i
    and z_j = x_j - x_dj0 - x_0.
    """
    index = context.index(i)
    try:
        inverse = np.linalg.inv(formation_matrix(context.net, index.ordering))
    except np.linalg.LinAlgError:
        raise SpanningTreeError("Subgraph formation matrix is singular", agent=i)
    z = np.einsum("kl,...ln->...kn", inverse, errors)
    leader = own_state - context.formation.offset(i) - z[..., 0, :]
    states = {
        j: z[..., k, :] + context.formation.offset(j) + leader
        for k, j in enumerate(index.ordering)
    }
    states[i] = np.asarray(own_state, dtype=float)
    return states, leader


@dataclass(frozen=True)
class SubgraphState:
    """𝓔_i = [e_{S_i}, x_i] with errors of shape (..., s_i, n) in λ_i order."""
    index: SubgraphIndex
    errors: np.ndarray
    own_state: np.ndarray

    @property
    def agent(self) -> int:
        return self.index.agent

    @property
    def neighbor_errors(self) -> np.ndarray:
        """e_{S_-i}."""
        return self.errors[..., 1:, :]

    def error(self, j: int) -> np.ndarray:
        return self.errors[..., self.index.slot(j), :]

    @property
    def vector(self) -> np.ndarray:
        flat_errors = self.errors.reshape(self.errors.shape[:-2] + (-1,))
        return np.concatenate([flat_errors, self.own_state], axis=-1)

    @classmethod
    def from_vector(cls, index: SubgraphIndex, vector: np.ndarray, state_dim: int) -> "SubgraphState":
        vector = np.asarray(vector, dtype=float)
        expected = state_dim * (index.size + 1)
        if vector.shape[-1] != expected:
            raise ValueError(f"Subgraph state of agent {index.agent} must have {expected} entries")
        errors = vector[..., : state_dim * index.size].reshape(vector.shape[:-1] + (index.size, state_dim))
        return cls(index=index, errors=errors, own_state=vector[..., state_dim * index.size:])

    @classmethod
    def from_states(
            cls, context: PlantContext, i: int, all_states: Mapping[int, np.ndarray], leader_state: np.ndarray
    ) -> "SubgraphState":
        index = context.index(i)
        errors = np.stack(
            [neighborhood_error(j, all_states, leader_state, context.formation, context.net) for j in index.ordering],
            axis=-2,
        )
        return cls(index=index, errors=errors, own_state=np.asarray(all_states[i], dtype=float))


@dataclass(frozen=True)
class DriftTerms:
    relative_drift: np.ndarray  # F_i
    error_drift: np.ndarray  # 𝓕ˢ_i
    state_drift: np.ndarray  # 𝓕_i


class SubgraphGeometry:
    """Drift-independent subgraph algebra of agent i at a batch of points.

    Holds L_gi, its inverse, 𝓖ˢ_i, 𝓖_i and the pseudo-inverses behind F_i. Drift-dependent
    terms are produced by :meth:`drift_terms` for any context, so identifier estimates can be
    swapped without recomputing the geometry.
    """

    def __init__(self, context: PlantContext, agent: int, states: Mapping[int, np.ndarray], leader: np.ndarray):
        self.context = context
        self.agent = agent
        self.index = context.index(agent)
        self.states = states
        self.leader = np.asarray(leader, dtype=float)
        net = context.net

        self.input_slices = {}
        offset = 0
        for k in self.index.ordering:
            size = context.input_dim(k)
            self.input_slices[k] = slice(offset, offset + size)
            offset += size
        self.input_size = offset
        batch = self.leader.shape[:-1]

        self._links = {}
        for k in self.index.ordering:
            for j in net.in_links(k):
                shifted = self.state(j) + context.formation.relative(k, j)
                try:
                    g_plus = pseudo_inverse(context.effectiveness(k, shifted))
                except AssumptionViolation as e:
                    raise AssumptionViolation(e.message, agent=k, detail=f"at the offset of agent {j}")
                self._links[(k, j)] = (shifted, g_plus)

        gain = np.zeros(batch + (self.input_size, self.input_size))
        for k in self.index.ordering:
            rows = self.input_slices[k]
            gain[..., rows, rows] = net.total_gain(k) * np.eye(context.input_dim(k))
            for j in net.in_neighbors(k):
                _, g_plus = self._links[(k, j)]
                relative_gain = g_plus @ context.effectiveness(j, self.state(j))
                gain[..., rows, self.input_slices[j]] = -net.weight(k, j) * relative_gain
        self.block_gain = gain
        self.block_gain_inverse = _invert_block_gain(gain, agent)

        g_own = context.effectiveness(agent, self.state(agent))
        self.state_input_gain = g_own @ self.inverse_row(agent)
        error_gain = np.zeros(batch + (context.state_dim, self.input_size))
        for j in net.in_links(agent):
            term = self.state_input_gain
            if j != LEADER:
                term = term - context.effectiveness(j, self.state(j)) @ self.inverse_row(j)
            error_gain = error_gain + net.weight(agent, j) * term
        self.error_input_gain = error_gain

    @classmethod
    def from_subgraph_state(cls, context: PlantContext, subgraph_state: SubgraphState) -> "SubgraphGeometry":
        states, leader = recover_states(context, subgraph_state.agent, subgraph_state.errors, subgraph_state.own_state)
        return cls(context, subgraph_state.agent, states, leader)

    def state(self, j: int) -> np.ndarray:
        if j == LEADER:
            return self.leader
        return _state_of(self.states, j, owner=self.agent)

    def inverse_row(self, k: int) -> np.ndarray:
        """Block row of L_gi⁻¹ belonging to agent k."""
        return self.block_gain_inverse[..., self.input_slices[k], :]

    def drift_terms(self, context: PlantContext = None) -> DriftTerms:
        context = context or self.context
        net = context.net
        batch = self.leader.shape[:-1]
        stack = np.zeros(batch + (self.input_size,))
        for k in self.index.ordering:
            block = np.zeros(batch + (context.input_dim(k),))
            for j in net.in_links(k):
                shifted, g_plus = self._links[(k, j)]
                mismatch = context.drift(j, self.state(j)) - context.drift(k, shifted)
                block = block + net.weight(k, j) * matvec(g_plus, mismatch)
            stack[..., self.input_slices[k]] = block

        own_drift = context.drift(self.agent, self.state(self.agent))
        error_drift = matvec(self.error_input_gain, stack)
        for j in net.in_links(self.agent):
            error_drift = error_drift + net.weight(self.agent, j) * (own_drift - context.drift(j, self.state(j)))
        state_drift = own_drift + matvec(self.state_input_gain, stack)
        return DriftTerms(relative_drift=stack, error_drift=error_drift, state_drift=state_drift)

    def controls_from_mu(self, mu_stack: np.ndarray, terms: DriftTerms) -> np.ndarray:
        return matvec(self.block_gain_inverse, mu_stack + terms.relative_drift)

    def mu_from_controls(self, u_stack: np.ndarray, terms: DriftTerms) -> np.ndarray:
        return matvec(self.block_gain, u_stack) - terms.relative_drift

    def own_block(self, stack: np.ndarray, k: int = None) -> np.ndarray:
        return stack[..., self.input_slices[self.agent if k is None else k]]

    def error_flow(self, mu_stack: np.ndarray, terms: DriftTerms) -> np.ndarray:
        return terms.error_drift + matvec(self.error_input_gain, mu_stack)

    def state_flow(self, mu_stack: np.ndarray, terms: DriftTerms) -> np.ndarray:
        return terms.state_drift + matvec(self.state_input_gain, mu_stack)


def _invert_block_gain(gain: np.ndarray, agent: int) -> np.ndarray:
    with np.errstate(divide="ignore"):
        sign, log_det = np.linalg.slogdet(gain)
        log_rows = np.sum(np.log(np.linalg.norm(gain, axis=-1)), axis=-1)
    if np.any(sign == 0) or np.any(log_det - log_rows <= np.log(settings.SINGULARITY_TOLERANCE)):
        raise SingularBlockGain("Block gain matrix L_g is singular", agent=agent)
    return np.linalg.inv(gain)


class NetworkGeometry:
    """L_g, 𝓖 and 𝓖ˢ of the whole network at one state, inputs stacked in agent order.

    Every S_i is closed under in-neighbours, so L_gi⁻¹ is the S_i block of the network-wide
    inverse and one inversion serves all agents. Agrees with :class:`SubgraphGeometry` of each
    agent up to the ordering of the stacked inputs.
    """

    def __init__(self, context: PlantContext, states: np.ndarray, leader: np.ndarray, check_rank: bool = True):
        plan = context.plan
        self.context = context
        self.plan = plan
        self.states = np.asarray(states, dtype=float)
        self.leader = np.asarray(leader, dtype=float)
        nodes = np.concatenate([self.leader[None, :], self.states])

        self.own_effectiveness = {}
        self._links = {}
        for k in plan.agents:
            shifted = nodes[plan.links[k]] + plan.link_offsets[k]
            gains = context.effectiveness(k, np.concatenate([self.states[k - 1][None, :], shifted]))
            self.own_effectiveness[k] = gains[0]
            try:
                g_plus = pseudo_inverse(gains[1:], check_rank=check_rank)
            except AssumptionViolation as e:
                raise AssumptionViolation(e.message, agent=k, detail="at a neighbour offset")
            self._links[k] = (shifted, g_plus)

        gain = np.zeros((plan.input_size, plan.input_size))
        for k in plan.agents:
            rows = plan.input_slices[k]
            gain[rows, rows] = plan.total_gains[k] * np.eye(context.input_dim(k))
            _, g_plus = self._links[k]
            for slot, j in enumerate(plan.links[k]):
                if j != LEADER:
                    gain[rows, plan.input_slices[j]] = -plan.link_weights[k][slot] * (g_plus[slot] @ self.own_effectiveness[j])
        self.block_gain = gain
        self.block_gain_inverse = self._invert(gain)

        self.state_input_gain = np.stack([
            self.own_effectiveness[k] @ self.block_gain_inverse[plan.input_slices[k], :] for k in plan.agents
        ])
        self.error_input_gain = np.einsum("ij,jnm->inm", plan.formation_matrix, self.state_input_gain)
        deviation = self.states - context.formation.offsets - self.leader
        self.errors = plan.formation_matrix @ deviation

    def _invert(self, gain: np.ndarray) -> np.ndarray:
        try:
            return _invert_block_gain(gain, None)
        except SingularBlockGain:
            for k in self.plan.agents:
                inputs = self.plan.subgraph_inputs[k]
                _invert_block_gain(gain[np.ix_(inputs, inputs)], k)
            raise

    def drift_terms(self, context: PlantContext = None) -> DriftTerms:
        """Network-wide F, 𝓕 of shape (N, n) and 𝓕ˢ of shape (N, n)."""
        context = context or self.context
        plan = self.plan
        leader_drift = context.drift(LEADER, self.leader)
        own = np.empty_like(self.states)
        shifted_drifts = {}
        for k in plan.agents:
            shifted, _ = self._links[k]
            drifts = context.drift(k, np.concatenate([self.states[k - 1][None, :], shifted]))
            own[k - 1] = drifts[0]
            shifted_drifts[k] = drifts[1:]
        nodes = np.concatenate([leader_drift[None, :], own])

        relative = np.zeros(plan.input_size)
        for k in plan.agents:
            _, g_plus = self._links[k]
            mismatch = nodes[plan.links[k]] - shifted_drifts[k]
            relative[plan.input_slices[k]] = np.einsum("j,jmn,jn->m", plan.link_weights[k], g_plus, mismatch)

        state_drift = own + matvec(self.state_input_gain, relative)
        error_drift = (
            plan.formation_matrix @ own
            - np.outer(plan.pinning, leader_drift)
            + matvec(self.error_input_gain, relative)
        )
        return DriftTerms(relative_drift=relative, error_drift=error_drift, state_drift=state_drift)

    def controls_from_mu(self, mu: np.ndarray, terms: DriftTerms) -> np.ndarray:
        return self.block_gain_inverse @ (mu + terms.relative_drift)

    def own_block(self, stack: np.ndarray, k: int) -> np.ndarray:
        return stack[..., self.plan.input_slices[k]]

    def error_flow(self, mu: np.ndarray, terms: DriftTerms) -> np.ndarray:
        return terms.error_drift + matvec(self.error_input_gain, mu)

    def state_flow(self, mu: np.ndarray, terms: DriftTerms) -> np.ndarray:
        return terms.state_drift + matvec(self.state_input_gain, mu)


class NetworkSnapshot:
    """States, leader state and neighbourhood errors at a batch of points, with one geometry per agent."""

    def __init__(
            self,
            context: PlantContext,
            states: Mapping[int, np.ndarray],
            leader: np.ndarray,
            errors: Mapping[int, np.ndarray] = None,
    ):
        self.context = context
        self.states = dict(states)
        self.leader = np.asarray(leader, dtype=float)
        if errors is None:
            errors = {
                i: neighborhood_error(i, self.states, self.leader, context.formation, context.net)
                for i in self.states
            }
        self.errors = dict(errors)
        self._geometry = {}

    @classmethod
    def from_subgraph_state(cls, context: PlantContext, subgraph_state: SubgraphState) -> "NetworkSnapshot":
        states, leader = recover_states(context, subgraph_state.agent, subgraph_state.errors, subgraph_state.own_state)
        errors = {j: subgraph_state.error(j) for j in subgraph_state.index.ordering}
        return cls(context, states, leader, errors)

    def geometry(self, k: int) -> SubgraphGeometry:
        if k not in self._geometry:
            self._geometry[k] = SubgraphGeometry(self.context, k, self.states, self.leader)
        return self._geometry[k]

    def subgraph_state(self, k: int) -> SubgraphState:
        index = self.context.index(k)
        errors = np.stack([self.errors[j] for j in index.ordering], axis=-2)
        return SubgraphState(index=index, errors=errors, own_state=self.states[k])


def _geometry_for(i: int, subgraph_state: SubgraphState, context: PlantContext) -> SubgraphGeometry:
    if subgraph_state.agent != i:
        raise ValueError(f"Subgraph state belongs to agent {subgraph_state.agent}, not {i}")
    return SubgraphGeometry.from_subgraph_state(context, subgraph_state)


def build_block_gain(i: int, subgraph_state: SubgraphState, context: PlantContext) -> np.ndarray:
    return _geometry_for(i, subgraph_state, context).block_gain


def build_relative_drift_stack(i: int, subgraph_state: SubgraphState, context: PlantContext) -> np.ndarray:
    return _geometry_for(i, subgraph_state, context).drift_terms().relative_drift


def controls_from_mu(i: int, mu_stack: np.ndarray, subgraph_state: SubgraphState, context: PlantContext) -> np.ndarray:
    """u_{S_i} = L_gi⁻¹(μ_{S_i} + F_i); agent i's own input is the first block."""
    geometry = _geometry_for(i, subgraph_state, context)
    return geometry.controls_from_mu(mu_stack, geometry.drift_terms())


def mu_from_controls(i: int, u_stack: np.ndarray, subgraph_state: SubgraphState, context: PlantContext) -> np.ndarray:
    geometry = _geometry_for(i, subgraph_state, context)
    return geometry.mu_from_controls(u_stack, geometry.drift_terms())


def error_flow(i: int, subgraph_state: SubgraphState, mu_stack: np.ndarray, context: PlantContext) -> np.ndarray:
    geometry = _geometry_for(i, subgraph_state, context)
    return geometry.error_flow(mu_stack, geometry.drift_terms())


def state_flow(i: int, subgraph_state: SubgraphState, mu_stack: np.ndarray, context: PlantContext) -> np.ndarray:
    geometry = _geometry_for(i, subgraph_state, context)
    return geometry.state_flow(mu_stack, geometry.drift_terms())
