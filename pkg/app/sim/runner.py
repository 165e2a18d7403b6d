import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np
from scipy.linalg import expm

from app import settings
from app.actor_critic import (
    ActorState,
    AgentLearner,
    BellmanEvaluator,
    BellmanSample,
    CostSpec,
    CriticState,
    CurrentBellman,
    ExtrapolationGrid,
    GridLinearization,
    GridRankMonitor,
    ValueBasis,
    actor_flow,
    build_grid,
    critic_flow,
    policy,
)
from app.identifier import (
    DerivativeWindow,
    DriftEstimate,
    HistoryStack,
    StateObserver,
    cl_update_flow,
    observer_flow,
    stack_contraction,
    stack_rank_metric,
    try_insert_svmax,
)
from app.netgraph import LEADER, formation_matrix_nonsingular, verify_spanning_tree
from app.plant import (
    FormationSpec,
    LeaderModel,
    NetworkGeometry,
    NetworkSnapshot,
    PlantContext,
    build_agent_model,
    exponential_leader,
    steady_state_mismatches,
)
from app.services.errors import LeaderBoundExceeded, NonFiniteState, NumericalError, SpanningTreeError
from .configurations import AgentConfig, SimConfig
from .integrators import LinearPart, lawson_rk4, rk4
from .trace import TraceLog, trace_columns


logger = logging.getLogger(__name__)

AGENT_FIELDS = ("x", "x_hat", "theta", "critic", "actor", "gain")


def build_leader(config: SimConfig) -> LeaderModel:
    return exponential_leader(config.leader.rate, config.leader.initial, config.leader.bound)


def build_context(config: SimConfig) -> PlantContext:
    net = config.topology.build_network()
    if not verify_spanning_tree(net):
        raise SpanningTreeError("Communication graph has no spanning tree rooted at the leader")
    if not formation_matrix_nonsingular(net):
        raise SpanningTreeError("Formation matrix L + A0 is singular")
    models = {i: build_agent_model(agent.family, agent.theta) for i, agent in config.agents.items()}
    offsets = np.array([config.agents[i].offset for i in net.agents], dtype=float)
    return PlantContext(net=net, models=models, leader=build_leader(config), formation=FormationSpec(offsets))


def leader_state(t: float, leader: LeaderModel) -> np.ndarray:
    """x_0(t), checked against the leader's bound."""
    if t < 0:
        raise ValueError("Leader time must be nonnegative")
    state = leader.state(t)
    _check_leader(t, state, leader)
    return state


def _check_leader(t: float, state: np.ndarray, leader: LeaderModel):
    if leader.bound is not None and np.linalg.norm(state) > leader.bound:
        raise LeaderBoundExceeded(
            "Leader left its bounded set", time=t, detail=f"|x_0| = {np.linalg.norm(state):.4g} > {leader.bound}"
        )


def build_extrapolation_grid(config: SimConfig, i: int, context: PlantContext) -> ExtrapolationGrid:
    """Grid of agent i; random grids draw from a generator seeded by (seed, i)."""
    grid = config.grid
    rng = np.random.default_rng([config.seed, i]) if grid.mode == "random" else None
    return build_grid(
        context.index(i),
        own_errors=grid.own_errors,
        own_states=grid.own_states,
        neighbor_errors=grid.neighbor_errors,
        state_dim=context.state_dim,
        mode=grid.mode,
        rng=rng,
    )


class StateLayout:
    """Slices of the leader and of every agent's continuous quantities in the flat state vector."""

    def __init__(self, state_dim: int, shapes: Mapping[int, Mapping[str, Tuple[int, ...]]]):
        self.shapes = {(LEADER, "x"): (state_dim,)}
        for i, fields in shapes.items():
            for name in AGENT_FIELDS:
                self.shapes[(i, name)] = tuple(fields[name])
        self.slices = {}
        offset = 0
        for key, shape in self.shapes.items():
            size = int(np.prod(shape))
            self.slices[key] = slice(offset, offset + size)
            offset += size
        self.size = offset

    def view(self, y: np.ndarray, i: int, name: str) -> np.ndarray:
        return y[self.slices[(i, name)]].reshape(self.shapes[(i, name)])

    def pack(self, values: Mapping[Tuple[int, str], np.ndarray]) -> np.ndarray:
        y = np.zeros(self.size)
        for key, value in values.items():
            y[self.slices[key]] = np.ravel(value)
        return y


@dataclass
class AgentRuntime:
    """Fixed configuration and discrete-time bookkeeping of one agent."""
    agent: int
    config: AgentConfig
    learner: AgentLearner
    grid: ExtrapolationGrid
    grid_evaluator: BellmanEvaluator
    grid_linearization: GridLinearization
    bellman: CurrentBellman
    theta_gain: np.ndarray
    stack: HistoryStack
    window: DerivativeWindow
    monitor: GridRankMonitor
    initial_gain_norm: float
    use_stack: bool = False
    grid_offset: Optional[np.ndarray] = None
    propagators: Dict[Tuple[int, float], tuple] = field(default_factory=dict)

    def critic(self, weights: np.ndarray, gain: np.ndarray) -> CriticState:
        return CriticState(
            weights=weights,
            gain=gain,
            gain_bound=self.config.gamma_bound,
            normalization=self.config.nu,
            eta_c1=self.config.eta_c1,
            eta_c2=self.config.eta_c2,
            forgetting=self.config.beta,
        )

    def actor(self, weights: np.ndarray) -> ActorState:
        return ActorState(weights=weights, eta_a1=self.config.eta_a1, eta_a2=self.config.eta_a2)

    def stack_propagators(self, h: float) -> tuple:
        """(A, exp(A h/2), exp(A h)) of the concurrent-learning contraction, kept until the stack changes."""
        key = (self.stack.revision, h)
        if key not in self.propagators:
            contraction = stack_contraction(self.theta_gain, self.config.k_theta, self.stack)
            half = expm(0.5 * h * contraction)
            self.propagators = {key: (contraction, half, half @ half)}
        return self.propagators[key]


@dataclass
class StageSignals:
    """Signals of one flow evaluation, logged at the first stage of a step."""
    leader: np.ndarray
    errors: Dict[int, np.ndarray]
    controls: Dict[int, np.ndarray]
    policies: Dict[int, np.ndarray]
    current: Dict[int, BellmanSample]
    grid: Dict[int, BellmanSample]


class Simulation:
    """Closed-loop network of identifiers, critics and actors integrated with fixed-step RK4.

    The concurrent-learning contraction of each identifier is linear in θ̂ and is propagated
    exactly within a step; everything else uses the classical RK4 weights.
    """

    def __init__(self, config: SimConfig):
        self.config = config
        self.context = build_context(config)
        self.agents: List[int] = list(self.context.net.agents)
        self.state_dim = self.context.state_dim
        self.learners: Dict[int, AgentLearner] = {}
        for i in self.agents:
            agent = config.agents[i]
            m = self.context.input_dim(i)
            self.learners[i] = AgentLearner(
                basis=ValueBasis.from_terms(self.context.index(i), agent.basis, state_dim=self.state_dim),
                cost=CostSpec(
                    state_weight=agent.state_weight * np.eye(self.state_dim),
                    control_weight=agent.control_weight * np.eye(m),
                ),
            )
        self.runtimes: Dict[int, AgentRuntime] = {i: self._build_runtime(i) for i in self.agents}
        self.layout = StateLayout(
            self.state_dim,
            {
                i: {
                    "x": (self.state_dim,),
                    "x_hat": (self.state_dim,),
                    "theta": (self.theta_rows(i), self.state_dim),
                    "critic": (self.learners[i].basis.dimension,),
                    "actor": (self.learners[i].basis.dimension,),
                    "gain": (self.learners[i].basis.dimension,) * 2,
                }
                for i in self.agents
            },
        )
        positions = np.arange(self.layout.size)
        self._state_positions = np.concatenate([positions[self.layout.slices[(i, "x")]] for i in self.agents])
        self.columns = trace_columns(
            self.agents,
            self.state_dim,
            {i: self.context.input_dim(i) for i in self.agents},
            {i: self.learners[i].basis.dimension for i in self.agents},
            {i: self.theta_rows(i) * self.state_dim for i in self.agents},
        )
        self._substep_warning = False

    def theta_rows(self, i: int) -> int:
        return self.context.models[i].drift_basis.dimension

    def _build_runtime(self, i: int) -> AgentRuntime:
        agent = self.config.agents[i]
        grid = build_extrapolation_grid(self.config, i, self.context)
        evaluator = BellmanEvaluator(
            i, NetworkSnapshot.from_subgraph_state(self.context, grid.subgraph_state), self.learners
        )
        linearization = GridLinearization(evaluator)
        grid_offset = None
        if self.config.exact_model:
            grid_offset = linearization.offset(evaluator.drift_terms(self.context))
        else:
            zero = {j: np.zeros((self.theta_rows(j), self.state_dim)) for j in self.context.index(i).ordering}
            linearization.fit_offsets(self.context, zero)
        size = self.learners[i].basis.dimension
        model = self.context.models[i]
        return AgentRuntime(
            agent=i,
            config=agent,
            learner=self.learners[i],
            grid=grid,
            grid_evaluator=evaluator,
            grid_linearization=linearization,
            bellman=CurrentBellman(i, self.context, self.learners[i]),
            theta_gain=agent.gamma_theta * np.eye(self.theta_rows(i)),
            stack=HistoryStack(agent.stack_size, model.drift_basis, model),
            window=DerivativeWindow(self.config.sg_window, self.config.dt, self.config.sg_order),
            monitor=GridRankMonitor(),
            initial_gain_norm=float(np.linalg.norm(agent.gamma_initial * np.eye(size))),
            grid_offset=grid_offset,
        )

    def initial_state(self) -> np.ndarray:
        values = {(LEADER, "x"): self.context.leader.initial}
        for i in self.agents:
            agent = self.config.agents[i]
            size = self.learners[i].basis.dimension
            critic = np.ones(size) if agent.critic_weights is None else np.asarray(agent.critic_weights)
            actor = critic if agent.actor_weights is None else np.asarray(agent.actor_weights)
            if self.config.exact_model:
                theta = self.context.models[i].true_weights
            elif agent.initial_theta is not None:
                theta = np.asarray(agent.initial_theta)
            else:
                theta = np.zeros(self.theta_rows(i) * self.state_dim)
            values[(i, "x")] = agent.initial_state
            values[(i, "x_hat")] = agent.initial_observer or np.zeros(self.state_dim)
            values[(i, "theta")] = theta
            values[(i, "critic")] = critic
            values[(i, "actor")] = actor
            values[(i, "gain")] = agent.gamma_initial * np.eye(size)
        return self.layout.pack(values)

    def leader_at(self, t: float, y: np.ndarray) -> np.ndarray:
        leader = self.context.leader
        state = leader.state(t) if leader.trajectory is not None else self.layout.view(y, LEADER, "x")
        _check_leader(t, state, leader)
        return state

    def agent_states(self, y: np.ndarray) -> np.ndarray:
        """x_1..x_N as an (N, n) array."""
        return y[self._state_positions].reshape(len(self.agents), self.state_dim)

    def theta_estimates(self, y: np.ndarray) -> Dict[int, np.ndarray]:
        return {i: self.layout.view(y, i, "theta") for i in self.agents}

    def estimated_context(self, y: np.ndarray) -> PlantContext:
        if self.config.exact_model:
            return self.context
        return self.context.with_estimates(self.theta_estimates(y))

    def grid_terms(self, y: np.ndarray) -> Dict[int, np.ndarray]:
        """Drift part of ω_i at the grid points under the estimates held at the start of a step."""
        if self.config.exact_model:
            return {i: self.runtimes[i].grid_offset for i in self.agents}
        estimates = self.theta_estimates(y)
        return {i: self.runtimes[i].grid_linearization.estimated_offset(estimates) for i in self.agents}

    def network_flow(
            self, t: float, y: np.ndarray, grid_terms: Mapping[int, np.ndarray], check_rank: bool = True
    ) -> Tuple[np.ndarray, StageSignals]:
        """d/dt of the flat state and the signals behind it.

        ``check_rank`` runs the full-column-rank test on every effectiveness matrix at a neighbour
        offset; intermediate RK4 stages skip it.
        """
        view = self.layout.view
        leader = self.leader_at(t, y)
        states = self.agent_states(y)
        actor_weights = {i: view(y, i, "actor") for i in self.agents}
        critics = {}
        for i in self.agents:
            gain = view(y, i, "gain")
            critics[i] = self.runtimes[i].critic(view(y, i, "critic"), 0.5 * (gain + gain.T))

        geometry = NetworkGeometry(self.context, states, leader, check_rank=check_rank)
        hat_terms = geometry.drift_terms(self.estimated_context(y))
        local = {i: self.runtimes[i].bellman.linearize(geometry) for i in self.agents}
        policies = {i: policy(local[i].g_sigma, self.learners[i].cost, actor_weights[i]) for i in self.agents}
        mu = np.concatenate([policies[i] for i in self.agents])
        stacked_controls = geometry.controls_from_mu(mu, hat_terms)
        state_rates = geometry.state_flow(mu, hat_terms)
        error_rates = geometry.error_flow(mu, hat_terms)

        rates = {(LEADER, "x"): self.context.leader.drift(leader)}
        controls, current, grid = {}, {}, {}
        for i in self.agents:
            runtime = self.runtimes[i]
            model = self.context.models[i]
            x_i = states[i - 1]
            controls[i] = geometry.own_block(stacked_controls, i)
            rates[(i, "x")] = model.flow(x_i, controls[i])

            x_hat = view(y, i, "x_hat")
            theta_hat = view(y, i, "theta")
            observer = StateObserver(estimate=x_hat, gain=runtime.config.observer_gain)
            rates[(i, "x_hat")] = observer_flow(observer, x_i, controls[i], theta_hat, model)
            if self.config.exact_model:
                rates[(i, "theta")] = np.zeros_like(theta_hat)
            else:
                estimate = DriftEstimate(weights=theta_hat, gain=runtime.theta_gain, cl_gain=runtime.config.k_theta)
                rates[(i, "theta")] = cl_update_flow(
                    estimate, runtime.stack, x_i, x_i - x_hat, model, use_stack=runtime.use_stack
                )

            current[i] = runtime.bellman.sample(
                local[i], critics[i], policies[i], state_rates, error_rates, geometry.errors
            )
            grid[i] = runtime.grid_linearization.sample(critics[i], actor_weights, grid_terms[i])
            rates[(i, "critic")], rates[(i, "gain")] = critic_flow(critics[i], current[i], grid[i])
            rates[(i, "actor")] = actor_flow(
                runtime.actor(actor_weights[i]), critics[i], self.learners[i].cost, current[i], grid[i]
            )

        signals = StageSignals(
            leader=leader,
            errors={i: geometry.errors[i - 1] for i in self.agents},
            controls=controls,
            policies=policies,
            current=current,
            grid=grid,
        )
        return self.layout.pack(rates), signals

    def substeps(self, y: np.ndarray, signals: StageSignals) -> int:
        """RK4 steps per dt keeping the explicitly integrated rates inside the stability region.

        κ is the largest of the observer gains and a trace bound on the critic rates; the
        concurrent-learning contraction is propagated exactly and does not count.
        """
        stiffness = 0.0
        for i in self.agents:
            runtime = self.runtimes[i]
            agent = runtime.config
            gain = self.layout.view(y, i, "gain")
            grid = signals.grid[i]
            current = signals.current[i]
            critic_rate = (
                agent.eta_c2 * float(np.sum(_excitation(grid, gain, agent.nu))) / runtime.grid.count
                + agent.eta_c1 * float(_excitation(current, gain, agent.nu))
            )
            stiffness = max(stiffness, agent.observer_gain, critic_rate)
        count = max(1, math.ceil(self.config.dt * stiffness / settings.RK4_STABILITY_LIMIT))
        if count > settings.MAX_SUBSTEPS:
            if not self._substep_warning:
                logger.warning(
                    f"Step size {self.config.dt} needs {count} RK4 substeps, capped at {settings.MAX_SUBSTEPS}"
                )
                self._substep_warning = True
            count = settings.MAX_SUBSTEPS
        return count

    def linear_part(self, h: float) -> Optional[LinearPart]:
        """Concurrent-learning contractions of the agents whose stacks are switched on, None if there are none."""
        if self.config.exact_model:
            return None
        blocks = []
        for i in self.agents:
            runtime = self.runtimes[i]
            if runtime.use_stack and len(runtime.stack):
                key = (i, "theta")
                blocks.append((self.layout.slices[key], self.layout.shapes[key], *runtime.stack_propagators(h)))
        if not blocks:
            return None

        def transform(v, which, keep):
            # Outside the θ̂ blocks A is zero and its exponentials are the identity
            result = v.copy() if keep else np.zeros_like(v)
            for positions, shape, *operators in blocks:
                result[positions] = (operators[which] @ v[positions].reshape(shape)).ravel()
            return result

        return LinearPart(
            apply=lambda v: transform(v, 0, keep=False),
            half=lambda v: transform(v, 1, keep=True),
            full=lambda v: transform(v, 2, keep=True),
        )

    def rk4_step(
            self,
            t: float,
            y: np.ndarray,
            first_stage: np.ndarray,
            signals: StageSignals,
            grid_terms: Mapping[int, np.ndarray] = None,
    ) -> np.ndarray:
        """Advances the network by dt, subdividing the step when the learning dynamics are stiff."""
        grid_terms = self.grid_terms(y) if grid_terms is None else grid_terms
        count = self.substeps(y, signals)
        h = self.config.dt / count
        linear = self.linear_part(h)

        def flow(s, v):
            return self.network_flow(s, v, grid_terms, check_rank=False)[0]

        y_next = y
        for k in range(count):
            stage = first_stage if k == 0 else None
            if linear is None:
                y_next = rk4(flow, t + k * h, y_next, h, first_stage=stage)
            else:
                y_next = lawson_rk4(flow, t + k * h, y_next, h, linear, first_stage=stage)
        return self._project_gains(y, y_next)

    def _project_gains(self, y: np.ndarray, y_next: np.ndarray) -> np.ndarray:
        """Pulls Γ_i back onto the saturation sphere when a step carried it across."""
        for i in self.agents:
            bound = self.runtimes[i].config.gamma_bound
            before = np.linalg.norm(self.layout.view(y, i, "gain"))
            gain = self.layout.view(y_next, i, "gain")
            after = np.linalg.norm(gain)
            if before <= bound < after:
                y_next[self.layout.slices[(i, "gain")]] = np.ravel(0.5 * (gain + gain.T) * bound / after)
        return y_next

    def record_history(self, step: int, t: float, y: np.ndarray, signals: StageSignals):
        """Feeds the derivative windows and offers stack candidates; switches concurrent learning on."""
        if self.config.exact_model:
            return
        for i in self.agents:
            runtime = self.runtimes[i]
            runtime.window.push(t, self.layout.view(y, i, "x"), signals.controls[i])
            if step % self.config.history_interval:
                continue
            centered = runtime.window.center()
            if centered is None:
                continue
            t_c, x_c, u_c, rate = centered
            try_insert_svmax(runtime.stack, runtime.stack.make_entry(x_c, u_c, rate, t=t_c))
            if not runtime.use_stack and stack_rank_metric(runtime.stack) > self.config.rank_gate:
                runtime.use_stack = True
                logger.info(
                    f"Agent {i}: concurrent learning enabled at t={t:.3f}s",
                    extra={"agent": i, "stack_rank": stack_rank_metric(runtime.stack), "stack_size": len(runtime.stack)},
                )

    def check_bounds(self, t: float, y: np.ndarray):
        """Every Γ_i must stay within its saturation bound and positive definite."""
        for i in self.agents:
            runtime = self.runtimes[i]
            gain = self.layout.view(y, i, "gain")
            limit = max(runtime.initial_gain_norm, runtime.config.gamma_bound) * (1 + 1e-9)
            norm = float(np.linalg.norm(gain))
            if norm > limit:
                raise NonFiniteState("Critic gain left its saturation bound", agent=i, time=t, detail=f"|Γ| = {norm:.6g}")
            try:
                np.linalg.cholesky(0.5 * (gain + gain.T))
            except np.linalg.LinAlgError:
                raise NonFiniteState("Critic gain lost positive definiteness", agent=i, time=t)

    def trace_row(self, t: float, y: np.ndarray, signals: StageSignals) -> np.ndarray:
        view = self.layout.view
        parts = [np.array([t])]
        parts += [view(y, i, "x") for i in self.agents]
        parts += [signals.errors[i] for i in self.agents]
        parts += [signals.controls[i] for i in self.agents]
        parts += [signals.policies[i] for i in self.agents]
        parts += [view(y, i, "critic") for i in self.agents]
        parts += [view(y, i, "actor") for i in self.agents]
        parts += [view(y, i, "theta").ravel() for i in self.agents]
        parts += [np.atleast_1d(signals.current[i].delta) for i in self.agents]
        return np.concatenate([np.ravel(part) for part in parts])

    def new_trace(self) -> TraceLog:
        trace = TraceLog(columns=self.columns)
        for i in self.agents:
            agent = self.config.agents[i]
            trace.offsets[i] = self.context.formation.offset(i)
            trace.true_theta[i] = self.context.models[i].true_weights
            trace.bounds[i] = {"theta_bound": agent.theta_bound, "epsilon_theta_bound": agent.epsilon_theta_bound}
        return trace

    def warn_steady_state(self, y: np.ndarray, signals: StageSignals):
        states = {i: self.layout.view(y, i, "x") for i in self.agents}
        steady_state_mismatches(self.context, states, signals.controls, signals.leader)

    def run(self) -> TraceLog:
        """Integrates over [0, t_final] and logs every ``decimate``-th step, the final one included when it falls on the grid.

        The Γ monitors run on every step. A numerical failure ends the run early; the returned log
        then holds the rows so far and the failure.
        """
        config = self.config
        n_steps = int(round(config.t_final / config.dt))
        trace = self.new_trace()
        y = self.initial_state()
        t = 0.0
        next_progress = settings.PROGRESS_EVERY
        started = time.monotonic()
        logger.info(f"Simulating {len(self.agents)} agents for {config.t_final}s at dt={config.dt}", extra=config.summary())
        try:
            for step in range(n_steps + 1):
                t = step * config.dt
                self.check_bounds(t, y)
                grid_terms = self.grid_terms(y)
                rate, signals = self.network_flow(t, y, grid_terms)
                if step % config.decimate == 0:
                    for i in self.agents:
                        self.runtimes[i].monitor.update(signals.grid[i].omega, signals.grid[i].rho)
                    trace.append(self.trace_row(t, y, signals), signals.leader)
                if step == 0 or step == n_steps:
                    self.warn_steady_state(y, signals)
                if step == n_steps:
                    break
                self.record_history(step, t, y, signals)
                y = self.rk4_step(t, y, rate, signals, grid_terms)
                if t + config.dt >= next_progress:
                    errors = max(float(np.max(np.abs(signals.errors[i]))) for i in self.agents)
                    logger.info(f"t={t:.2f}s max |e|={errors:.4g}")
                    next_progress += settings.PROGRESS_EVERY
        except NumericalError as e:
            trace.aborted = str(e)
            logger.error(f"Run aborted at t={t:.6g}s: {e}", extra={"rows": len(trace)})
        for i in self.agents:
            trace.stack_rank[i] = stack_rank_metric(self.runtimes[i].stack)
            trace.grid_rank[i] = self.runtimes[i].monitor.estimate
        trace.wall_clock = time.monotonic() - started
        logger.info(f"Simulation finished with {len(trace)} rows in {trace.wall_clock:.1f}s")
        return trace


def _excitation(sample: BellmanSample, gain: np.ndarray, nu: float) -> np.ndarray:
    """ωᵀΓω/ρ per sample, the trace of Γωωᵀ/ρ."""
    if nu > 0:
        return (sample.rho - 1.0) / (nu * sample.rho)
    return np.einsum("...a,ab,...b->...", sample.omega, gain, sample.omega) / sample.rho


def run(config: SimConfig) -> TraceLog:
    return Simulation(config).run()
