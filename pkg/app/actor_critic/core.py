from dataclasses import dataclass
from typing import Dict, Mapping, Optional

import numpy as np

from app.plant import DriftTerms, NetworkGeometry, NetworkSnapshot, PlantContext, SubgraphState
from .basis import ValueBasis


def _is_positive_definite(matrix: np.ndarray) -> bool:
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        return False
    if not np.allclose(matrix, matrix.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(matrix).max(initial=0.0))):
        return False
    return bool(np.all(np.linalg.eigvalsh(matrix) > 0.0))


@dataclass(frozen=True)
class CostSpec:
    """Local cost r_i = Q_i(e_i) + μ_iᵀR_iμ_i with a quadratic state cost Q_i(e) = eᵀQe."""
    state_weight: np.ndarray
    control_weight: np.ndarray

    def __post_init__(self):
        state_weight = np.atleast_2d(np.asarray(self.state_weight, dtype=float))
        control_weight = np.atleast_2d(np.asarray(self.control_weight, dtype=float))
        if not _is_positive_definite(state_weight):
            raise ValueError("State cost weight Q must be symmetric positive definite")
        if not _is_positive_definite(control_weight):
            raise ValueError("Control cost weight R must be symmetric positive definite")
        object.__setattr__(self, "state_weight", state_weight)
        object.__setattr__(self, "control_weight", control_weight)
        object.__setattr__(self, "_control_inverse", np.linalg.inv(control_weight))

    @property
    def control_inverse(self) -> np.ndarray:
        return self._control_inverse

    def state_cost(self, error: np.ndarray) -> np.ndarray:
        return np.einsum("...i,ij,...j->...", error, self.state_weight, error)

    def control_cost(self, mu: np.ndarray) -> np.ndarray:
        return np.einsum("...i,ij,...j->...", mu, self.control_weight, mu)


@dataclass
class CriticState:
    weights: np.ndarray
    gain: np.ndarray
    gain_bound: float
    normalization: float
    eta_c1: float
    eta_c2: float
    forgetting: float

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.gain = np.asarray(self.gain, dtype=float)
        if self.gain.shape != (self.weights.size, self.weights.size):
            raise ValueError("Critic gain Γ must be an L x L matrix")
        if self.normalization < 0.0:
            raise ValueError("Normalization gain ν must be nonnegative")

    @property
    def saturated(self) -> bool:
        return bool(np.linalg.norm(self.gain) > self.gain_bound)

    @property
    def positive_definite(self) -> bool:
        return _is_positive_definite(self.gain)


@dataclass
class ActorState:
    weights: np.ndarray
    eta_a1: float
    eta_a2: float

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)


@dataclass(frozen=True)
class AgentLearner:
    """Value dictionary and local cost of one agent."""
    basis: ValueBasis
    cost: CostSpec


@dataclass(frozen=True)
class BellmanSample:
    """Approximate Bellman error and its regressor at one point or a batch of grid points.

    ``curvature`` optionally carries G_σᵀR⁻¹G_σ when it is fixed across samples.
    """
    g_sigma: np.ndarray  # (..., m_i, L_i)
    mu: np.ndarray  # (..., m_i)
    omega: np.ndarray  # (..., L_i)
    rho: np.ndarray  # (...)
    delta: np.ndarray  # (...)
    curvature: Optional[np.ndarray] = None  # (..., L_i, L_i)


def g_sigma(i: int, snapshot: NetworkSnapshot, basis: ValueBasis) -> np.ndarray:
    """G_σi = Σ_j (𝓖ˢ_j selected at μ_i)ᵀ ∇_{e_j}σ_iᵀ + (𝓖_i selected at μ_i)ᵀ ∇_{x_i}σ_iᵀ."""
    gradient = basis.gradient(snapshot.subgraph_state(i).vector)
    own = snapshot.geometry(i)
    total = np.einsum("...nm,...ln->...ml", own.own_block(own.state_input_gain), basis.state_gradient(gradient))
    for j in basis.index.ordering:
        geometry = snapshot.geometry(j)
        if i not in geometry.index:
            continue
        selected = geometry.own_block(geometry.error_input_gain, i)
        total = total + np.einsum("...nm,...ln->...ml", selected, basis.error_gradient(gradient, j))
    return total


def policy(g_sigma_value: np.ndarray, cost: CostSpec, actor_weights: np.ndarray) -> np.ndarray:
    """μ̂_i = -½ R_i⁻¹ G_σi Ŵ_ai."""
    return -0.5 * np.einsum("ab,...bl,l->...a", cost.control_inverse, g_sigma_value, actor_weights)


def value(basis: ValueBasis, point: np.ndarray, critic_weights: np.ndarray) -> np.ndarray:
    return basis(point) @ critic_weights


def normalization(omega: np.ndarray, gain: np.ndarray, nu: float) -> np.ndarray:
    """ρ_i = 1 + ν ωᵀΓω."""
    return 1.0 + nu * np.einsum("...a,ab,...b->...", omega, gain, omega)


class BellmanEvaluator:
    """Evaluates δ̂_i for agent i at a point or a batch of points.

    Everything that does not depend on drift estimates (geometries, G_σk for every k in S_i,
    ∇σ_i and Q_i(e_i)) is computed once; :meth:`sample` only needs the current weights and
    the drift terms of the members of S_i.
    """

    def __init__(
            self,
            agent: int,
            snapshot: NetworkSnapshot,
            learners: Mapping[int, AgentLearner],
            g_sigmas: Optional[Mapping[int, np.ndarray]] = None,
    ):
        self.agent = agent
        self.snapshot = snapshot
        self.learners = learners
        self.index = snapshot.context.index(agent)
        self.basis = learners[agent].basis
        self.cost = learners[agent].cost

        gradient = self.basis.gradient(snapshot.subgraph_state(agent).vector)
        self.error_gradients = {j: self.basis.error_gradient(gradient, j) for j in self.index.ordering}
        self.state_gradient = self.basis.state_gradient(gradient)
        g_sigmas = g_sigmas or {}
        self.g_sigmas = {
            k: g_sigmas[k] if k in g_sigmas else g_sigma(k, snapshot, learners[k].basis) for k in self.index.ordering
        }
        self.state_cost = self.cost.state_cost(snapshot.errors[agent])

    @classmethod
    def from_subgraph_state(
            cls, context: PlantContext, subgraph_state: SubgraphState, learners: Mapping[int, AgentLearner]
    ) -> "BellmanEvaluator":
        return cls(subgraph_state.agent, NetworkSnapshot.from_subgraph_state(context, subgraph_state), learners)

    def drift_terms(self, context: Optional[PlantContext] = None) -> Dict[int, DriftTerms]:
        """Drift assemblies of every member of S_i, e.g. under identifier estimates."""
        context = context or self.snapshot.context
        return {j: self.snapshot.geometry(j).drift_terms(context) for j in self.index.ordering}

    def policies(self, actor_weights: Mapping[int, np.ndarray]) -> Dict[int, np.ndarray]:
        return {
            k: policy(self.g_sigmas[k], self.learners[k].cost, actor_weights[k])
            for k in self.index.ordering
        }

    def mu_stack(self, j: int, policies: Mapping[int, np.ndarray]) -> np.ndarray:
        """μ̂_{S_j} in λ_j order."""
        members = self.snapshot.context.index(j).ordering
        return np.concatenate([policies[k] for k in members], axis=-1)

    def regressor(self, policies: Mapping[int, np.ndarray], drift_terms: Mapping[int, DriftTerms]) -> np.ndarray:
        own = self.snapshot.geometry(self.agent)
        state_rate = own.state_flow(self.mu_stack(self.agent, policies), drift_terms[self.agent])
        omega = np.einsum("...ln,...n->...l", self.state_gradient, state_rate)
        for j in self.index.ordering:
            error_rate = self.snapshot.geometry(j).error_flow(self.mu_stack(j, policies), drift_terms[j])
            omega = omega + np.einsum("...ln,...n->...l", self.error_gradients[j], error_rate)
        return omega

    def sample(
            self,
            critic: CriticState,
            actor_weights: Mapping[int, np.ndarray],
            drift_terms: Mapping[int, DriftTerms],
    ) -> BellmanSample:
        policies = self.policies(actor_weights)
        omega = self.regressor(policies, drift_terms)
        mu = policies[self.agent]
        delta = omega @ critic.weights + self.state_cost + self.cost.control_cost(mu)
        return BellmanSample(
            g_sigma=self.g_sigmas[self.agent],
            mu=mu,
            omega=omega,
            rho=normalization(omega, critic.gain, critic.normalization),
            delta=delta,
        )


@dataclass(frozen=True)
class LocalLinearization:
    """∇σ_i split by member and G_σi at the current point of 𝓔_i."""
    error_gradient: np.ndarray  # (L_i, s_i, n) in λ_i order
    state_gradient: np.ndarray  # (L_i, n)
    g_sigma: np.ndarray  # (m_i, L_i)


class CurrentBellman:
    """δ̂_i at the current network state, read off a :class:`NetworkGeometry`.

    Member rows and input columns are resolved once, so a flow evaluation costs a few array
    operations per agent.
    """

    def __init__(self, agent: int, context: PlantContext, learner: AgentLearner):
        index = context.index(agent)
        self.agent = agent
        self.basis = learner.basis
        self.cost = learner.cost
        self.rows = np.array([j - 1 for j in index.ordering])
        self.columns = context.plan.input_slices[agent]
        self.shape = (self.basis.dimension, index.size, context.state_dim)

    def linearize(self, geometry: NetworkGeometry) -> LocalLinearization:
        own = self.agent - 1
        point = np.concatenate([geometry.errors[self.rows].ravel(), geometry.states[own]])
        gradient = self.basis.gradient(point)
        split = self.shape[1] * self.shape[2]
        error_gradient = gradient[:, :split].reshape(self.shape)
        state_gradient = gradient[:, split:]
        selected = geometry.error_input_gain[self.rows][:, :, self.columns]
        g_sigma_value = (
            np.einsum("jnm,ljn->ml", selected, error_gradient)
            + geometry.state_input_gain[own][:, self.columns].T @ state_gradient.T
        )
        return LocalLinearization(error_gradient, state_gradient, g_sigma_value)

    def sample(
            self,
            local: LocalLinearization,
            critic: CriticState,
            mu: np.ndarray,
            state_rates: np.ndarray,
            error_rates: np.ndarray,
            errors: np.ndarray,
    ) -> BellmanSample:
        """``state_rates`` and ``error_rates`` are the estimated ẋ and ė of all agents, shape (N, n)."""
        omega = (
            local.state_gradient @ state_rates[self.agent - 1]
            + np.einsum("ljn,jn->l", local.error_gradient, error_rates[self.rows])
        )
        delta = omega @ critic.weights + self.cost.state_cost(errors[self.agent - 1]) + self.cost.control_cost(mu)
        return BellmanSample(
            g_sigma=local.g_sigma,
            mu=mu,
            omega=omega,
            rho=normalization(omega, critic.gain, critic.normalization),
            delta=delta,
        )


class GridLinearization:
    """δ̂_i over a fixed extrapolation grid, affine in the actor weights of S_i.

    G_σk, ∇σ_i and Q_i do not move with the weights, so ω_i splits into an offset carried by the
    drift terms and a fixed map of the stacked actor weights (λ_i order).
    """

    def __init__(self, evaluator: BellmanEvaluator):
        self.evaluator = evaluator
        self.agent = evaluator.agent
        self.members = evaluator.index.ordering
        snapshot = evaluator.snapshot
        learners = evaluator.learners

        self.policy_maps = {
            k: -0.5 * np.einsum("ab,kbl->kal", learners[k].cost.control_inverse, evaluator.g_sigmas[k])
            for k in self.members
        }
        self._zero_policies = {k: np.zeros(self.policy_maps[k].shape[:-1]) for k in self.members}
        bounds = np.cumsum([0] + [learners[k].basis.dimension for k in self.members])
        self.actor_slices = {k: slice(bounds[a], bounds[a + 1]) for a, k in enumerate(self.members)}

        own = snapshot.geometry(self.agent)
        count = evaluator.state_gradient.shape[0]
        coupling = np.zeros((count, evaluator.basis.dimension, bounds[-1]))
        for k in self.members:
            block = np.einsum("kln,kna->kla", evaluator.state_gradient, own.state_input_gain[..., own.input_slices[k]])
            for j in self.members:
                geometry = snapshot.geometry(j)
                if k in geometry.index:
                    selected = geometry.error_input_gain[..., geometry.input_slices[k]]
                    block = block + np.einsum("kln,kna->kla", evaluator.error_gradients[j], selected)
            coupling[:, :, self.actor_slices[k]] = np.einsum("kla,kaq->klq", block, self.policy_maps[k])
        self.coupling = coupling

        g_own = evaluator.g_sigmas[self.agent]
        self.curvature = np.einsum("kal,ab,kbq->klq", g_own, evaluator.cost.control_inverse, g_own)
        self.offset_base = None
        self.offset_map = None

    def offset(self, drift_terms: Mapping[int, DriftTerms]) -> np.ndarray:
        """ω_i with every policy set to zero."""
        return self.evaluator.regressor(self._zero_policies, drift_terms)

    def fit_offsets(self, context: PlantContext, estimates: Mapping[int, np.ndarray]):
        """Tabulates the offset as an affine map of the member drift weights θ̂_j.

        Estimated drifts θ̂_jᵀσ_θj are linear in θ̂_j and the leader drift is fixed, so one
        evaluation per weight entry recovers the map exactly.
        """
        zero = {j: np.zeros_like(estimates[j], dtype=float) for j in self.members}
        base = self.offset(self.evaluator.drift_terms(context.with_estimates(zero)))
        columns = []
        for j in self.members:
            for entry in range(zero[j].size):
                unit = np.zeros(zero[j].size)
                unit[entry] = 1.0
                weights = {**zero, j: unit.reshape(zero[j].shape)}
                columns.append(self.offset(self.evaluator.drift_terms(context.with_estimates(weights))) - base)
        self.offset_base = base
        self.offset_map = np.stack(columns, axis=-1)

    def estimated_offset(self, estimates: Mapping[int, np.ndarray]) -> np.ndarray:
        theta = np.concatenate([np.ravel(estimates[j]) for j in self.members])
        return self.offset_base + self.offset_map @ theta

    def sample(self, critic: CriticState, actor_weights: Mapping[int, np.ndarray], offset: np.ndarray) -> BellmanSample:
        stacked = np.concatenate([actor_weights[k] for k in self.members])
        omega = offset + self.coupling @ stacked
        mu = self.policy_maps[self.agent] @ actor_weights[self.agent]
        delta = omega @ critic.weights + self.evaluator.state_cost + self.cost.control_cost(mu)
        return BellmanSample(
            g_sigma=self.evaluator.g_sigmas[self.agent],
            mu=mu,
            omega=omega,
            rho=normalization(omega, critic.gain, critic.normalization),
            delta=delta,
            curvature=self.curvature,
        )

    @property
    def cost(self) -> CostSpec:
        return self.evaluator.cost


def regressor(
        i: int,
        subgraph_state: SubgraphState,
        actor_weights: Mapping[int, np.ndarray],
        estimates: Mapping[int, np.ndarray],
        context: PlantContext,
        learners: Mapping[int, AgentLearner],
        critic: Optional[CriticState] = None,
):
    """(ω_i, ρ_i) at 𝓔_i; ρ_i is 1 when no critic gain is given."""
    evaluator = BellmanEvaluator.from_subgraph_state(context, subgraph_state, learners)
    omega = evaluator.regressor(evaluator.policies(actor_weights), evaluator.drift_terms(context.with_estimates(estimates)))
    if critic is None:
        return omega, np.ones(omega.shape[:-1])
    return omega, normalization(omega, critic.gain, critic.normalization)


def _bellman_error(evaluator, critic_weights, actor_weights, drift_terms):
    policies = evaluator.policies(actor_weights)
    omega = evaluator.regressor(policies, drift_terms)
    mu = policies[evaluator.agent]
    return omega @ np.asarray(critic_weights, dtype=float) + evaluator.state_cost + evaluator.cost.control_cost(mu)


def bellman_error(
        i: int,
        subgraph_state: SubgraphState,
        critic_weights: np.ndarray,
        actor_weights: Mapping[int, np.ndarray],
        estimates: Mapping[int, np.ndarray],
        context: PlantContext,
        learners: Mapping[int, AgentLearner],
) -> np.ndarray:
    """δ̂_i with member drifts replaced by θ̂_jᵀσ_θj."""
    evaluator = BellmanEvaluator.from_subgraph_state(context, subgraph_state, learners)
    drift_terms = evaluator.drift_terms(context.with_estimates(estimates))
    return _bellman_error(evaluator, critic_weights, actor_weights, drift_terms)


def hj_residual_exact(
        i: int,
        subgraph_state: SubgraphState,
        critic_weights: np.ndarray,
        actor_weights: Mapping[int, np.ndarray],
        context: PlantContext,
        learners: Mapping[int, AgentLearner],
) -> np.ndarray:
    """Bellman error under the true drifts; diagnostic only."""
    evaluator = BellmanEvaluator.from_subgraph_state(context, subgraph_state, learners)
    return _bellman_error(evaluator, critic_weights, actor_weights, evaluator.drift_terms())


def critic_flow(critic: CriticState, current: BellmanSample, grid: BellmanSample):
    """(dŴ_c/dt, dΓ/dt) of the saturated least-squares critic."""
    gain = critic.gain
    count = grid.omega.shape[0]
    weighted = current.omega * current.delta / current.rho
    grid_weighted = np.sum(grid.omega * (grid.delta / grid.rho)[:, None], axis=0)
    weights_rate = -critic.eta_c1 * gain @ weighted - (critic.eta_c2 / count) * gain @ grid_weighted

    if critic.saturated:
        gain_rate = np.zeros_like(gain)
    else:
        outer = np.outer(current.omega, current.omega) / current.rho ** 2
        gain_rate = critic.forgetting * gain - critic.eta_c1 * gain @ outer @ gain
    return weights_rate, gain_rate


def actor_flow(
        actor: ActorState, critic: CriticState, cost: CostSpec, current: BellmanSample, grid: BellmanSample
) -> np.ndarray:
    """dŴ_a/dt with the current-state and extrapolated coupling terms."""
    r_inv = cost.control_inverse
    actor_weights = actor.weights
    critic_weights = critic.weights
    count = grid.omega.shape[0]

    curvature = current.g_sigma.T @ r_inv @ current.g_sigma
    coupling = critic.eta_c1 * (current.omega @ critic_weights) / current.rho * (curvature @ actor_weights)

    grid_curvature = grid.curvature
    if grid_curvature is None:
        grid_curvature = np.einsum("kal,ab,kbq->klq", grid.g_sigma, r_inv, grid.g_sigma)
    grid_scale = (grid.omega @ critic_weights) / grid.rho
    grid_coupling = (critic.eta_c2 / count) * np.einsum("k,klq,q->l", grid_scale, grid_curvature, actor_weights)

    return (
        -actor.eta_a2 * actor_weights
        + 0.25 * coupling
        + 0.25 * grid_coupling
        - actor.eta_a1 * (actor_weights - critic_weights)
    )


def grid_rank_metric(omega: np.ndarray, rho: np.ndarray) -> float:
    """(1/M) λ_min(Σ_k ω^k ω^kᵀ / ρ^k) at one instant."""
    count = omega.shape[0]
    gram = np.einsum("kl,kq->lq", omega / rho[:, None], omega)
    return float(np.linalg.eigvalsh(gram)[0]) / count


class GridRankMonitor:
    """Infimum over sampled times of the extrapolation-grid rank metric."""

    def __init__(self):
        self.value = np.inf
        self.samples = 0

    def update(self, omega: np.ndarray, rho: np.ndarray) -> float:
        metric = grid_rank_metric(omega, rho)
        self.value = min(self.value, metric)
        self.samples += 1
        return metric

    @property
    def estimate(self) -> float:
        return 0.0 if self.samples == 0 else float(self.value)
