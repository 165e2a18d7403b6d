import numpy as np
import pytest

from app.actor_critic import (
    EXAMPLE_1D_TERMS,
    ActorState,
    AgentLearner,
    BellmanEvaluator,
    BellmanSample,
    CostSpec,
    CriticState,
    CurrentBellman,
    GridLinearization,
    GridRankMonitor,
    ValueBasis,
    actor_flow,
    bellman_error,
    build_grid,
    critic_flow,
    g_sigma,
    grid_rank_metric,
    hj_residual_exact,
    normalization,
    policy,
    quadratic_error_terms,
    regressor,
    value,
)
from app.netgraph import DirectedNetwork, subgraph_index
from app.plant import (
    FormationSpec,
    NetworkGeometry,
    NetworkSnapshot,
    PlantContext,
    SubgraphState,
    example_1d_model,
    exponential_leader,
)


def example_learners(context):
    return {
        i: AgentLearner(
            basis=ValueBasis.from_terms(context.index(i), EXAMPLE_1D_TERMS[i]),
            cost=CostSpec(state_weight=[[10.0]], control_weight=[[0.1]]),
        )
        for i in context.net.agents
    }


def near_formation_snapshot(rng, context, size=None, spread=0.1):
    batch = () if size is None else (size,)
    leader = rng.uniform(0.0, 1.0, batch + (1,))
    states = context.formation.offsets + leader[..., None, :] + rng.uniform(-spread, spread, batch + (5, 1))
    return NetworkSnapshot(context, {i: states[..., i - 1, :] for i in context.net.agents}, leader)


def make_critic(size, gain=1.0, **overrides):
    params = dict(
        weights=np.ones(size), gain=gain * np.eye(size), gain_bound=1e4, normalization=0.005,
        eta_c1=0.1, eta_c2=10.0, forgetting=0.5,
    )
    params.update(overrides)
    return CriticState(**params)


@pytest.fixture
def single_example_agent():
    """One pinned agent with f = 0.5x + x², g = cos(2x) + 2 following a stationary leader at 0."""
    return PlantContext(
        net=DirectedNetwork.from_edges(1, [(0, 1)]),
        models={1: example_1d_model((0.5, 1.0))},
        leader=exponential_leader(0.0, [0.0]),
        formation=FormationSpec(offsets=np.zeros((1, 1))),
    )


def test_basis_parses_terms(five_agent_network):
    basis = ValueBasis.from_terms(subgraph_index(five_agent_network, 5), EXAMPLE_1D_TERMS[5])
    assert basis.dimension == 8
    assert basis.input_size == 4
    np.testing.assert_array_equal(basis.exponents[2], [2, 0, 2, 0])
    assert basis.coefficients[1] == 0.25


def test_basis_evaluation():
    """σ at 𝓔_1 = [e1, e2, x1] = [1, 2, 3]."""
    index = subgraph_index(DirectedNetwork.from_edges(2, [(0, 1), (2, 1), (1, 2)]), 1)
    basis = ValueBasis.from_terms(index, EXAMPLE_1D_TERMS[1])
    np.testing.assert_allclose(basis(np.array([1.0, 2.0, 3.0])), [0.5, 0.25, 4.5, 2.0])


def test_basis_rejects_unknown_variables(five_agent_network):
    with pytest.raises(ValueError):
        ValueBasis.from_terms(subgraph_index(five_agent_network, 3), ["e4^2"])
    with pytest.raises(ValueError):
        ValueBasis.from_terms(subgraph_index(five_agent_network, 3), ["0.5*y3^2"])
    with pytest.raises(ValueError):
        ValueBasis.from_terms(subgraph_index(five_agent_network, 3), [])


def test_vector_state_variable_names(wheel_context):
    index = wheel_context.index(2)
    basis = ValueBasis.from_terms(index, quadratic_error_terms(index, 3), state_dim=3)
    assert basis.terms == ("e2_1^2", "e2_2^2", "e2_3^2", "e1_1^2", "e1_2^2", "e1_3^2")
    assert basis.input_size == 9


@pytest.mark.parametrize("agent", [1, 2, 3, 4, 5])
def test_basis_gradient_matches_finite_differences(five_agent_network, rng, agent):
    basis = ValueBasis.from_terms(subgraph_index(five_agent_network, agent), EXAMPLE_1D_TERMS[agent])
    step = 1e-6
    for point in rng.uniform(-2.0, 2.0, (100, basis.input_size)):
        gradient = basis.gradient(point)
        for d in range(basis.input_size):
            shift = np.zeros(basis.input_size)
            shift[d] = step
            central = (basis(point + shift) - basis(point - shift)) / (2 * step)
            np.testing.assert_allclose(gradient[:, d], central, rtol=1e-6, atol=1e-8)


def test_basis_gradient_is_batched(five_agent_network, rng):
    basis = ValueBasis.from_terms(subgraph_index(five_agent_network, 4), EXAMPLE_1D_TERMS[4])
    points = rng.uniform(-1.0, 1.0, (7, 3))
    batched = basis.gradient(points)
    assert batched.shape == (7, 5, 3)
    np.testing.assert_allclose(batched[3], basis.gradient(points[3]))


def test_value():
    index = subgraph_index(DirectedNetwork.from_edges(1, [(0, 1)]), 1)
    basis = ValueBasis.from_terms(index, ["0.5*e1^2", "0.5*e1^2*x1^2"])
    point = np.array([0.4, -1.5])
    assert value(basis, point, np.zeros(2)) == 0.0
    assert value(basis, np.zeros(2), np.array([3.0, 1.0])) == 0.0
    assert value(basis, point, np.array([2.0, -1.0])) == pytest.approx(2.0 * 0.08 - 0.08 * 2.25)


def test_cost_spec_validation():
    with pytest.raises(ValueError):
        CostSpec(state_weight=[[10.0]], control_weight=[[0.0]])
    with pytest.raises(ValueError):
        CostSpec(state_weight=[[1.0, 2.0], [0.0, 1.0]], control_weight=[[1.0]])
    cost = CostSpec(state_weight=[[10.0]], control_weight=[[0.1]])
    assert cost.state_cost(np.array([0.0])) == 0.0
    assert cost.state_cost(np.array([0.5])) == pytest.approx(2.5)


def test_critic_state_gain_checks():
    assert make_critic(2).positive_definite
    assert not make_critic(2, gain=-1.0).positive_definite
    with pytest.raises(ValueError):
        CriticState(
            weights=np.ones(2), gain=np.eye(3), gain_bound=1e4, normalization=0.0, eta_c1=1.0, eta_c2=1.0, forgetting=0.5
        )


def test_g_sigma_constant_basis(single_example_agent):
    basis = ValueBasis.from_terms(single_example_agent.index(1), ["2.0"])
    snapshot = NetworkSnapshot(single_example_agent, {1: np.array([0.7])}, np.array([0.0]))
    np.testing.assert_array_equal(g_sigma(1, snapshot, basis), np.zeros((1, 1)))


def test_g_sigma_single_agent_by_hand(single_example_agent):
    """σ = (½e², ½x²) with a_10 = 1 gives G_σ = g(x)·(e, x)."""
    basis = ValueBasis.from_terms(single_example_agent.index(1), ["0.5*e1^2", "0.5*x1^2"])
    x, leader = 0.7, 0.2
    snapshot = NetworkSnapshot(single_example_agent, {1: np.array([x])}, np.array([leader]))
    gain = np.cos(2 * x) + 2
    np.testing.assert_allclose(g_sigma(1, snapshot, basis), [[gain * (x - leader), gain * x]])


@pytest.mark.parametrize("agent", [1, 4, 5])
def test_g_sigma_is_regressor_sensitivity(example_context, rng, agent):
    """Moving μ_i by one unit moves ω_i by the row of G_σi."""
    learners = example_learners(example_context)
    snapshot = near_formation_snapshot(rng, example_context)
    evaluator = BellmanEvaluator(agent, snapshot, learners)
    terms = evaluator.drift_terms()
    zero = {k: np.zeros(1) for k in example_context.index(agent).ordering}
    unit = {**zero, agent: np.ones(1)}
    difference = evaluator.regressor(unit, terms) - evaluator.regressor(zero, terms)
    np.testing.assert_allclose(difference, g_sigma(agent, snapshot, learners[agent].basis)[0], atol=1e-10)


def test_policy():
    cost = CostSpec(state_weight=[[10.0]], control_weight=[[0.1]])
    g_sigma_value = np.array([[0.3, -1.2, 0.5]])
    np.testing.assert_array_equal(policy(g_sigma_value, cost, np.zeros(3)), [0.0])
    weights = np.array([1.0, 2.0, -0.5])
    mu = policy(g_sigma_value, cost, weights)
    np.testing.assert_allclose(mu, [-0.5 * 10.0 * (0.3 - 2.4 - 0.25)])
    doubled = CostSpec(state_weight=[[10.0]], control_weight=[[0.2]])
    np.testing.assert_allclose(policy(g_sigma_value, doubled, weights), 0.5 * mu)


def test_scalar_lqr_policy_is_riccati_feedback(scalar_lqr_context):
    """With Ŵ = p on σ = e², μ̂ = -(p/R)e."""
    basis = ValueBasis.from_terms(scalar_lqr_context.index(1), ["e1^2"])
    snapshot = NetworkSnapshot(scalar_lqr_context, {1: np.array([0.8])}, np.array([0.0]))
    cost = CostSpec(state_weight=[[10.0]], control_weight=[[0.1]])
    p = 0.1 + np.sqrt(0.01 + 1.0)
    mu = policy(g_sigma(1, snapshot, basis), cost, np.array([p]))
    np.testing.assert_allclose(mu, [-p / 0.1 * 0.8])


def test_normalization():
    omega = np.array([1.0, -2.0])
    gain = np.array([[2.0, 0.5], [0.5, 1.0]])
    assert normalization(omega, gain, 0.0) == 1.0
    assert normalization(np.zeros(2), gain, 0.3) == 1.0
    assert normalization(omega, gain, 0.1) == pytest.approx(1.0 + 0.1 * (2.0 - 2.0 + 4.0))


def test_bellman_error_vanishes_at_origin(scalar_lqr_context):
    learners = {
        1: AgentLearner(
            basis=ValueBasis.from_terms(scalar_lqr_context.index(1), ["e1^2"]),
            cost=CostSpec(state_weight=[[10.0]], control_weight=[[0.1]]),
        )
    }
    state = SubgraphState(index=scalar_lqr_context.index(1), errors=np.zeros((1, 1)), own_state=np.zeros(1))
    delta = bellman_error(1, state, np.zeros(1), {1: np.zeros(1)}, {1: np.zeros((1, 1))}, scalar_lqr_context, learners)
    assert delta == 0.0


def test_bellman_error_vanishes_on_riccati_weights(scalar_lqr_context):
    """Q + 2pθ - p²/R = 0 makes δ̂ vanish on every grid point."""
    index = scalar_lqr_context.index(1)
    learners = {
        1: AgentLearner(
            basis=ValueBasis.from_terms(index, ["e1^2"]), cost=CostSpec(state_weight=[[10.0]], control_weight=[[0.1]])
        )
    }
    p = np.array([0.1 + np.sqrt(0.01 + 1.0)])
    grid = build_grid(index, [-1.0, -0.5, 0.0, 0.5, 1.0], [0.0, 1.0, 2.0], [])
    true_theta = scalar_lqr_context.models[1].true_weights
    delta = bellman_error(1, grid.subgraph_state, p, {1: p}, {1: true_theta}, scalar_lqr_context, learners)
    np.testing.assert_allclose(delta, 0.0, atol=1e-10)


@pytest.mark.parametrize("agent", [1, 2, 3, 4, 5])
def test_bellman_error_on_true_weights_equals_exact_residual(example_context, rng, agent):
    learners = example_learners(example_context)
    snapshot = near_formation_snapshot(rng, example_context, size=20)
    state = snapshot.subgraph_state(agent)
    critic_weights = rng.normal(size=learners[agent].basis.dimension)
    actor_weights = {k: rng.normal(size=learners[k].basis.dimension) for k in example_context.index(agent).ordering}
    true_theta = {k: example_context.models[k].true_weights for k in example_context.index(agent).ordering}
    estimated = bellman_error(agent, state, critic_weights, actor_weights, true_theta, example_context, learners)
    exact = hj_residual_exact(agent, state, critic_weights, actor_weights, example_context, learners)
    np.testing.assert_allclose(estimated, exact, rtol=0.0, atol=1e-12)


def test_bellman_error_depends_on_estimates(example_context, rng):
    learners = example_learners(example_context)
    state = near_formation_snapshot(rng, example_context).subgraph_state(4)
    actor_weights = {k: np.ones(learners[k].basis.dimension) for k in (3, 4)}
    critic_weights = np.ones(5)
    zero_theta = {k: np.zeros((2, 1)) for k in (3, 4)}
    estimated = bellman_error(4, state, critic_weights, actor_weights, zero_theta, example_context, learners)
    exact = hj_residual_exact(4, state, critic_weights, actor_weights, example_context, learners)
    assert abs(estimated - exact) > 1e-6


def test_evaluator_sample_matches_wrappers(example_context, rng):
    learners = example_learners(example_context)
    snapshot = near_formation_snapshot(rng, example_context)
    critic = make_critic(8, weights=rng.normal(size=8))
    actor_weights = {k: rng.normal(size=learners[k].basis.dimension) for k in (3, 4, 5)}
    theta = {k: rng.normal(size=(2, 1)) for k in (3, 4, 5)}
    evaluator = BellmanEvaluator(5, snapshot, learners)
    sample = evaluator.sample(critic, actor_weights, evaluator.drift_terms(example_context.with_estimates(theta)))
    state = snapshot.subgraph_state(5)
    omega, rho = regressor(5, state, actor_weights, theta, example_context, learners, critic)
    np.testing.assert_allclose(sample.omega, omega, atol=1e-12)
    assert sample.rho == pytest.approx(rho)
    assert rho >= 1.0
    delta = bellman_error(5, state, critic.weights, actor_weights, theta, example_context, learners)
    assert sample.delta == pytest.approx(delta, abs=1e-12)


def network_geometry_of(snapshot, context):
    states = np.stack([snapshot.states[i] for i in context.net.agents])
    return NetworkGeometry(context, states, snapshot.leader)


@pytest.mark.parametrize("agent", [1, 2, 3, 4, 5])
def test_current_bellman_matches_evaluator(example_context, rng, agent):
    learners = example_learners(example_context)
    snapshot = near_formation_snapshot(rng, example_context)
    size = learners[agent].basis.dimension
    critic = make_critic(size, weights=rng.normal(size=size))
    actor_weights = {k: rng.normal(size=learners[k].basis.dimension) for k in example_context.net.agents}
    theta = {k: rng.normal(size=(2, 1)) for k in example_context.net.agents}
    estimated = example_context.with_estimates(theta)

    evaluator = BellmanEvaluator(agent, snapshot, learners)
    expected = evaluator.sample(critic, actor_weights, evaluator.drift_terms(estimated))

    geometry = network_geometry_of(snapshot, example_context)
    terms = geometry.drift_terms(estimated)
    bellman = {k: CurrentBellman(k, example_context, learners[k]) for k in example_context.net.agents}
    local = {k: bellman[k].linearize(geometry) for k in bellman}
    policies = {k: policy(local[k].g_sigma, learners[k].cost, actor_weights[k]) for k in bellman}
    mu = np.concatenate([policies[k] for k in example_context.net.agents])
    sample = bellman[agent].sample(
        local[agent], critic, policies[agent], geometry.state_flow(mu, terms), geometry.error_flow(mu, terms),
        geometry.errors,
    )
    np.testing.assert_allclose(sample.g_sigma, expected.g_sigma, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(sample.mu, expected.mu, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(sample.omega, expected.omega, rtol=1e-9, atol=1e-10)
    assert sample.delta == pytest.approx(float(expected.delta), rel=1e-9, abs=1e-10)
    assert sample.rho == pytest.approx(float(expected.rho), rel=1e-9)


@pytest.mark.parametrize("agent", [1, 3, 5])
def test_grid_linearization_matches_evaluator(example_context, rng, agent):
    """Fitted offsets and the actor coupling map reproduce the direct grid evaluation for any estimates."""
    learners = example_learners(example_context)
    index = example_context.index(agent)
    grid = build_grid(index, [-1.0, -0.5, 0.0, 0.5, 1.0], [0.0, 1.0, 2.0], [-0.5, 0.0, 0.5])
    evaluator = BellmanEvaluator.from_subgraph_state(example_context, grid.subgraph_state, learners)
    linearization = GridLinearization(evaluator)
    linearization.fit_offsets(example_context, {j: np.zeros((2, 1)) for j in index.ordering})

    size = learners[agent].basis.dimension
    critic = make_critic(size, weights=rng.normal(size=size))
    for _ in range(3):
        actor_weights = {k: rng.normal(size=learners[k].basis.dimension) for k in index.ordering}
        theta = {k: rng.normal(size=(2, 1)) for k in index.ordering}
        expected = evaluator.sample(critic, actor_weights, evaluator.drift_terms(example_context.with_estimates(theta)))
        sample = linearization.sample(critic, actor_weights, linearization.estimated_offset(theta))
        np.testing.assert_allclose(sample.omega, expected.omega, rtol=1e-9, atol=1e-8)
        np.testing.assert_allclose(sample.mu, expected.mu, rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(sample.delta, expected.delta, rtol=1e-9, atol=1e-8)
        np.testing.assert_allclose(sample.rho, expected.rho, rtol=1e-9)


def test_grid_linearization_offset_is_zero_policy_regressor(example_context):
    learners = example_learners(example_context)
    grid = build_grid(example_context.index(4), [-1.0, 1.0], [0.0, 2.0], [0.5])
    evaluator = BellmanEvaluator.from_subgraph_state(example_context, grid.subgraph_state, learners)
    linearization = GridLinearization(evaluator)
    terms = evaluator.drift_terms()
    zero = {k: np.zeros((grid.count, 1)) for k in (4, 3)}
    np.testing.assert_allclose(linearization.offset(terms), evaluator.regressor(zero, terms))
    expected = np.einsum("kal,ab,kbq->klq", evaluator.g_sigmas[4], learners[4].cost.control_inverse, evaluator.g_sigmas[4])
    np.testing.assert_allclose(linearization.curvature, expected)


def test_actor_flow_uses_given_curvature():
    actor = ActorState(weights=np.array([2.0, -1.0]), eta_a1=1.0, eta_a2=0.1)
    critic = make_critic(2, weights=np.array([1.5, 0.5]))
    cost = CostSpec(state_weight=[[1.0]], control_weight=[[0.5]])
    current = sample_of([0.4, 0.1], 0.3, g_sigma_value=[[3.0, 1.0]])
    g_grid = np.array([[[1.0, 0.5]], [[2.0, -1.0]]])
    plain = sample_of([[1.0, 0.0], [2.0, 1.0]], [0.1, 0.2], rho=[1.0, 4.0], g_sigma_value=g_grid)
    curvature = np.einsum("kal,kaq->klq", g_grid, g_grid) / 0.5
    cached = BellmanSample(
        g_sigma=plain.g_sigma, mu=plain.mu, omega=plain.omega, rho=plain.rho, delta=plain.delta, curvature=curvature
    )
    np.testing.assert_allclose(
        actor_flow(actor, critic, cost, current, cached), actor_flow(actor, critic, cost, current, plain)
    )


def sample_of(omega, delta, rho=None, g_sigma_value=None):
    omega = np.asarray(omega, dtype=float)
    batch = omega.shape[:-1]
    return BellmanSample(
        g_sigma=np.zeros(batch + (1, omega.shape[-1])) if g_sigma_value is None else np.asarray(g_sigma_value),
        mu=np.zeros(batch + (1,)),
        omega=omega,
        rho=np.ones(batch) if rho is None else np.asarray(rho, dtype=float),
        delta=np.asarray(delta, dtype=float),
    )


def test_critic_flow_zero_bellman_error():
    critic = make_critic(2)
    current = sample_of([0.3, -0.1], 0.0)
    grid = sample_of(np.ones((4, 2)), np.zeros(4))
    weights_rate, _ = critic_flow(critic, current, grid)
    np.testing.assert_array_equal(weights_rate, np.zeros(2))


def test_critic_flow_values():
    critic = make_critic(2, gain=2.0, eta_c1=1.0, eta_c2=4.0, forgetting=0.5)
    current = sample_of([1.0, 0.0], 3.0, rho=2.0)
    grid = sample_of([[0.0, 1.0], [1.0, 1.0]], [1.0, -1.0])
    weights_rate, gain_rate = critic_flow(critic, current, grid)
    # -Γωδ/ρ = -(3, 0); grid: -(4/2)Γ((0, 1) - (1, 1)) = (4, 0)
    np.testing.assert_allclose(weights_rate, [1.0, 0.0])
    np.testing.assert_allclose(gain_rate, [[1.0 - 1.0, 0.0], [0.0, 1.0]])


def test_critic_gain_saturation():
    critic = make_critic(2, gain=500.0, gain_bound=100.0)
    assert critic.saturated
    _, gain_rate = critic_flow(critic, sample_of([1.0, 1.0], 1.0), sample_of(np.ones((2, 2)), np.ones(2)))
    np.testing.assert_array_equal(gain_rate, np.zeros((2, 2)))


def test_actor_flow_decays_without_critic():
    actor = ActorState(weights=np.array([1.0, -2.0]), eta_a1=5.0, eta_a2=0.1)
    critic = make_critic(2, weights=np.zeros(2))
    cost = CostSpec(state_weight=[[10.0]], control_weight=[[0.1]])
    current = sample_of([0.5, 0.2], 1.0, g_sigma_value=[[1.0, 2.0]])
    grid = sample_of(np.ones((3, 2)), np.ones(3), g_sigma_value=np.ones((3, 1, 2)))
    np.testing.assert_allclose(actor_flow(actor, critic, cost, current, grid), -5.1 * actor.weights)


def test_actor_flow_at_consensus():
    actor = ActorState(weights=np.array([1.0, 3.0]), eta_a1=5.0, eta_a2=0.0)
    critic = make_critic(2, weights=np.array([1.0, 3.0]))
    cost = CostSpec(state_weight=[[10.0]], control_weight=[[0.1]])
    rate = actor_flow(actor, critic, cost, sample_of([0.5, 0.2], 1.0), sample_of(np.ones((3, 2)), np.ones(3)))
    np.testing.assert_array_equal(rate, np.zeros(2))


def test_actor_flow_coupling_terms():
    """Scalar weights: ¼η_c1 G²/R Ŵ_a (ωŴ_c/ρ) plus the grid average."""
    actor = ActorState(weights=np.array([2.0]), eta_a1=0.0, eta_a2=0.0)
    critic = make_critic(1, weights=np.array([1.5]), eta_c1=0.2, eta_c2=3.0)
    cost = CostSpec(state_weight=[[1.0]], control_weight=[[0.5]])
    current = sample_of([0.4], 0.0, rho=2.0, g_sigma_value=[[3.0]])
    grid = sample_of([[1.0], [2.0]], [0.0, 0.0], rho=[1.0, 4.0], g_sigma_value=[[[1.0]], [[2.0]]])
    expected = 0.25 * 0.2 * (9.0 / 0.5) * 2.0 * (0.4 * 1.5 / 2.0)
    expected += 0.25 * (3.0 / 2) * ((1.0 / 0.5) * 2.0 * 1.5 + (4.0 / 0.5) * 2.0 * (2.0 * 1.5 / 4.0))
    np.testing.assert_allclose(actor_flow(actor, critic, cost, current, grid), [expected])


def test_grid_rank_metric():
    assert grid_rank_metric(np.zeros((4, 3)), np.ones(4)) == 0.0
    assert grid_rank_metric(np.eye(3), np.ones(3)) == pytest.approx(1 / 3)
    monitor = GridRankMonitor()
    assert monitor.estimate == 0.0
    monitor.update(np.eye(3), np.ones(3))
    monitor.update(np.eye(3), np.full(3, 2.0))
    monitor.update(np.eye(3), np.ones(3))
    assert monitor.estimate == pytest.approx(1 / 6)


@pytest.mark.parametrize("agent, count", [(1, 45), (2, 45), (3, 15), (4, 45), (5, 135)])
def test_grid_counts(five_agent_network, agent, count):
    grid = build_grid(subgraph_index(five_agent_network, agent), [-1, -0.5, 0, 0.5, 1], [0, 1, 2], [-0.5, 0, 0.5])
    assert grid.count == count
    assert grid.points.shape[1] == subgraph_index(five_agent_network, agent).size + 1


def test_grid_single_point(five_agent_network):
    grid = build_grid(subgraph_index(five_agent_network, 5), [0.0], [2.0], [0.1])
    np.testing.assert_array_equal(grid.points, [[0.0, 0.1, 0.1, 2.0]])


def test_grid_axes_follow_subgraph_layout(five_agent_network):
    """Own error first, then neighbour errors, then own state."""
    grid = build_grid(subgraph_index(five_agent_network, 4), [-1.0, 1.0], [5.0], [0.25])
    np.testing.assert_array_equal(grid.points, [[-1.0, 0.25, 5.0], [1.0, 0.25, 5.0]])
    assert grid.subgraph_state.errors.shape == (2, 2, 1)


def test_random_grid_is_seeded(five_agent_network):
    index = subgraph_index(five_agent_network, 4)
    values = ([-1, -0.5, 0, 0.5, 1], [0, 1, 2], [-0.5, 0, 0.5])
    first = build_grid(index, *values, mode="random", rng=np.random.default_rng(3))
    second = build_grid(index, *values, mode="random", rng=np.random.default_rng(3))
    np.testing.assert_array_equal(first.points, second.points)
    assert first.count == 45
    assert np.all(first.points[:, 0] >= -1) and np.all(first.points[:, 0] <= 1)
    assert np.all(first.points[:, 2] >= 0) and np.all(first.points[:, 2] <= 2)
    with pytest.raises(ValueError):
        build_grid(index, *values, mode="random")
    with pytest.raises(ValueError):
        build_grid(index, *values, mode="sobol")
