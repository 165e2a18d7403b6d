import numpy as np
import pytest
from scipy.linalg import expm

from app.identifier import stack_contraction
from app.netgraph import LEADER
from app.plant import exponential_leader
from app.services.errors import LeaderBoundExceeded, NonFiniteState, SpanningTreeError
from app.sim import runner
from app.sim import (
    Simulation,
    StateLayout,
    build_context,
    build_extrapolation_grid,
    leader_state,
    load_config,
    run,
    scenario_defaults,
    validate_config,
)


def example_config(**overrides):
    return load_config(scenario="example_1d", overrides=overrides)


def lqr_config(**overrides):
    return load_config(scenario="scalar_lqr", overrides=overrides)


def test_state_layout_views():
    layout = StateLayout(1, {1: {"x": (1,), "x_hat": (1,), "theta": (2, 1), "critic": (3,), "actor": (3,), "gain": (3, 3)}})
    assert layout.size == 1 + 1 + 1 + 2 + 3 + 3 + 9
    y = layout.pack({(LEADER, "x"): [4.0], (1, "theta"): np.array([[1.0], [2.0]]), (1, "gain"): np.eye(3)})
    np.testing.assert_array_equal(layout.view(y, LEADER, "x"), [4.0])
    np.testing.assert_array_equal(layout.view(y, 1, "theta"), [[1.0], [2.0]])
    np.testing.assert_array_equal(layout.view(y, 1, "gain"), np.eye(3))
    np.testing.assert_array_equal(layout.view(y, 1, "critic"), np.zeros(3))


def test_leader_state():
    leader = exponential_leader(-0.1, [1.0])
    np.testing.assert_allclose(leader_state(10.0, leader), [np.exp(-1.0)])
    with pytest.raises(ValueError):
        leader_state(-1.0, leader)


def test_leader_state_bound():
    leader = exponential_leader(1.0, [1.0], bound=2.0)
    np.testing.assert_allclose(leader_state(0.5, leader), [np.exp(0.5)])
    with pytest.raises(LeaderBoundExceeded):
        leader_state(1.0, leader)


def test_extrapolation_grid_sizes():
    """5·3^{s_i} points with s_i = 2, 2, 1, 2, 3."""
    config = example_config()
    context = build_context(config)
    counts = [build_extrapolation_grid(config, i, context).count for i in context.net.agents]
    assert counts == [45, 45, 15, 45, 135]


def test_random_grid_follows_seed():
    config = example_config(grid={"mode": "random"}, seed=3)
    context = build_context(config)
    first = build_extrapolation_grid(config, 4, context).points
    again = build_extrapolation_grid(config, 4, context).points
    other = build_extrapolation_grid(example_config(grid={"mode": "random"}, seed=4), 4, context).points
    assert first.shape == (45, 3)
    np.testing.assert_array_equal(first, again)
    assert not np.array_equal(first, other)
    assert first[:, 0].min() >= -1.0 and first[:, 0].max() <= 1.0
    assert first[:, 2].min() >= 0.0 and first[:, 2].max() <= 2.0


def test_context_requires_spanning_tree():
    data = scenario_defaults("scalar_lqr")
    data["topology"]["edges"] = []
    with pytest.raises(SpanningTreeError) as error:
        build_context(validate_config(data))
    assert "no spanning tree" in str(error.value)


def test_initial_state():
    simulation = Simulation(example_config())
    y = simulation.initial_state()
    view = simulation.layout.view
    np.testing.assert_array_equal(view(y, LEADER, "x"), [1.0])
    np.testing.assert_array_equal(view(y, 5, "x"), [2.0])
    np.testing.assert_array_equal(view(y, 5, "x_hat"), [0.0])
    np.testing.assert_array_equal(view(y, 3, "theta"), np.zeros((2, 1)))
    np.testing.assert_array_equal(view(y, 5, "critic"), np.full(8, 3.0))
    np.testing.assert_array_equal(view(y, 5, "actor"), np.full(8, 3.0))
    np.testing.assert_array_equal(view(y, 2, "gain"), 500.0 * np.eye(4))


def test_exact_model_starts_on_true_parameters():
    simulation = Simulation(example_config(exact_model=True))
    y = simulation.initial_state()
    np.testing.assert_array_equal(simulation.layout.view(y, 4, "theta"), [[0.5], [1.0]])


def test_network_flow_at_start():
    simulation = Simulation(example_config())
    y = simulation.initial_state()
    rate, signals = simulation.network_flow(0.0, y, simulation.grid_terms(y))
    view = simulation.layout.view
    assert rate.shape == y.shape
    assert np.all(np.isfinite(rate))
    np.testing.assert_allclose(view(rate, LEADER, "x"), [-0.1])
    # e_1 = a_10 (x_1 - 0.75 - 1) + a_12 (x_1 - x_2 - 0.5)
    np.testing.assert_allclose(signals.errors[1], [-0.25])
    # Observer from x̂ = 0 with θ̂ = 0: g u + 500 x
    model = simulation.context.models[1]
    expected = model.effectiveness(np.array([2.0])) @ signals.controls[1] + 1000.0
    np.testing.assert_allclose(view(rate, 1, "x_hat"), expected)
    # Γ_θ σ(x) x̃ᵀ with σ(2) = (2, 4) and x̃ = 2
    np.testing.assert_allclose(view(rate, 1, "theta"), [[4.0], [8.0]])
    assert signals.grid[5].omega.shape == (135, 8)


def test_exact_model_freezes_identifier():
    simulation = Simulation(lqr_config())
    y = simulation.initial_state()
    rate, _ = simulation.network_flow(0.0, y, simulation.grid_terms(y))
    np.testing.assert_array_equal(simulation.layout.view(rate, 1, "theta"), [[0.0]])


def test_scalar_control_law():
    """μ = -½ R⁻¹ (2e) Ŵ_a for V = W e²; the leader rests at the origin, so u = μ."""
    simulation = Simulation(lqr_config())
    y = simulation.initial_state()
    _, signals = simulation.network_flow(0.0, y, simulation.grid_terms(y))
    np.testing.assert_allclose(signals.policies[1], [-5.0])
    np.testing.assert_allclose(signals.controls[1], [-5.0])


def test_gain_projection_onto_bound():
    simulation = Simulation(lqr_config())
    y = simulation.initial_state()
    y_next = y.copy()
    y_next[simulation.layout.slices[(1, "gain")]] = 2e4
    projected = simulation._project_gains(y, y_next)
    assert np.linalg.norm(simulation.layout.view(projected, 1, "gain")) == pytest.approx(1e4)


def test_bound_monitor_rejects_indefinite_gain():
    simulation = Simulation(lqr_config())
    y = simulation.initial_state()
    y[simulation.layout.slices[(1, "gain")]] = -1.0
    with pytest.raises(NonFiniteState) as error:
        simulation.check_bounds(0.0, y)
    assert error.value.agent == 1


def test_short_run_row_count():
    trace = run(example_config(t_final=0.02))
    assert len(trace) == 3
    np.testing.assert_allclose(trace.times, [0.0, 0.01, 0.02])
    assert trace.aborted is None
    assert trace.columns[:6] == ["t", "x_1", "x_2", "x_3", "x_4", "x_5"]
    assert trace.columns[-1] == "delta_5"
    assert trace.table.shape == (3, len(trace.columns))
    assert np.all(np.isfinite(trace.table))


def test_zero_horizon_logs_initial_conditions():
    trace = run(example_config(t_final=0.0))
    assert len(trace) == 1
    np.testing.assert_array_equal(trace.table[0, 1:6], np.full(5, 2.0))
    np.testing.assert_array_equal(trace.leader[0], [1.0])


def test_run_is_deterministic():
    config = lqr_config(t_final=0.5)
    first, second = run(config), run(config)
    np.testing.assert_array_equal(first.table, second.table)


def test_leader_bound_aborts_run():
    trace = run(lqr_config(t_final=1.0, leader={"rate": 1.0, "initial": [1.0], "bound": 1.5}))
    assert trace.aborted is not None
    assert "Leader" in trace.aborted
    assert 1 <= len(trace) < 21
    assert trace.times[-1] < np.log(1.5)


def test_trace_carries_reference_values():
    trace = run(example_config(t_final=0.0))
    np.testing.assert_array_equal(trace.true_theta[3], [[0.1], [1.0]])
    np.testing.assert_array_equal(trace.offsets[1], [0.75])
    assert trace.agents == [1, 2, 3, 4, 5]


def test_scalar_lqr_flow_matches_closed_form():
    """At x = 1: μ = -5e, ω = 2e(e + μ) and δ = ω Ŵ_c + 10e² + 0.1μ² on every grid error e."""
    simulation = Simulation(lqr_config())
    y = simulation.initial_state()
    rate, signals = simulation.network_flow(0.0, y, simulation.grid_terms(y))
    view = simulation.layout.view

    gamma, nu, weight = 1000.0, 0.05, 0.5
    omega, delta = -8.0, 8.5
    rho = 1.0 + nu * gamma * omega ** 2
    e = simulation.runtimes[1].grid.points[:, 0]
    grid_omega = -8.0 * e ** 2
    grid_delta = 8.5 * e ** 2
    grid_rho = 1.0 + nu * gamma * grid_omega ** 2
    count = e.size

    np.testing.assert_allclose(view(rate, LEADER, "x"), [0.0], atol=1e-12)
    np.testing.assert_allclose(view(rate, 1, "x"), [-4.0], atol=1e-8)
    np.testing.assert_allclose(view(rate, 1, "x_hat"), [46.0], atol=1e-8)
    np.testing.assert_allclose(signals.current[1].omega, [omega], atol=1e-8)
    np.testing.assert_allclose(signals.current[1].delta, delta, atol=1e-8)
    np.testing.assert_allclose(signals.grid[1].omega[:, 0], grid_omega, atol=1e-8)
    np.testing.assert_allclose(signals.grid[1].delta, grid_delta, atol=1e-8)

    critic_rate = -0.1 * gamma * omega * delta / rho - (10.0 / count) * gamma * np.sum(grid_omega * grid_delta / grid_rho)
    gain_rate = 0.5 * gamma - 0.1 * gamma ** 2 * omega ** 2 / rho ** 2
    # G_σ = 2e, so G_σᵀR⁻¹G_σ = 40e²
    actor_rate = (
        -0.01 * weight
        + 0.25 * 0.1 * (omega * weight) / rho * 40.0 * weight
        + 0.25 * (10.0 / count) * np.sum((grid_omega * weight) / grid_rho * 40.0 * e ** 2 * weight)
    )
    np.testing.assert_allclose(view(rate, 1, "critic"), [critic_rate], atol=1e-8)
    np.testing.assert_allclose(view(rate, 1, "gain"), [[gain_rate]], atol=1e-8)
    np.testing.assert_allclose(view(rate, 1, "actor"), [actor_rate], atol=1e-8)


def final_row(config):
    trace = run(config)
    assert trace.aborted is None
    return trace.table[-1, 1:]


def test_scalar_lqr_step_halving_is_fourth_order():
    """Differences between successive halvings of dt shrink by about 2⁴."""
    rows = [final_row(lqr_config(t_final=0.2, dt=dt, decimate=1)) for dt in (0.004, 0.002, 0.001)]
    coarse = np.max(np.abs(rows[0] - rows[1]))
    fine = np.max(np.abs(rows[1] - rows[2]))
    assert coarse < 1e5 * 0.004 ** 4
    assert coarse / fine >= 10.0


def test_bounds_checked_on_every_step(mocker):
    spy = mocker.spy(Simulation, "check_bounds")
    trace = run(example_config(t_final=0.05))
    assert trace.aborted is None
    assert len(trace) == 6
    assert spy.call_count == 51


def test_indefinite_gain_between_logged_rows_aborts_run(mocker):
    simulation = Simulation(lqr_config(t_final=0.1))
    advance = simulation.rk4_step
    steps = []

    def corrupt_third_step(*args):
        y_next = advance(*args)
        steps.append(args[0])
        if len(steps) == 3:
            y_next[simulation.layout.slices[(1, "gain")]] = -1.0
        return y_next

    mocker.patch.object(simulation, "rk4_step", side_effect=corrupt_third_step)
    trace = simulation.run()
    assert trace.aborted is not None
    assert "positive definiteness" in trace.aborted
    assert len(trace) == 1


def test_example_step_cost_smoke():
    trace = run(example_config(t_final=0.05))
    assert trace.aborted is None
    assert trace.wall_clock / 50 < 0.05


def test_exact_model_has_no_linear_part():
    simulation = Simulation(lqr_config())
    assert simulation.linear_part(0.005) is None


def filled_example_simulation():
    simulation = Simulation(example_config())
    runtime = simulation.runtimes[1]
    for x in (1.0, 2.0):
        runtime.stack.append(runtime.stack.make_entry([x], [0.0], [0.0]))
    runtime.use_stack = True
    return simulation, runtime


def test_linear_part_acts_on_active_stacks_only():
    simulation, runtime = filled_example_simulation()
    linear = simulation.linear_part(0.001)
    theta = simulation.layout.slices[(1, "theta")]
    y = simulation.initial_state()
    y[theta] = 1.0
    contraction = stack_contraction(runtime.theta_gain, runtime.config.k_theta, runtime.stack)

    applied = linear.apply(y)
    np.testing.assert_allclose(applied[theta], (contraction @ np.ones((2, 1))).ravel(), rtol=1e-12)
    assert np.count_nonzero(np.delete(applied, np.arange(y.size)[theta])) == 0

    full = linear.full(y)
    np.testing.assert_allclose(full[theta], (expm(0.001 * contraction) @ np.ones((2, 1))).ravel(), rtol=1e-10)
    np.testing.assert_array_equal(np.delete(full, np.arange(y.size)[theta]), np.delete(y, np.arange(y.size)[theta]))


def test_active_stack_switches_to_exponential_integrator(mocker):
    simulation, _ = filled_example_simulation()
    lawson = mocker.spy(runner, "lawson_rk4")
    classical = mocker.spy(runner, "rk4")
    y = simulation.initial_state()
    grid_terms = simulation.grid_terms(y)
    rate, signals = simulation.network_flow(0.0, y, grid_terms)
    y_next = simulation.rk4_step(0.0, y, rate, signals, grid_terms)
    assert lawson.call_count >= 1
    assert classical.call_count == 0
    assert np.all(np.isfinite(y_next))


def test_stack_propagators_follow_stack_revision():
    simulation, runtime = filled_example_simulation()
    first = runtime.stack_propagators(0.001)
    assert runtime.stack_propagators(0.001) is first
    runtime.stack.append(runtime.stack.make_entry([1.5], [0.0], [0.0]))
    second = runtime.stack_propagators(0.001)
    assert second is not first
    np.testing.assert_allclose(second[2], expm(0.001 * second[0]), rtol=1e-10)



@pytest.mark.slow
def test_history_stacks_fill_during_run():
    simulation = Simulation(example_config(t_final=1.0))
    simulation.run()
    for runtime in simulation.runtimes.values():
        assert 1 <= len(runtime.stack) <= runtime.config.stack_size


@pytest.mark.slow
def test_scalar_lqr_learns_riccati_weight():
    """p = Rθ + sqrt(R²θ² + QR) for θ = 1, Q = 10, R = 0.1."""
    expected = 0.1 + np.sqrt(1.01)
    trace = run(lqr_config())
    assert trace.aborted is None
    assert trace.column("Wc_1_1")[-1] == pytest.approx(expected, rel=0.05)
    assert trace.column("Wa_1_1")[-1] == pytest.approx(expected, rel=0.05)
    assert abs(trace.column("e_1")[-1]) < 1e-3


@pytest.mark.slow
def test_example_formation_converges():
    trace = run(example_config())
    assert trace.aborted is None
    late = trace.times >= 30.0
    for i in trace.agents:
        assert np.max(np.abs(trace.column(f"e_{i}")[late])) <= 0.2
        leader = np.array(trace.leader)[late, 0]
        assert np.max(np.abs(trace.column(f"x_{i}")[late] - trace.offsets[i][0] - leader)) <= 0.2
    initial = sum(abs(trace.column(f"e_{i}")[0]) for i in trace.agents)
    final = sum(abs(trace.column(f"e_{i}")[-1]) for i in trace.agents)
    assert final < initial
