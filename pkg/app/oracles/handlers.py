import logging

import numpy as np
from scipy.linalg import solve_continuous_are

from app.identifier import DriftEstimate, HistoryStack, cl_update_flow, sg_derivative, stack_rank_metric
from app.plant import example_1d_model
from app.sim import Simulation, integrate, load_config
from .core import OracleResult


logger = logging.getLogger(__name__)

RICCATI_TOLERANCE = 0.05
BELLMAN_TOLERANCE = 1e-4
IDENTIFIER_TOLERANCE = 1e-3
SG_TOLERANCE = 1e-8
RK4_MIN_RATIO = 14.0


def riccati_solution(theta: float, state_weight: float, control_weight: float) -> float:
    """Stabilizing p of 2θp - p²/R + Q = 0."""
    solution = solve_continuous_are(
        np.array([[theta]]), np.eye(1), np.array([[state_weight]]), np.array([[control_weight]])
    )
    return float(solution[0, 0])


def oracle_riccati() -> OracleResult:
    """Learned critic and actor weights of a single pinned linear agent against the Riccati solution."""
    config = load_config(scenario="scalar_lqr")
    agent = config.agents[1]
    expected = riccati_solution(agent.theta[0], agent.state_weight, agent.control_weight)

    simulation = Simulation(config)
    trace = simulation.run()
    if trace.aborted:
        return OracleResult(
            name="riccati", passed=False, measured=float("nan"), expected=expected,
            tolerance=RICCATI_TOLERANCE * expected, detail=trace.aborted,
        )
    critic_weights = trace.table[-1, [trace.columns.index(name) for name in trace.matching("Wc_1_")]]
    actor_weights = trace.table[-1, [trace.columns.index(name) for name in trace.matching("Wa_1_")]]

    runtime = simulation.runtimes[1]
    evaluator = runtime.grid_evaluator
    critic = runtime.critic(critic_weights, np.eye(critic_weights.size))
    sample = evaluator.sample(critic, {1: actor_weights}, evaluator.drift_terms())
    bellman = float(np.max(np.abs(sample.delta)))

    critic_error = abs(critic_weights[0] - expected) / expected
    actor_error = abs(actor_weights[0] - expected) / expected
    passed = critic_error <= RICCATI_TOLERANCE and actor_error <= RICCATI_TOLERANCE and bellman < BELLMAN_TOLERANCE
    return OracleResult(
        name="riccati",
        passed=passed,
        measured=float(critic_weights[0]),
        expected=expected,
        tolerance=RICCATI_TOLERANCE * expected,
        detail=f"actor weight {actor_weights[0]:.6g}, max |δ| on the grid {bellman:.3g}",
    )


def oracle_identifier() -> OracleResult:
    """Concurrent-learning flow on a rich stack with exact derivatives drives θ̂ to θ."""
    model = example_1d_model([0.5, 1.0])
    stack = HistoryStack(capacity=11, basis=model.drift_basis, model=model)
    for k, x in enumerate(np.linspace(-1.0, 1.0, 11)):
        state = np.array([x])
        control = np.array([np.sin(3.0 * x)])
        stack.append(stack.make_entry(state, control, model.flow(state, control), t=0.01 * k))
    rank = stack_rank_metric(stack)

    gain = np.eye(model.drift_basis.dimension)
    shape = model.true_weights.shape

    def flow(t, y):
        estimate = DriftEstimate(weights=y.reshape(shape), gain=gain, cl_gain=5.0)
        return cl_update_flow(estimate, stack, np.zeros(1), np.zeros(1), model).ravel()

    final = integrate(flow, np.zeros(model.true_weights.size), dt=0.01, t_final=5.0)
    error = float(np.linalg.norm(final.reshape(shape) - model.true_weights))
    return OracleResult(
        name="identifier",
        passed=rank > 0.1 and error < IDENTIFIER_TOLERANCE,
        measured=error,
        expected=0.0,
        tolerance=IDENTIFIER_TOLERANCE,
        detail=f"stack rank metric {rank:.4g}",
    )


def oracle_savitzky_golay() -> OracleResult:
    """Exact derivative of a quintic, close derivative of a sine."""
    dt = 0.01
    times = 0.3 + dt * np.arange(-4, 5)
    coefficients = np.array([0.7, -1.2, 0.5, 2.0, -0.8, 1.5])
    quintic = np.polyval(coefficients, times)
    exact = np.polyval(np.polyder(coefficients), 0.3)
    polynomial_error = float(abs(sg_derivative(quintic, dt, times=times, order=5) - exact))
    sine_error = float(abs(sg_derivative(np.sin(times), dt, times=times, order=5) - np.cos(0.3)))
    return OracleResult(
        name="savitzky_golay",
        passed=polynomial_error <= SG_TOLERANCE and sine_error <= 1e-6,
        measured=polynomial_error,
        expected=0.0,
        tolerance=SG_TOLERANCE,
        detail=f"sine derivative error {sine_error:.3g}",
    )


def oracle_rk4_order() -> OracleResult:
    """Halving dt on ė = (θ - p/R)e cuts the RK4 error by about 2⁴."""
    theta, state_weight, control_weight = 1.0, 10.0, 0.1
    rate = theta - riccati_solution(theta, state_weight, control_weight) / control_weight

    def flow(t, y):
        return rate * y

    exact = np.exp(rate * 1.0)
    coarse = abs(integrate(flow, np.ones(1), dt=0.01, t_final=1.0)[0] - exact)
    fine = abs(integrate(flow, np.ones(1), dt=0.005, t_final=1.0)[0] - exact)
    ratio = float(coarse / fine)
    return OracleResult(
        name="rk4_order",
        passed=ratio >= RK4_MIN_RATIO,
        measured=ratio,
        expected=16.0,
        tolerance=16.0 - RK4_MIN_RATIO,
        detail=f"errors {coarse:.3g} at dt=0.01, {fine:.3g} at dt=0.005",
    )
