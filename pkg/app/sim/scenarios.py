from app.actor_critic import EXAMPLE_1D_TERMS


EXAMPLE_1D_THETA = {1: [0.0, 1.0], 2: [0.0, 0.5], 3: [0.1, 1.0], 4: [0.5, 1.0], 5: [0.2, 1.0]}
EXAMPLE_1D_OFFSETS = {1: 0.75, 2: 0.25, 3: 1.0, 4: 0.5, 5: 0.5}
EXAMPLE_1D_K_THETA = {1: 30.0, 2: 30.0, 3: 25.0, 4: 20.0, 5: 30.0}
EXAMPLE_1D_GAMMA_THETA = {1: 1.0, 2: 0.8, 3: 1.0, 4: 1.0, 5: 1.0}


def scenario_example_1d():
    """Five one-dimensional agents tracking x_0(t) = e^{-0.1t} in formation."""
    agents = {}
    for i in range(1, 6):
        size = len(EXAMPLE_1D_TERMS[i])
        initial_weights = [3.0 if i == 5 else 1.0] * size
        agents[i] = {
            "family": "example_1d",
            "theta": EXAMPLE_1D_THETA[i],
            "offset": [EXAMPLE_1D_OFFSETS[i]],
            "initial_state": [2.0],
            "initial_observer": [0.0],
            "initial_theta": [0.0, 0.0],
            "basis": list(EXAMPLE_1D_TERMS[i]),
            "critic_weights": initial_weights,
            "actor_weights": initial_weights,
            "state_weight": 10.0,
            "control_weight": 0.1,
            "eta_c1": 0.1,
            "eta_c2": 10.0,
            "eta_a1": 5.0,
            "eta_a2": 0.1,
            "nu": 0.005,
            "beta": 0.5,
            "gamma_initial": 500.0,
            "gamma_bound": 1e4,
            "observer_gain": 500.0,
            "k_theta": EXAMPLE_1D_K_THETA[i],
            "gamma_theta": EXAMPLE_1D_GAMMA_THETA[i],
            "stack_size": 30,
        }
    return {
        "scenario": "example_1d",
        "dt": 0.001,
        "t_final": 40.0,
        "decimate": 10,
        "sg_window": 9,
        "sg_order": 5,
        "history_interval": 10,
        "topology": {
            "n_agents": 5,
            "edges": [[0, 1], [0, 3], [1, 2], [2, 1], [3, 4], [3, 5], [4, 5]],
        },
        "leader": {"kind": "exponential", "rate": -0.1, "initial": [1.0]},
        "grid": {
            "mode": "product",
            "own_errors": [-1.0, -0.5, 0.0, 0.5, 1.0],
            "own_states": [0.0, 1.0, 2.0],
            "neighbor_errors": [-0.5, 0.0, 0.5],
        },
        "agent": agents,
    }


def scenario_scalar_lqr():
    """One pinned agent ẋ = x + u regulating to a leader at rest; V = p e² with p from the scalar Riccati equation."""
    return {
        "scenario": "scalar_lqr",
        "dt": 0.005,
        "t_final": 10.0,
        "decimate": 10,
        "exact_model": True,
        "topology": {"n_agents": 1, "edges": [[0, 1]]},
        "leader": {"kind": "exponential", "rate": 0.0, "initial": [0.0]},
        "grid": {
            "mode": "product",
            "own_errors": [-1.0, -0.5, 0.0, 0.5, 1.0],
            "own_states": [0.0, 1.0, 2.0],
            "neighbor_errors": [0.0],
        },
        "agent": {
            1: {
                "family": "linear",
                "theta": [1.0],
                "offset": [0.0],
                "initial_state": [1.0],
                "basis": ["e1^2"],
                "critic_weights": [0.5],
                "actor_weights": [0.5],
                "state_weight": 10.0,
                "control_weight": 0.1,
                "eta_c1": 0.1,
                "eta_c2": 10.0,
                "eta_a1": 5.0,
                "eta_a2": 0.01,
                "nu": 0.05,
                "beta": 0.5,
                "gamma_initial": 1000.0,
                "gamma_bound": 1e4,
                "observer_gain": 50.0,
                "k_theta": 1.0,
                "gamma_theta": 1.0,
                "stack_size": 5,
            }
        },
    }
