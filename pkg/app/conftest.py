import numpy as np
import pytest

from app.netgraph import DirectedNetwork
from app.plant import (
    FormationSpec,
    PlantContext,
    example_1d_model,
    exponential_leader,
    kinematic_wheel_model,
    linear_model,
)
from app.identifier.basis import DriftBasis


FIVE_AGENT_EDGES = [(0, 1), (0, 3), (1, 2), (2, 1), (3, 4), (3, 5), (4, 5)]
EXAMPLE_THETA = {1: (0.0, 1.0), 2: (0.0, 0.5), 3: (0.1, 1.0), 4: (0.5, 1.0), 5: (0.2, 1.0)}
EXAMPLE_OFFSETS = {1: 0.75, 2: 0.25, 3: 1.0, 4: 0.5, 5: 0.5}


@pytest.fixture
def rng():
    return np.random.default_rng(20240117)


@pytest.fixture
def five_agent_network():
    return DirectedNetwork.from_edges(5, FIVE_AGENT_EDGES)


@pytest.fixture
def example_offsets():
    return np.array([[EXAMPLE_OFFSETS[i]] for i in range(1, 6)])


@pytest.fixture
def example_context(five_agent_network, example_offsets):
    models = {i: example_1d_model(theta) for i, theta in EXAMPLE_THETA.items()}
    return PlantContext(
        net=five_agent_network,
        models=models,
        leader=exponential_leader(-0.1, [1.0]),
        formation=FormationSpec(offsets=example_offsets),
    )


@pytest.fixture
def example_initial_states():
    """All agents at x = 2 with the leader at x_0(0) = 1."""
    return {i: np.array([2.0]) for i in range(1, 6)}, np.array([1.0])


@pytest.fixture
def scalar_lqr_context():
    net = DirectedNetwork.from_edges(1, [(0, 1)])
    return PlantContext(
        net=net,
        models={1: linear_model([1.0])},
        leader=exponential_leader(0.0, [0.0]),
        formation=FormationSpec(offsets=np.zeros((1, 1))),
    )


@pytest.fixture
def wheel_context():
    """Two unicycles, agent 1 pinned and agent 2 following agent 1, headings offset by zero."""
    net = DirectedNetwork.from_edges(2, [(0, 1), (1, 2)])
    return PlantContext(
        net=net,
        models={1: kinematic_wheel_model(), 2: kinematic_wheel_model()},
        leader=exponential_leader(0.0, [0.0, 0.0, 0.3]),
        formation=FormationSpec(offsets=np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])),
    )


@pytest.fixture
def quadratic_drift_basis():
    return DriftBasis(state_dim=1, powers=(1, 2))
