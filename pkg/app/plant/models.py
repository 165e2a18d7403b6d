from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from app.identifier.basis import DriftBasis


Drift = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class AgentModel:
    """Control-affine agent ẋ = f(x) + g(x)u.

    ``drift`` maps (..., n) to (..., n) and ``effectiveness`` maps (..., n) to (..., n, m).
    ``true_weights`` is only known to tests and oracles.
    """
    state_dim: int
    input_dim: int
    drift: Drift
    effectiveness: Callable[[np.ndarray], np.ndarray]
    drift_basis: Optional[DriftBasis] = None
    true_weights: Optional[np.ndarray] = None

    def flow(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.drift(x) + np.einsum("...ij,...j->...i", self.effectiveness(x), u)


@dataclass(frozen=True)
class LeaderModel:
    """Leader drift f_0, known to every agent, with an optional closed-form trajectory."""
    state_dim: int
    drift: Drift
    initial: np.ndarray
    trajectory: Optional[Callable[[float], np.ndarray]] = None
    bound: Optional[float] = None

    def state(self, t: float) -> np.ndarray:
        if self.trajectory is None:
            raise ValueError("The leader has no closed-form trajectory, integrate its drift instead")
        return np.asarray(self.trajectory(t), dtype=float)


@dataclass(frozen=True)
class FormationSpec:
    """Leader-relative offsets x_di0, one row per agent."""
    offsets: np.ndarray = field(default_factory=lambda: np.zeros((0, 1)))

    @property
    def n_agents(self) -> int:
        return self.offsets.shape[0]

    def offset(self, i: int) -> np.ndarray:
        if i == 0:
            return np.zeros(self.offsets.shape[1])
        return self.offsets[i - 1]

    def relative(self, i: int, j: int) -> np.ndarray:
        """x_dij = x_di0 - x_dj0."""
        return self.offset(i) - self.offset(j)


def exponential_leader(rate: float, initial, bound: float = None) -> LeaderModel:
    """x_0(t) = x_0(0) e^{rate t}; rate 0 gives a stationary leader."""
    initial = np.atleast_1d(np.asarray(initial, dtype=float))
    return LeaderModel(
        state_dim=initial.shape[0],
        drift=lambda x: rate * np.asarray(x, dtype=float),
        initial=initial,
        trajectory=lambda t: initial * np.exp(rate * t),
        bound=bound,
    )


def example_1d_model(theta) -> AgentModel:
    """f(x) = θ₁x + θ₂x², g(x) = cos(2x) + 2."""
    basis = DriftBasis(state_dim=1, powers=(1, 2))
    weights = np.asarray(theta, dtype=float).reshape(basis.dimension, 1)
    return AgentModel(
        state_dim=1,
        input_dim=1,
        drift=basis.drift(weights),
        effectiveness=lambda x: (np.cos(2.0 * np.asarray(x, dtype=float)) + 2.0)[..., None],
        drift_basis=basis,
        true_weights=weights,
    )


def linear_model(theta) -> AgentModel:
    """f(x) = θx, g(x) = 1."""
    basis = DriftBasis(state_dim=1, powers=(1,))
    weights = np.asarray(theta, dtype=float).reshape(basis.dimension, 1)
    return AgentModel(
        state_dim=1,
        input_dim=1,
        drift=basis.drift(weights),
        effectiveness=lambda x: np.ones(np.shape(x) + (1,)),
        drift_basis=basis,
        true_weights=weights,
    )


def _wheel_effectiveness(x):
    x = np.asarray(x, dtype=float)
    heading = x[..., 2]
    g = np.zeros(x.shape + (2,))
    g[..., 0, 0] = np.cos(heading)
    g[..., 1, 0] = np.sin(heading)
    g[..., 2, 1] = 1.0
    return g


def kinematic_wheel_model(theta=None) -> AgentModel:
    """Unicycle: driftless, inputs are forward speed and turn rate."""
    basis = DriftBasis(state_dim=3, powers=(1,))
    weights = np.zeros((basis.dimension, 3)) if theta is None else np.asarray(theta, dtype=float).reshape(3, 3)
    return AgentModel(
        state_dim=3,
        input_dim=2,
        drift=basis.drift(weights),
        effectiveness=_wheel_effectiveness,
        drift_basis=basis,
        true_weights=weights,
    )


PLANT_FAMILIES: Dict[str, Callable[..., AgentModel]] = {
    "example_1d": example_1d_model,
    "linear": linear_model,
    "kinematic_wheel": kinematic_wheel_model,
}


def build_agent_model(family: str, theta=None) -> AgentModel:
    try:
        factory = PLANT_FAMILIES[family]
    except KeyError:
        raise ValueError(f"Unknown plant family '{family}'. Known families: {sorted(PLANT_FAMILIES)}")
    return factory(theta)
