import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from app.netgraph import SubgraphIndex
from app.plant import SubgraphState


GRID_MODES = ("product", "random")


@dataclass(frozen=True)
class ExtrapolationGrid:
    """Fixed points 𝓔_i^k at which agent i extrapolates its Bellman error."""
    index: SubgraphIndex
    state_dim: int
    points: np.ndarray  # (M_i, n(s_i + 1))

    def __post_init__(self):
        if self.points.ndim != 2 or self.points.shape[0] < 1:
            raise ValueError(f"Extrapolation grid of agent {self.index.agent} needs at least one point")

    @property
    def count(self) -> int:
        return self.points.shape[0]

    @property
    def subgraph_state(self) -> SubgraphState:
        return SubgraphState.from_vector(self.index, self.points, self.state_dim)


def _axes(index: SubgraphIndex, state_dim: int, own_errors, own_states, neighbor_errors):
    axes = [own_errors] * state_dim
    axes += [neighbor_errors] * (state_dim * (index.size - 1))
    axes += [own_states] * state_dim
    return [np.asarray(axis, dtype=float) for axis in axes]


def build_grid(
        index: SubgraphIndex,
        own_errors: Sequence[float],
        own_states: Sequence[float],
        neighbor_errors: Sequence[float],
        state_dim: int = 1,
        mode: str = "product",
        rng: np.random.Generator = None,
) -> ExtrapolationGrid:
    """Grid over 𝓔_i = [e_i, e_{S_-i}, x_i].

    ``product`` takes the Cartesian product of the value sets (|own_errors|·|own_states|·
    |neighbor_errors|^{s_i-1} points for scalar states). ``random`` draws the same number of
    points uniformly in the box spanned by the value sets.
    """
    axes = _axes(index, state_dim, own_errors, own_states, neighbor_errors)
    if any(axis.size == 0 for axis in axes):
        raise ValueError(f"Extrapolation grid of agent {index.agent} has an empty value set")
    if mode == "product":
        points = np.array(list(itertools.product(*axes)), dtype=float)
    elif mode == "random":
        if rng is None:
            raise ValueError("Random extrapolation grids need a random generator")
        count = int(np.prod([axis.size for axis in axes]))
        low = np.array([axis.min() for axis in axes])
        high = np.array([axis.max() for axis in axes])
        points = rng.uniform(low, high, size=(count, len(axes)))
    else:
        raise ValueError(f"Unknown grid mode '{mode}'. Known modes: {GRID_MODES}")
    return ExtrapolationGrid(index=index, state_dim=state_dim, points=points)
