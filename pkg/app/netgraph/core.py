import logging
from typing import Iterable, List, Sequence, Set, Tuple

import networkx as nx
import numpy as np
import pydantic

from app import settings


logger = logging.getLogger(__name__)

LEADER = 0


class DirectedNetwork(pydantic.BaseModel):
    """Weighted digraph over agents 1..N plus pinning gains to the leader (node 0).

    ``adjacency[i-1][j-1]`` is a_ij, the weight on the edge from agent j to agent i.
    ``pinning[i-1]`` is a_i0.
    """
    n_agents: int = pydantic.Field(..., gt=0, description="Number of follower agents N")
    adjacency: List[List[float]] = pydantic.Field(..., description="N x N nonnegative weights a_ij")
    pinning: List[float] = pydantic.Field(..., description="Pinning gains a_i0")

    class Config:
        allow_mutation = False

    @pydantic.validator("adjacency")
    def validate_adjacency(cls, v, values):
        n = values.get("n_agents")
        if n is None:
            return v
        if len(v) != n or any(len(row) != n for row in v):
            raise ValueError(f"adjacency must be {n}x{n}")
        for i, row in enumerate(v):
            if row[i] != 0:
                raise ValueError(f"self edge on agent {i + 1}")
            if any(w < 0 for w in row):
                raise ValueError(f"negative weight in row of agent {i + 1}")
        return v

    @pydantic.validator("pinning")
    def validate_pinning(cls, v, values):
        n = values.get("n_agents")
        if n is not None and len(v) != n:
            raise ValueError(f"pinning must have {n} entries")
        if any(w < 0 for w in v):
            raise ValueError("pinning gains must be nonnegative")
        return v

    @classmethod
    def from_edges(
            cls,
            n_agents: int,
            edges: Iterable[Tuple[int, int]],
            weight: float = 1.0,
            normalize: bool = False,
            weights: Sequence[float] = None,
    ) -> "DirectedNetwork":
        """Builds a network from (source, target) pairs; source 0 declares a pinning gain.

        ``weights`` gives one weight per edge and overrides the common ``weight``. With ``normalize`` every agent's incoming weights, pinning included, are scaled to sum to one.
        """
        adjacency = np.zeros((n_agents, n_agents))
        pinning = np.zeros(n_agents)
        edges = list(edges)
        if weights is None:
            weights = [weight] * len(edges)
        elif len(weights) != len(edges):
            raise ValueError("One weight per edge is required")
        for (source, target), weight in zip(edges, weights):
            if weight <= 0:
                raise ValueError(f"Edge ({source}, {target}) needs a positive weight")
            if not 1 <= target <= n_agents or not 0 <= source <= n_agents:
                raise ValueError(f"Edge ({source}, {target}) is out of range for {n_agents} agents")
            if source == target:
                raise ValueError(f"self edge on agent {target}")
            if source == LEADER:
                pinning[target - 1] = weight
            else:
                adjacency[target - 1, source - 1] = weight
        if normalize:
            totals = adjacency.sum(axis=1) + pinning
            scale = np.where(totals > 0, totals, 1.0)
            adjacency = adjacency / scale[:, None]
            pinning = pinning / scale
        return cls(n_agents=n_agents, adjacency=adjacency.tolist(), pinning=pinning.tolist())

    @property
    def agents(self) -> range:
        return range(1, self.n_agents + 1)

    @property
    def adjacency_matrix(self) -> np.ndarray:
        return np.asarray(self.adjacency, dtype=float)

    @property
    def pinning_matrix(self) -> np.ndarray:
        return np.diag(np.asarray(self.pinning, dtype=float))

    def weight(self, i: int, j: int) -> float:
        """a_ij, with j = 0 giving the pinning gain a_i0."""
        if j == LEADER:
            return self.pinning[i - 1]
        return self.adjacency[i - 1][j - 1]

    def in_neighbors(self, i: int) -> List[int]:
        """N_{-i} in ascending order, leader excluded."""
        self._check_agent(i)
        return [j for j in self.agents if self.adjacency[i - 1][j - 1] > 0]

    def in_links(self, i: int) -> List[int]:
        """N_{-i} ∪ {0} when agent i is pinned; the leader comes first."""
        links = self.in_neighbors(i)
        if self.pinning[i - 1] > 0:
            return [LEADER, *links]
        return links

    def in_degree(self, i: int) -> float:
        return sum(self.adjacency[i - 1])

    def total_gain(self, i: int) -> float:
        """Sum of a_ij over N_{-i} plus a_i0."""
        return self.in_degree(i) + self.pinning[i - 1]

    def to_digraph(self, with_leader: bool = True) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(self.agents)
        if with_leader:
            graph.add_node(LEADER)
        for i in self.agents:
            for j in self.in_neighbors(i):
                graph.add_edge(j, i, weight=self.weight(i, j))
            if with_leader and self.pinning[i - 1] > 0:
                graph.add_edge(LEADER, i, weight=self.pinning[i - 1])
        return graph

    def _check_agent(self, i: int):
        if not 1 <= i <= self.n_agents:
            raise IndexError(f"Agent index {i} is out of range 1..{self.n_agents}")


class SubgraphIndex(pydantic.BaseModel):
    """Enumeration λ_i of the extended neighbourhood S_i, with λ_i(1) = i."""
    agent: int
    ordering: Tuple[int, ...]

    class Config:
        allow_mutation = False

    @pydantic.validator("ordering")
    def validate_ordering(cls, v, values):
        if not v or v[0] != values.get("agent"):
            raise ValueError("ordering must start with the owning agent")
        if len(set(v)) != len(v):
            raise ValueError("ordering must not repeat agents")
        return v

    @property
    def size(self) -> int:
        return len(self.ordering)

    @property
    def others(self) -> Tuple[int, ...]:
        return self.ordering[1:]

    def slot(self, j: int) -> int:
        """Zero-based position λ_i⁻¹(j) of agent j."""
        return self.ordering.index(j)

    def __contains__(self, j: int) -> bool:
        return j in self.ordering


def laplacian(net: DirectedNetwork) -> np.ndarray:
    adjacency = net.adjacency_matrix
    return np.diag(adjacency.sum(axis=1)) - adjacency


def formation_matrix(net: DirectedNetwork, ordering: Sequence[int] = None) -> np.ndarray:
    """L + A_0, optionally restricted to the agents in ``ordering`` (rows and columns in that order)."""
    matrix = laplacian(net) + net.pinning_matrix
    if ordering is None:
        return matrix
    rows = [j - 1 for j in ordering]
    return matrix[np.ix_(rows, rows)]


def extended_neighborhood(net: DirectedNetwork, i: int) -> Set[int]:
    """S_{-i}: every agent with a directed path to i, found by breadth-first search over reversed edges."""
    net._check_agent(i)
    graph = net.to_digraph(with_leader=False)
    # Reversed BFS visits sources of incoming edges first; sorted() fixes the visit order
    reversed_graph = graph.reverse(copy=False)
    reached = set()
    for _, target in nx.bfs_edges(reversed_graph, i, sort_neighbors=sorted):
        reached.add(target)
    reached.discard(i)
    return reached


def subgraph_index(net: DirectedNetwork, i: int) -> SubgraphIndex:
    others = sorted(extended_neighborhood(net, i))
    return SubgraphIndex(agent=i, ordering=(i, *others))


def verify_spanning_tree(net: DirectedNetwork) -> bool:
    graph = net.to_digraph(with_leader=True)
    reached = nx.descendants(graph, LEADER)
    missing = set(net.agents) - reached
    if missing:
        logger.debug(f"Agents not reachable from the leader: {sorted(missing)}")
    return not missing


def formation_matrix_nonsingular(net: DirectedNetwork, tolerance: float = None) -> bool:
    """|det(L + A_0)| relative to the product of its row norms must exceed ``tolerance``."""
    tolerance = settings.SINGULARITY_TOLERANCE if tolerance is None else tolerance
    matrix = formation_matrix(net)
    row_norms = np.linalg.norm(matrix, axis=1)
    if np.any(row_norms == 0):
        return False
    sign, log_det = np.linalg.slogdet(matrix)
    if sign == 0:
        return False
    return log_det - np.sum(np.log(row_norms)) > np.log(tolerance)
