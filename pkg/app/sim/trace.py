from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np


def component_names(prefix: str, agent: int, size: int) -> List[str]:
    if size == 1:
        return [f"{prefix}_{agent}"]
    return [f"{prefix}_{agent}_{c}" for c in range(1, size + 1)]


def trace_columns(
        agents: List[int],
        state_dim: int,
        input_dims: Dict[int, int],
        basis_sizes: Dict[int, int],
        theta_sizes: Dict[int, int],
) -> List[str]:
    """t, x, e, u, mu, Wc, Wa, theta, delta; vector signals get a component suffix."""
    columns = ["t"]
    for prefix in ("x", "e"):
        for i in agents:
            columns += component_names(prefix, i, state_dim)
    for prefix in ("u", "mu"):
        for i in agents:
            columns += component_names(prefix, i, input_dims[i])
    for prefix, sizes in (("Wc", basis_sizes), ("Wa", basis_sizes), ("theta", theta_sizes)):
        for i in agents:
            columns += [f"{prefix}_{i}_{j}" for j in range(1, sizes[i] + 1)]
    columns += [f"delta_{i}" for i in agents]
    return columns


@dataclass
class TraceLog:
    """Decimated time series of one run, plus what the plots and the report need besides the rows."""
    columns: List[str]
    rows: List[np.ndarray] = field(default_factory=list)
    leader: List[np.ndarray] = field(default_factory=list)
    offsets: Dict[int, np.ndarray] = field(default_factory=dict)
    true_theta: Dict[int, np.ndarray] = field(default_factory=dict)
    stack_rank: Dict[int, float] = field(default_factory=dict)
    grid_rank: Dict[int, float] = field(default_factory=dict)
    bounds: Dict[int, Dict[str, Optional[float]]] = field(default_factory=dict)
    aborted: Optional[str] = None
    wall_clock: float = 0.0

    def __len__(self):
        return len(self.rows)

    def append(self, row: np.ndarray, leader: np.ndarray):
        if row.shape != (len(self.columns),):
            raise ValueError(f"Trace row has {row.shape[0]} values for {len(self.columns)} columns")
        self.rows.append(np.array(row, dtype=float))
        self.leader.append(np.array(leader, dtype=float))

    @property
    def table(self) -> np.ndarray:
        return np.array(self.rows).reshape(len(self.rows), len(self.columns))

    def column(self, name: str) -> np.ndarray:
        return self.table[:, self.columns.index(name)]

    def matching(self, prefix: str) -> List[str]:
        return [name for name in self.columns if name.startswith(prefix)]

    @property
    def times(self) -> np.ndarray:
        return self.column("t")

    @property
    def agents(self) -> List[int]:
        return sorted(self.offsets)
