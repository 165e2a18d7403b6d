from dataclasses import dataclass
from typing import Tuple

import numpy as np


@dataclass(frozen=True)
class DriftBasis:
    """Polynomial drift features σ_θ(x) = [x^p for p in powers], stacked per power then per state component."""
    state_dim: int = 1
    powers: Tuple[int, ...] = (1, 2)

    @property
    def dimension(self) -> int:
        return self.state_dim * len(self.powers)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.concatenate([x ** p for p in self.powers], axis=-1)

    def drift(self, weights: np.ndarray):
        """Returns x -> θᵀσ_θ(x) for weights of shape (P+1, n)."""
        weights = np.asarray(weights, dtype=float)

        def evaluate(x):
            return self(x) @ weights

        return evaluate
