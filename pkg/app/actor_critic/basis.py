import re
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from app.netgraph import SubgraphIndex


_FACTOR = re.compile(r"^(?P<name>[ex]\d+(?:_\d+)?)(?:\^(?P<power>\d+))?$")


def variable_names(index: SubgraphIndex, state_dim: int) -> List[str]:
    """Names of the coordinates of 𝓔_i: e<j> per member in λ_i order, then x<i>.

    Vector states get a component suffix, e.g. e3_2.
    """
    def names(prefix: str, agent: int) -> List[str]:
        if state_dim == 1:
            return [f"{prefix}{agent}"]
        return [f"{prefix}{agent}_{c}" for c in range(1, state_dim + 1)]

    result = []
    for j in index.ordering:
        result.extend(names("e", j))
    result.extend(names("x", index.agent))
    return result


def parse_monomial(text: str, variables: Sequence[str]) -> Tuple[float, np.ndarray]:
    """Parses terms such as ``0.5*e1^2*x1^2`` into (coefficient, exponents)."""
    coefficient = 1.0
    exponents = np.zeros(len(variables), dtype=int)
    for factor in text.replace(" ", "").split("*"):
        if not factor:
            raise ValueError(f"Empty factor in basis term '{text}'")
        match = _FACTOR.match(factor)
        if match is None:
            try:
                coefficient *= float(factor)
            except ValueError:
                raise ValueError(f"Cannot parse factor '{factor}' of basis term '{text}'")
            continue
        name = match.group("name")
        if name not in variables:
            raise ValueError(f"Basis term '{text}' uses '{name}', which is not in {list(variables)}")
        exponents[variables.index(name)] += int(match.group("power") or 1)
    return coefficient, exponents


@dataclass(frozen=True)
class ValueBasis:
    """Polynomial dictionary σ_i over 𝓔_i with analytic gradients."""
    index: SubgraphIndex
    state_dim: int
    terms: Tuple[str, ...]
    coefficients: np.ndarray
    exponents: np.ndarray

    @classmethod
    def from_terms(cls, index: SubgraphIndex, terms: Sequence[str], state_dim: int = 1) -> "ValueBasis":
        if not terms:
            raise ValueError(f"Value basis of agent {index.agent} needs at least one term")
        variables = variable_names(index, state_dim)
        parsed = [parse_monomial(term, variables) for term in terms]
        return cls(
            index=index,
            state_dim=state_dim,
            terms=tuple(terms),
            coefficients=np.array([c for c, _ in parsed]),
            exponents=np.stack([e for _, e in parsed]),
        )

    @property
    def dimension(self) -> int:
        return self.coefficients.shape[0]

    @property
    def input_size(self) -> int:
        return self.exponents.shape[1]

    def __call__(self, point: np.ndarray) -> np.ndarray:
        powers = np.asarray(point, dtype=float)[..., None, :] ** self.exponents
        return self.coefficients * np.prod(powers, axis=-1)

    def gradient(self, point: np.ndarray) -> np.ndarray:
        """∇σ_i with shape (..., L_i, n(s_i + 1))."""
        point = np.asarray(point, dtype=float)[..., None, :]
        powers = point ** self.exponents
        lowered = self.exponents * point ** np.maximum(self.exponents - 1, 0)
        size = self.input_size
        diagonal = np.eye(size, dtype=bool)
        # Row d of the last two axes holds ∂/∂v_d: the lowered power on the diagonal, plain powers elsewhere
        factors = np.where(diagonal, lowered[..., None, :], powers[..., None, :])
        return self.coefficients[:, None] * np.prod(factors, axis=-1)

    def error_gradient(self, gradient: np.ndarray, j: int) -> np.ndarray:
        """∇_{e_j}σ_i block of a full gradient."""
        start = self.index.slot(j) * self.state_dim
        return gradient[..., start:start + self.state_dim]

    def state_gradient(self, gradient: np.ndarray) -> np.ndarray:
        """∇_{x_i}σ_i block of a full gradient."""
        return gradient[..., self.index.size * self.state_dim:]


# Value dictionaries of the one-dimensional five-agent experiment
EXAMPLE_1D_TERMS: Dict[int, Tuple[str, ...]] = {
    1: ("0.5*e1^2", "0.25*e1^4", "0.5*e1^2*x1^2", "0.5*e2^2"),
    2: ("0.5*e2^2", "0.25*e2^4", "0.5*e2^2*x2^2", "0.5*e1^2"),
    3: ("0.5*e3^2", "0.25*e3^4", "0.5*e3^2*x3^2", "0.25*e3^4*x3^2"),
    4: ("0.5*e4^2", "0.25*e4^4", "0.5*e3^2*e4^2", "0.5*e4^2*x4^2", "0.5*e3^2"),
    5: (
        "0.5*e5^2", "0.25*e5^4", "0.5*e4^2*e5^2", "0.5*e3^2*e5^2",
        "0.5*e5^2*x5^2", "0.5*e3^2*e4^2", "0.5*e3^2", "0.5*e4^2",
    ),
}


def quadratic_error_terms(index: SubgraphIndex, state_dim: int = 1) -> Tuple[str, ...]:
    """e_j² (componentwise) for every member of S_i."""
    names = variable_names(index, state_dim)[: index.size * state_dim]
    return tuple(f"{name}^2" for name in names)
