import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, List, Optional, Tuple

import numpy as np

from .basis import DriftBasis

if TYPE_CHECKING:
    from app.plant.models import AgentModel


logger = logging.getLogger(__name__)


@dataclass
class DriftEstimate:
    """θ̂_i with its constant diagonal gain Γ_θi and concurrent-learning gain k_θi."""
    weights: np.ndarray
    gain: np.ndarray
    cl_gain: float

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.gain = np.asarray(self.gain, dtype=float)
        diagonal = np.diag(self.gain)
        if not np.array_equal(self.gain, np.diag(diagonal)) or np.any(diagonal <= 0):
            raise ValueError("Identifier gain must be diagonal and positive definite")
        if self.cl_gain < 0:
            raise ValueError("Concurrent-learning gain must be nonnegative")


@dataclass(frozen=True)
class StackEntry:
    t: float
    x: np.ndarray
    u: np.ndarray
    xdot: np.ndarray
    sigma: np.ndarray
    gu: np.ndarray


class HistoryStack:
    """Recorded (x, u, ẋ̄) triples with cached σ_θ(x) and g(x)u.

    ``revision`` counts changes, so stacked features and targets are rebuilt only after an insert.
    """

    def __init__(self, capacity: int, basis: DriftBasis, model: "AgentModel"):
        if capacity < 1:
            raise ValueError("History stack capacity must be positive")
        self.capacity = capacity
        self.basis = basis
        self.model = model
        self._entries: List[StackEntry] = []
        self.revision = 0
        self._cached = -1
        self._features = None
        self._targets = None
        self._gram = None

    def __len__(self):
        return len(self._entries)

    @property
    def entries(self) -> Tuple[StackEntry, ...]:
        return tuple(self._entries)

    @property
    def full(self) -> bool:
        return len(self._entries) >= self.capacity

    def append(self, entry: StackEntry):
        if self.full:
            raise ValueError(f"History stack is full ({self.capacity} entries)")
        self._entries.append(entry)
        self.revision += 1

    def replace(self, slot: int, entry: StackEntry):
        self._entries[slot] = entry
        self.revision += 1

    def make_entry(self, x, u, xdot, t: float = 0.0) -> StackEntry:
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        return StackEntry(
            t=t,
            x=x,
            u=u,
            xdot=np.asarray(xdot, dtype=float),
            sigma=self.basis(x),
            gu=self.model.effectiveness(x) @ u,
        )

    def _refresh(self):
        if self._cached == self.revision:
            return
        count = len(self._entries)
        self._features = np.array([entry.sigma for entry in self._entries]).reshape(count, self.basis.dimension)
        self._targets = np.array([entry.xdot - entry.gu for entry in self._entries]).reshape(count, self.model.state_dim)
        self._gram = self._features.T @ self._features
        self._cached = self.revision

    @property
    def features(self) -> np.ndarray:
        self._refresh()
        return self._features

    def gram(self) -> np.ndarray:
        self._refresh()
        return self._gram

    def residual_targets(self) -> np.ndarray:
        """ẋ̄^k - g^k u^k, one row per entry."""
        self._refresh()
        return self._targets

    def to_csv(self, path: Path):
        n = self.model.state_dim
        m = self.model.input_dim
        header = ["t", *_columns("x", n), *_columns("u", m), *_columns("xdot_est", n)]
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(header)
            for entry in self.entries:
                writer.writerow([f"{v:.9g}" for v in (entry.t, *entry.x, *entry.u, *entry.xdot)])


def _columns(name: str, size: int) -> List[str]:
    if size == 1:
        return [name]
    return [f"{name}_{c}" for c in range(1, size + 1)]


@dataclass
class StateObserver:
    estimate: np.ndarray
    gain: float

    def __post_init__(self):
        self.estimate = np.asarray(self.estimate, dtype=float)
        if self.gain <= 0:
            raise ValueError("Observer gain must be positive")


def observer_flow(observer: StateObserver, x_i, u_i, theta_hat, model: "AgentModel") -> np.ndarray:
    """θ̂ᵀσ_θ(x) + g(x)u + k(x - x̂)."""
    x_i = np.asarray(x_i, dtype=float)
    estimated_drift = model.drift_basis(x_i) @ theta_hat
    return estimated_drift + model.effectiveness(x_i) @ np.asarray(u_i) + observer.gain * (x_i - observer.estimate)


def stack_rank_metric(stack: HistoryStack) -> float:
    if not len(stack):
        return 0.0
    return max(float(np.linalg.eigvalsh(stack.gram())[0]), 0.0)


def cl_update_flow(
        estimate: DriftEstimate,
        stack: Optional[HistoryStack],
        x_i,
        x_tilde,
        model: "AgentModel",
        use_stack: bool = True,
) -> np.ndarray:
    """k_θ Γ_θ Σ σ^k(ẋ̄^k - g^k u^k - θ̂ᵀσ^k)ᵀ + Γ_θ σ(x) x̃ᵀ; the stack term drops out when empty or gated off."""
    sigma = model.drift_basis(np.asarray(x_i, dtype=float))
    rate = estimate.gain @ np.outer(sigma, x_tilde)
    if use_stack and stack is not None and len(stack):
        features = stack.features
        residuals = stack.residual_targets() - features @ estimate.weights
        rate = rate + estimate.cl_gain * estimate.gain @ (features.T @ residuals)
    return rate


def try_insert_svmax(stack: HistoryStack, candidate: StackEntry) -> bool:
    """Appends while the stack has room, otherwise swaps in the candidate at the slot that raises λ_min the most."""
    if not stack.full:
        stack.append(candidate)
        return True
    gram = stack.gram()
    current = stack_rank_metric(stack)
    features = stack.features
    swapped = (
        gram[None, :, :]
        - np.einsum("ki,kj->kij", features, features)
        + np.outer(candidate.sigma, candidate.sigma)[None, :, :]
    )
    metrics = np.linalg.eigvalsh(swapped)[:, 0]
    best = int(np.argmax(metrics))
    # Ignore gains at round-off level so identical candidates are rejected
    if metrics[best] <= current + 1e-12 * max(1.0, abs(current)):
        return False
    stack.replace(best, candidate)
    logger.debug(f"History stack slot {best} replaced, rank metric {current:.4g} -> {metrics[best]:.4g}")
    return True


def stack_contraction(gain: np.ndarray, cl_gain: float, stack: HistoryStack) -> np.ndarray:
    """-k_θ Γ_θ Σ σ^kσ^kᵀ, the part of the concurrent-learning flow that is linear in θ̂."""
    if not len(stack):
        return np.zeros_like(gain)
    return -cl_gain * gain @ stack.gram()
