from dataclasses import dataclass
from typing import Callable

import numpy as np

from app.services.errors import NonFiniteState


Flow = Callable[[float, np.ndarray], np.ndarray]
Operator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class LinearPart:
    """Stiff linear part A of a flow over one step of length dt.

    ``apply`` returns A v, ``half`` and ``full`` return exp(A dt/2) v and exp(A dt) v.
    """
    apply: Operator
    half: Operator
    full: Operator


def _check_finite(y: np.ndarray, t: float):
    if not np.all(np.isfinite(y)):
        raise NonFiniteState("Integration produced non-finite values", time=t)


def rk4(flow: Flow, t: float, y: np.ndarray, dt: float, first_stage: np.ndarray = None) -> np.ndarray:
    """Classical four-stage Runge-Kutta step of a flat state vector.

    ``first_stage`` reuses an already evaluated flow(t, y).
    """
    if dt <= 0:
        raise ValueError(f"Step size must be positive, got {dt}")
    k1 = flow(t, y) if first_stage is None else first_stage
    k2 = flow(t + dt / 2, y + 0.5 * dt * k1)
    k3 = flow(t + dt / 2, y + 0.5 * dt * k2)
    k4 = flow(t + dt, y + dt * k3)
    y_next = y + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    _check_finite(y_next, t + dt)
    return y_next


def lawson_rk4(
        flow: Flow, t: float, y: np.ndarray, dt: float, linear: LinearPart, first_stage: np.ndarray = None
) -> np.ndarray:
    """Integrating-factor RK4: the linear part is propagated exactly, the rest y' - Ay with RK4 weights.

    ``flow`` is the full right-hand side. With A = 0 this is :func:`rk4`.
    """
    if dt <= 0:
        raise ValueError(f"Step size must be positive, got {dt}")

    def remainder(s, v, rate=None):
        rate = flow(s, v) if rate is None else rate
        return rate - linear.apply(v)

    k1 = remainder(t, y, first_stage)
    k2 = remainder(t + dt / 2, linear.half(y + 0.5 * dt * k1))
    y_half = linear.half(y)
    k3 = remainder(t + dt / 2, y_half + 0.5 * dt * k2)
    y_full = linear.full(y)
    k4 = remainder(t + dt, y_full + dt * linear.half(k3))
    y_next = y_full + (dt / 6) * (linear.full(k1) + 2 * linear.half(k2 + k3) + k4)
    _check_finite(y_next, t + dt)
    return y_next


def integrate(flow: Flow, y0: np.ndarray, dt: float, t_final: float, t0: float = 0.0) -> np.ndarray:
    """Fixed-step RK4 from t0 to t_final, returning the final state."""
    y = np.asarray(y0, dtype=float)
    steps = int(round((t_final - t0) / dt))
    for k in range(steps):
        y = rk4(flow, t0 + k * dt, y, dt)
    return y
