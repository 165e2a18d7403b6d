from collections import deque
from typing import Deque, Optional, Tuple

import numpy as np
from scipy.signal import savgol_coeffs

from app import settings
from app.services.errors import WindowError


def sg_derivative(samples, dt: float, times=None, order: int = None) -> np.ndarray:
    """First derivative at the centre sample of a least-squares polynomial fit (Savitzky-Golay).

    Args:
        samples: Window of uniformly spaced samples, shape (window, ...).
        dt: Sample spacing.
        times: Optional sample times, checked for uniform spacing.
        order: Polynomial degree, defaults to ``settings.SG_ORDER``.

    Returns:
        The derivative estimate, shaped like one sample.
    """
    order = settings.SG_ORDER if order is None else order
    samples = np.asarray(samples, dtype=float)
    window = samples.shape[0]
    if window < max(7, order + 2) or window % 2 == 0:
        raise WindowError(f"Savitzky-Golay window must be odd and hold at least {max(7, order + 2)} samples, got {window}")
    if dt <= 0:
        raise WindowError(f"Sample spacing must be positive, got {dt}")
    if times is not None:
        spacing = np.diff(np.asarray(times, dtype=float))
        if spacing.shape[0] != window - 1 or not np.allclose(spacing, dt, rtol=1e-6, atol=0.0):
            raise WindowError("Savitzky-Golay window is not uniformly spaced")
    coefficients = savgol_coeffs(window, order, deriv=1, delta=dt, use="dot")
    return np.tensordot(coefficients, samples, axes=(0, 0))


class DerivativeWindow:
    """Trailing window of (t, x, u) samples feeding the history stack."""

    def __init__(self, length: int, dt: float, order: int = None):
        self.length = length
        self.dt = dt
        self.order = order
        self._samples: Deque[Tuple[float, np.ndarray, np.ndarray]] = deque(maxlen=length)

    def push(self, t: float, x: np.ndarray, u: np.ndarray):
        self._samples.append((t, np.array(x, dtype=float), np.array(u, dtype=float)))

    @property
    def ready(self) -> bool:
        return len(self._samples) == self.length

    def center(self) -> Optional[Tuple[float, np.ndarray, np.ndarray, np.ndarray]]:
        """(t, x, u, ẋ̄) at the window centre, or None while the window fills."""
        if not self.ready:
            return None
        times = [sample[0] for sample in self._samples]
        states = np.stack([sample[1] for sample in self._samples])
        rate = sg_derivative(states, self.dt, times=times, order=self.order)
        t, x, u = self._samples[self.length // 2]
        return t, x, u, rate
