"""Memory kernels (serial-interval distributions) and memory functions.

A kernel is a normalized sequence of nonnegative weights ``psi[0..tau-1]``
(index ``s = 1..tau``) at daily or weekly resolution.  The memory function
of a driven autoregressive process is the kernel-weighted sum of past
observations, initialized at a known state ``y0``.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

__all__ = [
    "Resolution",
    "Kernel",
    "History",
    "gamma_serial_interval",
    "weekly_coarsen",
    "memory_vector",
]

_NORM_TOL = 1e-12


class Resolution(enum.Enum):
    DAILY = "daily"
    WEEKLY = "weekly"


@dataclass(frozen=True)
class Kernel:
    """Normalized finite-memory weight sequence.

    weights[s-1] is the weight given to the observation s steps in the past.
    """

    weights: np.ndarray
    resolution: Resolution = Resolution.DAILY

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if w.ndim != 1 or w.size < 1:
            raise ValueError("kernel weights must be a nonempty 1-d sequence")
        if np.any(w < 0):
            raise ValueError("kernel weights must be nonnegative")
        if abs(w.sum() - 1.0) > _NORM_TOL:
            raise ValueError(
                f"kernel weights must sum to 1 within {_NORM_TOL}, got {w.sum()!r}"
            )

    @property
    def horizon(self) -> int:
        return self.weights.size

    def to_csv(self) -> str:
        """Serialize as ``s,weight`` lines for inspection."""
        buf = io.StringIO()
        buf.write("s,weight\n")
        for s, w in enumerate(self.weights, start=1):
            buf.write(f"{s},{w!r}\n")
        return buf.getvalue()


@dataclass(frozen=True)
class History:
    """Initial state and observed series of a driven autoregressive process."""

    y0: float
    values: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if not self.y0 > 0:
            raise ValueError("initial state y0 must be positive")
        if np.any(v < 0):
            raise ValueError("observations must be nonnegative")


def gamma_serial_interval(mean: float, std: float, horizon: int) -> Kernel:
    """Daily kernel from a Gamma law discretized by CDF differences.

    The Gamma has shape (mean/std)^2 and scale std^2/mean; the mass of day
    s is F(s) - F(s-1), truncated at ``horizon`` and renormalized.
    """
    if not (mean > 0 and std > 0):
        raise ValueError("mean and std must be positive")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    shape = (mean / std) ** 2
    scale = std**2 / mean
    edges = np.arange(horizon + 1, dtype=float)
    cdf = stats.gamma.cdf(edges, a=shape, scale=scale)
    weights = np.diff(cdf)
    return Kernel(weights / weights.sum(), Resolution.DAILY)


def weekly_coarsen(daily: Kernel) -> Kernel:
    """Aggregate a daily kernel into weekly weights (7-day block sums).

    Left-rectangle integration with a one-day step reduces to summing the
    seven daily weights of each week; the last block may be partial.  The
    result is renormalized.
    """
    if daily.resolution is not Resolution.DAILY:
        raise ValueError("weekly_coarsen expects a daily kernel")
    tau = daily.horizon
    n_weeks = -(-tau // 7)
    padded = np.zeros(7 * n_weeks)
    padded[:tau] = daily.weights
    weekly = padded.reshape(n_weeks, 7).sum(axis=1)
    return Kernel(weekly / weekly.sum(), Resolution.WEEKLY)


def memory_vector(
    kernel: Kernel, history: History, pad_history: bool = False
) -> np.ndarray:
    """Memory values Psi_t for t = 1..T.

    Psi_1 = y0 and, for t >= 2, Psi_t = sum_{s=1}^{min(tau, t-1)} psi_s
    Y_{t-s}.  With ``pad_history`` the sum always runs over the full
    horizon, reading Y_t = y0 for t <= 0.
    """
    y = history.values
    T = y.size
    if T < 1:
        raise ValueError("history must contain at least one observation")
    psi = kernel.weights
    tau = kernel.horizon
    if pad_history:
        # prepend tau copies of y0 so every sum runs over the full horizon
        ext = np.concatenate([np.full(tau, history.y0), y])
    else:
        ext = np.concatenate([np.zeros(tau), y])
    out = np.empty(T)
    out[0] = history.y0
    rev = psi[::-1]
    # ext index of Y_k is tau + k - 1, so the window Y_{t-tau}..Y_{t-1}
    # is ext[t-1 : t-1+tau]
    for t in range(2, T + 1):
        out[t - 1] = np.dot(rev, ext[t - 1 : t - 1 + tau])
    return out
