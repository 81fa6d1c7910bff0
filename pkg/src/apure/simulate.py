"""Synthetic observations from the driven nonstationary autoregressive model.

Observations are drawn sequentially: the conditional mean at step t is
``X_t * Psi_t`` where Psi_t is the kernel-weighted memory of the past, and
the noise family is Gaussian, scaled Poisson or multiplicative Gamma.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .kernels import History, Kernel

__all__ = [
    "NoiseFamily",
    "NoiseSpec",
    "ReproductionPath",
    "sample_scaled_poisson",
    "simulate",
    "piecewise_linear_path",
    "default_benchmark_path",
    "DEFAULT_Y0",
    "DEFAULT_T",
]

# synthetic benchmark defaults (T, y0, daily Gamma kernel parameters)
DEFAULT_T = 70
DEFAULT_Y0 = 3395.0
DEFAULT_SERIAL_MEAN = 6.6
DEFAULT_SERIAL_STD = 3.5
DEFAULT_HORIZON = 25


class NoiseFamily(enum.Enum):
    GAUSSIAN = "gaussian"
    SCALED_POISSON = "scaled-poisson"
    GAMMA = "gamma"


@dataclass(frozen=True)
class NoiseSpec:
    """Noise family plus its per-time parameter vector.

    alpha is the variance for Gaussian, the scale for scaled Poisson and
    the shape for Gamma noise.
    """

    family: NoiseFamily
    alpha: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        object.__setattr__(self, "alpha", a)
        if np.any(a <= 0):
            raise ValueError("all alpha must be positive")

    @staticmethod
    def constant(family: NoiseFamily, alpha: float, T: int) -> "NoiseSpec":
        return NoiseSpec(family, np.full(T, float(alpha)))


@dataclass(frozen=True)
class ReproductionPath:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if np.any(v < 0):
            raise ValueError("reproduction coefficients must be nonnegative")


def sample_scaled_poisson(
    intensity: float, alpha: float, rng: np.random.Generator
) -> float:
    """One draw of alpha * Poisson(intensity / alpha).

    Nonpositive intensity gives 0 deterministically (Dirac convention).
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if intensity <= 0:
        return 0.0
    return alpha * rng.poisson(intensity / alpha)


def piecewise_linear_path(
    breakpoints: list[tuple[float, float]], T: int
) -> ReproductionPath:
    """Linear interpolation between (t, value) breakpoints over t = 1..T.

    Constant extrapolation outside the breakpoint range.
    """
    if not breakpoints:
        raise ValueError("at least one breakpoint required")
    ts = np.array([b[0] for b in breakpoints], dtype=float)
    vs = np.array([b[1] for b in breakpoints], dtype=float)
    if np.any(np.diff(ts) <= 0):
        raise ValueError("breakpoints must be sorted by strictly increasing t")
    if ts[0] < 1 or ts[-1] > T:
        raise ValueError("breakpoint times must lie in [1, T]")
    if np.any(vs < 0):
        raise ValueError("breakpoint values must be nonnegative")
    grid = np.arange(1, T + 1, dtype=float)
    return ReproductionPath(np.interp(grid, ts, vs))


# fixed documented breakpoint set used by the synthetic benchmark: three
# growth excursions above 1 alternating with recessions over T = 70
BENCHMARK_BREAKPOINTS = [
    (1, 1.4),
    (12, 1.4),
    (20, 0.68),
    (31, 0.68),
    (36, 1.3),
    (44, 1.3),
    (50, 0.7),
    (57, 0.7),
    (62, 1.25),
    (70, 1.25),
]


def default_benchmark_path(T: int = DEFAULT_T) -> ReproductionPath:
    return piecewise_linear_path(BENCHMARK_BREAKPOINTS, T)


def simulate(
    path: ReproductionPath,
    kernel: Kernel,
    y0: float,
    noise: NoiseSpec,
    seed,
    pad_history: bool = False,
) -> History:
    """Draw one trajectory Y_1..Y_T of the driven autoregressive model.

    ``seed`` may be anything accepted by ``np.random.default_rng``; the
    output is deterministic given seed and inputs.  Gaussian draws are
    clipped at 0 so that downstream memory values stay nonnegative.
    """
    x = path.values
    alpha = noise.alpha
    T = x.size
    if alpha.size != T:
        raise ValueError(
            f"path length {T} and alpha length {alpha.size} must agree"
        )
    if T < 1:
        raise ValueError("T must be >= 1")
    rng = np.random.default_rng(seed)
    psi = kernel.weights
    tau = kernel.horizon
    rev = psi[::-1]
    ext = np.concatenate(
        [np.full(tau, y0 if pad_history else 0.0), np.zeros(T)]
    )
    y = np.empty(T)
    for t in range(1, T + 1):
        mem = float(y0) if t == 1 else float(np.dot(rev, ext[t - 1 : t - 1 + tau]))
        mean = x[t - 1] * mem
        a = alpha[t - 1]
        fam = noise.family
        if fam is NoiseFamily.SCALED_POISSON:
            y_t = sample_scaled_poisson(mean, a, rng)
        elif fam is NoiseFamily.GAUSSIAN:
            y_t = max(rng.normal(mean, np.sqrt(a)), 0.0)
        elif fam is NoiseFamily.GAMMA:
            # Gamma(shape=a, scale=mean/a); Dirac at 0 for nonpositive mean
            y_t = rng.gamma(a, mean / a) if mean > 0 else 0.0
        else:  # pragma: no cover
            raise ValueError(f"unknown noise family {fam}")
        y[t - 1] = y_t
        ext[tau + t - 1] = y_t
    return History(y0=float(y0), values=y)
