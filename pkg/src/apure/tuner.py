"""Hyperparameter selection over a logarithmic lambda grid.

Evaluates one of four oracles (true prediction/estimation errors or the
robustified data-driven risk estimates) at every grid point, warm-starting
the variational solve as lambda ascends, and returns the grid minimizer.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .risk import (
    RiskKind,
    VariationalEstimator,
    default_epsilon,
    mc_zetas,
    robustified,
    true_estimation_error,
    true_prediction_error,
)

__all__ = [
    "OracleKind",
    "RiskCurve",
    "TuningResult",
    "lambda_grid",
    "tune",
    "LAMBDA_GRID_POINTS",
]

LAMBDA_GRID_POINTS = 60
LAMBDA_MIN_FACTOR = 1e-2
LAMBDA_MAX_FACTOR = 1e4


class OracleKind(enum.Enum):
    TRUE_PRED = "true-pred"
    TRUE_EST = "true-est"
    APURE_PRED = "apure-pred"
    APURE_EST = "apure-est"


@dataclass(frozen=True)
class RiskCurve:
    lambdas: np.ndarray
    values: np.ndarray
    ci_halfwidths: np.ndarray
    oracle_kind: OracleKind

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        object.__setattr__(
            self, "ci_halfwidths", np.asarray(self.ci_halfwidths, dtype=float)
        )
        if not (lam.size == self.values.size == self.ci_halfwidths.size):
            raise ValueError("curve arrays must have equal length")
        if np.any(np.diff(lam) <= 0):
            raise ValueError("lambdas must be strictly ascending")


@dataclass(frozen=True)
class TuningResult:
    lambda_star: float
    x_hat_star: np.ndarray
    curve: RiskCurve
    n_invalid: int = 0
    diagnostics: dict = field(default_factory=dict)


def lambda_grid(Y, n_points: int = LAMBDA_GRID_POINTS) -> np.ndarray:
    """Log-spaced grid spanning [1e-2, 1e4] times std(Y), inclusive."""
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    s = float(np.std(np.asarray(Y, dtype=float), ddof=1))
    if not s > 0:
        raise ValueError("lambda grid undefined for constant observations")
    return np.geomspace(LAMBDA_MIN_FACTOR * s, LAMBDA_MAX_FACTOR * s, n_points)


def _argmin_prefer_larger(values: np.ndarray) -> int:
    """Index of the minimum; ties broken toward the larger lambda."""
    finite = np.where(np.isfinite(values), values, np.inf)
    best = finite.min()
    if not np.isfinite(best):
        raise RuntimeError("all grid points failed oracle evaluation")
    return int(np.flatnonzero(finite == best)[-1])


def tune(
    Y,
    estimator: VariationalEstimator,
    oracle_kind: OracleKind,
    n_points: int = LAMBDA_GRID_POINTS,
    N: int = 10,
    seed=None,
    x_bar=None,
    epsilon: float | None = None,
    warm_start: bool = True,
) -> TuningResult:
    """Grid search for the oracle-minimizing regularization parameter.

    ``estimator`` carries the memory rule, scale vector and solver
    configuration.  True-error oracles require ``x_bar``.  Monte Carlo
    probes are shared across the grid (common random numbers).
    """
    Y = np.asarray(Y, dtype=float)
    if oracle_kind in (OracleKind.TRUE_PRED, OracleKind.TRUE_EST) and x_bar is None:
        raise ValueError(f"{oracle_kind.value} oracle requires the ground truth")
    lambdas = lambda_grid(Y, n_points)
    psi = estimator.psi(Y)
    alpha = estimator._alpha_for(Y)
    if epsilon is None:
        epsilon = default_epsilon(Y)
    zetas = None
    if oracle_kind in (OracleKind.APURE_PRED, OracleKind.APURE_EST):
        zetas = mc_zetas(seed, N, Y.size)

    values = np.full(lambdas.size, np.nan)
    cis = np.zeros(lambdas.size)
    x_hats: list[np.ndarray | None] = [None] * lambdas.size
    n_invalid = 0
    x_warm = u_warm = None
    for i, lam in enumerate(lambdas):
        try:
            result = estimator.solve(
                Y, lam,
                x_init=x_warm if warm_start else None,
                u_init=u_warm if warm_start else None,
            )
            x_hat = result.x_hat
            if warm_start:
                x_warm, u_warm = x_hat, result.u
            x_hats[i] = x_hat
            if oracle_kind is OracleKind.TRUE_PRED:
                values[i] = true_prediction_error(x_hat, x_bar, psi)
            elif oracle_kind is OracleKind.TRUE_EST:
                values[i] = true_estimation_error(x_hat, x_bar)
            else:
                kind = (
                    RiskKind.PRED
                    if oracle_kind is OracleKind.APURE_PRED
                    else RiskKind.EST
                )
                rv = robustified(
                    kind, Y, lam, alpha, estimator, N,
                    epsilon=epsilon, x_base=x_hat, u_base=result.u, zetas=zetas,
                )
                values[i] = rv.value
                cis[i] = rv.ci_halfwidth
        except (ValueError, RuntimeError):
            values[i] = math.nan
            n_invalid += 1
    idx = _argmin_prefer_larger(values)
    curve = RiskCurve(lambdas, values, cis, oracle_kind)
    return TuningResult(
        lambda_star=float(lambdas[idx]),
        x_hat_star=x_hats[idx],
        curve=curve,
        n_invalid=n_invalid,
        diagnostics={"epsilon": epsilon, "N": N, "argmin_index": idx},
    )
