"""Discrepancy functions, the ML estimator and the Poisson data-fit prox.

Discrepancies are the negative log-likelihoods of the three noise families
evaluated at model means ``U = X * Psi``; +inf is a legal in-band return
value at infeasible points, never an exception.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

__all__ = [
    "kl_divergence",
    "gaussian_discrepancy",
    "itakura_saito",
    "ml_estimate",
    "kl_prox",
]


def kl_divergence(Y, U, alpha) -> float:
    """Sum over t of d_KL(Y_t/alpha_t | U_t/alpha_t).

    The scalar divergence is Y ln(Y/U) + U - Y for Y, U > 0; U for Y = 0,
    U >= 0; +inf otherwise.
    """
    y = np.asarray(Y, dtype=float) / np.asarray(alpha, dtype=float)
    u = np.asarray(U, dtype=float) / np.asarray(alpha, dtype=float)
    if y.shape != u.shape:
        raise ValueError("Y and U must have the same length")
    pos = y > 0
    if np.any(u[pos] <= 0) or np.any(u < 0):
        return math.inf
    total = float(u[~pos].sum())
    yp, up = y[pos], u[pos]
    total += float(np.sum(yp * np.log(yp / up) + up - yp))
    return total


def gaussian_discrepancy(Y, U, alpha) -> float:
    """Weighted squared residual sum((Y - U)^2 / alpha^2)."""
    y = np.asarray(Y, dtype=float)
    u = np.asarray(U, dtype=float)
    a = np.asarray(alpha, dtype=float)
    return float(np.sum((y - u) ** 2 / a**2))


def itakura_saito(Y, alpha, U) -> float:
    """Itakura-Saito discrepancy of the multiplicative Gamma model.

    Per-sample value Y/U - alpha ln(Y/U) + ln Gamma(alpha) + ln Y when
    Y, U > 0, +inf otherwise.
    """
    y = np.asarray(Y, dtype=float)
    u = np.asarray(U, dtype=float)
    a = np.asarray(alpha, dtype=float)
    if np.any(y <= 0) or np.any(u <= 0):
        return math.inf
    r = y / u
    return float(np.sum(r - a * np.log(r) + gammaln(a) + np.log(y)))


def ml_estimate(Y, Psi) -> np.ndarray:
    """Componentwise maximum-likelihood ratio Y / Psi."""
    y = np.asarray(Y, dtype=float)
    psi = np.asarray(Psi, dtype=float)
    if np.any(psi <= 0):
        raise ValueError("ml_estimate requires Psi > 0 everywhere")
    return y / psi


def kl_prox(v, tau: float, y, psi, alpha) -> np.ndarray | float:
    """Proximity operator of the scaled-Poisson data fit.

    Solves argmin_{x >= 0} (x - v)^2 / (2 tau) + d_KL(y/alpha | x psi/alpha)
    in closed form.  All of v, y, psi, alpha may be vectors (broadcast);
    tau is a scalar step.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    v = np.asarray(v, dtype=float)
    y = np.asarray(y, dtype=float)
    psi = np.asarray(psi, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if np.any(psi <= 0) or np.any(alpha <= 0):
        raise ValueError("psi and alpha must be positive")
    if np.any(y < 0):
        raise ValueError("observations must be nonnegative")
    b = v - tau * psi / alpha
    # positive root of x^2 - b x - tau y / alpha = 0; the product of the
    # roots is -tau y / alpha <= 0 so this root is the unique feasible one
    x = 0.5 * (b + np.sqrt(b**2 + 4.0 * tau * y / alpha))
    x = np.where(y > 0, x, np.maximum(b, 0.0))
    return float(x) if x.ndim == 0 else x
