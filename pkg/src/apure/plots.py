"""Matplotlib figures rendered next to the delimited CLI outputs.

Each function draws onto a fresh figure and saves it to ``path`` (PNG by
extension).  The Agg backend is forced so the CLI works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["save_risk_curve", "save_estimate", "save_trajectory", "save_epi_report"]


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_risk_curve(curve, path) -> None:
    """Risk values vs lambda (log-x) with the CI band and argmin marker."""
    lam = np.asarray(curve.lambdas, dtype=float)
    val = np.asarray(curve.values, dtype=float)
    ci = np.asarray(curve.ci_halfwidths, dtype=float)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ok = np.isfinite(val)
    ax.plot(lam[ok], val[ok], color="tab:blue", lw=1.5,
            label=curve.oracle_kind.value)
    if np.any(ci[ok] > 0):
        ax.fill_between(lam[ok], (val - ci)[ok], (val + ci)[ok],
                        color="tab:blue", alpha=0.25, label="95% CI")
    if ok.any():
        best = np.flatnonzero(ok)[np.argmin(val[ok])]
        ax.axvline(lam[best], color="k", ls="--", lw=1,
                   label=f"argmin = {lam[best]:.3g}")
    ax.set_xscale("log")
    ax.set_xlabel(r"$\lambda$")
    ax.set_ylabel("risk")
    ax.legend()
    _finish(fig, path)


def save_estimate(Y, psi, x_hat, path, x_ml=None, x_bar=None) -> None:
    """Observations (top) and estimated coefficient (bottom)."""
    Y = np.asarray(Y, dtype=float)
    t = np.arange(1, Y.size + 1)
    fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax0.plot(t, Y, color="gray", lw=1, label="observations")
    ax0.plot(t, np.asarray(x_hat) * np.asarray(psi), color="tab:red", lw=1.5,
             label="fitted mean")
    ax0.set_ylabel("counts")
    ax0.legend()
    if x_ml is not None:
        ax1.plot(t, x_ml, color="gray", lw=0.8, label="ratio (unpenalized)")
    if x_bar is not None:
        ax1.plot(t, x_bar, color="k", lw=1.2, label="ground truth")
    ax1.plot(t, x_hat, color="tab:red", lw=1.8, label="estimate")
    ax1.axhline(1.0, color="k", ls=":", lw=0.8)
    ax1.set_xlabel("t")
    ax1.set_ylabel("coefficient")
    ax1.legend()
    _finish(fig, path)


def save_trajectory(x_bar, psi, Y, path) -> None:
    """Simulated counts with the driving coefficient on a twin axis."""
    Y = np.asarray(Y, dtype=float)
    t = np.arange(1, Y.size + 1)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(t, Y, color="tab:blue", lw=1.2, label="Y")
    ax.plot(t, np.asarray(x_bar) * np.asarray(psi), color="tab:orange",
            lw=1, label="conditional mean")
    ax.set_xlabel("t")
    ax.set_ylabel("counts")
    ax2 = ax.twinx()
    ax2.plot(t, x_bar, color="k", ls="--", lw=1, label="coefficient")
    ax2.axhline(1.0, color="k", ls=":", lw=0.6)
    ax2.set_ylabel("coefficient")
    h1, l1 = ax.get_legend_handles_labels()
    h2, l2 = ax2.get_legend_handles_labels()
    ax.legend(h1 + h2, l1 + l2, loc="upper right")
    _finish(fig, path)


def save_epi_report(report, path) -> None:
    """Weekly counts, infectiousness and estimated reproduction number."""
    weeks = np.asarray(report.weeks)
    fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    ax0.plot(weeks, report.Z, color="tab:blue", lw=1.2, label="weekly counts")
    ax0.plot(weeks, report.Phi, color="tab:orange", lw=1,
             label="infectiousness")
    ax0.set_ylabel("counts / week")
    ax0.legend()
    ax1.plot(weeks, report.r_ml, color="gray", lw=0.8, label="ratio estimate")
    ax1.plot(weeks, report.r_hat, color="tab:red", lw=1.8,
             label="penalized estimate")
    ax1.axhline(1.0, color="k", ls=":", lw=0.8)
    ax1.set_ylabel("reproduction number")
    ax1.legend()
    fig.autofmt_xdate()
    _finish(fig, path)
