"""Reproduction-number pipeline on weekly aggregated infection counts.

Ingests daily counts (long CSV or JHU-style wide cumulative CSV),
aggregates to weeks, builds the weekly infectiousness, picks the scale
parameter by the 0.1 * std heuristic and tunes the regularization by the
robustified data-driven prediction risk.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import pandas as pd

from .divergence import ml_estimate
from .kernels import History, Kernel, Resolution, gamma_serial_interval, memory_vector, weekly_coarsen
from .risk import VariationalEstimator, memory_sensitivity_ratio
from .solver import SolverConfig
from .tuner import LAMBDA_GRID_POINTS, OracleKind, TuningResult, tune

__all__ = [
    "CountSeries",
    "EpiConfig",
    "EpiReport",
    "CountFormat",
    "load_counts",
    "weekly_aggregate",
    "infectiousness",
    "scale_heuristic",
    "estimate_reproduction",
    "fixture_path",
    "FIXTURES",
]

FIXTURES = ("france", "india", "canada", "argentina")


class CountFormat(enum.Enum):
    LONG = "long"
    JHU_WIDE = "jhu-wide"


class CountLoadError(ValueError):
    pass


@dataclass(frozen=True)
class CountSeries:
    dates: np.ndarray  # datetime64[D], strictly ascending, uniformly spaced
    counts: np.ndarray
    resolution: Resolution = Resolution.DAILY

    def __post_init__(self):
        d = np.asarray(self.dates, dtype="datetime64[D]")
        c = np.asarray(self.counts, dtype=float)
        object.__setattr__(self, "dates", d)
        object.__setattr__(self, "counts", c)
        if d.size != c.size:
            raise ValueError("dates and counts must have equal length")
        if np.any(c < 0):
            raise ValueError("counts must be nonnegative")
        step = 1 if self.resolution is Resolution.DAILY else 7
        if d.size > 1 and np.any(np.diff(d).astype(int) != step):
            raise ValueError(
                f"dates must ascend uniformly by {step} day(s) at "
                f"{self.resolution.value} resolution"
            )

    def __len__(self) -> int:
        return self.counts.size


@dataclass(frozen=True)
class EpiConfig:
    serial_mean: float = 6.6
    serial_std: float = 3.5
    daily_horizon: int = 25
    alpha_fixed: float | None = None  # None selects the 0.1 * std heuristic
    n_grid: int = LAMBDA_GRID_POINTS
    n_mc: int = 10
    seed: int | None = 0
    solver: SolverConfig = field(default_factory=SolverConfig)


@dataclass(frozen=True)
class EpiReport:
    weeks: np.ndarray
    Z: np.ndarray
    Phi: np.ndarray
    alpha: float
    r_hat: np.ndarray
    r_ml: np.ndarray
    tuning: TuningResult
    diagnostics: dict

    @property
    def lambda_star(self) -> float:
        return self.tuning.lambda_star


def fixture_path(country: str):
    """Path to a bundled daily-count CSV (long format)."""
    country = country.lower()
    if country not in FIXTURES:
        raise ValueError(f"unknown fixture {country!r}; have {FIXTURES}")
    return resources.files("apure.data").joinpath(f"{country}_daily.csv")


def load_counts(
    path, fmt: CountFormat = CountFormat.LONG, region: str | None = None
) -> CountSeries:
    """Read daily counts from disk.

    Long format is a ``date,count`` CSV.  JHU-wide has one row per region
    and one column of *cumulative* counts per date; consecutive values are
    differenced and negative corrections floored at 0.
    """
    if fmt is CountFormat.LONG:
        df = pd.read_csv(path, comment="#")
        missing = {"date", "count"} - set(df.columns)
        if missing:
            raise CountLoadError(f"long CSV missing columns: {sorted(missing)}")
        try:
            dates = pd.to_datetime(df["date"]).to_numpy().astype("datetime64[D]")
        except (ValueError, TypeError) as exc:
            raise CountLoadError(f"unparseable dates: {exc}") from exc
        counts = pd.to_numeric(df["count"], errors="coerce").to_numpy(dtype=float)
        bad = np.flatnonzero(np.isnan(counts))
        if bad.size:
            raise CountLoadError(f"unparseable counts on rows {bad.tolist()}")
    else:
        df = pd.read_csv(path, comment="#")
        region_col = next(
            (c for c in df.columns if c.lower() in ("country/region", "region")),
            None,
        )
        if region_col is None:
            raise CountLoadError("JHU-wide CSV lacks a region column")
        if region is None:
            raise CountLoadError("JHU-wide format requires a region name")
        rows = df[df[region_col] == region]
        if rows.empty:
            raise CountLoadError(f"region {region!r} not found")
        meta = {"province/state", "country/region", "region", "lat", "long"}
        date_cols = [c for c in df.columns if c.lower() not in meta]
        try:
            dates = pd.to_datetime(date_cols).to_numpy().astype("datetime64[D]")
        except (ValueError, TypeError) as exc:
            raise CountLoadError(f"unparseable date columns: {exc}") from exc
        cumulative = rows[date_cols].sum(axis=0).to_numpy(dtype=float)
        daily = np.diff(cumulative, prepend=0.0)
        counts = np.maximum(daily, 0.0)
    order = np.argsort(dates)
    dates, counts = dates[order], counts[order]
    if np.unique(dates).size != dates.size:
        dupes = pd.Series(dates).value_counts()
        dupes = dupes[dupes > 1].index.astype(str).tolist()
        raise CountLoadError(f"duplicate dates: {dupes}")
    if dates.size > 1 and np.any(np.diff(dates).astype(int) != 1):
        gaps = np.flatnonzero(np.diff(dates).astype(int) != 1)
        raise CountLoadError(f"missing dates after rows {gaps.tolist()}")
    return CountSeries(dates, counts, Resolution.DAILY)


def weekly_aggregate(daily: CountSeries) -> CountSeries:
    """Non-overlapping 7-day sums, weeks labeled by their first date.

    Leading days are trimmed so the length is divisible by 7.
    """
    if daily.resolution is not Resolution.DAILY:
        raise ValueError("weekly_aggregate expects daily counts")
    n = len(daily)
    if n < 7:
        raise ValueError("need at least 7 daily values")
    head = n % 7
    counts = daily.counts[head:]
    dates = daily.dates[head:]
    weekly = counts.reshape(-1, 7).sum(axis=1)
    return CountSeries(dates[::7], weekly, Resolution.WEEKLY)


def infectiousness(
    weekly_kernel: Kernel, Z: CountSeries, z0: float | None = None
) -> np.ndarray:
    """Global infectiousness Phi_t(Z) for weekly counts.

    Pre-history is padded with ``z0`` (default: the first observed weekly
    count), which keeps Phi positive and transient-free at the start.
    """
    if weekly_kernel.resolution is not Resolution.WEEKLY:
        raise ValueError("infectiousness expects a weekly kernel")
    if Z.resolution is not Resolution.WEEKLY:
        raise ValueError("infectiousness expects weekly counts")
    if z0 is None:
        z0 = float(Z.counts[0])
    hist = History(y0=z0, values=Z.counts)
    return memory_vector(weekly_kernel, hist, pad_history=True)


def scale_heuristic(Z: CountSeries | np.ndarray) -> float:
    """Data-driven scale parameter 0.1 * sample std of the weekly counts."""
    z = Z.counts if isinstance(Z, CountSeries) else np.asarray(Z, dtype=float)
    s = float(np.std(z, ddof=1))
    if not s > 0:
        raise ValueError("scale heuristic undefined for constant counts")
    return 0.1 * s


def weekly_kernel_from_config(config: EpiConfig) -> Kernel:
    daily = gamma_serial_interval(
        config.serial_mean, config.serial_std, config.daily_horizon
    )
    return weekly_coarsen(daily)


def estimate_reproduction(Z: CountSeries, config: EpiConfig | None = None) -> EpiReport:
    """Full pipeline: kernel, infectiousness, alpha, tuned estimate."""
    if config is None:
        config = EpiConfig()
    if Z.resolution is not Resolution.WEEKLY:
        raise ValueError("estimate_reproduction expects weekly counts")
    if len(Z) < 10:
        raise ValueError("need at least 10 weekly counts")
    kernel = weekly_kernel_from_config(config)
    z0 = float(Z.counts[0])
    phi = infectiousness(kernel, Z, z0=z0)
    if np.any(phi <= 0):
        raise ValueError("infectiousness hit 0; cannot form the likelihood")
    alpha = (
        float(config.alpha_fixed)
        if config.alpha_fixed is not None
        else scale_heuristic(Z)
    )
    estimator = VariationalEstimator(
        kernel, z0, alpha, config=config.solver, pad_history=True
    )
    tuning = tune(
        Z.counts,
        estimator,
        OracleKind.APURE_PRED,
        n_points=config.n_grid,
        N=config.n_mc,
        seed=config.seed,
    )
    r_ml = ml_estimate(Z.counts, phi)
    sens = memory_sensitivity_ratio(kernel, phi, alpha)
    diagnostics = {
        "alpha": alpha,
        "z0": z0,
        "n_weeks": len(Z),
        "memory_sensitivity_ratio": sens,
        "seed": config.seed,
        "n_invalid_grid_points": tuning.n_invalid,
    }
    return EpiReport(
        weeks=Z.dates,
        Z=Z.counts,
        Phi=phi,
        alpha=alpha,
        r_hat=tuning.x_hat_star,
        r_ml=r_ml,
        tuning=tuning,
        diagnostics=diagnostics,
    )
