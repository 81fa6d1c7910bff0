"""Driven autoregressive count models with scaled-Poisson noise.

Provides a piecewise-linear penalized-likelihood estimator of the
time-varying reproduction coefficient, data-driven unbiased risk
estimates for hyperparameter selection, a synthetic benchmark harness
and an end-to-end epidemic reproduction-number pipeline.
"""

from .bench import BenchCell, BenchConfig, BenchReport, run_benchmark
from .divergence import (
    gaussian_discrepancy,
    itakura_saito,
    kl_divergence,
    kl_prox,
    ml_estimate,
)
from .epi import (
    FIXTURES,
    CountFormat,
    CountLoadError,
    CountSeries,
    EpiConfig,
    EpiReport,
    estimate_reproduction,
    fixture_path,
    infectiousness,
    load_counts,
    scale_heuristic,
    weekly_aggregate,
)
from .kernels import (
    History,
    Kernel,
    Resolution,
    gamma_serial_interval,
    memory_vector,
    weekly_coarsen,
)
from .risk import (
    RiskKind,
    RiskValue,
    VariationalEstimator,
    apure_est_exact,
    apure_est_fdmc,
    apure_pred_exact,
    apure_pred_fdmc,
    fdmc_directional_derivative,
    robustified,
    true_estimation_error,
    true_prediction_error,
)
from .simulate import (
    NoiseFamily,
    NoiseSpec,
    ReproductionPath,
    default_benchmark_path,
    piecewise_linear_path,
    sample_scaled_poisson,
    simulate,
)
from .solver import (
    EstimateResult,
    NumericalFailure,
    SolverConfig,
    estimate,
    objective,
    second_difference,
    second_difference_adjoint,
)
from .tuner import OracleKind, RiskCurve, TuningResult, lambda_grid, tune

__version__ = "0.1.0"

__all__ = [
    "BenchCell",
    "BenchConfig",
    "BenchReport",
    "CountFormat",
    "CountLoadError",
    "CountSeries",
    "EpiConfig",
    "EpiReport",
    "EstimateResult",
    "FIXTURES",
    "History",
    "Kernel",
    "NoiseFamily",
    "NoiseSpec",
    "NumericalFailure",
    "OracleKind",
    "ReproductionPath",
    "Resolution",
    "RiskCurve",
    "RiskKind",
    "RiskValue",
    "SolverConfig",
    "TuningResult",
    "VariationalEstimator",
    "apure_est_exact",
    "apure_est_fdmc",
    "apure_pred_exact",
    "apure_pred_fdmc",
    "default_benchmark_path",
    "estimate",
    "estimate_reproduction",
    "fdmc_directional_derivative",
    "fixture_path",
    "gamma_serial_interval",
    "gaussian_discrepancy",
    "infectiousness",
    "itakura_saito",
    "kl_divergence",
    "kl_prox",
    "lambda_grid",
    "load_counts",
    "memory_vector",
    "ml_estimate",
    "objective",
    "piecewise_linear_path",
    "robustified",
    "run_benchmark",
    "sample_scaled_poisson",
    "scale_heuristic",
    "second_difference",
    "second_difference_adjoint",
    "simulate",
    "true_estimation_error",
    "true_prediction_error",
    "tune",
    "weekly_aggregate",
    "weekly_coarsen",
]
