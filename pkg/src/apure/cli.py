"""Command-line entry point: simulate | estimate | tune | bench | epi.

Every subcommand writes delimited outputs atomically with the seed in a
header comment, plus PNG figures alongside them (``--no-figures`` opts
out).  Exit codes: 0 success, 1 domain/load errors, 2 flag errors.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np
import pandas as pd

from ._io import write_csv, write_json
from .bench import ALL_ORACLES, BenchConfig, run_benchmark
from .divergence import ml_estimate
from .epi import (
    CountFormat,
    CountLoadError,
    EpiConfig,
    estimate_reproduction,
    load_counts,
    weekly_aggregate,
)
from .kernels import History, gamma_serial_interval, memory_vector
from .risk import VariationalEstimator
from .simulate import (
    BENCHMARK_BREAKPOINTS,
    DEFAULT_HORIZON,
    DEFAULT_SERIAL_MEAN,
    DEFAULT_SERIAL_STD,
    DEFAULT_T,
    DEFAULT_Y0,
    NoiseFamily,
    NoiseSpec,
    piecewise_linear_path,
    simulate,
)
from .solver import NumericalFailure, estimate as solve_estimate
from .tuner import LAMBDA_GRID_POINTS, OracleKind, tune

__all__ = ["main"]


class CliError(Exception):
    """Domain or input error surfaced to the user (exit code 1)."""


def _figure_path(out_path) -> str:
    root, _ = os.path.splitext(os.fspath(out_path))
    return root + ".png"


def _threads(args) -> int:
    env = os.environ.get("APURE_THREADS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise CliError(f"APURE_THREADS must be an integer, got {env!r}") from exc
    if getattr(args, "threads", None) is not None:
        return max(1, args.threads)
    return os.cpu_count() or 1


def _parse_breakpoints(text: str):
    out = []
    for piece in text.split(","):
        t, _, v = piece.partition(":")
        try:
            out.append((float(t), float(v)))
        except ValueError as exc:
            raise CliError(f"bad breakpoint {piece!r}; expected t:value") from exc
    return out


def _read_series(path):
    """Y (and Psi if present) from a CSV with a Y/count column."""
    try:
        df = pd.read_csv(path, comment="#")
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read {path}: {exc}") from exc
    col = next((c for c in ("Y", "count") if c in df.columns), None)
    if col is None:
        raise CliError(f"{path} has no 'Y' or 'count' column")
    Y = pd.to_numeric(df[col], errors="coerce").to_numpy(dtype=float)
    if np.any(np.isnan(Y)):
        raise CliError(f"{path} contains unparseable values in column {col!r}")
    psi = None
    if "Psi" in df.columns:
        psi = pd.to_numeric(df["Psi"], errors="coerce").to_numpy(dtype=float)
    return Y, psi


def _kernel_from(args):
    return gamma_serial_interval(args.serial_mean, args.serial_std, args.horizon)


def _alpha_from(args, Y):
    if args.alpha == "auto":
        s = float(np.std(Y, ddof=1))
        if not s > 0:
            raise CliError("--alpha auto undefined for constant observations")
        return 0.1 * s
    try:
        v = float(args.alpha)
    except ValueError as exc:
        raise CliError(f"--alpha must be a number or 'auto', got {args.alpha!r}") from exc
    if v <= 0:
        raise CliError("--alpha must be positive")
    return v


def _split_outputs(out: str, n: int, what: str):
    parts = [p for p in out.split(",") if p]
    if len(parts) != n:
        raise CliError(f"--out for {what} needs {n} comma-separated paths")
    return parts


def _add_kernel_flags(p):
    p.add_argument("--serial-mean", type=float, default=DEFAULT_SERIAL_MEAN)
    p.add_argument("--serial-std", type=float, default=DEFAULT_SERIAL_STD)
    p.add_argument("--horizon", type=int, default=DEFAULT_HORIZON)


def _cmd_simulate(args) -> int:
    kernel = _kernel_from(args)
    bp = (
        _parse_breakpoints(args.breakpoints)
        if args.breakpoints
        else BENCHMARK_BREAKPOINTS
    )
    path = piecewise_linear_path(bp, args.T)
    noise = NoiseSpec.constant(NoiseFamily(args.noise), args.alpha, args.T)
    hist = simulate(path, kernel, args.y0, noise, args.seed)
    psi = memory_vector(kernel, hist)
    write_csv(
        args.out,
        {
            "t": np.arange(1, args.T + 1),
            "X_bar": path.values,
            "Psi": psi,
            "Y": hist.values,
        },
        comments={"seed": args.seed, "noise": args.noise, "alpha": args.alpha},
    )
    if not args.no_figures:
        from .plots import save_trajectory

        save_trajectory(path.values, psi, hist.values, _figure_path(args.out))
    return 0


def _cmd_estimate(args) -> int:
    Y, psi = _read_series(args.input)
    alpha = _alpha_from(args, Y)
    if psi is None:
        y0 = args.y0 if args.y0 is not None else float(Y[0])
        if not y0 > 0:
            raise CliError("need --y0 > 0 when the input lacks a Psi column")
        kernel = _kernel_from(args)
        psi = memory_vector(kernel, History(y0=y0, values=Y))
    if np.any(psi <= 0):
        raise CliError("memory values must be positive to form the likelihood")
    lam = getattr(args, "lambda")
    if lam < 0:
        raise CliError("--lambda must be nonnegative")
    result = solve_estimate(Y, psi, alpha, lam)
    write_csv(
        args.out,
        {"t": np.arange(1, Y.size + 1), "Y": Y, "Psi": psi, "X_hat": result.x_hat},
        comments={"seed": args.seed, "lambda": lam, "alpha": alpha},
    )
    if not args.no_figures:
        from .plots import save_estimate

        save_estimate(Y, psi, result.x_hat, _figure_path(args.out),
                      x_ml=ml_estimate(Y, psi))
    return 0


def _cmd_tune(args) -> int:
    Y, _ = _read_series(args.input)
    alpha = _alpha_from(args, Y)
    y0 = args.y0 if args.y0 is not None else float(Y[0])
    if not y0 > 0:
        raise CliError("need --y0 > 0 (first observation is not positive)")
    kernel = _kernel_from(args)
    estimator = VariationalEstimator(kernel, y0, alpha)
    try:
        oracle = OracleKind(args.oracle)
    except ValueError as exc:
        raise CliError(f"unknown oracle {args.oracle!r}") from exc
    if oracle in (OracleKind.TRUE_PRED, OracleKind.TRUE_EST):
        raise CliError("true-error oracles need ground truth; use the library API")
    result = tune(
        Y, estimator, oracle, n_points=args.n_grid, N=args.n_mc, seed=args.seed
    )
    curve_path, json_path = _split_outputs(args.out, 2, "tune")
    write_csv(
        curve_path,
        {
            "lambda": result.curve.lambdas,
            "risk": result.curve.values,
            "ci_halfwidth": result.curve.ci_halfwidths,
        },
        comments={"seed": args.seed, "oracle": oracle.value, "alpha": alpha},
    )
    write_json(
        json_path,
        {
            "lambda_star": result.lambda_star,
            "oracle": oracle.value,
            "alpha": alpha,
            "n_grid": args.n_grid,
            "n_mc": args.n_mc,
            "n_invalid": result.n_invalid,
            "x_hat": result.x_hat_star,
            "diagnostics": result.diagnostics,
        },
        seed=args.seed,
    )
    if not args.no_figures:
        from .plots import save_risk_curve

        save_risk_curve(result.curve, _figure_path(curve_path))
    return 0


def _cmd_bench(args) -> int:
    try:
        alphas = [float(a) for a in args.alphas.split(",") if a]
    except ValueError as exc:
        raise CliError(f"bad --alphas list {args.alphas!r}") from exc
    if not alphas:
        raise CliError("--alphas must list at least one value")
    oracles = []
    for name in args.oracles.split(","):
        if not name:
            continue
        try:
            oracles.append(OracleKind(name))
        except ValueError as exc:
            raise CliError(f"unknown oracle {name!r}") from exc
    config = BenchConfig(n_grid=args.n_grid, n_mc=args.n_mc, threads=_threads(args))
    try:
        report = run_benchmark(
            alphas, args.Q, oracles or ALL_ORACLES, seed=args.seed, config=config
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    json_path, table_path = _split_outputs(args.out, 2, "bench")
    cells = [
        {
            "alpha": c.alpha,
            "oracle": c.oracle.value,
            "mmse": c.mmse,
            "ci": c.ci,
            "ci_paper_literal": c.ci_paper_literal,
            "bias": c.bias,
            "variance": c.variance,
            "lambda_stars": c.lambda_stars,
            "errors": c.errors,
            "n_failed": c.n_failed,
        }
        for c in report.cells
    ]
    write_json(
        json_path,
        {"Q": args.Q, "alphas": alphas, "cells": cells},
        seed=args.seed,
    )
    write_csv(
        table_path,
        {
            "alpha": [c.alpha for c in report.cells],
            "oracle": [c.oracle.value for c in report.cells],
            "mmse": [c.mmse for c in report.cells],
            "ci": [c.ci for c in report.cells],
            "bias": [c.bias for c in report.cells],
            "variance": [c.variance for c in report.cells],
            "n_failed": [c.n_failed for c in report.cells],
        },
        comments={"seed": args.seed, "Q": args.Q},
    )
    if not args.no_figures:
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(7, 4.5))
        for o in {c.oracle for c in report.cells}:
            pts = sorted(
                (c.alpha, c.mmse, c.ci) for c in report.cells if c.oracle is o
            )
            a = [p[0] for p in pts]
            m = [p[1] for p in pts]
            e = [p[2] for p in pts]
            ax.errorbar(a, m, yerr=e, marker="o", capsize=3, label=o.value)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("noise scale")
        ax.set_ylabel("minimal mean squared error")
        ax.legend()
        fig.tight_layout()
        fig.savefig(_figure_path(table_path), dpi=120)
        plt.close(fig)
    return 0


def _cmd_epi(args) -> int:
    try:
        daily = load_counts(args.input, CountFormat(args.format), region=args.region)
        weekly = weekly_aggregate(daily)
        config = EpiConfig(n_grid=args.n_grid, n_mc=args.n_mc, seed=args.seed)
        report = estimate_reproduction(weekly, config)
    except (CountLoadError, ValueError, NumericalFailure) as exc:
        raise CliError(str(exc)) from exc
    json_path, est_path, curve_path = _split_outputs(args.out, 3, "epi")
    write_json(
        json_path,
        {
            "lambda_star": report.lambda_star,
            "alpha": report.alpha,
            "n_weeks": int(report.Z.size),
            "r_hat": report.r_hat,
            "diagnostics": report.diagnostics,
        },
        seed=args.seed,
    )
    write_csv(
        est_path,
        {
            "week_start": [str(d) for d in report.weeks],
            "Z": report.Z,
            "Phi": report.Phi,
            "R_ml": report.r_ml,
            "R_hat": report.r_hat,
        },
        comments={"seed": args.seed, "alpha": report.alpha,
                  "lambda_star": report.lambda_star},
    )
    write_csv(
        curve_path,
        {
            "lambda": report.tuning.curve.lambdas,
            "risk": report.tuning.curve.values,
            "ci_halfwidth": report.tuning.curve.ci_halfwidths,
        },
        comments={"seed": args.seed, "oracle": report.tuning.curve.oracle_kind.value},
    )
    if not args.no_figures:
        from .plots import save_epi_report, save_risk_curve

        save_epi_report(report, _figure_path(est_path))
        save_risk_curve(report.tuning.curve, _figure_path(curve_path))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="apure",
        description=(
            "Piecewise-linear reproduction-coefficient estimation for "
            "scaled-Poisson autoregressive counts, with data-driven "
            "hyperparameter selection."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a synthetic trajectory")
    p.add_argument("--T", type=int, default=DEFAULT_T)
    p.add_argument("--y0", type=float, default=DEFAULT_Y0)
    p.add_argument("--alpha", type=float, default=100.0)
    p.add_argument(
        "--noise",
        choices=[f.value for f in NoiseFamily],
        default=NoiseFamily.SCALED_POISSON.value,
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--breakpoints", default=None,
                   help="comma list t:value; default is the benchmark path")
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")
    _add_kernel_flags(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("estimate", help="penalized estimate at fixed lambda")
    p.add_argument("--input", required=True)
    p.add_argument("--lambda", type=float, required=True, dest="lambda")
    p.add_argument("--alpha", default="auto",
                   help="positive scale or 'auto' (0.1 * std of the counts)")
    p.add_argument("--y0", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")
    _add_kernel_flags(p)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("tune", help="grid search for lambda")
    p.add_argument("--input", required=True)
    p.add_argument("--oracle", default=OracleKind.APURE_PRED.value)
    p.add_argument("--n-grid", type=int, default=LAMBDA_GRID_POINTS)
    p.add_argument("--n-mc", type=int, default=10)
    p.add_argument("--alpha", default="auto")
    p.add_argument("--y0", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True,
                   help="two comma-separated paths: curve.csv,result.json")
    p.add_argument("--no-figures", action="store_true")
    _add_kernel_flags(p)
    p.set_defaults(func=_cmd_tune)

    p = sub.add_parser("bench", help="Monte Carlo oracle benchmark")
    p.add_argument("--alphas", default="1e2,316.22776601683796,1e3")
    p.add_argument("--Q", type=int, default=10)
    p.add_argument(
        "--oracles", default=",".join(o.value for o in ALL_ORACLES)
    )
    p.add_argument("--n-grid", type=int, default=LAMBDA_GRID_POINTS)
    p.add_argument("--n-mc", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", required=True,
                   help="two comma-separated paths: report.json,table.csv")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("epi", help="reproduction-number pipeline on daily counts")
    p.add_argument("--input", required=True)
    p.add_argument(
        "--format", choices=[f.value for f in CountFormat],
        default=CountFormat.LONG.value,
    )
    p.add_argument("--region", default=None)
    p.add_argument("--n-grid", type=int, default=LAMBDA_GRID_POINTS)
    p.add_argument("--n-mc", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True,
                   help="three comma-separated paths: report.json,estimate.csv,curve.csv")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_epi)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (CountLoadError, NumericalFailure, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
