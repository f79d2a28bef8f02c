"""``gjr`` command: simulate, estimate, price, calibrate and fit-driver.

Example:
    gjr price --sigma 0.2 --n 1000 --dt 0.001 --strike 100
    gjr estimate --prices data/spy.csv --window 252 --sweep 21 63 126 252
    gjr calibrate --chain data/chain.csv --target beta --sigma 0.151 --mu 0.119
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict, replace
from datetime import date

import numpy as np
import pandas as pd

from src.calibration.implied import CalibrationContext, build_surface, fit_htc
from src.cli.artifacts import write_csv, write_json
from src.cli.config import RunConfig
from src.drivers.market_driver import (
    DriverParams,
    driver_prices,
    endogenous_driver,
    endogenous_fit,
    endogenous_path,
    exogenous_driver,
    exogenous_fit,
    factor_price_series,
    ff5_fit,
    fit_higher_moment,
    fit_higher_moment_joint,
    split_periods,
)
from src.estimation.estimator import (
    ReturnSeries,
    estimates_frame,
    rolling_estimates,
    smooth_series,
    window_sweep,
)
from src.ingestion.loaders import IngestReport, ingest_chain, ingest_factors, ingest_prices, load_price_frame
from src.pricing.black_scholes import bs_price
from src.pricing.path_dependent import EtaModel, price_path_dependent
from src.pricing.risk_neutral import NO_HTC, EccSpec, HTCParams, RiskNeutralContext, martingale_check, price_ecc
from src.tree.gjr_tree import (
    NaturalParams,
    build_tree,
    exact_return_moments,
    return_moments,
    simulate_paths,
    tree_moments,
)
from src.utils.errors import EXIT_OK, DataError, FitFailure, GjrError, exit_code_for
from src.utils.logger import setup_logger

logger = logging.getLogger(__name__)

TREE_EXPORT_MAX_STEPS = 500


def _natural(config: RunConfig) -> NaturalParams:
    return NaturalParams(
        mu=config.mu, sigma=config.sigma, beta=config.beta, dt=config.dt, n=config.n, s0=config.s0
    )


def _in_range(dates: pd.DatetimeIndex, config: RunConfig) -> np.ndarray:
    mask = np.ones(len(dates), dtype=bool)
    if config.start:
        mask &= dates >= pd.Timestamp(config.start)
    if config.end:
        mask &= dates <= pd.Timestamp(config.end)
    return mask


def _robust_options(config: RunConfig) -> dict:
    return {"tuning": config.robust_tuning, "maxiter": config.robust_maxiter, "tol": config.robust_tol}


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def simulate(config: RunConfig) -> None:
    params = _natural(config)
    tree = build_tree(params)
    ensemble = simulate_paths(tree, config.paths, config.seed)
    write_csv(ensemble.to_frame(), "paths.csv", config)
    if params.n <= TREE_EXPORT_MAX_STEPS:
        write_csv(tree.to_frame(), "tree.csv", config)

    terminal = ensemble.cum_log_returns[:, -1]
    mean, var = return_moments(params, params.n)
    exact_mean, exact_var = exact_return_moments(params, params.n)
    skew, kurt = tree_moments(params)
    write_json(
        {
            "alpha": params.alpha_dt,
            "closed_form": {"mean": mean, "variance": var},
            "exact": {"mean": exact_mean, "variance": exact_var},
            "sample": {"mean": float(terminal.mean()), "variance": float(terminal.var(ddof=1)) if terminal.size > 1 else 0.0},
            "step_skewness": skew,
            "step_excess_kurtosis": kurt,
        },
        "simulate.json",
        config,
    )


def estimate(config: RunConfig) -> None:
    report = IngestReport()
    series = ingest_prices(config.prices, report, config.dt)
    mask = _in_range(pd.DatetimeIndex(series.dates), config)
    if not mask.any():
        raise DataError("no prices inside the requested date range")
    values = series.cum_log_returns[mask]
    series = ReturnSeries(series.dates[mask], values - values[0], config.dt)

    summary: dict = {"ingest": report.as_dict(), "points": len(series)}
    if config.sweep:
        sweep = window_sweep(
            series, config.sweep, significance=config.significance, progress=True,
            bias_correction=config.bias_correction, **_robust_options(config),
        )
        write_csv(
            pd.DataFrame(
                [
                    {"L": s.length, "windows": s.count, "min": s.minimum, "q1": s.q1,
                     "median": s.median, "q3": s.q3, "max": s.maximum}
                    for s in sweep.summaries.values()
                ]
            ),
            "sweep.csv",
            config,
        )
        summary["recommended_window"] = sweep.recommended

    estimates = rolling_estimates(
        series, config.window, progress=True, bias_correction=config.bias_correction, **_robust_options(config)
    )
    write_csv(estimates_frame(estimates), "estimates.csv", config)
    smoothing = config.smoothing
    if smoothing > len(estimates):
        logger.warning("Smoothing window %d exceeds %d estimates; using %d", smoothing, len(estimates), len(estimates))
        smoothing = len(estimates)
    smoothed = smooth_series(estimates, smoothing)
    write_csv(estimates_frame(smoothed), "smoothed.csv", config)
    summary["latest"] = asdict(smoothed[-1])
    summary["smoothing"] = smoothing
    write_json(summary, "estimate.json", config)


def price(config: RunConfig) -> float:
    strike = config.strike or config.s0
    T = config.n * config.dt
    spec = EccSpec.vanilla(config.kind, strike, T)
    summary: dict = {"strike": strike, "T": T, "kind": config.kind}

    if config.path_dependent:
        model = EtaModel(config.sigma, config.gamma, config.h_id, config.kappa, config.dt)
        v = config.mu if config.v is None else config.v
        result = price_path_dependent(
            model, v, config.rf, config.s0, spec, config.n, config.method, config.mc_paths, config.seed,
            mode=config.mode,
        )
        value = result.price
        summary.update(price=value, std_error=result.std_error, method=result.method, clamp_count=result.clamp_count)
    else:
        htc = HTCParams(config.lambda0, config.lambda1) if config.htc else NO_HTC
        ctx = RiskNeutralContext(
            _natural(config), config.rf, htc, config.mode, config.q_floor, config.max_clamp_fraction
        )
        result = price_ecc(ctx, spec)
        value = result.price
        summary.update(
            price=value,
            clamp_count=result.clamp_count,
            martingale_error=martingale_check(ctx),
            first_delta=float(result.deltas[0][0]),
        )

    reference = bs_price(config.s0, strike, T, config.rf, config.sigma, config.kind)
    summary["black_scholes"] = reference
    summary["relative_to_black_scholes"] = value / reference - 1.0 if reference > 0 else None
    write_json(summary, "price.json", config)
    print(f"price={value:.10g} black_scholes={reference:.10g}")
    return value


def calibrate(config: RunConfig) -> None:
    report = IngestReport()
    quotes = ingest_chain(config.chain, report, rf=config.rf_fallback)
    htc_on = config.htc or config.fit_htc
    ctx = CalibrationContext(
        mu=config.mu,
        sigma=config.sigma,
        beta=config.beta,
        lambda0=config.lambda0 if htc_on else 0.0,
        lambda1=config.lambda1 if htc_on else 0.0,
        mode=config.mode,
        dt=config.dt,
        v=config.v,
        gamma=config.gamma,
        h_id=config.h_id,
        kappa=config.kappa,
        pd_enumerate_max_steps=config.pd_enumerate_max_steps,
        mc_paths=config.mc_paths,
        seed=config.seed,
        q_floor=config.q_floor,
        max_clamp_fraction=config.max_clamp_fraction,
    )
    summary: dict = {"ingest": report.as_dict(), "quotes": len(quotes), "target": config.target}
    if config.fit_htc:
        fit = fit_htc(quotes, replace(ctx, lambda0=0.0, lambda1=0.0), starts=config.htc_starts)
        summary["htc"] = asdict(fit)
        ctx = replace(ctx, lambda0=fit.lambda0, lambda1=fit.lambda1)

    surface = build_surface(
        quotes, config.target, ctx, progress=True, grid_points=config.grid_points, xtol=config.xtol
    )
    write_csv(surface.to_frame(), f"surface_{config.target}.csv", config)
    values = surface.values[np.isfinite(surface.values)]
    summary.update(
        points=len(surface),
        holes=surface.holes,
        value_min=float(values.min()) if values.size else None,
        value_max=float(values.max()) if values.size else None,
    )
    write_json(summary, "calibrate.json", config)


def fit_driver(config: RunConfig) -> None:
    report = IngestReport()
    closes = load_price_frame(config.prices, report)
    closes = closes[_in_range(closes.index, config)]
    summary: dict = {"ingest": report.as_dict(), "driver": config.driver}

    if config.driver == "higher_moment":
        returns = np.diff(np.log(closes.to_numpy()))
        options = dict(kappa_bounds=config.kappa_bounds, starts=config.hm_starts, seed=config.seed,
                       maxiter=config.nm_maxiter, fatol=config.nm_fatol)
        if config.joint:
            alpha = DriverParams(config.mu, config.sigma, config.beta, config.dt).alpha
            hm = fit_higher_moment_joint(
                returns, alpha, config.ensemble_size, config.seed, config.dt, block_size=config.block_size, **options
            )
        else:
            hm = fit_higher_moment(returns, endogenous_path(returns), config.dt, **options)
        summary["higher_moment"] = asdict(hm)
        write_json(summary, "fit_driver.json", config)
        return

    if config.estimation_end is not None:
        periods = split_periods(closes, config.estimation_end)
        target = periods.evaluation.to_numpy()
        estimation = dict(window=config.window, smoothing=config.smoothing, **_robust_options(config))
        if config.driver == "endogenous":
            fit, estimate = endogenous_driver(periods, config.dt, bias_correction=config.bias_correction, **estimation)
        else:
            panel = ingest_factors(config.factors, percent=config.percent_factors)
            exogenous = exogenous_driver(
                periods, panel, config.ensemble_size, config.seed, config.dt,
                block_size=config.block_size, bias_correction=config.bias_correction, progress=True, **estimation,
            )
            fit, estimate = exogenous.fit, exogenous.estimate
            summary["factor_fit"] = asdict(exogenous.factor_fit)
        summary["estimation"] = asdict(estimate)
        summary["evaluation_start"] = str(periods.evaluation.index[0].date())
    else:
        params = DriverParams(config.mu, config.sigma, config.beta, config.dt)
        if config.driver == "endogenous":
            target = closes.to_numpy()
            fit = endogenous_fit(target, params)
        else:
            panel = ingest_factors(config.factors, percent=config.percent_factors)
            factor_fit, fitted = ff5_fit(np.log(closes).diff().dropna(), panel, **_robust_options(config))
            origin = closes.index[closes.index.get_loc(fitted.index[0]) - 1]
            target = factor_price_series(float(closes.loc[origin]), fitted, origin=origin).to_numpy()
            fit = exogenous_fit(
                target, params, config.ensemble_size, config.seed, block_size=config.block_size, progress=True
            )
            summary["factor_fit"] = asdict(factor_fit)

    model = driver_prices(target[0], fit.chosen_path.steps, fit.params)
    write_csv(
        pd.DataFrame({"k": np.arange(target.size), "M": fit.chosen_path.steps, "target": target, "model": model}),
        "driver_path.csv",
        config,
    )
    summary.update(
        params=asdict(fit.params), rel_mse=fit.rel_mse, path_index=fit.path_index, ensemble_size=fit.ensemble_size
    )
    write_json(summary, "fit_driver.json", config)


COMMANDS = {
    "simulate": simulate,
    "estimate": estimate,
    "price": price,
    "calibrate": calibrate,
    "fit-driver": fit_driver,
}


def run(config: RunConfig) -> int:
    """Execute one command; returns the process exit status."""
    logger.info("Running %s (config %s, seed %d)", config.command, config.config_hash(), config.seed)
    try:
        COMMANDS[config.command](config)
    except FitFailure as e:
        write_json({"error": str(e), "incumbent": e.incumbent}, "incumbent.json", config)
        logger.error("%s", e)
        return exit_code_for(e)
    except GjrError as e:
        logger.error("%s failed: %s", config.command, e)
        return exit_code_for(e)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    parent.add_argument("--config", dest="config_file", help="run-config file (JSON or key=value)")
    parent.add_argument("--output-dir", dest="output_dir")
    parent.add_argument("--seed", type=int)
    parent.add_argument("--log-level", dest="log_level")
    parent.add_argument("--dt", type=float)
    parent.add_argument("--start", type=date.fromisoformat, help="first date (ISO-8601)")
    parent.add_argument("--end", type=date.fromisoformat, help="last date (ISO-8601)")
    parent.add_argument("--mu", type=float)
    parent.add_argument("--sigma", type=float)
    parent.add_argument("--beta", type=float)
    parent.add_argument("--mode", choices=["exact", "leading_order"])
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gjr", description="Skew random walk option pricing toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()

    def command(name: str, help_text: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, parents=[common], help=help_text, argument_default=argparse.SUPPRESS)

    p = command("simulate", "simulate GJR price paths")
    p.add_argument("--s0", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--paths", type=int)

    p = command("estimate", "moving-window estimation of sigma, mu, beta")
    p.add_argument("--prices")
    p.add_argument("--window", type=int)
    p.add_argument("--smoothing", type=int)
    p.add_argument("--sweep", type=int, nargs="+")
    p.add_argument("--bias-correction", dest="bias_correction", action="store_true")

    p = command("price", "price a European call or put")
    for flag in ("--s0", "--rf", "--strike", "--lambda0", "--lambda1", "--gamma", "--kappa", "--v"):
        p.add_argument(flag, type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--kind", choices=["call", "put"])
    p.add_argument("--htc", action="store_true")
    p.add_argument("--path-dependent", dest="path_dependent", action="store_true")
    p.add_argument("--h-id", dest="h_id")
    p.add_argument("--method", choices=["enumerate", "monte_carlo"])
    p.add_argument("--mc-paths", dest="mc_paths", type=int)

    p = command("calibrate", "implied-parameter surface and transaction-cost fit")
    p.add_argument("--chain")
    p.add_argument("--target", choices=["mu", "beta", "sigma", "lambda0", "lambda1", "pd_sigma", "bs_sigma"])
    p.add_argument("--rf-fallback", dest="rf_fallback", type=float)
    for flag in ("--lambda0", "--lambda1", "--gamma", "--kappa", "--v"):
        p.add_argument(flag, type=float)
    p.add_argument("--htc", action="store_true")
    p.add_argument("--fit-htc", dest="fit_htc", action="store_true")
    p.add_argument("--mc-paths", dest="mc_paths", type=int)

    p = command("fit-driver", "endogenous, exogenous or higher-moment market driver")
    p.add_argument("--driver", choices=["endogenous", "exogenous", "higher_moment"])
    p.add_argument("--prices")
    p.add_argument("--factors")
    p.add_argument("--no-percent-factors", dest="percent_factors", action="store_false")
    p.add_argument("--ensemble-size", dest="ensemble_size", type=int)
    p.add_argument("--estimation-end", dest="estimation_end", type=date.fromisoformat,
                   help="last close of the estimation period; later closes are scored")
    p.add_argument("--window", type=int)
    p.add_argument("--smoothing", type=int)
    p.add_argument("--bias-correction", dest="bias_correction", action="store_true")
    p.add_argument("--joint", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    config_file = args.pop("config_file", None)
    setup_logger("src", level=args.get("log_level"))
    try:
        config = RunConfig.from_sources(command, config_file, args)
    except GjrError as e:
        logger.error("%s", e)
        return exit_code_for(e)
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
