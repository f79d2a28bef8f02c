"""Market drivers for the GJR walk.

* Endogenous: the walk is read off the signs of the asset's own returns.
* Exogenous: parameters come from a five-factor regression and the walk is the
  ensemble member that best reproduces the target prices.
* Both can estimate their parameters over an estimation period tau1 and be
  scored over the following evaluation period tau2.
* Higher moment: the CSYIP companion adds a state-dependent volatility
  gamma h(sqrt(dt) M_{k-1}) to the walk increments.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from datetime import date

import numpy as np
import pandas as pd
from scipy import optimize
from scipy.stats import qmc
from tqdm import tqdm

from src.estimation.estimator import ReturnSeries, WindowEstimate, estimate_parameters
from src.estimation.robust import robust_fit
from src.process.kernels import student_t_density
from src.process.skew_process import DEFAULT_BLOCK_SIZE, SkewPath, iter_walk_blocks
from src.tree.gjr_tree import BETA_MARGIN, drift_sequence
from src.utils.errors import DataError, DegenerateDataError, FitFailure, InvalidArgumentError

logger = logging.getLogger(__name__)

FACTOR_COLUMNS = ["Mkt-RF", "SMB", "HML", "RMW", "CMA"]
RF_COLUMN = "RF"
MIN_FACTOR_OBS = 60
KAPPA_BOUNDS = (5.0, 30.0)
START_BOX = np.array([[-1.0, 1.0], [1e-6, 1.0], [-1.0, 1.0], list(KAPPA_BOUNDS)])


@dataclass(frozen=True)
class FactorPanel:
    """Daily five-factor returns and the risk-free rate, indexed by date (decimal units)."""

    frame: pd.DataFrame

    def __post_init__(self) -> None:
        missing = [c for c in FACTOR_COLUMNS + [RF_COLUMN] if c not in self.frame.columns]
        if missing:
            raise DataError(f"factor panel is missing columns: {', '.join(missing)}")
        if not self.frame.index.is_monotonic_increasing or self.frame.index.has_duplicates:
            raise DataError("factor panel dates must be strictly increasing")
        values = self.frame[FACTOR_COLUMNS + [RF_COLUMN]].to_numpy(dtype=float)
        if not np.all(np.isfinite(values)):
            raise DataError("factor panel contains non-finite values")

    def __len__(self) -> int:
        return len(self.frame)


@dataclass(frozen=True)
class FactorFit:
    """Five-factor coefficients r^S - r_f = a + b F1 + s F2 + h F3 + r F4 + c F5."""

    a: float
    b: float
    s: float
    h: float
    r: float
    c: float
    r_square: float
    rmse: float

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([self.a, self.b, self.s, self.h, self.r, self.c])


@dataclass(frozen=True)
class DriverParams:
    """Walk-driving parameters (mu, sigma, beta) with the derived alpha."""

    mu: float
    sigma: float
    beta: float
    dt: float = 1.0 / 252

    @property
    def alpha(self) -> float:
        return 0.5 * (1.0 + self.beta * math.sqrt(self.dt))


@dataclass(frozen=True)
class DriverFitResult:
    """Selected walk path and the relative MSE it achieves."""

    params: DriverParams
    chosen_path: SkewPath
    rel_mse: float
    ensemble_size: int
    seed: int | None
    path_index: int = 0


@dataclass(frozen=True)
class HigherMomentParams:
    """Parameters of r_k = v dt + sigma sqrt(dt) dM_k + gamma sqrt(dt) dM_k h(sqrt(dt) M_{k-1}; kappa)."""

    v: float
    sigma: float
    gamma: float
    kappa: float | None


@dataclass(frozen=True)
class HigherMomentFit:
    params: HigherMomentParams
    rmse: float
    objective: float
    converged: bool
    starts: int
    path_index: int | None = None


# ---------------------------------------------------------------------------
# Endogenous driver
# ---------------------------------------------------------------------------


def endogenous_path(returns: np.ndarray) -> SkewPath:
    """M_k = sum of sign(r_j) for j <= k with sign(0) = +1."""
    returns = np.asarray(returns, dtype=float)
    if returns.size == 0:
        raise InvalidArgumentError("endogenous_path needs at least one return")
    signs = np.where(returns >= 0, 1, -1)
    return SkewPath(steps=np.concatenate(([0], np.cumsum(signs))))


def driver_prices(s0: float, levels: np.ndarray, params: DriverParams) -> np.ndarray:
    """S_k = s0 exp(v_k dt + M_k sigma sqrt(dt)) along walk levels (last axis k = 0..n)."""
    levels = np.asarray(levels)
    n = levels.shape[-1] - 1
    v = drift_sequence(params.mu, params.sigma, params.beta, n)
    return s0 * np.exp(v * params.dt + levels * params.sigma * math.sqrt(params.dt))


def rel_mse(model: np.ndarray, target: np.ndarray) -> np.ndarray | float:
    """Mean of ((model - target) / target)^2 over k = 1..n (last axis)."""
    model = np.asarray(model, dtype=float)
    target = np.asarray(target, dtype=float)
    value = np.mean(((model[..., 1:] - target[1:]) / target[1:]) ** 2, axis=-1)
    return value if np.ndim(value) else float(value)


def endogenous_fit(prices: np.ndarray, params: DriverParams) -> DriverFitResult:
    """Reconstruct ``prices`` from the sign path of their own log-returns."""
    prices = np.asarray(prices, dtype=float)
    if prices.size < 2 or np.any(prices <= 0):
        raise InvalidArgumentError("endogenous_fit needs at least two positive prices")
    path = endogenous_path(np.diff(np.log(prices)))
    error = rel_mse(driver_prices(prices[0], path.steps, params), prices)
    logger.info("Endogenous driver relMSE=%.3e over %d steps", error, path.n)
    return DriverFitResult(params, path, float(error), ensemble_size=1, seed=None)


# ---------------------------------------------------------------------------
# Five-factor regression and exogenous driver
# ---------------------------------------------------------------------------


def ff5_fit(stock_returns: pd.Series, panel: FactorPanel, **robust_options) -> tuple[FactorFit, pd.Series]:
    """Robust regression of r^S - r_f on an intercept and the five factors.

    Returns:
        The coefficients with R^2 and RMSE of r^S, and the fitted factor
        return r_f + a + b F1 + ... + c F5 indexed like the aligned data.

    Raises:
        DataError: If fewer than 60 dates align.
        DegenerateDataError: If the factor design is rank deficient.
    """
    joined = pd.concat([stock_returns.rename("stock"), panel.frame], axis=1, join="inner").dropna()
    if len(joined) < MIN_FACTOR_OBS:
        raise DataError(f"{len(joined)} aligned observations; at least {MIN_FACTOR_OBS} needed")

    X = np.column_stack([np.ones(len(joined)), joined[FACTOR_COLUMNS].to_numpy(dtype=float)])
    rf = joined[RF_COLUMN].to_numpy(dtype=float)
    r = joined["stock"].to_numpy(dtype=float)
    try:
        fit = robust_fit(r - rf, X, **robust_options)
    except DegenerateDataError:
        raise DegenerateDataError("five-factor design is rank deficient") from None

    fitted = rf + X @ fit.params
    resid = r - fitted
    total = float(np.sum((r - r.mean()) ** 2))
    r_square = 1.0 - float(np.sum(resid**2)) / total if total > 0 else 1.0
    result = FactorFit(*map(float, fit.params), r_square=r_square, rmse=float(np.sqrt(np.mean(resid**2))))
    logger.info("Five-factor fit: b=%.3g R^2=%.3f RMSE=%.3g", result.b, r_square, result.rmse)
    return result, pd.Series(fitted, index=joined.index, name="fitted")


def factor_price_series(s0: float, fitted_returns: pd.Series, origin: pd.Timestamp | None = None) -> pd.Series:
    """S^F_k = s0 exp(sum of fitted factor returns up to k), with S^F_0 = s0.

    With ``origin`` the series is indexed by that date followed by the
    fitted dates; otherwise by position.
    """
    values = s0 * np.exp(np.concatenate(([0.0], np.cumsum(fitted_returns.to_numpy(dtype=float)))))
    index = None if origin is None else pd.DatetimeIndex([origin, *fitted_returns.index], name="date")
    return pd.Series(values, index=index, name="factor_price")


def exogenous_fit(
    target_prices: np.ndarray,
    driver_params: DriverParams,
    ensemble_size: int,
    seed: int,
    *,
    block_size: int = DEFAULT_BLOCK_SIZE,
    progress: bool = False,
) -> DriverFitResult:
    """Pick the walk path whose GJR prices have the lowest relMSE against the target.

    Paths come in seeded blocks, so a larger ensemble extends a smaller one and
    the achieved relMSE never increases with ``ensemble_size``. Ties go to the
    lowest path index.
    """
    target_prices = np.asarray(target_prices, dtype=float)
    if target_prices.size < 2 or np.any(target_prices <= 0):
        raise InvalidArgumentError("target prices must hold at least two positive values")
    if ensemble_size < 1:
        raise InvalidArgumentError(f"ensemble_size must be >= 1, got {ensemble_size}")
    alpha = driver_params.alpha
    if not 0.0 < alpha < 1.0 or abs(driver_params.beta) * math.sqrt(driver_params.dt) >= 1 - BETA_MARGIN:
        raise InvalidArgumentError(f"driver alpha={alpha:.4f} lies outside (0, 1)")

    n = target_prices.size - 1
    best = (math.inf, -1, None)
    blocks = iter_walk_blocks(alpha, n, ensemble_size, seed, block_size=block_size)
    for offset, levels in tqdm(blocks, desc="Ensemble blocks", disable=not progress,
                               total=math.ceil(ensemble_size / block_size)):
        errors = rel_mse(driver_prices(target_prices[0], levels, driver_params), target_prices)
        i = int(np.argmin(errors))
        if errors[i] < best[0]:
            best = (float(errors[i]), offset + i, levels[i].copy())

    error, index, steps = best
    logger.info("Exogenous driver: path %d of %d, relMSE=%.3e", index, ensemble_size, error)
    return DriverFitResult(
        params=driver_params,
        chosen_path=SkewPath(steps=steps, alpha=alpha, seed=seed),
        rel_mse=error,
        ensemble_size=ensemble_size,
        seed=seed,
        path_index=index,
    )


# ---------------------------------------------------------------------------
# Estimate over tau1, select over tau2
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DriverPeriods:
    """Closes of the estimation period tau1 and the evaluation period tau2.

    ``evaluation`` opens with the last ``estimation`` close, its S_0.
    """

    estimation: pd.Series
    evaluation: pd.Series


@dataclass(frozen=True)
class ExogenousDriverFit:
    factor_fit: FactorFit
    factor_prices: pd.Series
    estimate: WindowEstimate
    fit: DriverFitResult


def split_periods(closes: pd.Series, estimation_end: date | pd.Timestamp) -> DriverPeriods:
    """Cut date-indexed closes after ``estimation_end``.

    Raises:
        DataError: If either period would hold fewer than two closes.
    """
    inside = int((closes.index <= pd.Timestamp(estimation_end)).sum())
    if inside < 2 or inside >= len(closes):
        raise DataError(
            f"estimation end {estimation_end} leaves {inside} of {len(closes)} closes in tau1; "
            "both periods need at least two"
        )
    periods = DriverPeriods(closes.iloc[:inside], closes.iloc[inside - 1 :])
    logger.info(
        "tau1 %s..%s (%d closes), tau2 %s..%s (%d closes)",
        periods.estimation.index[0].date(), periods.estimation.index[-1].date(), len(periods.estimation),
        periods.evaluation.index[0].date(), periods.evaluation.index[-1].date(), len(periods.evaluation),
    )
    return periods


def estimate_driver_params(
    prices: pd.Series,
    dt: float = 1.0 / 252,
    *,
    window: int = 252,
    smoothing: int = 252,
    **step1_options,
) -> tuple[DriverParams, WindowEstimate]:
    """Smoothed moving-window (mu, sigma, beta) at the last of ``prices``.

    A smoothing length beyond the number of windows is cut to that number.

    Raises:
        DataError: If ``prices`` is shorter than ``window``.
    """
    series = ReturnSeries.from_prices(prices.index.to_numpy(), prices.to_numpy(dtype=float), dt)
    if window > len(series):
        raise DataError(f"{len(series)} closes cannot fill an estimation window of {window}")
    count = len(series) - window + 1
    if smoothing > count:
        logger.warning("Smoothing window %d exceeds %d estimates; using %d", smoothing, count, count)
        smoothing = count
    estimate = estimate_parameters(series, window, smoothing, **step1_options)
    params = DriverParams(estimate.mu_hat, estimate.sigma_hat, estimate.beta_hat, dt)
    logger.info("Driver parameters: mu=%.4g sigma=%.4g beta=%.4g", params.mu, params.sigma, params.beta)
    return params, estimate


def endogenous_driver(
    periods: DriverPeriods,
    dt: float = 1.0 / 252,
    *,
    window: int = 252,
    smoothing: int = 252,
    **step1_options,
) -> tuple[DriverFitResult, WindowEstimate]:
    """Parameters from the market closes of tau1, sign path and relMSE over tau2."""
    params, estimate = estimate_driver_params(
        periods.estimation, dt, window=window, smoothing=smoothing, **step1_options
    )
    return endogenous_fit(periods.evaluation.to_numpy(dtype=float), params), estimate


def exogenous_driver(
    periods: DriverPeriods,
    panel: FactorPanel,
    ensemble_size: int,
    seed: int,
    dt: float = 1.0 / 252,
    *,
    window: int = 252,
    smoothing: int = 252,
    block_size: int = DEFAULT_BLOCK_SIZE,
    bias_correction: bool = False,
    progress: bool = False,
    **robust_options,
) -> ExogenousDriverFit:
    """Five-factor prices over tau1 give the parameters; the ensemble is scored over tau2.

    The regression runs on tau1 log-returns. Its fitted returns are
    accumulated from the close preceding the first aligned date and the
    moving-window estimator runs on that factor price series. The selected
    path reproduces the market closes of tau2.
    """
    closes = periods.estimation
    log_returns = np.log(closes).diff().dropna()
    factor_fit, fitted = ff5_fit(log_returns, panel, **robust_options)
    origin = closes.index[closes.index.get_loc(fitted.index[0]) - 1]
    factor_prices = factor_price_series(float(closes.loc[origin]), fitted, origin=origin)
    params, estimate = estimate_driver_params(
        factor_prices, dt, window=window, smoothing=smoothing, bias_correction=bias_correction, **robust_options
    )
    fit = exogenous_fit(
        periods.evaluation.to_numpy(dtype=float), params, ensemble_size, seed,
        block_size=block_size, progress=progress,
    )
    return ExogenousDriverFit(factor_fit, factor_prices, estimate, fit)


# ---------------------------------------------------------------------------
# Higher-moment (CSYIP) fit
# ---------------------------------------------------------------------------


def higher_moment_returns(params: HigherMomentParams, levels: np.ndarray, dt: float) -> np.ndarray:
    """Model log-returns r_1..r_n along walk levels M_0..M_n."""
    levels = np.asarray(levels, dtype=float)
    dm = np.diff(levels)
    sqrt_dt = math.sqrt(dt)
    h = 0.0 if params.kappa is None else student_t_density(sqrt_dt * levels[:-1], params.kappa)
    return params.v * dt + params.sigma * sqrt_dt * dm + params.gamma * sqrt_dt * dm * h


def _design(levels: np.ndarray, dt: float, kappa: float | None) -> np.ndarray:
    """Columns multiplying (v, sigma, gamma) in the model returns."""
    dm = np.diff(levels.astype(float))
    sqrt_dt = math.sqrt(dt)
    columns = [np.full(dm.size, dt), sqrt_dt * dm]
    if kappa is not None:
        columns.append(sqrt_dt * dm * student_t_density(sqrt_dt * levels[:-1], kappa))
    return np.column_stack(columns)


def _profile_start(returns: np.ndarray, levels: np.ndarray, dt: float, kappa_bounds) -> np.ndarray:
    """Least squares in (v, sigma, gamma) with kappa profiled over its box."""

    def sse(kappa: float) -> float:
        X = _design(levels, dt, kappa)
        coef, *_ = np.linalg.lstsq(X, returns, rcond=None)
        return float(np.sum((returns - X @ coef) ** 2))

    grid = np.linspace(*kappa_bounds, 26)
    values = [sse(k) for k in grid]
    i = int(np.argmin(values))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    kappa = optimize.minimize_scalar(sse, bounds=(lo, hi), method="bounded", options={"xatol": 1e-8}).x
    if sse(kappa) > values[i]:
        kappa = grid[i]
    coef, *_ = np.linalg.lstsq(_design(levels, dt, kappa), returns, rcond=None)
    return np.array([*coef, kappa])


def fit_higher_moment(
    returns: np.ndarray,
    path: SkewPath,
    dt: float = 1.0 / 252,
    *,
    kappa_bounds: tuple[float, float] = KAPPA_BOUNDS,
    starts: int = 8,
    seed: int = 0,
    maxiter: int = 500,
    fatol: float = 1e-10,
    disable_gamma: bool = False,
) -> HigherMomentFit:
    """Least-squares fit of (v, sigma, gamma, kappa) along a given walk path.

    Nelder-Mead runs from ``starts`` Latin-hypercube points and from the
    profiled least-squares point; kappa is clamped to ``kappa_bounds`` inside
    the objective.

    Raises:
        FitFailure: If no start converged; ``incumbent`` holds the best fit.
    """
    returns = np.asarray(returns, dtype=float)
    if returns.size < 4:
        raise InvalidArgumentError("fit_higher_moment needs at least four returns")
    if path.n < returns.size:
        raise InvalidArgumentError(f"path has {path.n} steps but there are {returns.size} returns")
    levels = path.steps[: returns.size + 1]
    n = returns.size

    if disable_gamma:
        X = _design(levels, dt, None)
        (v, sigma), *_ = np.linalg.lstsq(X, returns, rcond=None)
        objective = float(np.sum((returns - X @ np.array([v, sigma])) ** 2))
        params = HigherMomentParams(float(v), float(sigma), 0.0, None)
        return HigherMomentFit(params, math.sqrt(objective / n), objective, True, 1)

    lo_k, hi_k = kappa_bounds

    def objective(x: np.ndarray) -> float:
        kappa = float(np.clip(x[3], lo_k, hi_k))
        model = HigherMomentParams(x[0], x[1], x[2], kappa)
        return float(np.sum((returns - higher_moment_returns(model, levels, dt)) ** 2))

    box = START_BOX.copy()
    box[3] = kappa_bounds
    lhs = qmc.scale(qmc.LatinHypercube(d=4, seed=seed).random(starts), box[:, 0], box[:, 1])
    initial_points = [_profile_start(returns, levels, dt, kappa_bounds), *lhs]

    best = None
    any_converged = False
    for x0 in initial_points:
        result = optimize.minimize(
            objective,
            x0,
            method="Nelder-Mead",
            options={"maxiter": maxiter, "fatol": fatol, "xatol": 1e-8},
        )
        any_converged |= bool(result.success)
        if best is None or result.fun < best.fun:
            best = result

    v, sigma, gamma, kappa = best.x
    params = HigherMomentParams(float(v), float(sigma), float(gamma), float(np.clip(kappa, lo_k, hi_k)))
    fit = HigherMomentFit(
        params=params,
        rmse=math.sqrt(best.fun / n),
        objective=float(best.fun),
        converged=any_converged,
        starts=len(initial_points),
    )
    if not any_converged:
        raise FitFailure(f"higher-moment fit did not converge from {fit.starts} starts", incumbent=asdict(fit))
    logger.info("Higher-moment fit: kappa=%.3f gamma=%.3g RMSE=%.3g", params.kappa, gamma, fit.rmse)
    return fit


def fit_higher_moment_joint(
    returns: np.ndarray,
    alpha: float,
    ensemble_size: int,
    seed: int,
    dt: float = 1.0 / 252,
    *,
    block_size: int = DEFAULT_BLOCK_SIZE,
    **options,
) -> HigherMomentFit:
    """Fit the path and the parameters together over a walk ensemble.

    Every path is scored by its profiled least-squares fit; the best path is
    then refined with ``fit_higher_moment``, whose ``FitFailure`` carries the
    chosen path index.
    """
    returns = np.asarray(returns, dtype=float)
    kappa_bounds = options.get("kappa_bounds", KAPPA_BOUNDS)
    best_index, best_sse, best_steps = -1, math.inf, None
    for offset, levels in iter_walk_blocks(alpha, returns.size, ensemble_size, seed, block_size=block_size):
        for i, row in enumerate(levels):
            x = _profile_start(returns, row, dt, kappa_bounds)
            model = HigherMomentParams(*x)
            sse = float(np.sum((returns - higher_moment_returns(model, row, dt)) ** 2))
            if sse < best_sse:
                best_index, best_sse, best_steps = offset + i, sse, row.copy()
    if best_steps is None:
        raise FitFailure("no ensemble path could be scored")
    try:
        fit = fit_higher_moment(returns, SkewPath(best_steps, alpha=alpha, seed=seed), dt, **options)
    except FitFailure as e:
        raise FitFailure(str(e), incumbent={**e.incumbent, "path_index": best_index}) from e
    return HigherMomentFit(
        params=fit.params,
        rmse=fit.rmse,
        objective=fit.objective,
        converged=fit.converged,
        starts=fit.starts,
        path_index=best_index,
    )
