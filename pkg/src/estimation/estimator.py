"""Moving-window estimation of (sigma, mu, beta) from cumulative log-returns.

Step 1 fits the volatility from ln(R_k^2 / (k dt)) by logistic robust
regression. Step 2 solves the conditional least-squares problem for (mu, beta)
given sigma. Step 3 z-tests the combined normalized residuals of both steps.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view
from scipy import stats
from tqdm import tqdm

from src.estimation.robust import (
    IRLS_MAXITER,
    IRLS_TOL,
    LOGISTIC_TUNING,
    log_chi2_location,
    robust_fit,
)
from src.utils.errors import DegenerateDataError, InvalidArgumentError

logger = logging.getLogger(__name__)

MIN_STEP1_LENGTH = 30
R_FLOOR = 1e-12
DEFAULT_WINDOW = 252
BETA_MARGIN = 1e-12


@dataclass(frozen=True)
class ReturnSeries:
    """Cumulative log-returns relative to the series' own first price.

    Attributes:
        dates: Strictly increasing trading dates (datetime64[D]).
        cum_log_returns: R_0..R_{N-1} with R_0 = 0.
        dt: Step size in years.
    """

    dates: np.ndarray
    cum_log_returns: np.ndarray
    dt: float = 1.0 / 252

    def __post_init__(self) -> None:
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        values = np.asarray(self.cum_log_returns, dtype=float)
        if dates.shape != values.shape or values.ndim != 1 or values.size == 0:
            raise InvalidArgumentError("dates and cum_log_returns must be equal-length 1-d arrays")
        if values[0] != 0.0:
            raise InvalidArgumentError(f"R_0 must be 0, got {values[0]}")
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("cum_log_returns must be finite")
        if values.size > 1 and not np.all(np.diff(dates) > np.timedelta64(0, "D")):
            raise InvalidArgumentError("dates must be strictly increasing")
        if not self.dt > 0:
            raise InvalidArgumentError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "cum_log_returns", values)

    @classmethod
    def from_prices(cls, dates: Sequence, prices: Sequence[float], dt: float = 1.0 / 252) -> ReturnSeries:
        prices = np.asarray(prices, dtype=float)
        if np.any(prices <= 0):
            raise InvalidArgumentError("prices must be positive")
        return cls(dates=np.asarray(dates), cum_log_returns=np.log(prices / prices[0]), dt=dt)

    def __len__(self) -> int:
        return int(self.cum_log_returns.size)

    @property
    def end_date(self) -> np.datetime64:
        return self.dates[-1]

    @property
    def log_returns(self) -> np.ndarray:
        """Daily log-returns r_1..r_{N-1}."""
        return np.diff(self.cum_log_returns)

    def window(self, start: int, length: int) -> ReturnSeries:
        """Points start..start+length-1 re-based so the window starts at R = 0."""
        if length < 1 or start < 0 or start + length > len(self):
            raise InvalidArgumentError(
                f"window [{start}, {start + length}) exceeds a series of {len(self)} points"
            )
        values = self.cum_log_returns[start : start + length]
        return ReturnSeries(self.dates[start : start + length], values - values[0], self.dt)


@dataclass(frozen=True)
class WindowEstimate:
    """Parameter estimates for the window ending on ``window_end``."""

    window_end: np.datetime64
    sigma_hat: float
    mu_hat: float
    beta_hat: float
    alpha_hat: float
    pvalue: float
    dt: float = 1.0 / 252


@dataclass(frozen=True)
class PValueSummary:
    """Quartile summary of the window p-values for one window length."""

    length: int
    count: int
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    pvalues: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class SweepResult:
    summaries: dict[int, PValueSummary]
    recommended: int


def _step_index(window: ReturnSeries) -> tuple[np.ndarray, np.ndarray]:
    """k = 1..L-1 and the matching R_k."""
    k = np.arange(1, len(window), dtype=float)
    return k, window.cum_log_returns[1:]


def step1_sigma(
    window: ReturnSeries,
    *,
    tuning: float = LOGISTIC_TUNING,
    maxiter: int = IRLS_MAXITER,
    tol: float = IRLS_TOL,
    bias_correction: bool = False,
) -> tuple[float, np.ndarray]:
    """Volatility from the robust location of y_k = ln(R_k^2 / (k dt)).

    Returns:
        (sigma_hat, residuals e1) with sigma_hat = exp(intercept / 2).

    Raises:
        InvalidArgumentError: If the window has fewer than 30 points.
        DegenerateDataError: If every R_k is zero.
    """
    if len(window) < MIN_STEP1_LENGTH:
        raise InvalidArgumentError(
            f"step 1 needs a window of at least {MIN_STEP1_LENGTH} points, got {len(window)}"
        )
    k, r = _step_index(window)
    if np.all(r == 0.0):
        raise DegenerateDataError("all cumulative returns in the window are zero")

    y = np.log(np.maximum(np.abs(r), R_FLOOR) ** 2 / (k * window.dt))
    fit = robust_fit(y, np.ones((y.size, 1)), tuning=tuning, maxiter=maxiter, tol=tol)
    intercept = float(fit.params[0])
    if bias_correction:
        intercept -= log_chi2_location(tuning)
    return math.exp(intercept / 2.0), fit.resid


def step2_mu_beta(window: ReturnSeries, sigma_hat: float) -> tuple[float, float, np.ndarray]:
    """Least squares of R_k on [k dt, sigma_hat sqrt(2k/pi) dt] with beta clamped.

    Returns:
        (mu_hat, beta_hat, residuals e2).
    """
    if not sigma_hat > 0:
        raise InvalidArgumentError(f"sigma_hat must be positive, got {sigma_hat}")
    k, r = _step_index(window)
    if k.size < 2:
        raise InvalidArgumentError("step 2 needs at least two observations")

    dt = window.dt
    a = k * dt
    b = sigma_hat * np.sqrt(2.0 * k / math.pi) * dt
    (mu, beta), *_ = np.linalg.lstsq(np.column_stack([a, b]), r, rcond=None)

    bound = 1.0 / math.sqrt(dt)
    if abs(beta) > bound:
        beta = math.copysign(bound, beta)
        # mu re-solved with beta fixed at the bound
        mu = float(a @ (r - beta * b) / (a @ a))
        logger.debug("beta clamped to %.4f at window end %s", beta, window.end_date)
    e2 = r - mu * a - beta * b
    return float(mu), float(beta), e2


def step3_pvalue(e1: np.ndarray, e2: np.ndarray) -> float:
    """Two-sided z-test p-value for a zero mean of (e1 + e2) / sqrt(e1^2 + e2^2)."""
    e1 = np.asarray(e1, dtype=float)
    e2 = np.asarray(e2, dtype=float)
    if e1.shape != e2.shape:
        raise InvalidArgumentError(f"residual lengths differ: {e1.size} vs {e2.size}")
    if e1.size < 2:
        raise InvalidArgumentError("step 3 needs at least two residuals")

    norm = np.hypot(e1, e2)
    e = np.divide(e1 + e2, norm, out=np.zeros_like(norm), where=norm > 0)
    mean = float(e.mean())
    std = float(e.std(ddof=1))
    if std == 0.0:
        return 1.0 if mean == 0.0 else 0.0
    z = mean / (std / math.sqrt(e.size))
    return float(min(1.0, 2.0 * stats.norm.sf(abs(z))))


def estimate_window(window: ReturnSeries, **step1_options) -> WindowEstimate:
    """Run steps 1-3 on one window."""
    sigma_hat, e1 = step1_sigma(window, **step1_options)
    mu_hat, beta_hat, e2 = step2_mu_beta(window, sigma_hat)
    return WindowEstimate(
        window_end=window.end_date,
        sigma_hat=sigma_hat,
        mu_hat=mu_hat,
        beta_hat=beta_hat,
        alpha_hat=0.5 * (1.0 + beta_hat * math.sqrt(window.dt)),
        pvalue=step3_pvalue(e1, e2),
        dt=window.dt,
    )


def rolling_estimates(
    series: ReturnSeries,
    length: int = DEFAULT_WINDOW,
    *,
    progress: bool = False,
    **step1_options,
) -> list[WindowEstimate]:
    """Estimates for every moving window of ``length`` points (N - L + 1 windows)."""
    if length > len(series):
        raise InvalidArgumentError(f"window length {length} exceeds series length {len(series)}")
    starts = range(len(series) - length + 1)
    return [
        estimate_window(series.window(start, length), **step1_options)
        for start in tqdm(starts, desc=f"Windows L={length}", disable=not progress)
    ]


def window_sweep(
    series: ReturnSeries,
    lengths: Iterable[int],
    *,
    significance: float = 0.05,
    default: int = DEFAULT_WINDOW,
    progress: bool = False,
    **step1_options,
) -> SweepResult:
    """p-value distributions per window length and the recommended length.

    The recommendation is the smallest length whose median p-value is below
    ``significance``, else ``default``.
    """
    lengths = sorted(set(int(length) for length in lengths))
    if not lengths:
        raise InvalidArgumentError("window_sweep needs at least one length")
    if lengths[-1] > len(series):
        raise InvalidArgumentError(
            f"longest window {lengths[-1]} exceeds series length {len(series)}"
        )

    summaries: dict[int, PValueSummary] = {}
    for length in lengths:
        pvalues = np.array(
            [e.pvalue for e in rolling_estimates(series, length, progress=progress, **step1_options)]
        )
        q = np.quantile(pvalues, [0.0, 0.25, 0.5, 0.75, 1.0])
        summaries[length] = PValueSummary(length, pvalues.size, *map(float, q), pvalues=pvalues)
        logger.info("L=%d: %d windows, median p=%.4g", length, pvalues.size, q[2])

    recommended = next(
        (length for length in lengths if summaries[length].median < significance), default
    )
    return SweepResult(summaries=summaries, recommended=recommended)


def smooth_series(estimates: Sequence[WindowEstimate], window: int) -> list[WindowEstimate]:
    """Trailing moving average of sigma, mu and beta; alpha follows the smoothed beta.

    Each output keeps the end date and p-value of the last window it averages.
    """
    if window < 1:
        raise InvalidArgumentError(f"smoothing window must be >= 1, got {window}")
    if window > len(estimates):
        raise InvalidArgumentError(
            f"smoothing window {window} exceeds the {len(estimates)} available estimates"
        )
    table = np.array([(e.sigma_hat, e.mu_hat, e.beta_hat) for e in estimates], dtype=float)
    means = sliding_window_view(table, window, axis=0).mean(axis=-1)

    smoothed = []
    for est, (sigma, mu, beta) in zip(estimates[window - 1 :], means):
        bound = (1.0 - BETA_MARGIN) / math.sqrt(est.dt)
        beta = float(np.clip(beta, -bound, bound))
        smoothed.append(
            replace(
                est,
                sigma_hat=float(sigma),
                mu_hat=float(mu),
                beta_hat=beta,
                alpha_hat=0.5 * (1.0 + beta * math.sqrt(est.dt)),
            )
        )
    return smoothed


def estimate_parameters(
    series: ReturnSeries,
    window: int = DEFAULT_WINDOW,
    smoothing: int = DEFAULT_WINDOW,
    **options,
) -> WindowEstimate:
    """Smoothed estimate at the last date of ``series``."""
    return smooth_series(rolling_estimates(series, window, **options), smoothing)[-1]


def estimates_frame(estimates: Sequence[WindowEstimate]) -> pd.DataFrame:
    """Table with columns date, sigma, mu, beta, alpha, pvalue."""
    return pd.DataFrame(
        {
            "date": [str(e.window_end) for e in estimates],
            "sigma": [e.sigma_hat for e in estimates],
            "mu": [e.mu_hat for e in estimates],
            "beta": [e.beta_hat for e in estimates],
            "alpha": [e.alpha_hat for e in estimates],
            "pvalue": [e.pvalue for e in estimates],
        }
    )
