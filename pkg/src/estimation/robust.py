"""Logistic-weight robust regression.

Iteratively reweighted least squares through statsmodels ``RLM`` with a
logistic norm: weights tanh(z/c)/(z/c), scale MAD/0.6745 re-estimated each
iteration.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import statsmodels.api as sm
from scipy import integrate, optimize, special, stats
from statsmodels.robust.norms import RobustNorm

from src.utils.errors import DegenerateDataError, InvalidArgumentError

logger = logging.getLogger(__name__)

LOGISTIC_TUNING = 1.205
IRLS_MAXITER = 50
IRLS_TOL = 1e-8


class LogisticNorm(RobustNorm):
    """Logistic psi function psi(z) = c tanh(z / c)."""

    continuous = 2
    redescending = "not"

    def __init__(self, c: float = LOGISTIC_TUNING) -> None:
        if not c > 0:
            raise InvalidArgumentError(f"tuning constant must be positive, got {c}")
        self.c = c

    def rho(self, z):
        z = np.asarray(z, dtype=float)
        return self.c**2 * np.log(np.cosh(z / self.c))

    def psi(self, z):
        z = np.asarray(z, dtype=float)
        return self.c * np.tanh(z / self.c)

    def weights(self, z):
        u = np.asarray(z, dtype=float) / self.c
        small = np.abs(u) < 1e-8
        safe = np.where(small, 1.0, u)
        return np.where(small, 1.0, np.tanh(safe) / safe)

    def psi_deriv(self, z):
        z = np.asarray(z, dtype=float)
        return 1.0 - np.tanh(z / self.c) ** 2

    def __call__(self, z):
        return self.rho(z)


@dataclass(frozen=True)
class RobustFit:
    """Outcome of one robust regression.

    Attributes:
        params: Coefficients in column order of the design.
        resid: y - X params.
        weights: Final IRLS weights (ones for an exact fit).
        scale: Final residual scale (0 for an exact fit).
        iterations: IRLS iterations used (0 for an exact fit).
    """

    params: np.ndarray
    resid: np.ndarray
    weights: np.ndarray
    scale: float
    iterations: int

    @property
    def exact(self) -> bool:
        return self.iterations == 0


def robust_fit(
    y: np.ndarray,
    X: np.ndarray,
    *,
    tuning: float = LOGISTIC_TUNING,
    maxiter: int = IRLS_MAXITER,
    tol: float = IRLS_TOL,
) -> RobustFit:
    """Regress ``y`` on the columns of ``X`` with logistic IRLS.

    When the least-squares residuals have zero MAD the data fit the model
    exactly and the least-squares solution is returned as is.

    Raises:
        DegenerateDataError: If the design is rank deficient.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if y.shape[0] != X.shape[0]:
        raise InvalidArgumentError(f"y has {y.shape[0]} rows but X has {X.shape[0]}")
    if y.shape[0] <= X.shape[1]:
        raise DegenerateDataError(f"{y.shape[0]} observations cannot fit {X.shape[1]} coefficients")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
        raise DegenerateDataError("regression inputs contain non-finite values")
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise DegenerateDataError("design matrix is rank deficient")

    ols_params, *_ = np.linalg.lstsq(X, y, rcond=None)
    ols_resid = y - X @ ols_params
    if np.median(np.abs(ols_resid)) <= 1e-12 * (1.0 + np.max(np.abs(y))):
        logger.debug("Exact fit; skipping IRLS")
        return RobustFit(ols_params, ols_resid, np.ones_like(y), 0.0, 0)

    # RLM's default start is the unweighted WLS (= OLS) solution; passing
    # start_params explicitly breaks single-column designs (statsmodels squeezes it).
    result = sm.RLM(y, X, M=LogisticNorm(tuning)).fit(
        maxiter=maxiter, tol=tol, scale_est="mad", conv="weights"
    )
    iterations = int(result.fit_history["iteration"])
    if iterations >= maxiter:
        logger.debug("IRLS stopped at the iteration cap (%d)", maxiter)
    params = np.asarray(result.params, dtype=float)
    return RobustFit(
        params=params,
        resid=y - X @ params,
        weights=np.asarray(result.weights, dtype=float),
        scale=float(result.scale),
        iterations=iterations,
    )


@lru_cache(maxsize=8)
def log_chi2_location(tuning: float = LOGISTIC_TUNING) -> float:
    """Population logistic M-location of ln(Z^2), Z standard normal.

    This is the value the robust location fit of ln(R^2 / (k dt)) converges to
    for Gaussian returns with sigma = 1; subtracting it makes the volatility
    estimate consistent.
    """
    mad_const = stats.norm.ppf(0.75)

    def cdf(y: float) -> float:
        return float(special.erf(math.sqrt(math.exp(y) / 2.0)))

    def pdf(y: float) -> float:
        return math.exp(y / 2.0 - math.exp(y) / 2.0) / math.sqrt(2.0 * math.pi)

    def scale_at(m: float) -> float:
        half = optimize.brentq(lambda d: cdf(m + d) - cdf(m - d) - 0.5, 1e-9, 60.0)
        return half / mad_const

    def psi_mean(m: float, s: float) -> float:
        value, _ = integrate.quad(
            lambda y: math.tanh((y - m) / (tuning * s)) * pdf(y), -80.0, 6.0, limit=200
        )
        return value

    m = math.log(stats.chi2.median(1))
    for _ in range(100):
        s = scale_at(m)
        m_next = optimize.brentq(lambda mm: psi_mean(mm, s), -5.0, 2.0, xtol=1e-12)
        if abs(m_next - m) < 1e-10:
            return m_next
        m = m_next
    return m
