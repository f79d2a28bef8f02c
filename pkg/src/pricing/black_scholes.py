"""Black-Scholes reference pricer and implied volatility."""

from __future__ import annotations

import math

from scipy import optimize, stats

from src.utils.errors import InvalidArgumentError, NoSolutionError

SIGMA_MIN = 1e-6
SIGMA_MAX = 5.0
PRICE_TOL = 1e-10


def _check_kind(kind: str) -> str:
    kind = kind.lower()
    if kind not in ("call", "put"):
        raise InvalidArgumentError(f"kind must be 'call' or 'put', got {kind!r}")
    return kind


def bs_price(s0: float, K: float, T: float, rf: float, sigma: float, kind: str = "call") -> float:
    """Black-Scholes price of a European call or put; sigma = 0 gives the discounted intrinsic value."""
    kind = _check_kind(kind)
    if min(s0, K, T) <= 0:
        raise InvalidArgumentError("s0, K and T must be positive")
    if sigma < 0:
        raise InvalidArgumentError(f"sigma must be non-negative, got {sigma}")
    discounted_k = K * math.exp(-rf * T)
    if sigma == 0.0:
        forward_gap = s0 - discounted_k
        return max(forward_gap, 0.0) if kind == "call" else max(-forward_gap, 0.0)

    vol = sigma * math.sqrt(T)
    d1 = (math.log(s0 / K) + (rf + 0.5 * sigma**2) * T) / vol
    d2 = d1 - vol
    if kind == "call":
        return s0 * stats.norm.cdf(d1) - discounted_k * stats.norm.cdf(d2)
    return discounted_k * stats.norm.cdf(-d2) - s0 * stats.norm.cdf(-d1)


def bs_implied_vol(price: float, s0: float, K: float, T: float, rf: float, kind: str = "call") -> float:
    """Volatility in [1e-6, 5] reproducing ``price``.

    Raises:
        NoSolutionError: If ``price`` lies outside the no-arbitrage bounds or
            outside the prices reachable on the volatility bracket.
    """
    kind = _check_kind(kind)
    if min(s0, K, T) <= 0:
        raise InvalidArgumentError("s0, K and T must be positive")
    discounted_k = K * math.exp(-rf * T)
    if kind == "call":
        lower, upper = max(s0 - discounted_k, 0.0), s0
    else:
        lower, upper = max(discounted_k - s0, 0.0), discounted_k
    if not lower <= price <= upper:
        raise NoSolutionError(f"{kind} price {price} outside no-arbitrage bounds [{lower}, {upper}]")

    def gap(sigma: float) -> float:
        return bs_price(s0, K, T, rf, sigma, kind) - price

    lo_gap, hi_gap = gap(SIGMA_MIN), gap(SIGMA_MAX)
    if abs(lo_gap) <= PRICE_TOL:
        return SIGMA_MIN
    if abs(hi_gap) <= PRICE_TOL:
        return SIGMA_MAX
    if lo_gap > 0 or hi_gap < 0:
        raise NoSolutionError(f"{kind} price {price} not attainable for sigma in [{SIGMA_MIN}, {SIGMA_MAX}]")
    return optimize.brentq(gap, SIGMA_MIN, SIGMA_MAX, xtol=1e-14, rtol=1e-14, maxiter=200)
