"""Implied-parameter surfaces from option quotes.

Each contract is inverted on its own daily tree (n = trading days to expiry,
dt = 1/252) for one scalar target while the remaining parameters stay fixed.
The scalar search scans a grid for the signed relative price error, then
refines with Brent's method inside a sign change or with a bounded
golden-section search around the best grid point.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from datetime import date
from typing import Literal, Sequence

import numpy as np
import pandas as pd
from scipy import optimize
from tqdm import tqdm

from src.pricing.black_scholes import bs_price
from src.pricing.path_dependent import EtaModel, price_path_dependent
from src.pricing.risk_neutral import MAX_CLAMP_FRACTION, Q_FLOOR, EccSpec, HTCParams, Mode, RiskNeutralContext, price_ecc
from src.tree.gjr_tree import NaturalParams
from src.utils.errors import GjrError, InvalidArgumentError

logger = logging.getLogger(__name__)

Target = Literal["mu", "beta", "sigma", "lambda0", "lambda1", "pd_sigma", "bs_sigma"]
Flag = Literal["ok", "boundary", "non_identifiable"]

TARGETS: tuple[str, ...] = ("mu", "beta", "sigma", "lambda0", "lambda1", "pd_sigma", "bs_sigma")
LOG_GRID_TARGETS = frozenset({"sigma", "pd_sigma", "bs_sigma", "lambda0"})
GRID_POINTS = 64
XTOL = 1e-8
BETA_MARGIN = 1e-6
HTC_STARTS = (1e-8, 1e-3, 0.1, 1.0, 10.0, 100.0)
LAMBDA0_BOUNDS = (1e-8, 1e3)
MIN_HTC_QUOTES = 10


@dataclass(frozen=True)
class OptionQuote:
    """One listed contract; the market price is the bid/ask mid."""

    quote_date: date
    expiry_date: date
    strike: float
    kind: Literal["call", "put"]
    bid: float
    ask: float
    spot: float
    rf: float

    def __post_init__(self) -> None:
        if self.kind not in ("call", "put"):
            raise InvalidArgumentError(f"kind must be 'call' or 'put', got {self.kind!r}")
        if not (self.strike > 0 and self.spot > 0):
            raise InvalidArgumentError("strike and spot must be positive")
        if self.bid > self.ask:
            raise InvalidArgumentError(f"crossed quote: bid {self.bid} > ask {self.ask}")
        if not self.expiry_date > self.quote_date:
            raise InvalidArgumentError("expiry_date must follow quote_date")

    @property
    def mid(self) -> float:
        return 0.5 * (self.bid + self.ask)

    @property
    def trading_days(self) -> int:
        return int(np.busday_count(self.quote_date, self.expiry_date))

    @property
    def moneyness(self) -> float:
        return self.strike / self.spot


@dataclass(frozen=True)
class CalibrationContext:
    """Parameters held fixed while one target is inverted.

    ``v`` is the natural log drift of the path-dependent tree; it defaults to
    ``mu`` when unset. ``gamma``, ``h_id`` and ``kappa`` only matter for the
    ``pd_sigma`` target.
    """

    mu: float
    sigma: float
    beta: float
    lambda0: float = 0.0
    lambda1: float = 0.0
    mode: Mode = "exact"
    dt: float = 1.0 / 252
    v: float | None = None
    gamma: float = 0.0
    h_id: str = "student_t"
    kappa: float | None = 6.0
    pd_enumerate_max_steps: int = 16
    mc_paths: int = 20_000
    seed: int = 0
    q_floor: float = Q_FLOOR
    max_clamp_fraction: float = MAX_CLAMP_FRACTION

    @property
    def htc(self) -> HTCParams:
        return HTCParams(self.lambda0, self.lambda1)


@dataclass(frozen=True)
class ImpliedPoint:
    """Inverted value for one contract; holes carry NaN value and residual."""

    quote: OptionQuote
    target: str
    value: float
    residual: float
    flag: Flag

    @property
    def moneyness(self) -> float:
        return self.quote.moneyness

    @property
    def trading_days(self) -> int:
        return self.quote.trading_days


@dataclass(frozen=True)
class ImpliedSurface:
    """One point per contract, ordered by (maturity, moneyness)."""

    parameter: str
    points: tuple[ImpliedPoint, ...]
    context: CalibrationContext | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def moneyness(self) -> np.ndarray:
        return np.array([p.moneyness for p in self.points])

    @property
    def maturity_days(self) -> np.ndarray:
        return np.array([p.trading_days for p in self.points])

    @property
    def values(self) -> np.ndarray:
        return np.array([p.value for p in self.points])

    @property
    def residuals(self) -> np.ndarray:
        return np.array([p.residual for p in self.points])

    @property
    def holes(self) -> int:
        return sum(p.flag == "non_identifiable" for p in self.points)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "moneyness": self.moneyness,
                "T_days": self.maturity_days,
                "value": self.values,
                "residual": self.residuals,
                "flag": [p.flag for p in self.points],
            }
        )


@dataclass(frozen=True)
class HtcFit:
    lambda0: float
    lambda1: float
    rel_mse: float
    converged: bool
    quotes: int


def default_bounds(target: str, dt: float = 1.0 / 252) -> tuple[float, float]:
    """Search interval for ``target``."""
    if target in ("sigma", "pd_sigma", "bs_sigma"):
        return 1e-4, 5.0
    if target == "mu":
        return -5.0, 5.0
    if target == "beta":
        edge = (1.0 - BETA_MARGIN) / math.sqrt(dt)
        return -edge, edge
    if target == "lambda0":
        return LAMBDA0_BOUNDS
    if target == "lambda1":
        return -1e3, 1e3
    raise InvalidArgumentError(f"unknown calibration target {target!r}; expected one of {TARGETS}")


def model_price(quote: OptionQuote, ctx: CalibrationContext, target: str | None = None, value: float | None = None) -> float:
    """Model price of ``quote`` with ``target`` set to ``value`` on the daily tree."""
    n = quote.trading_days
    if n < 1:
        raise InvalidArgumentError(f"contract expiring {quote.expiry_date} has no trading day left")
    T = n * ctx.dt

    if target is not None:
        key = "sigma" if target in ("pd_sigma", "bs_sigma") else target
        if key not in ("mu", "beta", "sigma", "lambda0", "lambda1"):
            raise InvalidArgumentError(f"unknown calibration target {target!r}")
        ctx = replace(ctx, **{key: value})

    if target == "bs_sigma":
        return bs_price(quote.spot, quote.strike, T, quote.rf, ctx.sigma, quote.kind)

    spec = EccSpec.vanilla(quote.kind, quote.strike, T)
    if target == "pd_sigma":
        model = EtaModel(ctx.sigma, ctx.gamma, ctx.h_id, ctx.kappa, ctx.dt)
        v = ctx.mu if ctx.v is None else ctx.v
        if n <= ctx.pd_enumerate_max_steps:
            return price_path_dependent(model, v, quote.rf, quote.spot, spec, n, mode=ctx.mode).price
        return price_path_dependent(
            model, v, quote.rf, quote.spot, spec, n, "monte_carlo", ctx.mc_paths, ctx.seed, mode=ctx.mode
        ).price

    natural = NaturalParams(mu=ctx.mu, sigma=ctx.sigma, beta=ctx.beta, dt=ctx.dt, n=n, s0=quote.spot)
    rn = RiskNeutralContext(natural, quote.rf, ctx.htc, ctx.mode, ctx.q_floor, ctx.max_clamp_fraction)
    return price_ecc(rn, spec).price


def _anchor(target: str, ctx: CalibrationContext, lo: float, hi: float) -> float:
    """Current context value of ``target`` clipped into the search interval."""
    key = "sigma" if target in ("pd_sigma", "bs_sigma") else target
    return min(max(float(getattr(ctx, key)), lo), hi)


def _grid(target: str, lo: float, hi: float, points: int) -> np.ndarray:
    if target in LOG_GRID_TARGETS:
        return np.geomspace(lo, hi, points)
    return np.linspace(lo, hi, points)


def implied_point(
    quote: OptionQuote,
    target: str,
    ctx: CalibrationContext,
    bounds: tuple[float, float] | None = None,
    *,
    grid_points: int = GRID_POINTS,
    xtol: float = XTOL,
) -> ImpliedPoint:
    """Minimize ((C_model - C_market)/C_market)^2 over the scalar ``target``.

    Grid points where the model cannot price (infeasible probabilities,
    non-positive volatility) count as missing. A flat or fully missing error
    curve yields a ``non_identifiable`` hole instead of an exception. Every
    sign change of the grid is solved with Brent's method; when the price is
    not monotone in the target the root nearest the context's current value
    is kept.
    """
    if not quote.mid > 0:
        raise InvalidArgumentError(f"quote mid must be positive, got {quote.mid}")
    lo, hi = bounds if bounds is not None else default_bounds(target, ctx.dt)
    if not lo < hi:
        raise InvalidArgumentError(f"empty bounds [{lo}, {hi}] for {target}")
    market = quote.mid

    def signed_error(x: float) -> float:
        try:
            return (model_price(quote, ctx, target, float(x)) - market) / market
        except GjrError:
            return math.nan

    xs = _grid(target, lo, hi, grid_points)
    errors = np.array([signed_error(x) for x in xs])
    finite = np.isfinite(errors)
    if finite.sum() < 2 or np.ptp(errors[finite]) == 0.0:
        logger.debug("Flat error curve for %s at K/S=%.3f T=%d", target, quote.moneyness, quote.trading_days)
        return ImpliedPoint(quote, target, math.nan, math.nan, "non_identifiable")

    anchor = _anchor(target, ctx, lo, hi)
    roots = [float(x) for x, e in zip(xs, errors) if e == 0.0]
    for j in range(xs.size - 1):
        if finite[j] and finite[j + 1] and errors[j] * errors[j + 1] < 0:
            roots.append(optimize.brentq(signed_error, xs[j], xs[j + 1], xtol=xtol, maxiter=200))
    if roots:
        # the price need not be monotone in the target; keep the root nearest the context value
        value = min(roots, key=lambda x: (abs(x - anchor), x))
        if len(roots) > 1:
            logger.debug(
                "%d roots for %s at K/S=%.3f T=%d; kept %.6g nearest %.6g",
                len(roots), target, quote.moneyness, quote.trading_days, value, anchor,
            )
        return ImpliedPoint(quote, target, float(value), float(signed_error(value) ** 2), "ok")

    best = int(np.nanargmin(np.abs(errors)))
    left, right = xs[max(best - 1, 0)], xs[min(best + 1, xs.size - 1)]
    result = optimize.minimize_scalar(
        lambda x: signed_error(x) ** 2 if np.isfinite(signed_error(x)) else math.inf,
        bounds=(left, right),
        method="bounded",
        options={"xatol": xtol},
    )
    value, residual = float(xs[best]), float(errors[best] ** 2)
    if np.isfinite(result.fun) and result.fun < residual:
        value, residual = float(result.x), float(result.fun)
    at_edge = min(value - lo, hi - value) <= max(xtol, 1e-9 * (hi - lo))
    return ImpliedPoint(quote, target, value, residual, "boundary" if at_edge else "ok")


def _surface_order(quote: OptionQuote) -> tuple:
    return (quote.trading_days, quote.moneyness, quote.kind, quote.expiry_date)


def build_surface(
    quotes: Sequence[OptionQuote],
    target: str,
    ctx: CalibrationContext,
    bounds: tuple[float, float] | None = None,
    *,
    progress: bool = False,
    **options,
) -> ImpliedSurface:
    """Run ``implied_point`` per contract; one surface point per quote."""
    if not quotes:
        raise InvalidArgumentError("build_surface needs at least one quote")
    default_bounds(target, ctx.dt)
    ordered = sorted(quotes, key=_surface_order)
    points = tuple(
        implied_point(q, target, ctx, bounds, **options)
        for q in tqdm(ordered, desc=f"Implied {target}", disable=not progress)
    )
    surface = ImpliedSurface(target, points, ctx)
    logger.info("Built %s surface: %d points, %d holes", target, len(surface), surface.holes)
    return surface


def deviation_surface(
    a: ImpliedSurface, b: ImpliedSurface, mode: Literal["percent", "difference"] = "percent"
) -> ImpliedSurface:
    """Percent deviation 100 (a - b) / b or the plain difference a - b."""
    if mode not in ("percent", "difference"):
        raise InvalidArgumentError(f"mode must be 'percent' or 'difference', got {mode!r}")
    if len(a) != len(b) or not (
        np.array_equal(a.moneyness, b.moneyness) and np.array_equal(a.maturity_days, b.maturity_days)
    ):
        raise InvalidArgumentError("deviation surfaces need identical grids")

    base = b.values
    if mode == "percent":
        if np.any(base[np.isfinite(base)] == 0.0):
            raise InvalidArgumentError("percent deviation divides by zero; use mode='difference'")
        values = 100.0 * (a.values - base) / base
    else:
        values = a.values - base

    points = []
    for pa, pb, value in zip(a.points, b.points, values):
        hole = "non_identifiable" in (pa.flag, pb.flag)
        flag: Flag = "non_identifiable" if hole else ("boundary" if "boundary" in (pa.flag, pb.flag) else "ok")
        residual = math.nan if hole else max(pa.residual, pb.residual)
        points.append(ImpliedPoint(pa.quote, f"{a.parameter}-{b.parameter}", float(value), residual, flag))
    return ImpliedSurface(f"{mode}:{a.parameter}-{b.parameter}", tuple(points), a.context)


def htc_rel_mse(quotes: Sequence[OptionQuote], ctx: CalibrationContext, lambda0: float, lambda1: float) -> float:
    """Mean squared relative pricing error over ``quotes`` at (lambda0, lambda1)."""
    trial = replace(ctx, lambda0=lambda0, lambda1=lambda1)
    errors = [(model_price(q, trial) - q.mid) / q.mid for q in quotes]
    return float(np.mean(np.square(errors)))


def fit_htc(
    quotes: Sequence[OptionQuote],
    ctx: CalibrationContext,
    *,
    starts: Sequence[float] = HTC_STARTS,
    maxiter: int = 2000,
) -> HtcFit:
    """Fit (lambda0, lambda1) to a chain by Nelder-Mead over (ln lambda0, lambda1).

    Every start has lambda1 = 0; the objective is +inf wherever the tree is
    infeasible. When no start converges the best incumbent is returned with a
    warning; when every start is infeasible the incumbent is the first start
    with an infinite relMSE.
    """
    if not starts:
        raise InvalidArgumentError("fit_htc needs at least one lambda0 start")
    usable = [q for q in quotes if q.mid > 0 and q.trading_days >= 1]
    if len(usable) < MIN_HTC_QUOTES:
        raise InvalidArgumentError(f"fit_htc needs at least {MIN_HTC_QUOTES} quotes, got {len(usable)}")
    log_lo, log_hi = (math.log(b) for b in LAMBDA0_BOUNDS)

    def objective(x: np.ndarray) -> float:
        if not log_lo <= x[0] <= log_hi:
            return math.inf
        try:
            return htc_rel_mse(usable, ctx, math.exp(x[0]), float(x[1]))
        except GjrError:
            return math.inf

    best = None
    converged = False
    for lambda0 in starts:
        x0 = np.array([math.log(lambda0), 0.0])
        if not np.isfinite(objective(x0)):
            continue
        result = optimize.minimize(
            objective, x0, method="Nelder-Mead",
            options={"xatol": 1e-8, "fatol": 1e-16, "maxiter": maxiter},
        )
        converged |= bool(result.success)
        if best is None or result.fun < best.fun:
            best = result
        logger.debug("HTC start lambda0=%g -> relMSE=%.4g", lambda0, result.fun)

    if best is None:
        logger.warning("Every HTC start is infeasible for this chain; returning the first start untried")
        return HtcFit(float(starts[0]), 0.0, math.inf, converged=False, quotes=len(usable))
    if not converged:
        logger.warning("HTC fit did not converge; returning best incumbent")
    fit = HtcFit(
        lambda0=math.exp(best.x[0]),
        lambda1=float(best.x[1]),
        rel_mse=float(best.fun),
        converged=converged,
        quotes=len(usable),
    )
    logger.info("HTC fit: lambda0=%.4g lambda1=%.4g relMSE=%.4g", fit.lambda0, fit.lambda1, fit.rel_mse)
    return fit
