"""FastAPI application exposing the GJR pricer."""

from __future__ import annotations

from contextlib import asynccontextmanager
from datetime import date
from typing import Any, Literal

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

import src
from src.calibration.implied import CalibrationContext, OptionQuote, implied_point
from src.pricing.black_scholes import bs_price
from src.pricing.risk_neutral import NO_HTC, EccSpec, HTCParams, RiskNeutralContext, price_ecc
from src.tree.gjr_tree import NaturalParams, exact_return_moments, return_moments, tree_moments
from src.utils.config import Config
from src.utils.errors import InvalidArgumentError, NumericalError

# ---------------------------------------------------------------------------
# App state, loaded once on startup
# ---------------------------------------------------------------------------

state: dict[str, Any] = {}


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Load numerical defaults once on startup."""
    config = Config()
    state["dt"] = float(config.get("tree.dt", 1.0 / 252))
    state["mode"] = config.get("pricing.mode", "exact")
    yield
    state.clear()


app = FastAPI(
    title="GJR Pricing",
    description="Skew random walk trees: prices, implied volatility and return moments",
    version=src.__version__,
    lifespan=lifespan,
)


# ---------------------------------------------------------------------------
# Request / Response models
# ---------------------------------------------------------------------------

class TreeIn(BaseModel):
    mu: float = 0.0
    sigma: float = Field(..., gt=0, description="Annualized volatility")
    beta: float = 0.0
    n: int = Field(default=252, ge=1, le=5000, description="Number of daily steps")
    dt: float | None = Field(default=None, gt=0, description="Step size in years; config default when unset")


class PriceRequest(TreeIn):
    s0: float = Field(..., gt=0)
    strike: float = Field(..., gt=0)
    rf: float = Field(default=0.0, ge=0)
    kind: Literal["call", "put"] = "call"
    lambda0: float = Field(default=0.0, ge=0)
    lambda1: float = 0.0
    mode: Literal["exact", "leading_order"] | None = None


class PriceResponse(BaseModel):
    price: float
    delta: float
    black_scholes: float
    clamp_count: int


class ImpliedVolRequest(BaseModel):
    quote_date: str = Field(..., description="ISO-8601 quote date")
    expiry_date: str = Field(..., description="ISO-8601 expiry date")
    strike: float = Field(..., gt=0)
    kind: Literal["call", "put"] = "call"
    bid: float = Field(..., ge=0)
    ask: float = Field(..., ge=0)
    spot: float = Field(..., gt=0)
    rf: float = Field(default=0.0, ge=0)
    mu: float = 0.0
    sigma: float = Field(default=0.2, gt=0, description="Fixed sigma for non-volatility targets")
    beta: float = 0.0
    target: Literal["sigma", "bs_sigma", "mu", "beta"] = "sigma"


class ImpliedVolResponse(BaseModel):
    target: str
    value: float | None
    residual: float | None
    flag: str
    trading_days: int


class MomentsResponse(BaseModel):
    alpha: float
    mean: float
    variance: float
    exact_mean: float
    exact_variance: float
    step_skewness: float
    step_excess_kurtosis: float


class HealthResponse(BaseModel):
    status: str
    version: str


def _dt(value: float | None) -> float:
    return value if value is not None else state.get("dt", 1.0 / 252)


# ---------------------------------------------------------------------------
# Endpoints
# ---------------------------------------------------------------------------

@app.get("/health", response_model=HealthResponse)
async def health_check() -> HealthResponse:
    return HealthResponse(status="healthy", version=src.__version__)


@app.post("/price", response_model=PriceResponse)
def price(request: PriceRequest) -> PriceResponse:
    """European call or put on the GJR tree, with optional transaction costs."""
    dt = _dt(request.dt)
    try:
        natural = NaturalParams(request.mu, request.sigma, request.beta, dt, request.n, request.s0)
        htc = HTCParams(request.lambda0, request.lambda1) if request.lambda0 > 0 else NO_HTC
        ctx = RiskNeutralContext(natural, request.rf, htc, request.mode or state.get("mode", "exact"))
        result = price_ecc(ctx, EccSpec.vanilla(request.kind, request.strike, natural.T))
        reference = bs_price(request.s0, request.strike, natural.T, request.rf, request.sigma, request.kind)
    except (InvalidArgumentError, NumericalError) as e:
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))

    return PriceResponse(
        price=result.price,
        delta=float(result.deltas[0][0]),
        black_scholes=reference,
        clamp_count=result.clamp_count,
    )


@app.post("/implied-vol", response_model=ImpliedVolResponse)
def implied_vol(request: ImpliedVolRequest) -> ImpliedVolResponse:
    """Invert one quote for sigma (GJR tree or Black-Scholes), mu or beta."""
    try:
        quote = OptionQuote(
            quote_date=date.fromisoformat(request.quote_date),
            expiry_date=date.fromisoformat(request.expiry_date),
            strike=request.strike,
            kind=request.kind,
            bid=request.bid,
            ask=request.ask,
            spot=request.spot,
            rf=request.rf,
        )
        ctx = CalibrationContext(mu=request.mu, sigma=request.sigma, beta=request.beta, dt=_dt(None))
        point = implied_point(quote, request.target, ctx)
    except (InvalidArgumentError, NumericalError, ValueError) as e:
        raise HTTPException(status_code=422, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))

    finite = point.flag != "non_identifiable"
    return ImpliedVolResponse(
        target=point.target,
        value=point.value if finite else None,
        residual=point.residual if finite else None,
        flag=point.flag,
        trading_days=point.trading_days,
    )


@app.post("/moments", response_model=MomentsResponse)
def moments(request: TreeIn) -> MomentsResponse:
    """Mean and variance of ln(S_n/S_0) plus the per-step higher moments."""
    try:
        params = NaturalParams(request.mu, request.sigma, request.beta, _dt(request.dt), request.n)
        mean, variance = return_moments(params, params.n)
        exact_mean, exact_variance = exact_return_moments(params, params.n)
        skew, kurt = tree_moments(params)
    except (InvalidArgumentError, NumericalError) as e:
        raise HTTPException(status_code=422, detail=str(e))

    return MomentsResponse(
        alpha=params.alpha_dt,
        mean=mean,
        variance=variance,
        exact_mean=exact_mean,
        exact_variance=exact_variance,
        step_skewness=skew,
        step_excess_kurtosis=kurt,
    )
