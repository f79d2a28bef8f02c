"""Risk-neutral valuation on the GJR tree, with optional hedging transaction costs.

The one-step up-probability makes the replicating portfolio riskless. With a
cost lambda = lambda0 + lambda1 sqrt(dt) charged on the rebalanced stock
position, the exact probability is ((e^{r dt} + lambda) / (1 + lambda) - d) / (u - d),
which is the plain (m - d) / (u - d) form at lambda = 0.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from src.tree.gjr_tree import NaturalParams, build_tree, drift_sequence
from src.utils.errors import InfeasibleParameterError, InvalidArgumentError

logger = logging.getLogger(__name__)

Mode = Literal["exact", "leading_order"]

Q_FLOOR = 1e-12
MAX_CLAMP_FRACTION = 0.1
ENUMERATION_MAX_STEPS = 20


@dataclass(frozen=True)
class HTCParams:
    """Hedging transaction cost pair; (0, 0) disables the cost."""

    lambda0: float = 0.0
    lambda1: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lambda0) and math.isfinite(self.lambda1)):
            raise InvalidArgumentError("HTC parameters must be finite")
        if self.lambda0 < 0:
            raise InvalidArgumentError(f"lambda0 must be non-negative, got {self.lambda0}")
        if self.lambda0 == 0 and self.lambda1 != 0:
            raise InvalidArgumentError("an active transaction cost needs lambda0 > 0")

    @property
    def active(self) -> bool:
        return self.lambda0 > 0

    def effective(self, dt: float) -> float:
        """lambda_dt = lambda0 + lambda1 sqrt(dt)."""
        return self.lambda0 + self.lambda1 * math.sqrt(dt)


NO_HTC = HTCParams()


@dataclass(frozen=True)
class RiskNeutralContext:
    """Everything needed to move from the natural tree to risk-neutral prices."""

    natural: NaturalParams
    rf: float
    htc: HTCParams = NO_HTC
    mode: Mode = "exact"
    q_floor: float = Q_FLOOR
    max_clamp_fraction: float = MAX_CLAMP_FRACTION

    def __post_init__(self) -> None:
        if not (math.isfinite(self.rf) and self.rf >= 0):
            raise InvalidArgumentError(f"rf must be a non-negative rate, got {self.rf}")
        if self.mode not in ("exact", "leading_order"):
            raise InvalidArgumentError(f"mode must be 'exact' or 'leading_order', got {self.mode!r}")
        if 1.0 + self.htc.effective(self.natural.dt) <= 0:
            raise InfeasibleParameterError("1 + lambda_dt must be positive")

    @property
    def lam(self) -> float:
        return self.htc.effective(self.natural.dt)

    @property
    def target_drift(self) -> float:
        """Per-step risk-neutral log-return mean (r/(1 + lambda0) - sigma^2/2) dt."""
        p = self.natural
        return (self.rf / (1.0 + self.htc.lambda0) - 0.5 * p.sigma**2) * p.dt


@dataclass(frozen=True)
class QSchedule:
    """Per-step probabilities q_0..q_{n-1} and where clamping occurred."""

    q: np.ndarray
    clamped: np.ndarray

    @property
    def clamp_count(self) -> int:
        return int(self.clamped.sum())


@dataclass(frozen=True)
class EccSpec:
    """European contingent claim paying ``payoff(S_T)`` at ``expiry``."""

    payoff: Callable[[np.ndarray], np.ndarray]
    expiry: float
    kind: Literal["call", "put", "custom"] = "custom"
    strike: float | None = None

    @classmethod
    def call(cls, strike: float, expiry: float) -> EccSpec:
        return cls(lambda s: np.maximum(s - strike, 0.0), expiry, "call", strike)

    @classmethod
    def put(cls, strike: float, expiry: float) -> EccSpec:
        return cls(lambda s: np.maximum(strike - s, 0.0), expiry, "put", strike)

    @classmethod
    def vanilla(cls, kind: str, strike: float, expiry: float) -> EccSpec:
        if kind == "call":
            return cls.call(strike, expiry)
        if kind == "put":
            return cls.put(strike, expiry)
        raise InvalidArgumentError(f"kind must be 'call' or 'put', got {kind!r}")

    def __call__(self, prices: np.ndarray) -> np.ndarray:
        values = np.asarray(self.payoff(np.asarray(prices, dtype=float)), dtype=float)
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("payoff produced non-finite values")
        return values


@dataclass(frozen=True)
class PricingResult:
    """Price at the root, the replication deltas per step and the q schedule."""

    price: float
    deltas: list[np.ndarray] = field(repr=False)
    q: np.ndarray = field(repr=False)
    clamp_count: int = 0


def _step_drifts(p: NaturalParams) -> np.ndarray:
    """Natural log-drift of each step, (v_{k+1} - v_k) dt for k = 0..n-1."""
    return np.diff(drift_sequence(p.mu, p.sigma, p.beta, p.n)) * p.dt


def _raw_q(ctx: RiskNeutralContext) -> np.ndarray:
    p = ctx.natural
    if ctx.mode == "exact":
        s = p.sigma * p.sqrt_dt
        g = _step_drifts(p)
        lam = ctx.lam
        if lam == 0.0:
            numerator = np.exp(ctx.rf * p.dt - g)
        else:
            numerator = (math.exp(ctx.rf * p.dt) + lam) / (1.0 + lam) * np.exp(-g)
        return (numerator - math.exp(-s)) / (math.exp(s) - math.exp(-s))

    k = np.arange(p.n, dtype=float)
    lambda0, lambda1 = ctx.htc.lambda0, ctx.htc.lambda1
    theta = (p.mu + 0.5 * p.sigma**2 - ctx.rf / (1.0 + lambda0)) / p.sigma
    # at k = 0 the exact drift also carries the -sigma beta offset of v_0 = 0; this expansion drops it
    skew = p.beta * (np.sqrt(k + 1.0) - np.sqrt(k)) * math.sqrt(2.0 * p.dt / math.pi)
    cost = lambda1 * ctx.rf * p.dt / (2.0 * p.sigma * (1.0 + lambda0) ** 2)
    return 0.5 * (1.0 - theta * p.sqrt_dt - skew) - cost


def q_schedule(ctx: RiskNeutralContext) -> QSchedule:
    """All per-step probabilities, clamped to [q_floor, 1 - q_floor].

    Raises:
        InfeasibleParameterError: If more than ``max_clamp_fraction`` of the
            steps needed clamping.
    """
    raw = _raw_q(ctx)
    lo, hi = ctx.q_floor, 1.0 - ctx.q_floor
    clamped = ~((raw >= lo) & (raw <= hi))
    q = np.clip(np.nan_to_num(raw, nan=0.5), lo, hi)
    if clamped.any():
        fraction = clamped.mean()
        if fraction > ctx.max_clamp_fraction:
            raise InfeasibleParameterError(
                f"q outside (0, 1) on {fraction:.1%} of steps; parameters are not arbitrage free"
            )
        logger.warning(
            "Risk-neutral probability clamped on %d of %d steps (first at k=%d)",
            clamped.sum(),
            clamped.size,
            int(np.argmax(clamped)),
        )
    return QSchedule(q=q, clamped=clamped)


def q_prob(ctx: RiskNeutralContext, k: int) -> float:
    """Risk-neutral up-probability for the step from k to k + 1."""
    if not 0 <= k < ctx.natural.n:
        raise InvalidArgumentError(f"k must lie in [0, {ctx.natural.n - 1}], got {k}")
    return float(q_schedule(ctx).q[k])


def _check_expiry(ctx: RiskNeutralContext, spec: EccSpec) -> None:
    T = ctx.natural.T
    if abs(spec.expiry - T) > 1e-9 * max(1.0, T):
        raise InvalidArgumentError(f"claim expiry {spec.expiry} differs from tree horizon n*dt={T}")


def price_ecc(ctx: RiskNeutralContext, spec: EccSpec) -> PricingResult:
    """Backward induction f_k = e^{-r dt}(q f_up + (1 - q) f_down) with deltas.

    ``deltas[k][j]`` is the stock holding at node (k, 2j - k):
    (f_up - f_down) / ((1 + lambda_dt)(S_up - S_down)).
    """
    _check_expiry(ctx, spec)
    p = ctx.natural
    tree = build_tree(p)
    schedule = q_schedule(ctx)
    discount = math.exp(-ctx.rf * p.dt)
    scale = 1.0 + ctx.lam

    values = spec(tree.prices_at(p.n))
    deltas: list[np.ndarray] = [np.empty(0)] * p.n
    for k in range(p.n - 1, -1, -1):
        next_prices = tree.prices_at(k + 1)
        up, down = values[1:], values[:-1]
        deltas[k] = (up - down) / (scale * (next_prices[1:] - next_prices[:-1]))
        q = schedule.q[k]
        values = discount * (q * up + (1.0 - q) * down)

    return PricingResult(
        price=float(values[0]), deltas=deltas, q=schedule.q, clamp_count=schedule.clamp_count
    )


def price_by_enumeration(ctx: RiskNeutralContext, spec: EccSpec) -> float:
    """Discounted payoff summed over all 2^n paths weighted by their q-products."""
    _check_expiry(ctx, spec)
    p = ctx.natural
    if p.n > ENUMERATION_MAX_STEPS:
        raise InvalidArgumentError(f"enumeration is limited to n <= {ENUMERATION_MAX_STEPS}")
    q = q_schedule(ctx).q
    ups = (np.arange(2**p.n)[:, None] >> np.arange(p.n)) & 1
    weights = np.prod(np.where(ups == 1, q, 1.0 - q), axis=1)
    terminal = build_tree(p).prices_at(p.n)[ups.sum(axis=1)]
    return float(math.exp(-ctx.rf * p.T) * np.sum(weights * spec(terminal)))


def risk_neutral_step_moments(ctx: RiskNeutralContext, k: int) -> tuple[float, float]:
    """Mean and variance of ln(S_{k+1}/S_k) under q."""
    p = ctx.natural
    q = q_prob(ctx, k)
    s = p.sigma * p.sqrt_dt
    g = _step_drifts(p)[k]
    return g + (2.0 * q - 1.0) * s, 4.0 * q * (1.0 - q) * s**2


def martingale_check(ctx: RiskNeutralContext) -> float:
    """max_k |E_q[ln(S_{k+1}/S_k)] - target| over the lattice steps."""
    p = ctx.natural
    q = q_schedule(ctx).q
    means = _step_drifts(p) + (2.0 * q - 1.0) * p.sigma * p.sqrt_dt
    return float(np.max(np.abs(means - ctx.target_drift)))
