"""Natural-world GJR recombined tree.

Node (k, M) carries the price s0 * exp(v_k dt + M sigma sqrt(dt)) with
v_k = k mu + sigma beta (sqrt(2k / pi) - 1) for k >= 1 and v_0 = 0, so the
root is the spot price. Levels are stored as j = number of up-moves, M = 2j - k.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import pandas as pd

from src.process.skew_process import expected_walk_level, walk_ensemble
from src.utils.errors import InvalidArgumentError

logger = logging.getLogger(__name__)

TRADING_DAYS = 252
BETA_MARGIN = 1e-12


@dataclass(frozen=True)
class NaturalParams:
    """Natural-world parameters of the GJR tree.

    Attributes:
        mu: Annualized drift.
        sigma: Annualized volatility (> 0).
        beta: Skew parameter; |beta| sqrt(dt) must stay below 1.
        dt: Step size in years.
        n: Number of steps.
        s0: Spot price (> 0).
    """

    mu: float
    sigma: float
    beta: float
    dt: float = 1.0 / TRADING_DAYS
    n: int = TRADING_DAYS
    s0: float = 1.0

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise InvalidArgumentError(f"sigma must be positive, got {self.sigma}")
        if not self.s0 > 0:
            raise InvalidArgumentError(f"s0 must be positive, got {self.s0}")
        if not self.dt > 0:
            raise InvalidArgumentError(f"dt must be positive, got {self.dt}")
        if int(self.n) < 1 or int(self.n) != self.n:
            raise InvalidArgumentError(f"n must be an integer >= 1, got {self.n}")
        if not all(map(math.isfinite, (self.mu, self.sigma, self.beta))):
            raise InvalidArgumentError("mu, sigma and beta must be finite")
        if abs(self.beta) * math.sqrt(self.dt) >= 1.0 - BETA_MARGIN:
            raise InvalidArgumentError(
                f"|beta| sqrt(dt) must be < 1; beta={self.beta} is outside "
                f"(-{1 / math.sqrt(self.dt):.4f}, {1 / math.sqrt(self.dt):.4f})"
            )

    @property
    def sqrt_dt(self) -> float:
        return math.sqrt(self.dt)

    @property
    def T(self) -> float:
        return self.n * self.dt

    @property
    def alpha_dt(self) -> float:
        """Walk parameter (1 + beta sqrt(dt)) / 2."""
        return 0.5 * (1.0 + self.beta * self.sqrt_dt)


def drift_sequence(mu: float, sigma: float, beta: float, n: int) -> np.ndarray:
    """v_0..v_n with v_0 = 0."""
    k = np.arange(n + 1, dtype=float)
    v = k * mu + sigma * beta * (np.sqrt(2.0 * k / math.pi) - 1.0)
    v[0] = 0.0
    return v


@dataclass(frozen=True)
class GjrTree:
    """Recombined price lattice for one parameter set."""

    params: NaturalParams

    @cached_property
    def drift_seq(self) -> np.ndarray:
        p = self.params
        return drift_sequence(p.mu, p.sigma, p.beta, p.n)

    def prices_at(self, k: int) -> np.ndarray:
        """Prices at step ``k`` ordered by up-move count j = 0..k."""
        p = self.params
        if not 0 <= k <= p.n:
            raise InvalidArgumentError(f"k must lie in [0, {p.n}], got {k}")
        levels = 2 * np.arange(k + 1) - k
        return p.s0 * np.exp(self.drift_seq[k] * p.dt + levels * p.sigma * p.sqrt_dt)

    def price(self, k: int, m: int) -> float:
        """Price at node (k, M)."""
        if abs(m) > k or (m + k) % 2:
            raise InvalidArgumentError(f"level {m} is not reachable at step {k}")
        return float(self.prices_at(k)[(m + k) // 2])

    @cached_property
    def node_prices(self) -> np.ndarray:
        """Triangular array: row k holds ``prices_at(k)`` and NaN beyond column k."""
        n = self.params.n
        out = np.full((n + 1, n + 1), np.nan)
        for k in range(n + 1):
            out[k, : k + 1] = self.prices_at(k)
        return out

    @property
    def node_count(self) -> int:
        n = self.params.n
        return (n + 1) * (n + 2) // 2

    def to_frame(self) -> pd.DataFrame:
        """Long table (k, level, price) with level = M."""
        rows = [
            (k, 2 * j - k, price)
            for k in range(self.params.n + 1)
            for j, price in enumerate(self.prices_at(k))
        ]
        return pd.DataFrame(rows, columns=["k", "level", "price"])


@dataclass(frozen=True)
class PriceEnsemble:
    """Simulated walk levels and the prices they map to.

    Attributes:
        levels: Integer array (paths, n + 1).
        prices: Float array (paths, n + 1).
        seed: Seed of the walk ensemble.
    """

    levels: np.ndarray
    prices: np.ndarray
    seed: int

    @property
    def cum_log_returns(self) -> np.ndarray:
        return np.log(self.prices / self.prices[:, :1])

    def to_frame(self) -> pd.DataFrame:
        """Long table (path_id, k, price)."""
        count, width = self.prices.shape
        return pd.DataFrame(
            {
                "path_id": np.repeat(np.arange(count), width),
                "k": np.tile(np.arange(width), count),
                "price": self.prices.ravel(),
            }
        )


def build_tree(params: NaturalParams) -> GjrTree:
    """Build the lattice for ``params``."""
    tree = GjrTree(params)
    logger.debug(
        "Built GJR tree n=%d alpha_dt=%.6f nodes=%d", params.n, params.alpha_dt, tree.node_count
    )
    return tree


def path_prices(tree: GjrTree, levels: np.ndarray) -> np.ndarray:
    """Map walk levels (any leading shape, last axis k = 0..n) through the node formula."""
    p = tree.params
    levels = np.asarray(levels)
    return p.s0 * np.exp(tree.drift_seq * p.dt + levels * p.sigma * p.sqrt_dt)


def simulate_paths(tree: GjrTree, count: int, seed: int) -> PriceEnsemble:
    """Simulate ``count`` price paths driven by the walk with alpha_dt."""
    p = tree.params
    levels = walk_ensemble(p.alpha_dt, p.n, count, seed)
    logger.info("Simulated %d GJR paths (n=%d, seed=%d)", count, p.n, seed)
    return PriceEnsemble(levels=levels, prices=path_prices(tree, levels), seed=seed)


def cumulative_return_moments(
    mu: float, sigma: float, beta: float, dt: float, k: int
) -> tuple[float, float]:
    """Leading-order mean and variance of R_{k dt}; accepts sigma = 0."""
    if k < 1:
        raise InvalidArgumentError(f"k must be >= 1, got {k}")
    mean = mu * k * dt + sigma * beta * math.sqrt(2.0 * k / math.pi) * dt
    return mean, sigma**2 * k * dt


def return_moments(params: NaturalParams, k: int) -> tuple[float, float]:
    """Closed-form (mean, variance) of the cumulative log-return to step k.

    The mean mu k dt + sigma beta sqrt(2k/pi) dt is exact at k = 1 and holds to
    leading order beyond; ``exact_return_moments`` gives the exact values.
    """
    if not 1 <= k <= params.n:
        raise InvalidArgumentError(f"k must lie in [1, {params.n}], got {k}")
    return cumulative_return_moments(params.mu, params.sigma, params.beta, params.dt, k)


def exact_return_moments(params: NaturalParams, k: int) -> tuple[float, float]:
    """Exact (mean, variance) of R_{k dt} under the skew walk.

    Uses E[M_k] from the origin-visit count and E[M_k^2] = k.
    """
    if not 1 <= k <= params.n:
        raise InvalidArgumentError(f"k must lie in [1, {params.n}], got {k}")
    m1 = expected_walk_level(params.alpha_dt, k)
    v_k = drift_sequence(params.mu, params.sigma, params.beta, k)[k]
    mean = v_k * params.dt + params.sigma * params.sqrt_dt * m1
    variance = params.sigma**2 * params.dt * (k - m1**2)
    return mean, variance


def tree_moments(params: NaturalParams) -> tuple[float, float]:
    """Leading-order (skewness, excess kurtosis) of the tree returns."""
    skew = -math.sqrt(2.0 * params.dt / math.pi) * params.beta
    kurt = 8.0 * params.beta**2 * params.dt / math.pi
    return skew, kurt
