"""Pricing under the path-dependent GJR tree.

The step from k - 1 to k moves the log price by v dt +/- eta sqrt(dt) with the
local volatility eta = sigma + gamma h(sqrt(dt) M_{k-1}). S depends on the
whole path of M, so claims are priced by exhaustive enumeration for short
trees and by risk-neutral Monte Carlo otherwise.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np

from src.pricing.risk_neutral import MAX_CLAMP_FRACTION, Q_FLOOR, EccSpec, Mode
from src.process.kernels import HFunction, get_h
from src.utils.errors import InfeasibleParameterError, InvalidArgumentError
from src.utils.rng import child_rng

logger = logging.getLogger(__name__)

Method = Literal["enumerate", "monte_carlo"]

ENUMERATE_MAX_STEPS = 24
MIN_MC_PATHS = 1_000
BLOCK_STEPS = 16
MC_BATCH = 65_536


@dataclass(frozen=True)
class EtaModel:
    """Local factor volatility eta = sigma + gamma h(sqrt(dt) M).

    Attributes:
        sigma: Base volatility.
        gamma: Loading on h.
        h_id: Registered h identifier.
        kappa: Degrees of freedom when h is the Student-t density.
        dt: Step size in years.
    """

    sigma: float
    gamma: float = 0.0
    h_id: str = "student_t"
    kappa: float | None = 6.0
    dt: float = 1.0 / 252

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise InvalidArgumentError(f"dt must be positive, got {self.dt}")
        if self.sigma <= 0 and self.gamma == 0:
            raise InfeasibleParameterError(f"eta = sigma = {self.sigma} is not a volatility")
        if self.h_id == "student_t" and self.kappa is None:
            raise InvalidArgumentError("the Student-t density needs kappa")

    @cached_property
    def h(self) -> HFunction:
        if self.h_id == "student_t":
            return get_h("student_t", kappa=self.kappa)
        return get_h(self.h_id)

    @property
    def sqrt_dt(self) -> float:
        return math.sqrt(self.dt)


@dataclass(frozen=True)
class PathState:
    """State after step k along one realized path."""

    k: int
    m: int
    log_price: float
    q_next: float | None


@dataclass(frozen=True)
class PathPrice:
    """Price of a claim; ``std_error`` is 0 for enumeration."""

    price: float
    std_error: float
    method: Method
    paths: int
    clamp_count: int = 0


def eta(model: EtaModel, m_prev: int | np.ndarray, k: int) -> float | np.ndarray:
    """Local volatility of step k given the level M_{k-1}; sigma at k = 0.

    Raises:
        InfeasibleParameterError: If eta is not positive.
    """
    if k == 0:
        values = np.full(np.shape(m_prev), model.sigma, dtype=float)
    else:
        x = model.sqrt_dt * np.asarray(m_prev, dtype=float)
        values = model.sigma + model.gamma * model.h(x)
    if np.any(values <= 0):
        raise InfeasibleParameterError(
            f"local volatility is not positive at step {k} (min {np.min(values):.3g})"
        )
    return values if np.ndim(values) else float(values)


def _raw_q(etas: np.ndarray, v: float, rf: float, dt: float, mode: Mode) -> np.ndarray:
    s = etas * math.sqrt(dt)
    if mode == "exact":
        return (math.exp((rf - v) * dt) - np.exp(-s)) / (np.exp(s) - np.exp(-s))
    return 0.5 + (rf - v - 0.5 * etas**2) * math.sqrt(dt) / (2.0 * etas)


def q_path(
    model: EtaModel,
    v: float,
    rf: float,
    m_prev: int | np.ndarray,
    k: int,
    mode: Mode = "exact",
    q_floor: float = Q_FLOOR,
) -> float | np.ndarray:
    """Risk-neutral up-probability of step k given M_{k-1}, clamped to [q_floor, 1 - q_floor]."""
    if mode not in ("exact", "leading_order"):
        raise InvalidArgumentError(f"mode must be 'exact' or 'leading_order', got {mode!r}")
    raw = _raw_q(np.asarray(eta(model, m_prev, k), dtype=float), v, rf, model.dt, mode)
    clamped = ~((raw >= q_floor) & (raw <= 1.0 - q_floor))
    if clamped.any():
        logger.warning("Path-dependent q clamped for %d state(s) at step %d", clamped.sum(), k)
    q = np.clip(raw, q_floor, 1.0 - q_floor)
    return q if q.ndim else float(q)


class _ClampTally:
    """Counts clamped (state, step) evaluations across a pricing run."""

    def __init__(self, limit: float) -> None:
        self.limit = limit
        self.clamped = 0
        self.evaluated = 0

    def probabilities(
        self, model: EtaModel, v: float, rf: float, m_prev: np.ndarray, k: int, mode: Mode
    ) -> tuple[np.ndarray, np.ndarray]:
        etas = np.asarray(eta(model, m_prev, k), dtype=float)
        raw = _raw_q(etas, v, rf, model.dt, mode)
        inside = (raw >= Q_FLOOR) & (raw <= 1.0 - Q_FLOOR)
        self.clamped += int(raw.size - inside.sum())
        self.evaluated += int(raw.size)
        return np.clip(raw, Q_FLOOR, 1.0 - Q_FLOOR), etas

    def check(self) -> None:
        if self.evaluated and self.clamped / self.evaluated > self.limit:
            raise InfeasibleParameterError(
                f"q outside (0, 1) on {self.clamped / self.evaluated:.1%} of evaluated steps"
            )
        if self.clamped:
            logger.warning("q clamped on %d of %d evaluations", self.clamped, self.evaluated)


def trace_path(
    model: EtaModel, v: float, rf: float, s0: float, levels: np.ndarray, mode: Mode = "exact"
) -> list[PathState]:
    """States along a given walk path M_0..M_n."""
    levels = np.asarray(levels, dtype=np.int64)
    n = levels.size - 1
    states = []
    log_price = math.log(s0)
    for k in range(n + 1):
        if k > 0:
            step_eta = eta(model, int(levels[k - 1]), k)
            log_price += v * model.dt + (levels[k] - levels[k - 1]) * step_eta * model.sqrt_dt
        q_next = q_path(model, v, rf, int(levels[k]), k + 1, mode) if k < n else None
        states.append(PathState(k=k, m=int(levels[k]), log_price=log_price, q_next=q_next))
    return states


def _expand(
    tally: _ClampTally,
    model: EtaModel,
    v: float,
    rf: float,
    mode: Mode,
    m: np.ndarray,
    log_s: np.ndarray,
    prob: np.ndarray,
    k_from: int,
    k_to: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Branch every state on steps k_from + 1 .. k_to (state count doubles per step)."""
    drift = v * model.dt
    for k in range(k_from + 1, k_to + 1):
        q, etas = tally.probabilities(model, v, rf, m, k, mode)
        move = etas * model.sqrt_dt
        m = np.concatenate([m + 1, m - 1])
        log_s = np.concatenate([log_s + drift + move, log_s + drift - move])
        prob = np.concatenate([prob * q, prob * (1.0 - q)])
    return m, log_s, prob


def _enumerate(
    model: EtaModel, v: float, rf: float, s0: float, spec: EccSpec, n: int, mode: Mode, m0: int
) -> PathPrice:
    tally = _ClampTally(MAX_CLAMP_FRACTION)
    prefix_steps = max(0, n - BLOCK_STEPS)
    m, log_s, prob = _expand(
        tally, model, v, rf, mode,
        np.array([m0]), np.array([math.log(s0)]), np.array([1.0]), 0, prefix_steps,
    )
    total = 0.0
    for i in range(m.size):
        _, leaf_log_s, leaf_prob = _expand(
            tally, model, v, rf, mode, m[i : i + 1], log_s[i : i + 1], prob[i : i + 1], prefix_steps, n
        )
        total += float(np.sum(leaf_prob * spec(np.exp(leaf_log_s))))
    tally.check()
    return PathPrice(
        price=math.exp(-rf * n * model.dt) * total,
        std_error=0.0,
        method="enumerate",
        paths=2**n,
        clamp_count=tally.clamped,
    )


def _monte_carlo(
    model: EtaModel,
    v: float,
    rf: float,
    s0: float,
    spec: EccSpec,
    n: int,
    mode: Mode,
    m0: int,
    mc_paths: int,
    seed: int,
    antithetic: bool,
) -> PathPrice:
    tally = _ClampTally(MAX_CLAMP_FRACTION)
    drift = v * model.dt
    samples = []
    for batch, offset in enumerate(range(0, mc_paths, MC_BATCH)):
        size = min(MC_BATCH, mc_paths - offset)
        rng = child_rng(seed, batch)
        draws = (size + 1) // 2 if antithetic else size
        u = rng.random((n, draws))
        if antithetic:
            u = np.concatenate([u, 1.0 - u], axis=1)
        m = np.full(u.shape[1], m0, dtype=np.int64)
        log_s = np.full(u.shape[1], math.log(s0))
        for k in range(1, n + 1):
            q, etas = tally.probabilities(model, v, rf, m, k, mode)
            step = np.where(u[k - 1] < q, 1, -1)
            log_s += drift + step * etas * model.sqrt_dt
            m += step
        payoff = spec(np.exp(log_s))
        if antithetic:
            # pair averages are the independent samples
            payoff = 0.5 * (payoff[:draws] + payoff[draws:])
        samples.append(payoff)
    tally.check()

    values = np.concatenate(samples)
    discount = math.exp(-rf * n * model.dt)
    return PathPrice(
        price=discount * float(values.mean()),
        std_error=discount * float(values.std(ddof=1) / math.sqrt(values.size)),
        method="monte_carlo",
        paths=mc_paths,
        clamp_count=tally.clamped,
    )


def price_path_dependent(
    model: EtaModel,
    v: float,
    rf: float,
    s0: float,
    spec: EccSpec,
    n: int,
    method: Method = "enumerate",
    mc_paths: int = 100_000,
    seed: int = 0,
    *,
    mode: Mode = "exact",
    antithetic: bool = False,
    m0: int = 0,
) -> PathPrice:
    """Risk-neutral price of ``spec`` on the n-step path-dependent tree.

    Args:
        model: Local volatility model.
        v: Natural drift per year of the log price.
        rf: Risk-free rate.
        s0: Spot price.
        spec: Claim; its expiry must equal n * dt.
        n: Number of steps.
        method: "enumerate" (exact, n <= 24) or "monte_carlo".
        mc_paths: Monte Carlo sample size (>= 1000).
        seed: Monte Carlo seed.
        mode: Exact or leading-order probabilities.
        antithetic: Pair each uniform draw u with 1 - u.
        m0: Walk level at the valuation date.

    Returns:
        PathPrice with the standard error of the Monte Carlo mean.
    """
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    if abs(spec.expiry - n * model.dt) > 1e-9 * max(1.0, n * model.dt):
        raise InvalidArgumentError(f"claim expiry {spec.expiry} differs from n*dt={n * model.dt}")
    if not s0 > 0:
        raise InvalidArgumentError(f"s0 must be positive, got {s0}")

    if method == "enumerate":
        if n > ENUMERATE_MAX_STEPS:
            raise InvalidArgumentError(f"enumeration is limited to n <= {ENUMERATE_MAX_STEPS}")
        return _enumerate(model, v, rf, s0, spec, n, mode, m0)
    if method == "monte_carlo":
        if mc_paths < MIN_MC_PATHS:
            raise InvalidArgumentError(f"Monte Carlo needs at least {MIN_MC_PATHS} paths")
        return _monte_carlo(model, v, rf, s0, spec, n, mode, m0, mc_paths, seed, antithetic)
    raise InvalidArgumentError(f"unknown method {method!r}")
