"""Skew Brownian motion analytics and skew random walk sampling.

The walk moves up with probability ``alpha`` from level 0 and is symmetric
everywhere else. Its absolute value is a reflected simple random walk for
every ``alpha``, which gives the exact level moments used by the tree module.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy import special

from src.process.kernels import get_h
from src.utils.errors import InvalidArgumentError
from src.utils.rng import child_rng, make_rng

logger = logging.getLogger(__name__)

DEFAULT_BLOCK_SIZE = 1024


@dataclass(frozen=True)
class SkewParam:
    """Skew parameter alpha of the SBM or walk.

    Attributes:
        alpha: Probability in [0, 1] of an excursion (or step from 0) upwards.
    """

    alpha: float

    def __post_init__(self) -> None:
        _check_alpha(self.alpha)

    @property
    def walk_ready(self) -> bool:
        """True when alpha is admissible for the walk kernel (open interval)."""
        return 0.0 < self.alpha < 1.0


@dataclass(frozen=True)
class SkewPath:
    """A realized walk trajectory.

    Attributes:
        steps: Levels M_0..M_n with M_0 = 0 and unit increments.
        alpha: Walk parameter, or None for a path read off observed data.
        seed: Seed that generated the path, or None for observed paths.
    """

    steps: np.ndarray
    alpha: float | None = None
    seed: int | None = None

    def __post_init__(self) -> None:
        steps = np.asarray(self.steps, dtype=np.int64)
        if steps.ndim != 1 or steps.size == 0:
            raise InvalidArgumentError("a path needs a one-dimensional, nonempty level sequence")
        if steps[0] != 0:
            raise InvalidArgumentError(f"paths start at 0, got M_0={steps[0]}")
        if steps.size > 1 and not np.all(np.abs(np.diff(steps)) == 1):
            raise InvalidArgumentError("path increments must be +1 or -1")
        object.__setattr__(self, "steps", steps)

    @property
    def n(self) -> int:
        return int(self.steps.size - 1)

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.steps)


@dataclass(frozen=True)
class SbmMoments:
    """Mean, variance, skewness and excess kurtosis of B_t for a given alpha."""

    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float
    t: float


@dataclass(frozen=True)
class CsyipPair:
    """Scaled walk B and its h-weighted companion C on the grid k/n.

    Attributes:
        b_path: B_{k/n}, k = 0..n.
        c_path: C_{k/n} with increments h(B_{(k-1)/n}) (B_{k/n} - B_{(k-1)/n}).
        h_id: Registered identifier of h.
    """

    b_path: np.ndarray
    c_path: np.ndarray
    h_id: str


def _check_alpha(alpha: float, *, walk: bool = False) -> None:
    if not np.isfinite(alpha) or not 0.0 <= alpha <= 1.0:
        raise InvalidArgumentError(f"alpha must lie in [0, 1], got {alpha}")
    if walk and alpha in (0.0, 1.0):
        raise InvalidArgumentError(f"the walk kernel requires 0 < alpha < 1, got {alpha}")


def _check_time(t: float) -> None:
    if not t > 0:
        raise InvalidArgumentError(f"t must be positive, got {t}")


def _check_count(count: int) -> None:
    if int(count) < 1:
        raise InvalidArgumentError(f"count must be >= 1, got {count}")


# ---------------------------------------------------------------------------
# Skew Brownian motion
# ---------------------------------------------------------------------------


def sbm_sample(alpha: float, t: float, count: int, seed: int) -> np.ndarray:
    """Draw ``count`` values of B_t: |B_t| with probability alpha, else -|B_t|."""
    _check_alpha(alpha)
    _check_time(t)
    _check_count(count)
    rng = make_rng(seed)
    magnitude = np.abs(rng.standard_normal(count)) * math.sqrt(t)
    up = rng.random(count) < alpha
    return np.where(up, magnitude, -magnitude)


def azzalini_sample(delta: float, t: float, count: int, seed: int) -> np.ndarray:
    """Draw sqrt(1 - delta^2) B1_t + delta |B2_t| for independent B1, B2.

    Has the law of ``sbm_sample`` with alpha = (1 + delta) / 2.
    """
    if not -1.0 < delta < 1.0:
        raise InvalidArgumentError(f"delta must lie in (-1, 1), got {delta}")
    _check_time(t)
    _check_count(count)
    rng = make_rng(seed)
    z = rng.standard_normal((2, count)) * math.sqrt(t)
    return math.sqrt(1.0 - delta**2) * z[0] + delta * np.abs(z[1])


def sbm_moments(alpha: float, t: float) -> SbmMoments:
    """Closed-form mean, variance, skewness and excess kurtosis of B_t."""
    _check_alpha(alpha)
    _check_time(t)
    a = 2.0 * alpha - 1.0
    denom = math.pi - 2.0 * a**2
    return SbmMoments(
        mean=a * math.sqrt(2.0 * t / math.pi),
        variance=(1.0 - 2.0 * a**2 / math.pi) * t,
        skewness=math.sqrt(2.0) * a * (4.0 * a**2 - math.pi) / denom**1.5,
        excess_kurtosis=(8.0 * math.pi * a**2 - 24.0 * a**4) / denom**2,
        t=t,
    )


def sbm_raw_moment(alpha: float, t: float, p: int) -> float:
    """E[(B_t)^p]; even moments do not depend on alpha."""
    _check_alpha(alpha)
    _check_time(t)
    if p < 0:
        raise InvalidArgumentError(f"moment order must be non-negative, got {p}")
    sign_weight = alpha + (-1) ** p * (1.0 - alpha)
    return math.sqrt(2.0**p / math.pi) * math.gamma((p + 1) / 2.0) * sign_weight * t ** (p / 2.0)


def sbm_mgf(alpha: float, t: float, u: float | np.ndarray) -> np.ndarray | float:
    """Moment generating function E[exp(u B_t)]."""
    _check_alpha(alpha)
    _check_time(t)
    u = np.asarray(u, dtype=float)
    out = np.exp(u**2 * t / 2.0) * (1.0 + (2.0 * alpha - 1.0) * special.erf(u * math.sqrt(t / 2.0)))
    return out if out.ndim else float(out)


def sbm_pdf(alpha: float, t: float, x: float | np.ndarray) -> np.ndarray | float:
    """Density of B_t: 2 alpha phi_t(x) above zero, 2 (1 - alpha) phi_t(x) below."""
    _check_alpha(alpha)
    _check_time(t)
    x = np.asarray(x, dtype=float)
    phi = np.exp(-(x**2) / (2.0 * t)) / math.sqrt(2.0 * math.pi * t)
    out = np.where(x >= 0, 2.0 * alpha * phi, 2.0 * (1.0 - alpha) * phi)
    return out if out.ndim else float(out)


def sbm_cdf(alpha: float, t: float, x: float | np.ndarray) -> np.ndarray | float:
    """P(B_t <= x); equals 1 - alpha at x = 0."""
    _check_alpha(alpha)
    _check_time(t)
    x = np.asarray(x, dtype=float)
    z = np.abs(x) / math.sqrt(2.0 * t)
    out = np.where(
        x >= 0,
        (1.0 - alpha) + alpha * special.erf(z),
        (1.0 - alpha) * special.erfc(z),
    )
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Skew random walk
# ---------------------------------------------------------------------------


def skew_walk_step(alpha: float, state: int, u: float) -> int:
    """Advance the walk one step from ``state`` using the uniform draw ``u``."""
    _check_alpha(alpha, walk=True)
    p_up = alpha if state == 0 else 0.5
    return int(state) + (1 if u < p_up else -1)


def _advance(states: np.ndarray, u: np.ndarray, alpha: float) -> np.ndarray:
    p_up = np.where(states == 0, alpha, 0.5)
    return states + np.where(u < p_up, 1, -1)


def iter_walk_blocks(
    alpha: float,
    n: int,
    count: int,
    seed: int,
    *,
    block_size: int = DEFAULT_BLOCK_SIZE,
    terminal_only: bool = False,
) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(offset, levels)`` for consecutive blocks of walk paths.

    Block ``b`` draws ``n`` rows of ``block_size`` uniforms from child ``b``
    of ``seed`` whatever ``count`` is; the last block is truncated. ``levels``
    has shape (paths, n + 1), or (paths,) with ``terminal_only``.
    """
    _check_alpha(alpha, walk=True)
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    _check_count(count)
    if block_size < 1:
        raise InvalidArgumentError("block_size must be >= 1")

    for block, offset in enumerate(range(0, count, block_size)):
        take = min(block_size, count - offset)
        rng = child_rng(seed, block)
        states = np.zeros(block_size, dtype=np.int64)
        levels = None if terminal_only else np.zeros((block_size, n + 1), dtype=np.int64)
        for k in range(1, n + 1):
            states = _advance(states, rng.random(block_size), alpha)
            if levels is not None:
                levels[:, k] = states
        yield offset, (states[:take] if terminal_only else levels[:take])


def walk_ensemble(
    alpha: float,
    n: int,
    count: int,
    seed: int,
    *,
    block_size: int = DEFAULT_BLOCK_SIZE,
    terminal_only: bool = False,
) -> np.ndarray:
    """All levels of ``count`` walk paths (or only M_n with ``terminal_only``)."""
    blocks = [
        levels
        for _, levels in iter_walk_blocks(
            alpha, n, count, seed, block_size=block_size, terminal_only=terminal_only
        )
    ]
    return np.concatenate(blocks, axis=0)


def skew_walk_path(alpha: float, n: int, seed: int) -> SkewPath:
    """One walk path of ``n`` steps drawn from child 0 of ``seed``."""
    levels = walk_ensemble(alpha, n, 1, seed, block_size=1)
    return SkewPath(steps=levels[0], alpha=alpha, seed=seed)


def origin_visit_probabilities(k: int) -> np.ndarray:
    """P(M_j = 0) for j = 0..k-1; the same for every alpha."""
    if k < 0:
        raise InvalidArgumentError(f"k must be non-negative, got {k}")
    probs = np.zeros(k)
    p = 1.0
    for j in range(0, k, 2):
        if j > 0:
            p *= (j - 1) / j
        probs[j] = p
    return probs


def expected_walk_level(alpha: float, k: int) -> float:
    """Exact E[M_k] = (2 alpha - 1) times the expected number of visits to 0 before k."""
    _check_alpha(alpha, walk=True)
    return (2.0 * alpha - 1.0) * float(origin_visit_probabilities(k).sum())


# ---------------------------------------------------------------------------
# CSYIP pair
# ---------------------------------------------------------------------------


def csyip_build(path: SkewPath, h_id: str, T: float = 1.0, **h_params: float) -> CsyipPair:
    """Scale a walk path to B_{k/n} = sqrt(T / n) M_k and accumulate C.

    Raises:
        ConfigurationError: If ``h_id`` is not registered.
    """
    if path.n < 1:
        raise InvalidArgumentError("csyip_build needs at least one step")
    _check_time(T)
    h = get_h(h_id, **h_params)
    b_increments = path.increments * math.sqrt(T / path.n)
    b_path = np.concatenate(([0.0], np.cumsum(b_increments)))
    c_path = np.concatenate(([0.0], np.cumsum(h(b_path[:-1]) * b_increments)))
    return CsyipPair(b_path=b_path, c_path=c_path, h_id=h_id)
