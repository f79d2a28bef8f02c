"""Registry of the piecewise-continuous functions h used by the CSYIP companion.

Each entry is a factory taking keyword parameters and returning a
vectorized callable ``h(x)``.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
from scipy import stats

from src.utils.errors import ConfigurationError, InvalidArgumentError

HFunction = Callable[[np.ndarray], np.ndarray]

_REGISTRY: dict[str, Callable[..., HFunction]] = {}


def register_h(name: str) -> Callable[[Callable[..., HFunction]], Callable[..., HFunction]]:
    """Register an h-factory under ``name``."""

    def decorator(factory: Callable[..., HFunction]) -> Callable[..., HFunction]:
        if name in _REGISTRY:
            raise ConfigurationError(f"h function '{name}' is already registered")
        _REGISTRY[name] = factory
        return factory

    return decorator


def available_h() -> list[str]:
    return sorted(_REGISTRY)


def get_h(h_id: str, **params: float) -> HFunction:
    """Build the h function registered as ``h_id``.

    Raises:
        ConfigurationError: If ``h_id`` is unknown or the parameters do not fit it.
    """
    try:
        factory = _REGISTRY[h_id]
    except KeyError:
        raise ConfigurationError(
            f"Unknown h function '{h_id}'; registered: {', '.join(available_h())}"
        ) from None
    try:
        return factory(**params)
    except TypeError as e:
        raise ConfigurationError(f"Bad parameters for h '{h_id}': {e}") from e


@register_h("constant")
def _constant(value: float = 1.0) -> HFunction:
    return lambda x: np.full(np.shape(x), float(value))


@register_h("identity")
def _identity() -> HFunction:
    return lambda x: np.asarray(x, dtype=float)


@register_h("indicator")
def _indicator(a: float, b: float) -> HFunction:
    if a > b:
        raise InvalidArgumentError(f"indicator needs a <= b, got [{a}, {b}]")
    return lambda x: ((np.asarray(x) >= a) & (np.asarray(x) <= b)).astype(float)


@register_h("student_t")
def _student_t(kappa: float) -> HFunction:
    if kappa <= 0:
        raise InvalidArgumentError(f"kappa must be positive, got {kappa}")
    dist = stats.t(df=kappa)
    return lambda x: dist.pdf(x)


def student_t_density(x: np.ndarray | float, kappa: float) -> np.ndarray:
    """Standardized Student-t density with ``kappa`` degrees of freedom."""
    return stats.t.pdf(x, df=kappa)
