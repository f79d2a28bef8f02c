"""Exception hierarchy shared by every package.

Each family maps to one process exit code of the ``gjr`` command.
"""

from __future__ import annotations

from typing import Any


class GjrError(Exception):
    """Base class for all toolkit errors."""


class InvalidArgumentError(GjrError, ValueError):
    """An argument violates a documented precondition."""


class ConfigurationError(GjrError):
    """Run configuration is missing, malformed or inconsistent."""


class DataError(GjrError):
    """Input data cannot be used (empty, malformed, misaligned)."""


class DegenerateDataError(DataError):
    """Data is well-formed but carries no information for the fit."""


class NumericalError(GjrError):
    """A numerical procedure failed to produce a usable result."""


class InfeasibleParameterError(NumericalError):
    """Parameters lead to probabilities or volatilities outside their domain."""


class NoSolutionError(NumericalError):
    """An inversion has no solution inside its admissible bounds."""


class FitFailure(NumericalError):
    """An optimizer did not converge; ``incumbent`` holds the best point found."""

    def __init__(self, message: str, incumbent: Any = None) -> None:
        super().__init__(message)
        self.incumbent = incumbent


EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the command's exit status."""
    if isinstance(exc, (ConfigurationError, InvalidArgumentError)):
        return EXIT_CONFIG
    if isinstance(exc, DataError):
        return EXIT_DATA
    if isinstance(exc, NumericalError):
        return EXIT_NUMERICAL
    return 1
