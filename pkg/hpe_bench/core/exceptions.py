"""Custom exceptions for HPE Bench."""

from __future__ import annotations

from typing import Any


class HpeBenchError(Exception):
    """Base exception for all HPE Bench errors."""

    pass


class ValidationError(HpeBenchError):
    """Invalid argument or usage error (dimension mismatch, bad weight, ...)."""

    pass


class ConfigError(ValidationError):
    """Malformed or inconsistent experiment configuration."""

    pass


class ModelDomainError(HpeBenchError):
    """Operation undefined for the given model (e.g. argmin of a flat model)."""

    pass


class SolverError(HpeBenchError):
    """Algorithmic failure inside a solver run."""

    pass


class BudgetExhaustedError(SolverError):
    """Iteration or oracle budget reached before the stopping test fired.

    Attributes:
        partial: Whatever the solver had when it gave up: a partial ``RunTrace``,
            the best certificate seen, or ``None``.
    """

    def __init__(self, message: str, partial: Any = None) -> None:
        """Initialize the error.

        Args:
            message: Human readable description.
            partial: Partial result carried to the caller.
        """
        super().__init__(message)
        self.partial = partial
