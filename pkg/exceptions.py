###########################
# exceptions.py
# Shared error types. The CLI maps them onto exit codes.
###########################

from __future__ import annotations

from typing import Any, Optional, Tuple


class FhaciError(Exception):
    """Base class for all toolkit errors."""


class DomainError(FhaciError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConfigError(FhaciError, ValueError):
    """A configuration document failed validation."""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class NumericFailure(FhaciError, ArithmeticError):
    """
    A numerical procedure did not reach its tolerance.
    Carries the arguments that caused it and, when available, the best estimate.
    """

    def __init__(self, message: str, args_tuple: Tuple[Any, ...] = (), best_estimate: Any = None):
        self.args_tuple = tuple(args_tuple)
        self.best_estimate = best_estimate
        super().__init__(f"{message} (args={self.args_tuple})")


class OptimizationError(FhaciError, RuntimeError):
    """The optimizer could not produce a result."""
