"""Exception types shared across the package."""

from __future__ import annotations

__all__ = [
    "ConfigurationError",
    "DomainError",
    "IntegrationFailure",
    "CheckRefused",
]


class ConfigurationError(ValueError):
    """Incompatible sizes, shapes or malformed parameters."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class IntegrationFailure(RuntimeError):
    """Time integration could not continue.

    ``state`` carries the last valid state (if any) so callers can dump it.
    """

    def __init__(self, message: str, state=None):
        super().__init__(message)
        self.state = state


class CheckRefused(ValueError):
    """A verification check was asked to run outside its hypotheses."""
