"""Exception types shared across the package."""

from __future__ import annotations


class GmethodsError(Exception):
    """Base class for all package errors."""


class ValidationError(GmethodsError):
    """A dataset or container violates its declared schema."""


class ConfigError(GmethodsError):
    """A scenario, design, or CLI configuration is malformed."""


class PositivityError(GmethodsError):
    """A required conditional law has (numerically) zero support."""


class SeparationError(GmethodsError):
    """Logistic likelihood is unbounded (perfect separation)."""


class ConvergenceError(GmethodsError):
    """An iterative fit failed to converge within its iteration budget."""


class EstimationError(GmethodsError):
    """An estimator or test cannot be formed from the given inputs."""
