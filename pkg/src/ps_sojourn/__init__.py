"""Conditional sojourn-time densities of the M/M/1 processor-sharing queue."""

from .core import (
    BracketError,
    BranchError,
    ConvergenceError,
    DensityCurve,
    DomainError,
    IntegrationError,
    Method,
    PSError,
    QueueParams,
    RegimeLabel,
    RegionError,
    RootResult,
    Theorem,
    Tolerances,
    validate_params,
)

__version__ = "0.1.0"
