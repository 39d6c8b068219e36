"""Shared value types, validation and the error taxonomy.

The service rate is fixed at 1 throughout, so the arrival rate equals the
traffic intensity ``rho``.  Heavy-traffic formulas take ``epsilon = 1 - rho``
explicitly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class PSError(Exception):
    """Base class for all library errors."""


class DomainError(PSError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class ConvergenceError(PSError, RuntimeError):
    """A numerical procedure failed to certify its tolerance."""


class BranchError(ConvergenceError):
    """Phase tracking of a complex power jumped by more than pi between nodes."""


class BracketError(PSError, RuntimeError):
    """No sign change was found on the bracket of an implicit equation."""


class RegionError(DomainError):
    """A point is outside the region where an asymptotic branch applies."""


class IntegrationError(ConvergenceError):
    """Characteristic (ray) integration failed."""


@dataclass(frozen=True)
class Tolerances:
    """Single record holding the default numerical tolerances."""

    root_abs: float = 1e-10
    quad_rel: float = 1e-8
    root_residual: float = 1e-12


DEFAULT_TOLERANCES = Tolerances()


@dataclass(frozen=True)
class QueueParams:
    """Traffic intensity of an M/M/1-PS queue with unit service rate.

    ``epsilon`` is derived from ``rho`` on access so that ``rho + epsilon == 1``
    holds by construction.  ``rho == 1`` is representable but flagged through
    :attr:`heavy_traffic_kernel_only`; only the rho = 1 Pollaczek kernel
    accepts it.
    """

    rho: float

    def __post_init__(self) -> None:
        rho = self.rho
        if not isinstance(rho, (int, float, np.floating)) or not math.isfinite(rho):
            raise DomainError(f"rho must be a finite real, got {rho!r}")
        if rho <= 0.0 or rho > 1.0:
            raise DomainError(f"rho must lie in (0, 1], got {rho}")
        object.__setattr__(self, "rho", float(rho))

    @property
    def epsilon(self) -> float:
        return 1.0 - self.rho

    @property
    def sqrt_rho(self) -> float:
        return math.sqrt(self.rho)

    @property
    def heavy_traffic_kernel_only(self) -> bool:
        return self.rho == 1.0

    @property
    def tail_rate(self) -> float:
        """Exponential decay rate ``(1 - sqrt(rho))**2`` of every p_n(t)."""
        return (1.0 - self.sqrt_rho) ** 2

    def require_stationary(self) -> None:
        if self.heavy_traffic_kernel_only:
            raise DomainError("rho = 1 is only allowed for the heavy-traffic kernel")

    @classmethod
    def from_epsilon(cls, epsilon: float) -> "QueueParams":
        if not math.isfinite(epsilon) or not 0.0 <= epsilon < 1.0:
            raise DomainError(f"epsilon must lie in [0, 1), got {epsilon}")
        return cls(1.0 - epsilon)


def validate_params(rho: float) -> QueueParams:
    """Build a :class:`QueueParams`, raising :class:`DomainError` when invalid."""
    return QueueParams(rho)


class Method(str, enum.Enum):
    EXACT = "exact"
    ODE = "ode"
    MC = "mc"
    CASE1 = "case1"
    CASE2 = "case2"
    CASE3 = "case3"
    CASE4 = "case4"
    CASE5 = "case5"
    ASYMPTOTIC = "asymptotic"
    HT_CASE1 = "ht-case1"
    HT_CASE2 = "ht-case2"
    HT_CASE3 = "ht-case3"
    HT_CASE4 = "ht-case4"

    @property
    def is_oracle(self) -> bool:
        return self in (Method.EXACT, Method.ODE, Method.MC)


@dataclass(frozen=True)
class DensityCurve:
    """Density values of one conditional density p_n on a time grid."""

    n: int
    t_grid: np.ndarray
    values: np.ndarray
    method: Method
    flagged: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 0:
            raise DomainError(f"n must be a nonnegative integer, got {self.n}")
        t = np.asarray(self.t_grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or v.shape != t.shape:
            raise DomainError("values must have the same length as t_grid")
        if np.any(t < 0) or np.any(np.diff(t) <= 0):
            raise DomainError("t_grid must be nonnegative and strictly increasing")
        method = Method(self.method)
        if method.is_oracle and np.any(v < 0):
            raise DomainError(f"{method.value} densities must be nonnegative")
        t.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "t_grid", t)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "method", method)


@dataclass(frozen=True)
class RootResult:
    value: float
    residual: float
    iterations: int
    bracket: tuple[float, float]


class Theorem(str, enum.Enum):
    RHO_FIXED = "rho-fixed"
    HEAVY_TRAFFIC = "heavy-traffic"


_CASES = {"1", "2", "3", "4a", "4b", "4c", "5"}


@dataclass(frozen=True)
class RegimeLabel:
    theorem: Theorem
    case: str
    boundary_distance: float

    def __post_init__(self) -> None:
        if self.case not in _CASES:
            raise DomainError(f"unknown case {self.case!r}")
        if self.case == "5" and self.theorem is Theorem.HEAVY_TRAFFIC:
            raise DomainError("case 5 only exists for fixed rho")

    def __str__(self) -> str:
        prefix = "ht-" if self.theorem is Theorem.HEAVY_TRAFFIC else ""
        return f"{prefix}case{self.case}"


def time_grid(t_min: float, t_max: float, count: int) -> np.ndarray:
    """Uniform grid; ``count == 1`` yields ``[t_min]``."""
    if count < 1:
        raise DomainError("grid needs at least one point")
    if t_min < 0 or t_max < t_min:
        raise DomainError(f"bad grid bounds [{t_min}, {t_max}]")
    if count == 1:
        return np.array([float(t_min)])
    return np.linspace(t_min, t_max, count)


def parse_range(text: str, *, integer: bool = False) -> np.ndarray:
    """Parse ``"a"``, ``"a,b,c"`` or ``"start:stop:step"`` (stop inclusive)."""
    text = text.strip()
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
            raise DomainError(f"bad range {text!r}; expected start:stop:step")
        start, stop, step = parts
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        values = start + step * np.arange(count)
    else:
        values = np.array([float(p) for p in text.split(",") if p.strip()])
    if values.size == 0:
        raise DomainError(f"empty range {text!r}")
    if integer:
        if np.any(values != np.round(values)):
            raise DomainError(f"range {text!r} must be integral")
        return values.astype(int)
    return values
