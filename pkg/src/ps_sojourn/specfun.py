"""Special functions and quadrature rules used across the package."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from .core import DomainError

MAX_GL_NODES = 10_000


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre nodes and weights on [-1, 1]."""

    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, f, a: float = -1.0, b: float = 1.0) -> float:
        half = 0.5 * (b - a)
        x = 0.5 * (a + b) + half * self.nodes
        return float(half * np.dot(self.weights, f(x)))


def log_gamma(x: float) -> float:
    """ln Gamma(x) for x > 0."""
    if not math.isfinite(x) or x <= 0:
        raise DomainError(f"log_gamma requires x > 0, got {x}")
    return math.lgamma(x)


def bessel_k(order: int, x: float) -> float:
    """Modified Bessel function of the second kind, K_0 or K_1."""
    if order not in (0, 1):
        raise DomainError(f"only orders 0 and 1 are supported, got {order}")
    if not math.isfinite(x) or x <= 0:
        raise DomainError(f"bessel_k requires x > 0, got {x}")
    return float(special.k0(x) if order == 0 else special.k1(x))


def bessel_k_scaled(order: int, x: float) -> float:
    """``exp(x) * K_order(x)``; avoids underflow for large arguments."""
    if order not in (0, 1):
        raise DomainError(f"only orders 0 and 1 are supported, got {order}")
    if not math.isfinite(x) or x <= 0:
        raise DomainError(f"bessel_k requires x > 0, got {x}")
    return float(special.k0e(x) if order == 0 else special.k1e(x))


def hyp2f1_terminating(alpha: float, n: int, x: float) -> float:
    """Terminating Gauss series 2F1(alpha, -n; 1; x), a polynomial of degree n in x."""
    if int(n) != n or n < 0:
        raise DomainError(f"n must be a nonnegative integer, got {n}")
    if not (math.isfinite(alpha) and math.isfinite(x)):
        raise DomainError("alpha and x must be finite")
    term = 1.0
    total = 1.0
    for k in range(int(n)):
        term *= (alpha + k) * (k - n) * x / ((k + 1) * (k + 1))
        total += term
    return total


def stable_logistic(x):
    """1 / (1 + exp(x)) without overflow, for scalars or arrays."""
    out = special.expit(-np.asarray(x, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def log1p_exp(x):
    """log(1 + exp(x)), the log of the reciprocal of :func:`stable_logistic`."""
    return np.logaddexp(0.0, x)


@lru_cache(maxsize=256)
def _leggauss(m: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(m)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def gauss_legendre(m: int) -> QuadratureRule:
    """m-point Gauss-Legendre rule on [-1, 1]; rules are cached by m."""
    if int(m) != m or not 1 <= m <= MAX_GL_NODES:
        raise DomainError(f"m must be an integer in [1, {MAX_GL_NODES}], got {m}")
    x, w = _leggauss(int(m))
    return QuadratureRule(x, w)


def composite_gauss_legendre(a: float, b: float, panels: int, order: int = 16):
    """Nodes and weights of a composite Gauss-Legendre rule on [a, b]."""
    rule = gauss_legendre(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)[:, None]
    mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
    nodes = (mid + half * rule.nodes[None, :]).ravel()
    weights = (half * rule.weights[None, :]).ravel()
    return nodes, weights


@lru_cache(maxsize=512)
def _jacobi_unit(m: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    x, w = special.roots_jacobi(m, a, b)
    # map to [0, 1] with weight (1-y)^a y^b
    y = 0.5 * (1.0 + x)
    w = w * 2.0 ** (-(a + b + 1.0))
    y.flags.writeable = False
    w.flags.writeable = False
    return y, w


def gauss_jacobi_unit(m: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights on [0, 1] for the weight ``(1 - y)**a * y**b`` (a, b > -1)."""
    if a <= -1 or b <= -1:
        raise DomainError("Jacobi exponents must exceed -1")
    return _jacobi_unit(int(m), float(a), float(b))


def ascending_series_sum(first: float, ratio, *, rel_tol: float = 1e-17, max_terms: int = 100_000) -> float:
    """Sum a positive series given its first term and ``ratio(l) = term[l+1] / term[l]``."""
    term = first
    total = first
    for l in range(max_terms):
        term *= ratio(l)
        total += term
        if term < rel_tol * total and ratio(l + 1) < 1.0:
            return total
    raise DomainError("series did not converge")
