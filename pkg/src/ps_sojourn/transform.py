"""Laplace-transform side of the conditional sojourn-time density.

Everything here works on real transform arguments, where the two roots
``z_minus < z_plus`` of ``rho*z**2 - (1+rho+theta)*z + 1`` are real.  The
transform of p_n is assembled from a decaying homogeneous solution ``G_n`` of
the three-term recurrence and a growing one ``H_n`` (a discrete Green's
function).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ConvergenceError, DomainError, QueueParams
from .specfun import gauss_jacobi_unit, hyp2f1_terminating

_G_REL_TOL = 1e-11
_TAIL_REL_TOL = 1e-16
_TAIL_QUIET_TERMS = 10


@dataclass(frozen=True)
class SpectralPoint:
    theta: float
    z_plus: float
    z_minus: float
    alpha: float
    m_factor: float
    rho: float

    @property
    def gap(self) -> float:
        """``z_plus - z_minus``."""
        return self.z_plus - self.z_minus


def branch_point(params: QueueParams) -> float:
    """Rightmost branch point ``-(1 - sqrt(rho))**2`` of the transform."""
    return -params.tail_rate


def spectral_point(params: QueueParams, theta: float) -> SpectralPoint:
    """Roots z+-, exponent alpha and prefactor M at a real transform argument."""
    rho = params.rho
    if not math.isfinite(theta) or theta <= branch_point(params):
        raise DomainError(
            f"theta must exceed -(1-sqrt(rho))^2 = {branch_point(params):.6g}, got {theta}"
        )
    b = 1.0 + rho + theta
    # (b - 2 sqrt(rho)) (b + 2 sqrt(rho)) avoids cancellation near the branch point
    disc = (theta + params.tail_rate) * (b + 2.0 * params.sqrt_rho)
    root = math.sqrt(disc)
    z_plus = (b + root) / (2.0 * rho)
    z_minus = 2.0 / (b + root)
    alpha = rho * z_plus / root
    m_factor = math.exp(math.log(z_minus) + alpha * (math.log(z_plus) - math.log(z_minus)))
    return SpectralPoint(theta, z_plus, z_minus, alpha, m_factor, rho)


def _require_positive_theta(theta: float) -> None:
    if not theta > 0:
        raise DomainError(f"theta must be positive here, got {theta}")


def _g_values(sp: SpectralPoint, ls: np.ndarray, m: int) -> np.ndarray:
    # z = z_minus (1 - y): G_l = z_-^(l+alpha) int_0^1 (1-y)^l y^(alpha-1) (gap + z_- y)^(-alpha) dy
    y, w = gauss_jacobi_unit(m, 0.0, sp.alpha - 1.0)
    log_f = -sp.alpha * np.log(sp.gap + sp.z_minus * y)
    log_base = np.log1p(-y) + math.log(sp.z_minus)
    expo = ls[None, :] * log_base[:, None] + (log_f + sp.alpha * math.log(sp.z_minus))[:, None]
    return w @ np.exp(expo)


def g_values(sp: SpectralPoint, ls, rel_tol: float = _G_REL_TOL) -> np.ndarray:
    """``G_l`` for every l in ``ls`` by Gauss-Jacobi quadrature with node doubling."""
    ls = np.atleast_1d(np.asarray(ls, dtype=float))
    m = max(32, int(ls.max()) // 2 + 32)
    previous = _g_values(sp, ls, m)
    for _ in range(6):
        m *= 2
        current = _g_values(sp, ls, m)
        if np.all(np.abs(current - previous) <= rel_tol * np.abs(current)):
            return current
        previous = current
    raise ConvergenceError("G_n quadrature did not converge")


def g_n(params: QueueParams, theta: float, n: int) -> float:
    """Decaying homogeneous solution ``G_n(theta) = int_0^{z-} z^n (z+ - z)^-alpha (z- - z)^(alpha-1) dz``."""
    _require_positive_theta(theta)
    _check_n(n)
    return float(g_values(spectral_point(params, theta), [n])[0])


def h_n(params: QueueParams, theta: float, n: int) -> float:
    """Growing homogeneous solution via the terminating hypergeometric polynomial."""
    _require_positive_theta(theta)
    _check_n(n)
    sp = spectral_point(params, theta)
    return sp.z_minus**n * hyp2f1_terminating(sp.alpha, n, 1.0 / (1.0 - sp.alpha))


def h_values(sp: SpectralPoint, n_max: int) -> np.ndarray:
    """``H_0 .. H_{n_max}`` by forward recurrence (stable: H is the dominant solution)."""
    rho = sp.rho
    b = 1.0 + rho + sp.theta
    out = np.empty(n_max + 1)
    out[0] = 1.0
    if n_max >= 1:
        out[1] = b / rho
    for l in range(1, n_max):
        out[l + 1] = ((l + 1) * b * out[l] - l * out[l - 1]) / ((l + 1) * rho)
    return out


def homogeneous_residual(rho: float, theta: float, values: np.ndarray, n: int) -> float:
    """``(n+1) rho v[n+1] - (n+1)(1+rho+theta) v[n] + n v[n-1]``."""
    return (n + 1) * rho * values[n + 1] - (n + 1) * (1 + rho + theta) * values[n] + n * values[n - 1]


def wronskian_check(params: QueueParams, theta: float, l: int) -> float:
    """Relative residual of ``G_l H_{l+1} - G_{l+1} H_l = 1 / ((l+1) rho^(l+1) M)``."""
    _require_positive_theta(theta)
    _check_n(l)
    sp = spectral_point(params, theta)
    g = g_values(sp, [l, l + 1])
    h = [h_n(params, theta, l), h_n(params, theta, l + 1)]
    lhs = g[0] * h[1] - g[1] * h[0]
    target = 1.0 / ((l + 1) * params.rho ** (l + 1) * sp.m_factor)
    return abs(lhs - target) / abs(target)


def tail_sum_g(sp: SpectralPoint, n: int) -> float:
    """``sum_{l > n} rho^l G_l``, truncated once ten consecutive terms are negligible."""
    ratio = sp.rho * sp.z_minus
    block = 64
    est_terms = int(math.ceil(40.0 / -math.log(ratio))) + _TAIL_QUIET_TERMS
    total = 0.0
    quiet = 0
    start = n + 1
    while start <= n + 50 * est_terms:
        ls = np.arange(start, start + block)
        terms = sp.rho**ls * g_values(sp, ls)
        for term in terms:
            total += term
            quiet = quiet + 1 if term < _TAIL_REL_TOL * total else 0
            if quiet >= _TAIL_QUIET_TERMS:
                return total
        start += block
    raise ConvergenceError("tail sum of rho^l G_l failed to certify")


def phat(params: QueueParams, theta: float, n: int) -> float:
    """Laplace transform ``int_0^inf exp(-theta t) p_n(t) dt`` for theta > 0."""
    params.require_stationary()
    _require_positive_theta(theta)
    _check_n(n)
    sp = spectral_point(params, theta)
    h = h_values(sp, n)
    head = float(np.dot(params.rho ** np.arange(n + 1), h))
    g_n_val = float(g_values(sp, [n])[0])
    return sp.m_factor * (g_n_val * head + h[n] * tail_sum_g(sp, n))


def phat_values(params: QueueParams, theta: float, n_max: int) -> np.ndarray:
    """``phat(theta, n)`` for n = 0..n_max sharing one spectral point."""
    return np.array([phat(params, theta, n) for n in range(n_max + 1)])


def phat_recurrence_residual(params: QueueParams, theta: float, n: int) -> float:
    """Residual of the transformed recurrence; zero for the exact transform."""
    if n < 1:
        raise DomainError("the recurrence residual needs n >= 1")
    lower, mid, upper = (phat(params, theta, k) for k in (n - 1, n, n + 1))
    rho = params.rho
    return abs((n + 1) * rho * upper - (n + 1) * (1 + rho + theta) * mid + n * lower + 1.0)


def sum_rho_h_closed(params: QueueParams, theta: float) -> float:
    """Closed form of ``sum_{l>=0} rho^l H_l``, convergent only for theta in (-(1-sqrt rho)^2, 0)."""
    params.require_stationary()
    if not branch_point(params) < theta < 0:
        raise DomainError(
            "the series sum_l rho^l H_l converges only for -(1-sqrt(rho))^2 < theta < 0"
        )
    sp = spectral_point(params, theta)
    rho = params.rho
    return (1 - rho * sp.z_minus) ** (sp.alpha - 1) / (1 - rho * sp.z_plus) ** sp.alpha


def _check_n(n: int) -> None:
    if int(n) != n or n < 0:
        raise DomainError(f"n must be a nonnegative integer, got {n}")
