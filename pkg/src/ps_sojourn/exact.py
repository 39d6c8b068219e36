"""Exact conditional density p_n(t) from Pollaczek's double-integral form.

The inner integral over ``v`` in (0, pi) is computed with a composite
Gauss-Legendre rule.  The outer contour integral extracts the coefficient of
``z**n`` of the inner integral, which is done with the trapezoid rule on a
circle of radius ``r < sqrt(rho)`` (an FFT), so one evaluation yields every
n up to half the number of circle nodes.

Complex powers ``b**m0`` with ``m0 = (i/2) cot v - 1/2`` are formed as
``exp(m0 * log b)``.  The logarithms of ``sqrt(rho) e^{+-iv} - z`` are taken on
the branch continuous in ``v``: for ``|z| < sqrt(rho)`` one has
``log(sqrt(rho) e^{iv} - z) = log sqrt(rho) + iv + Log(1 - z e^{-iv}/sqrt(rho))``
with the principal ``Log`` of a number of positive real part.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .core import BranchError, ConvergenceError, DensityCurve, DomainError, Method, QueueParams
from .specfun import composite_gauss_legendre, log1p_exp

log = logging.getLogger(__name__)

NEGATIVE_TOL = 1e-9


@dataclass(frozen=True)
class PollaczekConfig:
    contour_radius_fraction: float | None = None
    phi_nodes: int | None = None
    v_panels: int = 24
    v_order: int = 20
    v_quadrature_tol: float = 1e-10
    rel_tol: float = 1e-8
    abs_floor: float = 1e-13

    def __post_init__(self) -> None:
        if self.contour_radius_fraction is not None and not 0.0 < self.contour_radius_fraction < 1.0:
            raise DomainError("contour_radius_fraction must lie in (0, 1)")
        if self.phi_nodes is not None and self.phi_nodes < 8:
            raise DomainError("phi_nodes must be at least 8")

    def radius_fraction_for(self, n_max: int) -> float:
        # r**-n amplifies cancellation in the v-integral; keep (sqrt(rho)/r)**n_max near e**3
        if self.contour_radius_fraction is not None:
            return self.contour_radius_fraction
        return max(0.5, math.exp(-3.0 / (n_max + 1)))

    def phi_nodes_for(self, n_max: int) -> int:
        base = max(64, 8 * (n_max + 1))
        if self.phi_nodes is not None:
            if self.phi_nodes < 8 * (n_max + 1):
                raise DomainError(f"phi_nodes must be >= 8(n+1) = {8 * (n_max + 1)}")
            base = self.phi_nodes
        return base


DEFAULT_CONFIG = PollaczekConfig()


def _log_kernel(params: QueueParams, z: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Log of the time-independent part of the inner integrand, shape (len(v), len(z))."""
    s = params.sqrt_rho
    v = v[:, None]
    z = z[None, :]
    cot = 1.0 / np.tan(v)
    m0 = 0.5j * cot - 0.5
    e_pos = np.exp(1j * v)
    e_neg = np.exp(-1j * v)
    half_log_rho = 0.5 * math.log(params.rho)
    log_b1 = half_log_rho - 1j * v + np.log(1.0 - z * e_pos / s)
    log_b2 = half_log_rho + 1j * v + np.log(1.0 - z * e_neg / s)
    log_d1 = np.log(1.0 - s * e_pos)
    log_d2 = np.log(1.0 - s * e_neg)
    _check_phase(log_b1, log_b2)
    return (
        m0 * (log_b1 + log_d1)
        - (m0 + 1.0) * (log_b2 + log_d2)
        + np.log(2.0 * s * np.sin(v))
        - log1p_exp(math.pi * cot)
    )


def _check_phase(*logs: np.ndarray) -> None:
    for lg in logs:
        if lg.shape[0] > 1 and np.any(np.abs(np.diff(lg.imag, axis=0)) > math.pi):
            raise BranchError("phase of a complex power jumped by more than pi between v-nodes")


def _time_factor(params: QueueParams, v: np.ndarray, t: np.ndarray) -> np.ndarray:
    rate = 1.0 + params.rho - 2.0 * params.sqrt_rho * np.cos(v)
    return np.exp(-np.outer(t, rate))


def _inner_on_nodes(params: QueueParams, z: np.ndarray, t: np.ndarray, panels: int, order: int) -> np.ndarray:
    v, w = composite_gauss_legendre(0.0, math.pi, panels, order)
    kernel = np.exp(_log_kernel(params, z, v)) * w[:, None]
    return _time_factor(params, v, t) @ kernel


def pollaczek_inner(params: QueueParams, z: complex, t: float, config: PollaczekConfig = DEFAULT_CONFIG) -> complex:
    """Inner v-integral of the Pollaczek representation at one point z, |z| < sqrt(rho)."""
    if abs(z) >= params.sqrt_rho:
        raise DomainError("|z| must be smaller than sqrt(rho)")
    if t < 0:
        raise DomainError("t must be nonnegative")
    zz = np.array([complex(z)])
    tt = np.array([float(t)])
    panels = config.v_panels
    previous = _inner_on_nodes(params, zz, tt, panels, config.v_order)[0, 0]
    for _ in range(5):
        panels *= 2
        current = _inner_on_nodes(params, zz, tt, panels, config.v_order)[0, 0]
        if abs(current - previous) <= config.v_quadrature_tol * max(abs(current), 1e-300):
            return complex(current)
        previous = current
    raise ConvergenceError("inner Pollaczek integral did not converge")


def _coefficients(params: QueueParams, t: np.ndarray, n_max: int, panels: int, n_phi: int, config: PollaczekConfig):
    r = config.radius_fraction_for(n_max) * params.sqrt_rho
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    z = r * np.exp(1j * phi)
    f = _inner_on_nodes(params, z, t, panels, config.v_order)
    c = np.fft.fft(f, axis=1)[:, : n_max + 1] / n_phi
    scale = r ** -np.arange(n_max + 1, dtype=float)
    return c * scale[None, :]


def pollaczek_table(
    params: QueueParams, t_grid, n_max: int, config: PollaczekConfig = DEFAULT_CONFIG
) -> np.ndarray:
    """p_n(t) for all n <= n_max and every t in ``t_grid``; shape (len(t), n_max + 1)."""
    if int(n_max) != n_max or n_max < 0:
        raise DomainError("n_max must be a nonnegative integer")
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise DomainError("times must be finite and nonnegative")
    n_phi = config.phi_nodes_for(n_max)
    panels = config.v_panels
    coarse = _coefficients(params, t, n_max, panels, n_phi, config)
    fine = _coefficients(params, t, n_max, 2 * panels, 2 * n_phi, config)
    if not _agree(coarse, fine, config):
        finer = _coefficients(params, t, n_max, 4 * panels, 4 * n_phi, config)
        if not _agree(fine, finer, config):
            raise ConvergenceError("Pollaczek coefficients did not stabilise under node doubling")
        fine = finer
    imag = np.abs(fine.imag)
    real = fine.real
    if np.any(imag > 1e3 * config.abs_floor + config.rel_tol * np.abs(real)):
        raise ConvergenceError("extracted density has a non-negligible imaginary part")
    return _clamp(real)


def _agree(a: np.ndarray, b: np.ndarray, config: PollaczekConfig) -> bool:
    return bool(np.all(np.abs(a - b) <= config.rel_tol * np.abs(b) + config.abs_floor))


def _clamp(values: np.ndarray) -> np.ndarray:
    if np.any(values < -NEGATIVE_TOL):
        raise ConvergenceError(f"density below -{NEGATIVE_TOL}: {values.min():.3e}")
    negative = values < 0
    if np.any(negative):
        log.warning("clamping %d slightly negative density values to 0", int(negative.sum()))
        values = np.where(negative, 0.0, values)
    return values


def density_pollaczek(params: QueueParams, n: int, t: float, config: PollaczekConfig = DEFAULT_CONFIG) -> float:
    """Exact conditional sojourn-time density p_n(t).

    ``rho = 1`` is accepted and yields the heavy-traffic t = O(1) kernel.
    """
    return float(pollaczek_table(params, [t], n, config)[0, n])


def density_curve(params: QueueParams, n: int, t_grid, config: PollaczekConfig = DEFAULT_CONFIG) -> DensityCurve:
    """Batched exact evaluation on a time grid (one inner-integral sweep for all t)."""
    t = np.asarray(t_grid, dtype=float)
    values = pollaczek_table(params, t, n, config)[:, n]
    return DensityCurve(n, t, values, Method.EXACT)


def unconditional_density(params: QueueParams, t, tol: float = 1e-10, method: str = "ode"):
    """Unconditional sojourn density ``sum_n (1-rho) rho^n p_n(t)``.

    The geometric tail is cut at N* with ``rho**(N*+1) < tol``; this bounds the
    neglected mass because every p_n(t) <= 1 (the tagged customer's departure
    hazard never exceeds the unit service rate).
    """
    params.require_stationary()
    rho = params.rho
    n_star = max(0, int(math.ceil(math.log(tol) / math.log(rho))) - 1)
    if rho ** (n_star + 1) >= tol:
        raise ConvergenceError("geometric tail bound could not be certified")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    weights = (1.0 - rho) * rho ** np.arange(n_star + 1)
    if method == "ode":
        from .oracles import OdeConfig, ode_table

        grid = np.unique(np.concatenate([[0.0], t_arr]))
        table = ode_table(params, n_star, grid, OdeConfig(tolerance=tol))
        idx = np.searchsorted(grid, t_arr)
        out = table[idx] @ weights
    elif method == "pollaczek":
        out = pollaczek_table(params, t_arr, n_star) @ weights
    else:
        raise DomainError(f"unknown method {method!r}")
    return float(out[0]) if np.ndim(t) == 0 else out
