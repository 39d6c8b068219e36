"""Large-n / large-t approximations of p_n(t) for fixed rho < 1.

Five scales are covered: n/t above the fluid line (case 1), a diffusive band
around n/t = 1 - rho (case 2), the sector below it (case 3), n ~ t^(2/3)
(case 4, three branches a/b/c) and n = O(1) (case 5), plus closed forms valid
in the overlaps of neighbouring scales.

Case 4 numerics
---------------
With ``a = n t^(-2/3)`` all three branches solve one analytic equation.
Writing ``s = A`` (branch a) or ``s = -B`` (branch b),

    2 sqrt(rho) a^(-3/2) = K(s),   K(s) = [sqrt(1+s) - arcsinh(sqrt s)/sqrt s] / s,

and with an angle ``w`` in (0, pi), ``B`` or ``C`` = sin(w)^2 and
cos(w) = +sqrt(1-B) or -sqrt(1-C),

    2 sqrt(rho) a^(-3/2) = J(w) = (w - sin w cos w) / sin(w)^3.

Both are solved with bracketing root finders; K and the Lambda prefactor use
power series near s = 0, where the literal formulas are 0/0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize, special

from .core import (
    BracketError,
    ConvergenceError,
    DomainError,
    IntegrationError,
    QueueParams,
    RegimeLabel,
    RegionError,
    RootResult,
    Theorem,
)
from .specfun import ascending_series_sum, log_gamma
from .transform import spectral_point

_SERIES_TERMS = 30
_SERIES_RADIUS = 0.1
_SMALL_ANGLE = 0.3
ROOT_RESIDUAL = 1e-12


# ---------------------------------------------------------------- boundaries

def a_upper(params: QueueParams) -> float:
    """Boundary between branches a and b, ``(3 sqrt(rho))^(2/3)``."""
    return (3.0 * params.sqrt_rho) ** (2.0 / 3.0)


def a_lower(params: QueueParams) -> float:
    """Boundary between branches b and c, ``(4 sqrt(rho)/pi)^(2/3)``."""
    return (4.0 * params.sqrt_rho / math.pi) ** (2.0 / 3.0)


# ---------------------------------------------------------------- series helpers

@lru_cache(maxsize=None)
def _k_coefficients() -> np.ndarray:
    k = np.arange(1, _SERIES_TERMS + 2)
    c = special.binom(0.5, k) - (-1.0) ** k * special.binom(2 * k, k) / (4.0**k * (2 * k + 1))
    return c


def _series_reciprocal(c: np.ndarray) -> np.ndarray:
    r = np.zeros_like(c)
    r[0] = 1.0 / c[0]
    for j in range(1, c.size):
        r[j] = -np.dot(c[1 : j + 1], r[j - 1 :: -1]) / c[0]
    return r


@lru_cache(maxsize=None)
def _q_coefficients() -> np.ndarray:
    kc = _k_coefficients()
    recip = _series_reciprocal(kc)
    sq = special.binom(0.5, np.arange(kc.size))
    return (3.0 * sq - 2.0 * recip)[1:]


def _poly(c: np.ndarray, s: float) -> float:
    return float(np.polynomial.polynomial.polyval(s, c))


def k_function(s: float) -> float:
    """``K(s)``, analytic on s > -1 with K(0) = 2/3 and K(-1) = pi/2."""
    if s <= -1.0:
        raise DomainError("K(s) needs s > -1")
    if abs(s) < _SERIES_RADIUS:
        return _poly(_k_coefficients()[:_SERIES_TERMS], s)
    if s > 0:
        r = math.sqrt(s)
        return (math.sqrt(1.0 + s) - math.asinh(r) / r) / s
    b = -s
    r = math.sqrt(b)
    return (math.asin(r) / r - math.sqrt(1.0 - b)) / b


def _q_function(s: float) -> float:
    """``(3 sqrt(1+s) - 2/K(s)) / s``; equals 3/5 at s = 0."""
    if abs(s) < _SERIES_RADIUS:
        return _poly(_q_coefficients()[:_SERIES_TERMS], s)
    return (3.0 * math.sqrt(1.0 + s) - 2.0 / k_function(s)) / s


def _n_function(x: float) -> float:
    """``x - sin x cos x`` without cancellation for small x."""
    if x < 0.5:
        total = 0.0
        term = 2.0 * x  # k = 0 term of sin(2x); its half cancels against x
        for k in range(1, 30):
            term *= -(2.0 * x) ** 2 / ((2 * k) * (2 * k + 1))
            total -= term / 2.0
            if abs(term) < 1e-18 * abs(total):
                break
        return total
    return x - math.sin(x) * math.cos(x)


def j_function(w: float) -> float:
    """``(w - sin w cos w) / sin(w)^3`` on (0, pi); increasing from 2/3 to infinity."""
    if not 0.0 < w < math.pi:
        raise DomainError("angle must lie in (0, pi)")
    if w <= math.pi / 2:
        return _n_function(w) / math.sin(w) ** 3
    d = math.pi - w
    return (math.pi - _n_function(d)) / math.sin(d) ** 3


# ---------------------------------------------------------------- root solvers

def _brent(f, lo: float, hi: float, scale: float) -> tuple[float, float, int]:
    flo, fhi = f(lo), f(hi)
    if not (np.isfinite(flo) and np.isfinite(fhi)) or flo * fhi > 0:
        raise BracketError(f"no sign change on [{lo:.6g}, {hi:.6g}]")
    x, info = optimize.brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, full_output=True, maxiter=500)
    if not info.converged:
        raise ConvergenceError("root solver did not converge")
    return x, abs(f(x)) / scale, info.iterations


def _target(params: QueueParams, a: float) -> float:
    if not math.isfinite(a) or a <= 0:
        raise DomainError(f"a must be positive, got {a}")
    return 2.0 * params.sqrt_rho * a ** -1.5


def _solve_s(params: QueueParams, a: float) -> RootResult:
    target = _target(params, a)
    if a < a_upper(params) * (1 - 1e-15):
        raise BracketError("branch a needs a >= (3 sqrt(rho))^(2/3)")
    if target >= 2.0 / 3.0:
        return RootResult(0.0, abs(2.0 / 3.0 - target) / target, 0, (0.0, 0.0))
    hi = max(a**3 / (2.0 * params.rho), 1.0)
    s, res, it = _brent(lambda s: k_function(s) - target, 0.0, hi, target)
    return RootResult(s, res, it, (0.0, hi))


def _solve_angle(params: QueueParams, a: float, branch: str) -> tuple[float, RootResult]:
    """Angle w of the b branch (w <= pi/2) or pi - w of the c branch."""
    target = _target(params, a)
    half = math.pi / 2
    if branch == "b":
        f = lambda w: _n_function(w) / math.sin(w) ** 3 - target
        hi = half
        if target <= 2.0 / 3.0 or target > math.pi / 2 * (1 + 1e-15):
            raise BracketError("branch b needs (4 sqrt(rho)/pi)^(2/3) < a < (3 sqrt(rho))^(2/3)")
        lo = min(math.sqrt(max(target - 2.0 / 3.0, 0.0) * 5.0) / 4.0, 1e-3)
        while f(lo) > 0:
            lo /= 4.0
            if lo < 1e-150:
                raise BracketError("failed to bracket the b-branch angle")
    else:
        f = lambda d: (math.pi - _n_function(d)) / math.sin(d) ** 3 - target
        hi = half
        if target < math.pi / 2 * (1 - 1e-15):
            raise BracketError("branch c needs a <= (4 sqrt(rho)/pi)^(2/3)")
        lo = 0.5 * (math.pi / target) ** (1.0 / 3.0)
        while f(lo) < 0:
            lo /= 2.0
    if f(hi) * f(lo) > 0 and abs(f(hi)) <= ROOT_RESIDUAL * target:
        x, res, it = hi, abs(f(hi)) / target, 0
    else:
        x, res, it = _brent(f, lo, hi, target)
    return x, RootResult(math.sin(x) ** 2, res, it, (lo, hi))


def solve_A(params: QueueParams, a: float) -> RootResult:
    """Root A(a) >= 0 of the branch-a equation, for a >= (3 sqrt(rho))^(2/3)."""
    params.require_stationary()
    return _solve_s(params, a)


def solve_B(params: QueueParams, a: float) -> RootResult:
    """Root B(a) in (0, 1) of the branch-b equation."""
    params.require_stationary()
    return _solve_angle(params, a, "b")[1]


def solve_C(params: QueueParams, a: float) -> RootResult:
    """Root C(a) in (0, 1] of the branch-c equation, for 0 < a <= (4 sqrt(rho)/pi)^(2/3)."""
    params.require_stationary()
    return _solve_angle(params, a, "c")[1]


def a_large_approx(params: QueueParams, a: float) -> float:
    """Large-a expansion ``a^3/(4 rho) - 3 log a + 1 + log rho`` of A(a)."""
    return a**3 / (4.0 * params.rho) - 3.0 * math.log(a) + 1.0 + math.log(params.rho)


def c_small_approx(params: QueueParams, a: float) -> float:
    """Small-a expansion ``(pi/(2 sqrt rho))^(2/3) a`` of C(a)."""
    return (math.pi / (2.0 * params.sqrt_rho)) ** (2.0 / 3.0) * a


# ---------------------------------------------------------------- case 4

@dataclass(frozen=True)
class Case4Branch:
    """Branch label, its parameter (A, B or C) and Lambda, Phi at (n, t)."""

    label: str
    parameter: float
    lam: float
    phi: float

    def __post_init__(self) -> None:
        if self.label not in ("a", "b", "c"):
            raise DomainError(f"unknown branch {self.label!r}")
        if self.label == "a" and self.parameter < 0:
            raise DomainError("A must be nonnegative")
        if self.label in ("b", "c") and not 0.0 <= self.parameter <= 1.0:
            raise DomainError("B and C lie in (0, 1)")


def branch_of(params: QueueParams, a: float) -> str:
    if a >= a_upper(params):
        return "a"
    if a > a_lower(params):
        return "b"
    return "c"


def _common_prefactor(params: QueueParams, a: float, t: float) -> float:
    s = params.sqrt_rho
    return math.exp((1.0 + s) / (2.0 * (1.0 - s))) / ((1.0 - s) * a**0.75 * t)


def case4_branch(params: QueueParams, n: float, t: float) -> Case4Branch:
    """Lambda(n, t) and Phi(n, t) with numerically stable branch formulas."""
    params.require_stationary()
    if n <= 0 or t <= 0:
        raise DomainError("case 4 needs n > 0 and t > 0")
    sr = params.sqrt_rho
    a = n * t ** (-2.0 / 3.0)
    t13 = t ** (1.0 / 3.0)
    label = branch_of(params, a)
    pre = _common_prefactor(params, a, t)
    if label == "a":
        s = _solve_s(params, a).value
        lam = pre / math.sqrt(sr * _q_function(s))
        phi = (3.0 * sr * s / a - 2.0 * math.sqrt(a * (1.0 + s))) * t13
        return Case4Branch("a", s, lam, phi)
    if label == "b":
        w, root = _solve_angle(params, a, "b")
        sin2 = math.sin(w) ** 2
        if w < _SMALL_ANGLE:
            q = _q_function(-sin2)
        else:
            q = (2.0 / j_function(w) - 3.0 * math.cos(w)) / sin2
        lam = pre / math.sqrt(sr * q)
        phi = (-3.0 * sr * sin2 / a - 2.0 * math.sqrt(a) * math.cos(w)) * t13
        return Case4Branch("b", root.value, lam, phi)
    d, root = _solve_angle(params, a, "c")
    lam = pre * math.sin(d) / math.sqrt(a**1.5 + 3.0 * sr * math.cos(d))
    phi = (-3.0 * sr * math.sin(d) ** 2 / a + 2.0 * math.sqrt(a) * math.cos(d)) * t13
    return Case4Branch("c", root.value, lam, phi)


def case4_literal(params: QueueParams, a: float, t: float, label: str, value: float) -> tuple[float, float]:
    """Lambda and Phi from the branch formulas exactly as written, given A, B or C."""
    sr = params.sqrt_rho
    pre = _common_prefactor(params, a, t)
    t13 = t ** (1.0 / 3.0)
    if label == "a":
        lam = pre * math.sqrt(value) / math.sqrt(3.0 * sr * math.sqrt(1.0 + value) - a**1.5)
        phi = (3.0 * sr * value / a - 2.0 * math.sqrt(a * (1.0 + value))) * t13
    elif label == "b":
        lam = pre * math.sqrt(value) / math.sqrt(-3.0 * sr * math.sqrt(1.0 - value) + a**1.5)
        phi = (-3.0 * sr * value / a - 2.0 * math.sqrt(a * (1.0 - value))) * t13
    elif label == "c":
        lam = pre * math.sqrt(value) / math.sqrt(3.0 * sr * math.sqrt(1.0 - value) + a**1.5)
        phi = (-3.0 * sr * value / a + 2.0 * math.sqrt(a * (1.0 - value))) * t13
    else:
        raise DomainError(f"unknown branch {label!r}")
    return lam, phi


def case4_log_density(params: QueueParams, n: float, t: float) -> float:
    br = case4_branch(params, n, t)
    return -0.5 * n * math.log(params.rho) + math.log(br.lam) - params.tail_rate * t + br.phi


def case4_density(params: QueueParams, n: float, t: float) -> float:
    return math.exp(case4_log_density(params, n, t))


# ---------------------------------------------------------------- cases 1, 2, 3, 5

def case1_density(params: QueueParams, n: float, t: float, terms: int = 2) -> float:
    """Two-term expansion above the fluid line n/t > 1 - rho."""
    params.require_stationary()
    rho = params.rho
    if n <= 0:
        raise DomainError("case 1 needs n > 0")
    d1 = 1.0 - (1.0 - rho) * t / n
    if d1 <= 0:
        raise DomainError("case 1 needs Delta_1 = 1 - (1-rho) t/n > 0")
    lead = d1 ** (rho / (1.0 - rho)) / n
    if terms == 1:
        return lead
    bracket = (
        rho * (2 * rho**2 + rho - 1)
        + 4 * rho**2 * d1 * math.log(d1)
        + 6 * rho * (1 - rho) * d1
        - (rho**2 - rho + 2) * d1**2
    )
    corr = d1 ** ((3 * rho - 2) / (1 - rho)) * bracket / (2 * (1 - rho) ** 3 * n**2)
    return lead + corr


def _gauss_moment_log(nu: float, c: float, delta: float) -> float:
    """log of int_0^inf y^nu exp(-c (y - delta)^2) dy."""
    shift = c * delta**2 if delta < 0 else 0.0
    sd = 1.0 / math.sqrt(2.0 * c)
    peak = max(delta, 0.0)
    f = lambda y: y**nu * math.exp(-c * (y - delta) ** 2 + shift)
    hi = peak + 40.0 * sd + (abs(delta) if delta < 0 else 0.0)
    pts = [p for p in (peak, peak + sd) if 0 < p < hi]
    val, err = integrate.quad(f, 0.0, hi, points=pts or None, epsabs=0.0, epsrel=1e-11, limit=200)
    if not val > 0 or err > 1e-8 * val:
        raise ConvergenceError("case-2 integral failed")
    return math.log(val) - shift


def case2_log_density(params: QueueParams, n: float, t: float, max_delta: float = 10.0) -> float:
    params.require_stationary()
    rho = params.rho
    if n <= 0:
        raise DomainError("case 2 needs n > 0")
    d2 = math.sqrt(n) * (1.0 - (1.0 - rho) * t / n)
    if abs(d2) > max_delta:
        raise RegionError(f"|Delta_2| = {abs(d2):.3g} exceeds {max_delta}")
    nu = rho / (1.0 - rho)
    c = (1.0 - rho) / (2.0 * (1.0 + rho))
    log_pre = 0.5 * math.log((1 - rho) / (1 + rho)) - 0.5 * math.log(2 * math.pi)
    log_pre -= (2 - rho) / (2 * (1 - rho)) * math.log(n)
    return log_pre + _gauss_moment_log(nu, c, d2)


def case2_density(params: QueueParams, n: float, t: float, max_delta: float = 10.0) -> float:
    """Diffusive band n/t = 1 - rho + O(t^(-1/2))."""
    return math.exp(case2_log_density(params, n, t, max_delta))


def case3_log_k(params: QueueParams, theta: float) -> float:
    """log K(theta) of the case-3 amplitude."""
    rho = params.rho
    sp = spectral_point(params, theta)
    al = sp.alpha
    b = 1.0 + rho + theta
    return (
        -0.5 * math.log(2 * math.pi)
        + al * math.log(al)
        + log_gamma(al)
        + math.log(sp.z_minus)
        + (al - 1.0) * math.log(1.0 - rho * sp.z_minus)
        + 0.75 * math.log(b * b - 4 * rho)
        - al * math.log(1.0 - rho * sp.z_plus)
        - 0.5 * math.log(b)
    )


def theta_star(params: QueueParams, ratio: float) -> float:
    """Saddle ``sqrt(ratio^2 + 4 rho) - 1 - rho`` for ratio = n/t."""
    return math.sqrt(ratio * ratio + 4.0 * params.rho) - 1.0 - params.rho


def case3_log_density(params: QueueParams, n: float, t: float) -> float:
    params.require_stationary()
    rho = params.rho
    if n <= 0 or t <= 0:
        raise DomainError("case 3 needs n > 0 and t > 0")
    x = n / t
    if not x < 1.0 - rho:
        raise DomainError("case 3 needs 0 < n/t < 1 - rho")
    root = math.sqrt(x * x + 4 * rho)
    expo = t * (-1.0 - rho + root) + n * math.log((root - x) / (2 * rho))
    power = -(1.0 + 0.5 * math.sqrt(1.0 + 4 * rho / (x * x))) * math.log(n)
    return power + case3_log_k(params, theta_star(params, x)) + expo


def case3_density(params: QueueParams, n: float, t: float) -> float:
    """Sector 0 < n/t < 1 - rho, saddle point at theta*(n/t)."""
    return math.exp(case3_log_density(params, n, t))


def contour_constant(n: int) -> float:
    """``sum_l (n+l)! / ((l!)^2 n!)``; e for n = 0 and 2e for n = 1."""
    if int(n) != n or n < 0:
        raise DomainError("n must be a nonnegative integer")
    return ascending_series_sum(1.0, lambda l: (n + l + 1) / (l + 1) ** 2, rel_tol=1e-17)


def contour_constant_asymptote(n: float) -> float:
    """Large-n behaviour ``sqrt(e) exp(2 sqrt n) / (2 sqrt(pi) n^(1/4))``."""
    return math.sqrt(math.e) * math.exp(2.0 * math.sqrt(n)) / (2.0 * math.sqrt(math.pi) * n**0.25)


def _case5_log_envelope(params: QueueParams, t: float) -> float:
    rho, sr = params.rho, params.sqrt_rho
    log_pre = (2 / 3) * math.log(2) - 0.5 * math.log(3) + (5 / 6) * math.log(math.pi) - (5 / 12) * math.log(rho)
    log_pre -= math.log(1 - sr) + (5 / 6) * math.log(t)
    expo = -params.tail_rate * t - 2 ** (-2 / 3) * 3 * math.pi ** (2 / 3) * rho ** (1 / 6) * t ** (1 / 3)
    return log_pre + expo + sr / (1 - sr)


def case5_log_density(params: QueueParams, n: int, t: float) -> float:
    params.require_stationary()
    if t <= 0:
        raise DomainError("case 5 needs t > 0")
    return _case5_log_envelope(params, t) - 0.5 * n * math.log(params.rho) + math.log(contour_constant(n))


def case5_density(params: QueueParams, n: int, t: float) -> float:
    """n = O(1), t large."""
    return math.exp(case5_log_density(params, n, t))


def case5_local_rate(params: QueueParams, t: float) -> float:
    """``-d/dt log p_n(t)`` of the case-5 formula (independent of n)."""
    rho = params.rho
    return params.tail_rate + 2 ** (-2 / 3) * math.pi ** (2 / 3) * rho ** (1 / 6) * t ** (-2 / 3) + 5.0 / (6.0 * t)


# ---------------------------------------------------------------- matching regions

def matching_log_density(params: QueueParams, pair: str, n: float, t: float) -> float:
    params.require_stationary()
    rho, sr = params.rho, params.sqrt_rho
    if n <= 0 or t <= 0:
        raise DomainError("matching forms need n > 0 and t > 0")
    x = n / t
    if pair == "2-3":
        if not x < 1 - rho:
            raise DomainError("the 2-3 form needs n/t < 1 - rho")
        g = 1.0 / (1.0 - rho)
        return (
            0.5 * math.log((1 - rho) / (2 * math.pi))
            + math.lgamma(g)
            - g * math.log(1 - rho - x)
            + (1 + rho) / (2 * (1 - rho)) * math.log((1 + rho) / n)
            - math.log(n)
            - t / (2 * (1 + rho)) * (x - 1 + rho) ** 2
        )
    if pair == "3-4a":
        if not (x < 1 - rho and n * t ** (-2 / 3) > a_upper(params)):
            raise DomainError("the 3-4a form needs t^(2/3) << n << t")
        return (
            -0.5 * n * math.log(rho)
            - math.log(math.sqrt(2 * rho) * (1 - sr) * t)
            + (1 + sr) / (2 * (1 - sr))
            - params.tail_rate * t
            - n * n / (4 * sr * t)
            + sr * (t / n) * (math.log(rho) - 1 + 2 * math.log(t) - 3 * math.log(n))
        )
    if pair == "4c-5":
        if not (n >= 1 and n * t ** (-2 / 3) < a_lower(params)):
            raise DomainError("the 4c-5 form needs 1 << n << t^(2/3)")
        return (
            -(5 / 12) * math.log(rho)
            - math.log(1 - sr)
            + (1 / 3) * math.log(math.pi / 2)
            - 0.5 * math.log(3)
            - 0.5 * n * math.log(rho)
            - (5 / 6) * math.log(t)
            - 0.25 * math.log(n)
            - params.tail_rate * t
            - 3 * (math.pi / 2) ** (2 / 3) * rho ** (1 / 6) * t ** (1 / 3)
            + 2 * math.sqrt(n)
            + (1 + sr) / (2 * (1 - sr))
        )
    raise DomainError(f"unknown matching pair {pair!r}")


def matching_density(params: QueueParams, pair: str, n: float, t: float) -> float:
    """Closed form valid in the overlap of two scales; ``pair`` is '2-3', '3-4a' or '4c-5'."""
    return math.exp(matching_log_density(params, pair, n, t))


# ---------------------------------------------------------------- classification

def default_band_width(params: QueueParams) -> float:
    rho = params.rho
    return 3.0 * math.sqrt((1.0 + rho) / (1.0 - rho))


def regime_classify(params: QueueParams, n: float, t: float, band_width: float | None = None) -> RegimeLabel:
    """Assign (n, t) to one of the scales.

    Cuts: case-2 band |n/t - (1-rho)| <= w/sqrt(t) with default
    w = 3 sqrt((1+rho)/(1-rho)); case 3 versus case 4 at n = t^(5/6); case 5
    for n <= t^(1/3).  ``boundary_distance`` is signed, positive inside the
    assigned region, in the coordinate that decided it (n/t or a).
    """
    params.require_stationary()
    if n < 0 or not t > 0:
        raise DomainError("need n >= 0 and t > 0")
    w = default_band_width(params) if band_width is None else band_width
    fluid = 1.0 - params.rho
    rf = Theorem.RHO_FIXED
    x = n / t
    edge = w / math.sqrt(t)
    if x > fluid + edge:
        return RegimeLabel(rf, "1", x - fluid - edge)
    if abs(x - fluid) <= edge:
        return RegimeLabel(rf, "2", edge - abs(x - fluid))
    cut34 = t ** (-1.0 / 6.0)
    if x > cut34:
        return RegimeLabel(rf, "3", min(fluid - edge - x, x - cut34))
    a = n * t ** (-2.0 / 3.0)
    a5 = t ** (-1.0 / 3.0)
    if a <= a5:
        return RegimeLabel(rf, "5", a5 - a)
    a1, a2 = a_upper(params), a_lower(params)
    # snap rounding noise onto the transition curves
    if abs(a - a1) <= 1e-12 * a1:
        a = a1
    elif abs(a - a2) <= 1e-12 * a2:
        a = a2
    if a >= a1:
        return RegimeLabel(rf, "4a", a - a1)
    if a > a2:
        d = a - a1 if a1 - a < a - a2 else a - a2
        return RegimeLabel(rf, "4b", d)
    return RegimeLabel(rf, "4c", a2 - a)


def asymptotic_density(params: QueueParams, n: int, t: float) -> float:
    """Approximation of the scale that ``regime_classify`` selects."""
    label = regime_classify(params, n, t)
    case = label.case
    if case == "1":
        return case1_density(params, n, t)
    if case == "2":
        return case2_density(params, n, t, max_delta=math.inf)
    if case == "3":
        return case3_density(params, n, t)
    if case == "5":
        return case5_density(params, int(n), t)
    return case4_density(params, n, t)


# ---------------------------------------------------------------- rays

@dataclass(frozen=True)
class Ray:
    """One characteristic in the (Y, T) plane; ``energy = p^2 - 1/Y`` is conserved."""

    energy: float
    y: np.ndarray
    t: np.ndarray
    returned: bool


@dataclass(frozen=True)
class RayFan:
    rays: list
    curves: dict


def _ray_rhs(sr: float):
    def rhs(_t, u):
        y, p = u
        return [-2.0 * sr * p, sr / (y * y)]

    return rhs


def trace_rays(
    params: QueueParams,
    ray_count: int,
    t_max: float = 1.0,
    energies=None,
    t_start: float = 1e-6,
    samples: int = 200,
) -> RayFan:
    """Integrate the characteristics of ``Psi_T / sqrt(rho) = Psi_Y^2 - 1/Y`` from the origin.

    Near the origin every ray follows Y = (3 sqrt(rho) T)^(2/3); a ray with
    energy E starts there at ``t_start`` with momentum ``-sqrt(E + 1/Y)``.
    Rays with E < 0 reach Y = 1/|E| and turn back to Y = 0; they are stopped
    when Y falls below its starting value.  Leaving the window T <= t_max is
    a normal stop.  Also returns the two transition curves.
    """
    params.require_stationary()
    if int(ray_count) != ray_count or ray_count < 1:
        raise DomainError("ray_count must be a positive integer")
    if not t_max > t_start:
        raise DomainError("t_max must exceed t_start")
    sr = params.sqrt_rho
    y_scale = (3.0 * sr * t_max) ** (2.0 / 3.0)
    if energies is None:
        energies = np.linspace(-3.0, 1.5, ray_count) / y_scale
    energies = np.asarray(energies, dtype=float)
    if energies.size != ray_count:
        raise DomainError("energies must have ray_count entries")
    y0 = (3.0 * sr * t_start) ** (2.0 / 3.0)
    rays = []
    for e in energies:
        if e + 1.0 / y0 <= 0:
            raise DomainError("energy too negative for the starting point")
        p0 = -math.sqrt(e + 1.0 / y0)

        def back(_t, u):
            return u[0] - y0

        back.terminal = True
        back.direction = -1
        sol = integrate.solve_ivp(
            _ray_rhs(sr),
            (t_start, t_max),
            [y0, p0],
            events=back,
            rtol=1e-10,
            atol=1e-12,
            dense_output=True,
        )
        if sol.status == -1 or not np.all(np.isfinite(sol.y)):
            raise IntegrationError(f"ray with energy {e:.4g} failed: {sol.message}")
        t_end = sol.t[-1]
        tt = np.linspace(t_start, t_end, samples)
        yy = sol.sol(tt)[0]
        rays.append(Ray(float(e), yy, tt, bool(sol.status == 1)))
    y_grid = np.linspace(0.0, 1.2 * y_scale, samples)
    curves = {
        "a-upper": (y_grid, y_grid**1.5 / (3.0 * sr)),
        "a-lower": (y_grid, math.pi * y_grid**1.5 / (4.0 * sr)),
    }
    return RayFan(rays, curves)
