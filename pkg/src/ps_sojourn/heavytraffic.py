"""Heavy-traffic approximations, rho = 1 - epsilon with epsilon -> 0.

Scalings: xi = eps n, tau = eps t (case 3), eta = eps^2 n, sigma = eps^3 t
(case 4, branches a/b/c), n = O(1) with sigma = O(1) (case 2) and
n, t = O(1) (case 1, the exact rho = 1 kernel).

Case 4 numerics
---------------
Branches a and b solve one analytic equation in ``s = A`` or ``s = -B``:

    sigma = R(s) / (2 s),
    R(s) = -2/(1-4s) - arcsinh(sqrt(s eta))/sqrt(s) + arctanh(2 sqrt s)/sqrt(s) + sqrt(eta (1+s eta)),

whose Taylor coefficients are explicit, so the 0/0 at s = 0 (the dashed
curve sigma = eta^(3/2)/3 - 8/3) is handled by a series.  Branches b and c
share an angle w in (0, pi) with ``B`` or ``C`` = sin(w)^2 / eta and
cos(w) = +sqrt(1 - B eta) or -sqrt(1 - C eta); then

    2 X^(3/2) sigma = w - sin w cos w + 2 sqrt(X)/(1+4X) - arctan(2 sqrt X),

and the dotted curve (C = 1/eta) is w = pi/2, an interior point.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize, special

from .asymptotics import _k_coefficients, _n_function, contour_constant
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
from .specfun import bessel_k, bessel_k_scaled

_SERIES_TERMS = 30
_SERIES_RADIUS = 0.1
ROOT_RESIDUAL = 1e-12


# ---------------------------------------------------------------- scalings

@dataclass(frozen=True)
class HtScaling:
    """Scaled variables of one (n, t, epsilon) triple."""

    epsilon: float
    xi: float
    tau: float
    eta: float
    sigma: float

    def __post_init__(self) -> None:
        _check_epsilon(self.epsilon)
        e = self.epsilon
        if not (math.isclose(self.eta, e * self.xi, rel_tol=1e-12, abs_tol=1e-300)
                and math.isclose(self.sigma, e * e * self.tau, rel_tol=1e-12, abs_tol=1e-300)):
            raise DomainError("scaled variables are inconsistent with a single (n, t)")

    @classmethod
    def from_nt(cls, epsilon: float, n: float, t: float) -> "HtScaling":
        _check_epsilon(epsilon)
        if n < 0 or t < 0:
            raise DomainError("n and t must be nonnegative")
        return cls(epsilon, epsilon * n, epsilon * t, epsilon**2 * n, epsilon**3 * t)

    @property
    def n(self) -> float:
        return self.xi / self.epsilon

    @property
    def t(self) -> float:
        return self.tau / self.epsilon


def _check_epsilon(epsilon: float) -> None:
    if not (isinstance(epsilon, (int, float, np.floating)) and 0.0 < epsilon < 1.0):
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")


def _check_positive(**values: float) -> None:
    for name, v in values.items():
        if not (math.isfinite(v) and v > 0):
            raise DomainError(f"{name} must be positive, got {v}")


# ---------------------------------------------------------------- case 1

def ht_case1_density(n: int, t: float) -> float:
    """n, t = O(1): the exact density at rho = 1."""
    from .exact import density_pollaczek

    if t < 0:
        raise DomainError("t must be nonnegative")
    return density_pollaczek(QueueParams(1.0), n, t)


# ---------------------------------------------------------------- case 2

def _u_rhs(u: float) -> float:
    return math.pi - math.atan(2 * u) + 2 * u / (1 + 4 * u * u)


def _u_rhs_complex(u: float) -> complex:
    return math.pi - 0.5j * cmath.log((1 - 2j * u) / (1 + 2j * u)) + 2 * u / (1 + 4 * u * u)


def _check_log_identity() -> None:
    for u in (1e-3, 0.3, 1.0, 7.0, 1e3):
        if abs(_u_rhs_complex(u) - _u_rhs(u)) > 1e-13:
            raise ConvergenceError("complex-log / arctan identity failed")


_check_log_identity()


def u_complex_residual(u: float, sigma: float) -> float:
    """Residual of the u-equation written with the complex logarithm."""
    return abs(2 * u**3 * sigma - _u_rhs_complex(u))


def solve_u(sigma: float) -> RootResult:
    """Root u > 0 of ``2 u^3 sigma = pi - arctan(2u) + 2u/(1+4u^2)``."""
    _check_positive(sigma=sigma)
    f = lambda u: 2 * u**3 * sigma - _u_rhs(u)
    hi = 1.1 * (math.pi / (2 * sigma)) ** (1 / 3)
    u, res, it = _brent(f, 0.0, hi, math.pi)
    return RootResult(u, res, it, (0.0, hi))


def u_small_sigma(sigma: float) -> float:
    """Two-term expansion of u(sigma) as sigma -> 0."""
    return (math.pi / (4 * sigma)) ** (1 / 3) + 2 / (3 * math.pi)


def ht_case2_log_density(epsilon: float, n: int, sigma: float) -> float:
    _check_epsilon(epsilon)
    _check_positive(sigma=sigma)
    u = solve_u(sigma).value
    w = 1 + 4 * u * u
    return (
        math.log(4 * math.sqrt(math.pi))
        + 1.5 * math.log(epsilon)
        + math.log(u)
        + 0.5 * math.log(w)
        - 0.5 * math.log(8 + 3 * sigma * w * w)
        - (0.125 - 0.5 * u * u) * sigma
        - (3 + 4 * u * u) / (2 * w)
        - ((0.25 + 3 * u * u) * sigma - 2 / w) / epsilon
        + math.log(contour_constant(n))
    )


def ht_case2_density(epsilon: float, n: int, sigma: float) -> float:
    """n = O(1), t = sigma / eps^3."""
    return math.exp(ht_case2_log_density(epsilon, n, sigma))


# ---------------------------------------------------------------- case 3

def ht_case3_density(epsilon: float, xi: float, tau: float, terms: int = 2) -> float:
    """n = xi/eps, t = tau/eps; one- or two-term expansion."""
    _check_epsilon(epsilon)
    if not xi > 0:
        raise DomainError("xi must be positive")
    if tau < 0:
        raise DomainError("tau must be nonnegative")
    if terms not in (1, 2):
        raise DomainError("terms must be 1 or 2")
    decay = math.exp(-tau / xi)
    out = epsilon / xi * decay
    if terms == 2:
        corr = (
            (tau - 1) / xi**2
            + (4 * tau - tau**2) / (2 * xi**3)
            - 1.5 * tau**2 / xi**4
            + tau**3 / (3 * xi**5)
        )
        out += epsilon**2 * corr * decay
    return out


# ---------------------------------------------------------------- case 4 curves

def dashed_curve(eta):
    """Boundary of branch a: ``sigma = eta^(3/2)/3 - 8/3`` (a ray through eta = 4)."""
    eta = np.asarray(eta, dtype=float)
    out = eta**1.5 / 3 - 8 / 3
    return float(out) if out.ndim == 0 else out


def dotted_curve(eta):
    """Boundary between branches b and c, where C = B = 1/eta."""
    eta = np.asarray(eta, dtype=float)
    out = 0.5 * eta**1.5 * (math.pi / 2 + 2 * np.sqrt(eta) / (4 + eta) - np.arcsin(np.sqrt(4 / (4 + eta))))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------- case 4 series

@lru_cache(maxsize=64)
def _sigma_series(eta: float) -> np.ndarray:
    """Coefficients of sigma(s) = R(s)/(2s) in powers of s."""
    k = np.arange(1, _SERIES_TERMS + 1)
    c = _k_coefficients()[k - 1]
    r = -2.0 * 4.0**k * (2 * k) / (2 * k + 1) + eta ** (k + 0.5) * c
    out = 0.5 * r
    out.flags.writeable = False
    return out


@lru_cache(maxsize=64)
def _den_series(eta: float) -> np.ndarray:
    """Coefficients of D(s)/s, D the 0/0 denominator of Lambda near s = 0."""
    m = _SERIES_TERMS
    sig = np.asarray(_sigma_series(eta))
    k = np.arange(m)
    p = special.binom(0.5, k) * eta**k
    sp = np.convolve(sig, p)[:m]
    inner = 3 * eta**1.5 * sp
    inner[0] -= eta**3
    d = np.convolve([1.0, -8.0, 16.0], inner)[:m] + 8 * eta**1.5 * p
    out = d[1:].copy()
    out.flags.writeable = False
    return out


def _series_radius(eta: float) -> float:
    return _SERIES_RADIUS * min(0.25, 1.0 / eta)


def _horner(c: np.ndarray, s: float) -> float:
    return float(np.polynomial.polynomial.polyval(s, c))


def _sigma_of_s(eta: float, s: float) -> float:
    """sigma on branch a (s = A > 0) or b (s = -B < 0)."""
    if abs(s) <= _series_radius(eta):
        return _horner(_sigma_series(eta), s)
    if s > 0:
        rs = math.sqrt(s)
        r = (
            -2 / (1 - 4 * s)
            - math.asinh(math.sqrt(s * eta)) / rs
            + math.atanh(2 * rs) / rs
            + math.sqrt(eta * (1 + s * eta))
        )
        return r / (2 * s)
    x = -s
    return _sigma_bc(eta, math.asin(min(1.0, math.sqrt(x * eta))), upper=False)


def _g(x: float) -> float:
    rx = math.sqrt(x)
    return 2 * rx / (1 + 4 * x) - math.atan(2 * rx)


def _sigma_bc(eta: float, angle: float, upper: bool) -> float:
    """sigma at w = angle (branch b, upper=False) or w = pi - angle (branch c)."""
    x = math.sin(angle) ** 2 / eta
    if not upper and x <= _series_radius(eta):
        return _horner(_sigma_series(eta), -x)
    n = _n_function(angle)
    if upper:
        n = math.pi - n
    return (n + _g(x)) / (2 * x**1.5)


# ---------------------------------------------------------------- case 4 roots

def _brent(f, lo: float, hi: float, scale: float) -> tuple[float, float, int]:
    flo, fhi = f(lo), f(hi)
    if not (np.isfinite(flo) and np.isfinite(fhi)) or flo * fhi > 0:
        raise BracketError(f"no sign change on [{lo:.6g}, {hi:.6g}]")
    x, info = optimize.brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, full_output=True, maxiter=500)
    if not info.converged:
        raise ConvergenceError("root solver did not converge")
    return x, abs(f(x)) / scale, info.iterations


def _snap(eta: float, sigma: float) -> float:
    for curve in (dashed_curve(eta), dotted_curve(eta)):
        if abs(sigma - curve) <= 1e-12 * max(1.0, abs(curve)):
            return curve
    return sigma


def ht_region_classify(eta: float, sigma: float) -> RegimeLabel:
    """Branch a below the dashed curve (eta > 4), c above the dotted curve, b between.

    ``boundary_distance`` is the sigma-distance to the nearest bounding curve,
    zero on a curve.
    """
    _check_positive(eta=eta, sigma=sigma)
    ht = Theorem.HEAVY_TRAFFIC
    sigma = _snap(eta, sigma)
    s1, s2 = dashed_curve(eta), dotted_curve(eta)
    if eta > 4 and sigma < s1:
        return RegimeLabel(ht, "4a", s1 - sigma)
    if sigma <= s2:
        d = s2 - sigma if eta <= 4 else min(sigma - s1, s2 - sigma)
        return RegimeLabel(ht, "4b", d)
    return RegimeLabel(ht, "4c", sigma - s2)


def _require_region(eta: float, sigma: float, case: str) -> float:
    label = ht_region_classify(eta, sigma)
    if label.case != case:
        raise RegionError(f"(eta, sigma) = ({eta}, {sigma}) lies in region {label.case}, not {case}")
    return _snap(eta, sigma)


def _solve_a(eta: float, sigma: float) -> RootResult:
    scale = max(1.0, abs(sigma))
    f = lambda s: _sigma_of_s(eta, s) - sigma
    if f(0.0) <= 0:
        return RootResult(0.0, abs(f(0.0)) / scale, 0, (0.0, 0.0))
    gap = 0.125
    while f(0.25 - gap) > 0:
        gap /= 4
        if gap < 1e-15:
            raise BracketError("failed to bracket the branch-a root")
    s, res, it = _brent(f, 0.0, 0.25 - gap, scale)
    return RootResult(s, res, it, (0.0, 0.25 - gap))


def _solve_bc(eta: float, sigma: float, upper: bool) -> tuple[float, RootResult]:
    scale = max(1.0, abs(sigma))
    half = math.pi / 2
    f = lambda w: _sigma_bc(eta, w, upper) - sigma
    if abs(f(half)) <= ROOT_RESIDUAL * scale:
        return half, RootResult(1.0 / eta, abs(f(half)) / scale, 0, (half, half))
    if upper:
        lo = min(0.5 * (math.pi * eta**1.5 / (2 * sigma)) ** (1 / 3), 1.0)
        while f(lo) < 0:
            lo /= 2
            if lo < 1e-100:
                raise BracketError("failed to bracket the branch-c angle")
    else:
        lo = 0.0
    w, res, it = _brent(f, lo, half, scale)
    return w, RootResult(math.sin(w) ** 2 / eta, res, it, (lo, half))


def solve_Atilde(eta: float, sigma: float) -> RootResult:
    """Root in (0, 1/4) of the branch-a equation (0 on the dashed curve)."""
    sigma = _require_region(eta, sigma, "4a") if sigma != dashed_curve(eta) else sigma
    return _solve_a(eta, sigma)


def solve_Btilde(eta: float, sigma: float) -> RootResult:
    """Root in (0, 1/eta] of the branch-b equation."""
    sigma = _require_region(eta, sigma, "4b")
    return _solve_bc(eta, sigma, upper=False)[1]


def solve_Ctilde(eta: float, sigma: float) -> RootResult:
    """Root in (0, 1/eta] of the branch-c equation (1/eta on the dotted curve)."""
    sigma = _snap(eta, sigma)
    if sigma != dotted_curve(eta):
        sigma = _require_region(eta, sigma, "4c")
    return _solve_bc(eta, sigma, upper=True)[1]


def atilde_large_eta(epsilon: float, zeta: float, sigma: float) -> float:
    """Expansion of A for eta = zeta/eps -> infinity at fixed sigma."""
    return 0.25 - epsilon / zeta - sigma * epsilon**2 / zeta**2


@dataclass(frozen=True)
class HtCase4Branch:
    label: str
    parameter: float
    log_lam: float
    phi: float


def ht_case4_branch(eta: float, sigma: float) -> HtCase4Branch:
    """Branch label, its root, log Lambda and Phi at (eta, sigma)."""
    label = ht_region_classify(eta, sigma).case
    sigma = _snap(eta, sigma)
    if label == "4a":
        s = _solve_a(eta, sigma).value
        return HtCase4Branch(label, s, *_lam_phi_s(eta, sigma, s))
    w, root = _solve_bc(eta, sigma, upper=(label == "4c"))
    x = root.value
    if label == "4b" and x <= _series_radius(eta):
        return HtCase4Branch(label, x, *_lam_phi_s(eta, sigma, -x))
    cos_w = math.cos(w) if label == "4b" else -math.cos(w)
    return HtCase4Branch(label, x, *_lam_phi_angle(eta, sigma, x, cos_w))


def _lam_phi_s(eta: float, sigma: float, s: float) -> tuple[float, float]:
    root = math.sqrt(1 + s * eta)
    if abs(s) <= _series_radius(eta):
        d_over_s = _horner(_den_series(eta), s)
    else:
        d = (1 - 4 * s) ** 2 * (3 * sigma * eta**1.5 * root - eta**3) + 8 * eta**1.5 * root
        d_over_s = d / s
    if not d_over_s > 0:
        raise ConvergenceError("branch a/b prefactor has a nonpositive denominator")
    log_lam = (
        math.log(2)
        + 0.5 * math.log(eta * (1 - 4 * s))
        - 0.5 * math.log(d_over_s)
        + eta / 4
        - 1 / (1 - 4 * s)
        - (s / 2 + 0.125) * sigma
    )
    phi = 3 * s * sigma - 2 * math.sqrt(eta) * root + 2 / (1 - 4 * s)
    return log_lam, phi


def _lam_phi_angle(eta: float, sigma: float, x: float, cos_w: float) -> tuple[float, float]:
    den = (1 + 4 * x) ** 2 * (eta**3 - 3 * sigma * eta**1.5 * cos_w) - 8 * eta**1.5 * cos_w
    if not den > 0:
        raise ConvergenceError("branch b/c prefactor has a nonpositive denominator")
    log_lam = (
        math.log(2)
        + 0.5 * math.log(x * eta * (1 + 4 * x))
        - 0.5 * math.log(den)
        + eta / 4
        - 1 / (1 + 4 * x)
        + (x / 2 - 0.125) * sigma
    )
    phi = -3 * x * sigma - 2 * math.sqrt(eta) * cos_w + 2 / (1 + 4 * x)
    return log_lam, phi


def ht_case4_log_density(epsilon: float, eta: float, sigma: float) -> float:
    _check_epsilon(epsilon)
    br = ht_case4_branch(eta, sigma)
    return 2 * math.log(epsilon) + br.log_lam + (br.phi + eta / 2 - sigma / 4) / epsilon


def ht_case4_density(epsilon: float, eta: float, sigma: float) -> float:
    """n = eta/eps^2, t = sigma/eps^3."""
    return math.exp(ht_case4_log_density(epsilon, eta, sigma))


# ---------------------------------------------------------------- matching

def ht_matching_log_density(epsilon: float, pair: str, n: float, t: float) -> float:
    """Overlap forms: '1-2' (n = O(1), 1 << t << eps^-3) and '2-4c' (1 << n << eps^-2)."""
    _check_epsilon(epsilon)
    _check_positive(t=t)
    if pair == "1-2":
        if int(n) != n or n < 0:
            raise DomainError("the 1-2 form needs an integer n >= 0")
        return (
            math.log(2 * math.sqrt(math.pi))
            - 0.5 * math.log(3 * t)
            - 2 ** (-4 / 3) * 3 * math.pi ** (2 / 3) * t ** (1 / 3)
            - 0.5
            + math.log(contour_constant(int(n)))
        )
    if pair == "2-4c":
        _check_positive(n=n)
        eta, sigma = epsilon**2 * n, epsilon**3 * t
        u = solve_u(sigma).value
        w = 1 + 4 * u * u
        return (
            math.log(2)
            + 2 * math.log(epsilon)
            - 0.25 * math.log(eta)
            + math.log(u)
            + 0.5 * math.log(w)
            - 0.5 * math.log(8 + 3 * sigma * w * w)
            - (0.125 - 0.5 * u * u) * sigma
            - (3 + 4 * u * u) / (2 * w)
            + 0.5
            - ((0.25 + 3 * u * u) * sigma - 2 / w - 2 * math.sqrt(eta)) / epsilon
        )
    raise DomainError(f"unknown matching pair {pair!r}")


def ht_matching_density(epsilon: float, pair: str, n: float, t: float) -> float:
    return math.exp(ht_matching_log_density(epsilon, pair, n, t))


# ---------------------------------------------------------------- classification

def ht_regime_classify(epsilon: float, n: float, t: float) -> RegimeLabel:
    """Assign (n, t) to a heavy-traffic scale.

    Cuts: n <= eps^(-1/2) is case 1 (t <= eps^(-3/2)) or case 2; otherwise
    case 3 for t <= eps^-2 and case 4 beyond, split by the (eta, sigma) curves.
    ``boundary_distance`` is measured in the coordinate that decided the label.
    """
    _check_epsilon(epsilon)
    if n < 0 or not t > 0:
        raise DomainError("need n >= 0 and t > 0")
    ht = Theorem.HEAVY_TRAFFIC
    n_cut = epsilon**-0.5
    if n <= n_cut:
        t_cut = epsilon**-1.5
        if t <= t_cut:
            return RegimeLabel(ht, "1", min(n_cut - n, t_cut - t))
        return RegimeLabel(ht, "2", min(n_cut - n, t - t_cut))
    t_cut = epsilon**-2
    if t <= t_cut:
        return RegimeLabel(ht, "3", min(n - n_cut, t_cut - t))
    return ht_region_classify(epsilon**2 * n, epsilon**3 * t)


def ht_asymptotic_density(epsilon: float, n: int, t: float) -> float:
    """Approximation of the scale that ``ht_regime_classify`` selects."""
    case = ht_regime_classify(epsilon, n, t).case
    if case == "1":
        return ht_case1_density(int(n), t)
    if case == "2":
        return ht_case2_density(epsilon, int(n), epsilon**3 * t)
    if case == "3":
        return ht_case3_density(epsilon, epsilon * n, epsilon * t)
    return ht_case4_density(epsilon, epsilon**2 * n, epsilon**3 * t)


# ---------------------------------------------------------------- conditional laws

def solve_chat(sigma: float) -> RootResult:
    """Root C > 0 of ``2 C^(3/2) sigma = pi + 4 sqrt(C)/(1+4C) - 2 arctan(2 sqrt C)``."""
    _check_positive(sigma=sigma)

    def f(c):
        rc = math.sqrt(c)
        return 2 * c * rc * sigma - (math.pi + 4 * rc / (1 + 4 * c) - 2 * math.atan(2 * rc))

    hi = 1.1 * (math.pi / (2 * sigma)) ** (2 / 3)
    while f(hi) < 0:
        hi *= 2
    c, res, it = _brent(f, 0.0, hi, math.pi)
    return RootResult(c, res, it, (0.0, hi))


def q_factor(sigma: float) -> float:
    """Precision of the Gaussian law in eta at fixed sigma."""
    c = solve_chat(sigma).value
    w = 1 + 4 * c
    return w**2 * (3 * sigma * w**2 + 16) / (16 * (3 * sigma * w**2 + 16 * (1 + 2 * c)))


def conditional_law(epsilon: float, n: float, t: float, law: str = "bessel") -> float:
    """Limit laws of the number present given sojourn time t, as a mass at n.

    ``bessel``: t = tau/eps, law in xi = eps n with a K0 normalizer.
    ``gaussian``: the same scale for large tau, centred at xi = sqrt(tau).
    ``sigma``: t = sigma/eps^3, Gaussian in eta = eps^2 n.
    """
    _check_epsilon(epsilon)
    _check_positive(n=n, t=t)
    if law == "bessel":
        xi, tau = epsilon * n, epsilon * t
        z = 2 * math.sqrt(tau)
        # e^{-xi - tau/xi} / K0(z) with K0 = e^{-z} k0e(z)
        return epsilon / (2 * xi * bessel_k_scaled(0, z)) * math.exp(z - xi - tau / xi)
    if law == "gaussian":
        xi, tau = epsilon * n, epsilon * t
        rt = math.sqrt(tau)
        return epsilon / (math.sqrt(math.pi) * tau**0.25) * math.exp(-((xi - rt) ** 2) / rt)
    if law == "sigma":
        eta, sigma = epsilon**2 * n, epsilon**3 * t
        c = solve_chat(sigma).value
        q = q_factor(sigma)
        centre = 4 / (4 * c + 1)
        return epsilon**1.5 * math.sqrt(q / (2 * math.pi)) * math.exp(-q / (2 * epsilon) * (eta - centre) ** 2)
    raise DomainError(f"unknown law {law!r}")


# ---------------------------------------------------------------- unconditional density

def morrison_sigma_of_psi(psi):
    """``4 (sin psi + psi) tan(psi/2)^3``, increasing from 0 on (0, pi)."""
    psi = np.asarray(psi, dtype=float)
    out = 4 * (np.sin(psi) + psi) * np.tan(psi / 2) ** 3
    return float(out) if out.ndim == 0 else out


def morrison_psi(sigma: float) -> float:
    """Invert sigma(psi) on (1e-6, pi - 1e-6)."""
    _check_positive(sigma=sigma)
    lo, hi = 1e-6, math.pi - 1e-6
    f = lambda p: morrison_sigma_of_psi(p) - sigma
    return _brent(f, lo, hi, max(1.0, sigma))[0]


def _morrison_parts(sigma: float) -> tuple[float, float, float, float]:
    psi = morrison_psi(sigma)
    x = psi / 2
    tan, csc2 = math.tan(x), 1 / math.sin(x) ** 2
    sec2 = 1 / math.cos(x) ** 2
    f0 = 2 * psi * tan + sigma / 4 * csc2
    f1 = sigma / 8 * csc2 - psi * tan
    f0pp = sec2 * (2 + psi * tan) + sigma / 8 * csc2 * (2 / tan**2 + csc2)
    return psi, f0, f1, f0pp


def morrison_pt(epsilon: float, scale: str, t: float, terms: int = 2) -> float:
    """Unconditional sojourn density for rho = 1 - eps.

    ``tau-scale``: t = tau/eps, Bessel form with an optional eps^2 term.
    ``sigma-scale``: t = sigma/eps^3, Laplace form over an angle psi.
    """
    _check_epsilon(epsilon)
    _check_positive(t=t)
    if scale == "tau-scale":
        if terms not in (1, 2):
            raise DomainError("terms must be 1 or 2")
        tau = epsilon * t
        z = 2 * math.sqrt(tau)
        k0 = bessel_k(0, z)
        out = 2 * epsilon * k0
        if terms == 2:
            out += epsilon**2 / 3 * ((6 - tau) * k0 - math.sqrt(tau) * bessel_k(1, z))
        return out
    if scale == "sigma-scale":
        sigma = epsilon**3 * t
        psi, f0, f1, f0pp = _morrison_parts(sigma)
        return (
            epsilon**1.5
            / math.tan(psi / 2)
            * math.sqrt(2 * math.pi / f0pp)
            * math.exp(-f1 - f0 / epsilon)
        )
    raise DomainError(f"unknown scale {scale!r}")


# ---------------------------------------------------------------- rays

@dataclass(frozen=True)
class HtRay:
    """Characteristic from (eta0, 0); ``energy = p^2 - 1/eta`` is conserved."""

    eta0: float
    energy: float
    eta: np.ndarray
    sigma: np.ndarray
    hit_axis: bool


def trace_ht_rays(
    ray_count: int,
    sigma_max: float = 10.0,
    eta0=None,
    eta_stop: float = 1e-3,
    samples: int = 200,
):
    """Rays of ``Phi_sigma = Phi_eta^2 - 1/eta`` with ``Phi(eta, 0) = -eta/2``.

    Each ray starts at (eta0, 0) with momentum -1/2.  Rays with eta0 < 4 turn
    back on the dotted curve and are stopped at ``eta = eta_stop``; eta0 = 4 is
    the dashed curve.  Returns the rays and the two curves as (eta, sigma).
    """
    if int(ray_count) != ray_count or ray_count < 1:
        raise DomainError("ray_count must be a positive integer")
    _check_positive(sigma_max=sigma_max, eta_stop=eta_stop)
    if eta0 is None:
        eta0 = np.linspace(0.5, 8.0, ray_count)
    eta0 = np.asarray(eta0, dtype=float)
    if eta0.size != ray_count or np.any(eta0 <= eta_stop):
        raise DomainError("eta0 must have ray_count entries above eta_stop")

    def rhs(_s, u):
        return [-2 * u[1], 1 / (u[0] * u[0])]

    def axis(_s, u):
        return u[0] - eta_stop

    axis.terminal = True
    axis.direction = -1
    rays = []
    for e0 in eta0:
        sol = integrate.solve_ivp(
            rhs, (0.0, sigma_max), [e0, -0.5], events=axis, rtol=1e-10, atol=1e-12, dense_output=True
        )
        if sol.status == -1 or not np.all(np.isfinite(sol.y)):
            raise IntegrationError(f"ray from eta0 = {e0:.4g} failed: {sol.message}")
        ss = np.linspace(0.0, sol.t[-1], samples)
        rays.append(HtRay(float(e0), 0.25 - 1 / e0, sol.sol(ss)[0], ss, bool(sol.status == 1)))
    eta_max = max(float(eta0.max()), 4.0) * 1.5
    grid = np.linspace(0.0, eta_max, samples)
    dashed = grid[grid >= 4.0]
    curves = {
        "dashed": (dashed, dashed_curve(dashed)),
        "dotted": (grid, dotted_curve(grid)),
    }
    return rays, curves
