"""Acceptance suite: one recorded PASS/FAIL line per criterion (see the terminal summary).

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline.
"""

import math

import numpy as np
import pytest
from scipy import integrate, stats

from ps_sojourn import asymptotics as asy
from ps_sojourn import heavytraffic as ht
from ps_sojourn import transform as tr
from ps_sojourn.core import QueueParams
from ps_sojourn.exact import pollaczek_table, unconditional_density
from ps_sojourn.oracles import OdeConfig, laplace_transform, ode_log_table, ode_table, simulate_sojourn, survival

HALF = QueueParams(0.5)
LARGE_T = OdeConfig(dt_max=0.02, tolerance=1e-8)


def log_rel(approx_log: float, ref_log: float) -> float:
    return abs(approx_log - ref_log) / abs(ref_log)


def density_rel(log_a: float, log_b: float) -> float:
    """Relative density difference computed from logs (no underflow)."""
    return math.expm1(min(abs(log_a - log_b), 700.0))


def ode_log(params, n, t) -> float:
    return float(ode_log_table(params, n, [t], LARGE_T)[0, n])


# ---------------------------------------------------------------- 1

def test_c1_initial_condition(acceptance):
    worst = 0.0
    for rho in (0.3, 0.5, 0.8):
        p0 = pollaczek_table(QueueParams(rho), [0.0], 10)[0]
        worst = max(worst, float(np.max(np.abs(p0 - 1.0 / np.arange(1, 12)))))
    acceptance(1, worst <= 1e-8, f"max |p_n(0) - 1/(n+1)| = {worst:.2e} (tol 1e-8)")
    assert worst <= 1e-8


# ---------------------------------------------------------------- 2

def test_c2_pollaczek_vs_ode(acceptance):
    t = np.arange(0.0, 10.01, 0.5)
    worst = 0.0
    for rho in (0.3, 0.5, 0.8):
        params = QueueParams(rho)
        a = pollaczek_table(params, t, 10)
        b = ode_table(params, 10, t, OdeConfig(tolerance=1e-10))
        worst = max(worst, float(np.max(np.abs(a - b))))
    acceptance(2, worst <= 1e-6, f"Pollaczek vs ODE max |diff| = {worst:.2e} (tol 1e-6)")
    assert worst <= 1e-6


def test_c2_monte_carlo_ks(acceptance):
    params = QueueParams(0.7)
    samples = 1_000_000
    est = simulate_sojourn(params, 3, samples, seed=1)
    grid = np.linspace(0.0, float(est.times.max()) + 1.0, 40_001)
    surv = survival(params, 3, grid)
    res = stats.kstest(est.times, lambda q: 1.0 - np.interp(q, grid, surv))
    critical = stats.kstwo.ppf(0.95, samples)
    ok = res.statistic < critical
    acceptance(2, ok, f"MC KS D = {res.statistic:.2e} < {critical:.2e} (p = {res.pvalue:.2f})")
    assert ok


# ---------------------------------------------------------------- 3

def test_c3_transform_equivalence(acceptance):
    worst = 0.0
    for theta in (0.5, 1.0, 2.0):
        for n in (0, 1, 5):
            closed = tr.phat(HALF, theta, n)
            numeric = laplace_transform(HALF, n, theta)
            worst = max(worst, abs(numeric - closed) / closed)
    thetas = (0.004, 0.002, 0.001)
    limit_err = 0.0
    for n in (0, 1, 5):
        v = [tr.phat(HALF, th, n) for th in thetas]
        r1 = [2 * v[1] - v[0], 2 * v[2] - v[1]]
        limit_err = max(limit_err, abs((4 * r1[1] - r1[0]) / 3 - 1.0))
    ok = worst <= 1e-5 and limit_err <= 1e-6
    acceptance(3, ok, f"transform rel err {worst:.1e} (tol 1e-5); |phat(0+) - 1| = {limit_err:.1e} (tol 1e-6)")
    assert ok


# ---------------------------------------------------------------- 4

def test_c4_identities(acceptance):
    prod = max(abs(HALF.rho * sp.z_plus * sp.z_minus - 1) for sp in (tr.spectral_point(HALF, th) for th in (-0.05, 0.5, 2.0)))
    wr = max(tr.wronskian_check(HALF, th, l) for th in (0.5, 1.0, 2.0) for l in (0, 1, 5, 20))
    theta = -0.05
    b = 1 + HALF.rho + theta
    u = [1.0, b]  # rho^l H_l
    for l in range(1, 3000):
        u.append(((l + 1) * b * u[l] - l * HALF.rho * u[l - 1]) / (l + 1))
    closed = tr.sum_rho_h_closed(HALF, theta)
    sum_err = abs(math.fsum(u) - closed) / closed
    cc = max(abs(asy.contour_constant(0) - math.e), abs(asy.contour_constant(1) - 2 * math.e))
    ok = prod <= 1e-9 and wr <= 1e-9 and sum_err <= 1e-8 and cc <= 1e-12
    acceptance(4, ok, f"rho z+ z- - 1 = {prod:.0e}, Wronskian {wr:.0e}, closed sum {sum_err:.0e}, contour constants {cc:.0e}")
    assert ok


# ---------------------------------------------------------------- 5

CASE_POINTS = {
    "1": (asy.case1_density, [(20, 10), (40, 20), (80, 40)], 0.05),
    "2": (lambda p, n, t: asy.case2_density(p, n, t, max_delta=math.inf), [(50, 100), (100, 200), (200, 400)], 0.05),
    "4a": (asy.case4_density, [(round(2.5 * t ** (2 / 3)), t) for t in (200, 400, 800)], 0.05),
    "4b": (asy.case4_density, [(round(1.2 * t ** (2 / 3)), t) for t in (200, 400, 800)], 0.05),
    "4c": (asy.case4_density, [(round(0.5 * t ** (2 / 3)), t) for t in (200, 400, 800)], 0.05),
    "5": (asy.case5_density, [(2, 12.5), (2, 25), (2, 50)], 0.25),
}


def _errors(fn, points):
    return [log_rel(math.log(fn(HALF, n, t)), ode_log(HALF, n, t)) for n, t in points]


@pytest.mark.parametrize("case", list(CASE_POINTS))
def test_c5_regime_accuracy(case, acceptance):
    fn, points, tol = CASE_POINTS[case]
    errs = _errors(fn, points)
    decreasing = all(b < a for a, b in zip(errs, errs[1:]))
    ok = decreasing and errs[-1] <= tol
    trend = " > ".join(f"{e:.3g}" for e in errs)
    acceptance(5, ok, f"case {case} log-rel err {trend} at {points[-1]} (tol {tol:.0%})")
    assert ok


def test_c5_case3_trend(acceptance):
    errs = _errors(asy.case3_density, [(25, 100), (50, 200), (100, 400)])
    ok = all(b < a for a, b in zip(errs, errs[1:]))
    acceptance(5, ok, "case 3 trend " + " > ".join(f"{e:.3g}" for e in errs))
    assert ok


@pytest.mark.xfail(strict=True, reason="case-3 error at (100, 400) is 7.6%; it halves per doubling but starts too high")
def test_c5_case3_tolerance(acceptance):
    err = _errors(asy.case3_density, [(100, 400)])[0]
    acceptance(5, err <= 0.05, f"case 3 log-rel err {err:.2%} at (100, 400) (tol 5%)")
    assert err <= 0.05


# ---------------------------------------------------------------- 6

def test_c6_branch_continuity(acceptance):
    t = 1e6
    worst = 0.0
    for a0 in (asy.a_upper(HALF), asy.a_lower(HALF)):
        lo, hi = (asy.case4_branch(HALF, a0 * (1 + s * 1e-9) * t ** (2 / 3), t) for s in (-1, 1))
        assert lo.label != hi.label
        worst = max(worst, abs(lo.lam / hi.lam - 1), abs(lo.phi / hi.phi - 1))
    ht_worst = 0.0
    for curve, etas in ((ht.dashed_curve, (5.0, 9.0)), (ht.dotted_curve, (1.0, 3.0, 6.0))):
        for eta in etas:
            s0 = curve(eta)
            lo, hi = (ht.ht_case4_branch(eta, s0 * (1 + s * 1e-9)) for s in (-1, 1))
            assert lo.label != hi.label
            ht_worst = max(ht_worst, abs(math.expm1(lo.log_lam - hi.log_lam)), abs(lo.phi / hi.phi - 1))
    ok = max(worst, ht_worst) < 5e-7
    acceptance(6, ok, f"rel jump of Lambda, Phi: fixed rho {worst:.1e}, heavy traffic {ht_worst:.1e} (6 digits = 5e-7)")
    assert ok


# ---------------------------------------------------------------- 7

def test_c7_endpoints(acceptance):
    a = asy.solve_A(HALF, asy.a_upper(HALF))
    c = asy.solve_C(HALF, asy.a_lower(HALF))
    errs = [abs(a.value), a.residual, abs(c.value - 1), c.residual]
    for eta in (4.5, 6.0, 10.0):
        r = ht.solve_Atilde(eta, ht.dashed_curve(eta))
        errs += [abs(r.value), r.residual]
    for eta in (0.5, 2.0, 6.0):
        r = ht.solve_Ctilde(eta, ht.dotted_curve(eta))
        errs += [abs(r.value - 1 / eta), r.residual]
    worst = max(errs)
    acceptance(7, worst <= 1e-10, f"max endpoint error or residual {worst:.1e} (tol 1e-10)")
    assert worst <= 1e-10


# ---------------------------------------------------------------- 8

def test_c8_unconditional_recovery(acceptance):
    eps = 0.05
    params = QueueParams(1 - eps)
    taus = (0.5, 1.0, 2.0)
    exact = unconditional_density(params, np.array(taus) / eps)
    one = [abs(ht.morrison_pt(eps, "tau-scale", tau / eps, terms=1) / p - 1) for tau, p in zip(taus, exact)]
    two = [abs(ht.morrison_pt(eps, "tau-scale", tau / eps, terms=2) / p - 1) for tau, p in zip(taus, exact)]
    ok = max(one) <= 0.10 and max(two) <= 0.05
    acceptance(8, ok, f"2 eps K0 max rel err {max(one):.2%} (tol 10%); with eps^2 term {max(two):.2%} (tol 5%)")
    assert ok


# ---------------------------------------------------------------- 9

def _pair_errors():
    out = {}
    t, n = 1e10, 0.4998e10
    m = asy.matching_log_density(HALF, "2-3", n, t)
    out["2-3"] = (density_rel(m, asy.case2_log_density(HALF, n, t, max_delta=math.inf)),
                  density_rel(m, asy.case3_log_density(HALF, n, t)))
    t, n = 1e9, 300
    m = asy.matching_log_density(HALF, "4c-5", n, t)
    out["4c-5"] = (density_rel(m, asy.case4_log_density(HALF, n, t)), density_rel(m, asy.case5_log_density(HALF, n, t)))
    eps, n, t = 1e-3, 1, 200.0
    m = ht.ht_matching_log_density(eps, "1-2", n, t)
    out["ht 1-2"] = (density_rel(m, math.log(ht.ht_case1_density(n, t))),
                     density_rel(m, ht.ht_case2_log_density(eps, n, eps**3 * t)))
    eps, n = 1e-4, 1000
    t = 1.0 / eps**3
    m = ht.ht_matching_log_density(eps, "2-4c", n, t)
    out["ht 2-4c"] = (density_rel(m, ht.ht_case2_log_density(eps, n, 1.0)),
                      density_rel(m, ht.ht_case4_log_density(eps, eps**2 * n, 1.0)))
    return out


def test_c9_matching(acceptance):
    errs = _pair_errors()
    ok = all(max(e) <= 0.10 for e in errs.values())
    detail = ", ".join(f"{k}: {e[0]:.1%}/{e[1]:.1%}" for k, e in errs.items())
    acceptance(9, ok, detail + " (tol 10%)")
    assert ok


def _best_34a(t):
    best = (math.inf, None)
    n = asy.a_upper(HALF) * t ** (2 / 3) * 1.02
    while n / t < 1 - HALF.rho:
        m = asy.matching_log_density(HALF, "3-4a", n, t)
        e = max(density_rel(m, asy.case3_log_density(HALF, n, t)), density_rel(m, asy.case4_log_density(HALF, n, t)))
        best = min(best, (e, n))
        n *= 1.02
    return best


@pytest.mark.xfail(strict=True, reason="the case-3 and case-4a error windows around the 3-4a form do not overlap")
def test_c9_matching_34a(acceptance):
    e, n = _best_34a(1e6)
    acceptance(9, e <= 0.10, f"3-4a best min-max error {e:.0%} at t = 1e6, n = {n:.0f} (tol 10%)")
    assert e <= 0.10


# ---------------------------------------------------------------- 10

def test_c10_conditional_law(acceptance):
    eps, tau = 0.05, 4.0
    t = tau / eps
    density = lambda xi: ht.conditional_law(eps, xi / eps, t, "bessel") / eps
    integral = integrate.quad(density, 0, np.inf, limit=200)[0]
    discrete = math.fsum(ht.conditional_law(eps, n, t, "bessel") for n in range(1, 20_000))
    xi = np.linspace(0.01, 8.0, 8000)
    gauss = [ht.conditional_law(eps, x / eps, t, "gaussian") for x in xi]
    peak = xi[int(np.argmax(gauss))]
    ok = abs(integral - 1) <= 0.02 and abs(discrete - 1) <= 0.02 and abs(peak - math.sqrt(tau)) <= xi[1] - xi[0]
    acceptance(10, ok, f"integral {integral:.6f}, lattice sum {discrete:.4f} (tol 2%); Gaussian peak at xi = {peak:.4f} vs sqrt(tau) = 2")
    assert ok


# ---------------------------------------------------------------- 11

def _local_rate(params, n, t0, t1):
    lp = ode_log_table(params, n, [t0, t1], LARGE_T)[:, n]
    return -(lp[1] - lp[0]) / (t1 - t0)


def test_c11_tail_rate(acceptance):
    params = HALF
    tail = params.tail_rate
    rate = _local_rate(params, 2, 40.0, 50.0)
    target = tail + 2 ** (-2 / 3) * math.pi ** (2 / 3) * params.rho ** (1 / 6) * 45.0 ** (-2 / 3)
    rel = abs(rate - target) / target
    later = [_local_rate(params, 2, t - 5, t + 5) for t in (100.0, 200.0, 400.0)]
    gaps = [r - tail for r in [rate] + later]
    trending = all(0 < b < a for a, b in zip(gaps, gaps[1:]))
    ok = rel <= 0.15 and trending
    acceptance(11, ok, f"rate {rate:.5f} vs {target:.5f} ({rel:.1%}, tol 15%); gap to (1-sqrt rho)^2: "
               + " > ".join(f"{g:.4f}" for g in gaps))
    assert ok
