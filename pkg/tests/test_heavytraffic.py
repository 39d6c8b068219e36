import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ps_sojourn import heavytraffic as ht
from ps_sojourn.core import DomainError, QueueParams, RegionError
from ps_sojourn.exact import unconditional_density
from ps_sojourn.oracles import OdeConfig, ode_log_table

LARGE_T = OdeConfig(dt_max=0.02, tolerance=1e-8)


def ode_log(eps, n, t):
    return float(ode_log_table(QueueParams(1 - eps), n, [t], LARGE_T)[0, n])


def test_scaling():
    s = ht.HtScaling.from_nt(0.1, 50, 2000)
    assert (s.xi, s.tau, s.eta, s.sigma) == pytest.approx((5.0, 200.0, 0.5, 2.0))
    assert (s.n, s.t) == pytest.approx((50, 2000))
    with pytest.raises(DomainError):
        ht.HtScaling(0.1, 1.0, 1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        ht.HtScaling.from_nt(1.5, 1, 1)


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-4, 1e3))
def test_u_equation(sigma):
    r = ht.solve_u(sigma)
    assert r.residual < 1e-12
    assert ht.u_complex_residual(r.value, sigma) < 1e-9 * max(1.0, sigma * r.value**3)


def test_u_small_sigma():
    sigma = 1e-6
    assert ht.solve_u(sigma).value == pytest.approx(ht.u_small_sigma(sigma), rel=1e-3)


def test_case1_is_rho_one_kernel():
    assert ht.ht_case1_density(4, 0.0) == pytest.approx(0.2, abs=1e-9)
    with pytest.raises(DomainError):
        ht.ht_case1_density(1, -1.0)


@pytest.mark.parametrize("eps,sigma,tol", [(0.1, 0.3, 0.02), (0.05, 0.1, 0.01)])
def test_case2_against_ode(eps, sigma, tol):
    t = sigma / eps**3
    ref = ode_log(eps, 1, t)
    assert abs(ht.ht_case2_log_density(eps, 1, sigma) - ref) / abs(ref) < tol


def test_case3_against_ode():
    eps, n, t = 0.1, 20, 30.0
    ref = math.exp(ode_log(eps, n, t))
    one = ht.ht_case3_density(eps, eps * n, eps * t, terms=1)
    two = ht.ht_case3_density(eps, eps * n, eps * t)
    assert two == pytest.approx(ref, rel=0.02)
    assert abs(two - ref) <= abs(one - ref)
    with pytest.raises(DomainError):
        ht.ht_case3_density(eps, 1.0, 1.0, terms=3)


@pytest.mark.parametrize("n,sigma,region", [(100, 1.0, "4c"), (900, 1.0, "4a"), (250, 1.0, "4b")])
def test_case4_against_ode(n, sigma, region):
    eps = 0.1
    eta = eps**2 * n
    assert ht.ht_region_classify(eta, sigma).case == region
    ref = ode_log(eps, n, sigma / eps**3)
    assert abs(ht.ht_case4_log_density(eps, eta, sigma) - ref) / abs(ref) < 0.02


def test_curves():
    assert ht.dashed_curve(4.0) == pytest.approx(0.0, abs=1e-15)
    eta = np.linspace(4.01, 20, 50)
    assert np.all(ht.dotted_curve(eta) > ht.dashed_curve(eta))
    assert ht.dotted_curve(1e-8) < 1e-10


def test_region_classify_and_solvers():
    assert ht.ht_region_classify(9.0, 1.0).case == "4a"
    assert ht.ht_region_classify(2.0, 0.5).case == "4b"
    assert ht.ht_region_classify(2.0, 5.0).case == "4c"
    assert 0 < ht.solve_Atilde(9.0, 1.0).value < 0.25
    assert 0 < ht.solve_Btilde(2.0, 0.5).value <= 0.5
    assert 0 < ht.solve_Ctilde(2.0, 5.0).value <= 0.5
    with pytest.raises(RegionError):
        ht.solve_Atilde(2.0, 0.5)
    with pytest.raises(RegionError):
        ht.solve_Btilde(2.0, 5.0)


def test_atilde_large_eta():
    eps, zeta, sigma = 0.01, 1.0, 2.0
    assert ht.solve_Atilde(zeta / eps, sigma).value == pytest.approx(ht.atilde_large_eta(eps, zeta, sigma), abs=1e-5)


def test_regime_classify():
    eps = 0.05
    assert ht.ht_regime_classify(eps, 2, 50).case == "1"
    assert ht.ht_regime_classify(eps, 2, 500).case == "2"
    assert ht.ht_regime_classify(eps, 50, 200).case == "3"
    assert ht.ht_regime_classify(eps, 500, 2e4).case.startswith("4")
    assert math.isfinite(ht.ht_asymptotic_density(eps, 50, 200))


def test_matching_domains():
    with pytest.raises(DomainError):
        ht.ht_matching_log_density(0.01, "1-2", 1.5, 100)
    with pytest.raises(DomainError):
        ht.ht_matching_log_density(0.01, "3-4", 1, 100)


def test_conditional_laws_normalise():
    # centred at xi = sqrt(tau) with variance sqrt(tau)/2; tau = 64 keeps the mass below 0 negligible
    eps, tau = 0.05, 64.0
    t = tau / eps
    total = math.fsum(ht.conditional_law(eps, n, t, "gaussian") for n in range(1, 2000))
    assert total == pytest.approx(1.0, abs=1e-3)
    eps, sigma = 0.02, 1.0
    t = sigma / eps**3
    total = math.fsum(ht.conditional_law(eps, n, t, "sigma") for n in range(1, 40_000))
    assert total == pytest.approx(1.0, abs=1e-3)
    assert ht.solve_chat(sigma).residual < 1e-12
    assert ht.q_factor(sigma) > 0
    with pytest.raises(DomainError):
        ht.conditional_law(eps, 1, 1, "cauchy")


def test_morrison_psi_inverse():
    for sigma in (1e-3, 0.5, 20.0):
        assert ht.morrison_sigma_of_psi(ht.morrison_psi(sigma)) == pytest.approx(sigma, rel=1e-10)


def test_morrison_sigma_scale_against_ode():
    errs = []
    for eps in (0.1, 0.05):
        sigma = 0.1
        t = sigma / eps**3
        ref = unconditional_density(QueueParams(1 - eps), t, tol=1e-8)
        errs.append(abs(math.log(ht.morrison_pt(eps, "sigma-scale", t) / ref)))
    assert errs[1] < errs[0] < 0.12


def test_morrison_tau_scale_correction_helps():
    eps, t = 0.05, 20.0
    ref = unconditional_density(QueueParams(1 - eps), t)
    one = ht.morrison_pt(eps, "tau-scale", t, terms=1)
    two = ht.morrison_pt(eps, "tau-scale", t)
    assert abs(two - ref) < abs(one - ref)
    with pytest.raises(DomainError):
        ht.morrison_pt(eps, "xi-scale", t)


def test_rays():
    rays, curves = ht.trace_ht_rays(4, sigma_max=15.0, eta0=[1.0, 2.0, 4.0, 6.0], samples=4000)
    assert len(rays) == 4 and set(curves) == {"dashed", "dotted"}
    for ray in rays:
        # conserved energy p^2 - 1/eta with p = -d(eta)/d(sigma) / 2
        p = -np.gradient(ray.eta, ray.sigma) / 2
        keep = ray.eta > 0.5
        e = (p**2 - 1 / ray.eta)[keep][1:-1]
        assert e == pytest.approx(ray.energy, abs=1e-3)
        assert ray.hit_axis == (ray.eta0 < 4)
    on_dashed = rays[2]
    assert on_dashed.sigma == pytest.approx(ht.dashed_curve(on_dashed.eta), abs=1e-6)
    with pytest.raises(DomainError):
        ht.trace_ht_rays(2, eta0=[1.0])
