import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ps_sojourn import asymptotics as asy
from ps_sojourn.core import BracketError, DomainError, QueueParams, RegionError
from ps_sojourn.oracles import OdeConfig, ode_log_table, ode_table

HALF = QueueParams(0.5)


def test_transition_coefficients():
    assert asy.a_upper(HALF) == pytest.approx(1.6510, abs=5e-5)
    assert asy.a_lower(HALF) == pytest.approx(0.9324, abs=5e-5)


@settings(max_examples=25, deadline=None)
@given(st.floats(1.0, 20.0))
def test_branch_roots_have_small_residual(scale):
    a1, a2 = asy.a_upper(HALF), asy.a_lower(HALF)
    assert asy.solve_A(HALF, a1 * scale).residual < 1e-12
    a_b = a2 + (a1 - a2) / (1.0 + scale)
    b = asy.solve_B(HALF, a_b)
    assert b.residual < 1e-12 and 0 < b.value < 1
    c = asy.solve_C(HALF, a2 / scale)
    assert c.residual < 1e-12 and 0 < c.value <= 1


def test_root_monotonicity_and_limits():
    a1, a2 = asy.a_upper(HALF), asy.a_lower(HALF)
    values = [asy.solve_A(HALF, a).value for a in (a1 * 1.1, a1 * 1.5, a1 * 3)]
    assert values == sorted(values)
    a = 12.0
    assert asy.solve_A(HALF, a).value == pytest.approx(asy.a_large_approx(HALF, a), rel=1e-3)
    a = 1e-3
    assert asy.solve_C(HALF, a).value == pytest.approx(asy.c_small_approx(HALF, a), rel=1e-3)
    # B runs from 0 at the upper curve to 1 at the lower curve
    assert asy.solve_B(HALF, a1 * (1 - 1e-6)).value < 1e-3
    assert asy.solve_B(HALF, a2 * (1 + 1e-9)).value == pytest.approx(1.0, abs=1e-4)


def test_solvers_reject_wrong_branch():
    with pytest.raises(BracketError):
        asy.solve_A(HALF, 1.0)
    with pytest.raises(BracketError):
        asy.solve_C(HALF, 1.2)
    with pytest.raises(DomainError):
        asy.solve_A(HALF, -1.0)


@pytest.mark.parametrize("a", [2.5, 1.2, 0.5])
def test_stable_branch_formulas_match_literal(a):
    t = 1e4
    br = asy.case4_branch(HALF, a * t ** (2 / 3), t)
    lam, phi = asy.case4_literal(HALF, a, t, br.label, br.parameter)
    assert lam == pytest.approx(br.lam, rel=1e-9)
    assert phi == pytest.approx(br.phi, rel=1e-9, abs=1e-9)


def test_k_and_j_functions():
    assert asy.k_function(0.0) == pytest.approx(2 / 3)
    assert asy.k_function(1e-3) < asy.k_function(0.0)
    assert asy.j_function(math.pi / 2) == pytest.approx(math.pi / 2)


def test_case1_two_terms_beat_one():
    ref = math.exp(ode_log_table(HALF, 40, [20.0])[0, 40])
    one = asy.case1_density(HALF, 40, 20.0, terms=1)
    two = asy.case1_density(HALF, 40, 20.0)
    assert abs(two - ref) < abs(one - ref)
    with pytest.raises(DomainError):
        asy.case1_density(HALF, 5, 20.0)


def test_case2_band():
    # the density ratio approaches 1 slowly, like t^(-1/2)
    ratios = []
    for n, t in ((25, 50.0), (100, 200.0)):
        ref = ode_table(HALF, n, [t], OdeConfig(dt_max=0.02, tolerance=1e-9))[0, n]
        ratios.append(asy.case2_density(HALF, n, t) / ref)
    assert abs(ratios[1] - 1) < 0.7 * abs(ratios[0] - 1)
    with pytest.raises(RegionError):
        asy.case2_density(HALF, 20, 200.0)
    assert math.isfinite(asy.case2_log_density(HALF, 20, 200.0, max_delta=math.inf))


def test_case3_saddle():
    assert asy.theta_star(HALF, 0.5) == pytest.approx(0.0, abs=1e-15)
    assert asy.theta_star(HALF, 0.1) < 0
    with pytest.raises(DomainError):
        asy.case3_density(HALF, 60, 100.0)


def test_contour_constant_growth():
    assert asy.contour_constant(0) == pytest.approx(math.e, rel=1e-14)
    assert asy.contour_constant(1) == pytest.approx(2 * math.e, rel=1e-14)
    ratio = asy.contour_constant(2000) / asy.contour_constant_asymptote(2000)
    assert ratio == pytest.approx(1.0, abs=0.02)


def test_case5_rate_tends_to_tail():
    rates = [asy.case5_local_rate(HALF, t) for t in (10.0, 100.0, 1e4)]
    assert rates == sorted(rates, reverse=True)
    assert rates[-1] - HALF.tail_rate < 0.01
    with pytest.raises(DomainError):
        asy.case5_density(HALF, 1, 0.0)


@pytest.mark.parametrize(
    "n,t,case",
    [(80, 40, "1"), (100, 200, "2"), (2e5, 1e6, "3"), (2.0e4, 1e6, "4a"), (1.2e4, 1e6, "4b"), (5e3, 1e6, "4c"), (50, 1e6, "5")],
)
def test_regime_classify(n, t, case):
    label = asy.regime_classify(HALF, n, t)
    assert label.case == case
    assert label.boundary_distance >= 0
    assert math.isfinite(asy.asymptotic_density(HALF, int(n), t))


def test_matching_domains():
    with pytest.raises(DomainError):
        asy.matching_log_density(HALF, "2-3", 60, 100)
    with pytest.raises(DomainError):
        asy.matching_log_density(HALF, "3-4a", 10, 1e4)
    with pytest.raises(DomainError):
        asy.matching_log_density(HALF, "4c-5", 1e4, 1e4)
    with pytest.raises(DomainError):
        asy.matching_log_density(HALF, "1-5", 10, 10)


def test_rays():
    fan = asy.trace_rays(HALF, 7, t_max=1.0)
    assert len(fan.rays) == 7
    assert set(fan.curves) == {"a-upper", "a-lower"}
    y, t = fan.curves["a-upper"]
    assert t[-1] == pytest.approx(y[-1] ** 1.5 / (3 * HALF.sqrt_rho))
    for ray in fan.rays:
        assert ray.y.shape == ray.t.shape
        if ray.returned:
            # a turning ray reaches Y = 1/|E| before coming back
            assert ray.energy < 0
            assert ray.y.max() == pytest.approx(1 / abs(ray.energy), rel=1e-3)
    with pytest.raises(DomainError):
        asy.trace_rays(HALF, 0)
