import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from drone_handover.analytic import (
    AnalyticInputs,
    handover_curve,
    handover_prob_dsm_lower_bound,
    handover_prob_ssm_cor1,
    handover_prob_ssm_thm2,
    initial_nonserving_density,
    lambda1_density,
    nonserving_density,
    nonserving_mass,
)
from drone_handover.quadrature import QuadratureSpec
from drone_handover.speed_models import degenerate, rayleigh_mean, uniform_mean
from oracles import displaced_inside_fraction, ssm_probability_scipy

LAM = 1e-6
FAST = QuadratureSpec(rel_tol=1e-5, abs_tol=1e-8)
LAWS = [degenerate(12.5), rayleigh_mean(12.5), uniform_mean(12.5)]


def inputs(t, law, quad=None):
    return AnalyticInputs(LAM, t, law, quad or QuadratureSpec())


# -- densities ---------------------------------------------------------------


def test_initial_density_is_a_step_at_the_serving_distance():
    out = initial_nonserving_density([0.0, 499.9, 500.0, 500.1, 3000.0], 500.0, LAM)
    assert list(out) == [0.0, 0.0, 0.0, LAM, LAM]


def test_constant_speed_excluded_fraction_example():
    # Drone 450 m from o' with a 125 m step lands inside b(o', 500) when its
    # heading is within acos(-0.28333) of the inward direction.
    cos_arg = (125**2 + 450**2 - 500**2) / (2 * 125 * 450)
    exact = math.acos(cos_arg) / math.pi
    assert cos_arg == pytest.approx(-0.283333, abs=1e-6)
    assert exact == pytest.approx(0.591440, abs=1e-6)
    got = lambda1_density(10.0, 450.0, 500.0, inputs(10.0, degenerate(12.5))) / LAM
    assert got == pytest.approx(exact, rel=1e-13)
    est, se = displaced_inside_fraction(450.0, 125.0, 500.0, 2_000_000, np.random.default_rng(9))
    assert abs(got - est) < 4 * se


@pytest.mark.parametrize("law", LAWS[1:], ids=lambda law: law.variant)
@pytest.mark.parametrize("u_x", [100.0, 450.0, 600.0, 900.0])
def test_excluded_fraction_matches_brute_force(law, u_x):
    # The fraction of drones at u_x that started inside b(o', 500) equals, by
    # symmetry of the displacement, the chance that a point at u_x moved by
    # V t lands inside b(o', 500).
    rng = np.random.default_rng(int(u_x))
    n = 1_000_000
    step = law.sample(rng, n) * 20.0
    phi = rng.uniform(0, 2 * math.pi, n)
    hit = np.hypot(u_x + step * np.cos(phi), step * np.sin(phi)) < 500.0
    p, se = hit.mean(), hit.std() / math.sqrt(n)
    got = lambda1_density(20.0, u_x, 500.0, inputs(20.0, law)) / LAM
    assert abs(got - p) < 4 * se + 1e-12


@pytest.mark.parametrize("law", LAWS, ids=lambda law: law.variant)
@given(t=st.floats(0.1, 500.0), u_x=st.floats(0.0, 5000.0), u_star=st.floats(1.0, 3000.0))
def test_density_split_sums_to_lambda0_and_is_bounded(law, t, u_x, u_star):
    a = inputs(t, law, FAST)
    lam = nonserving_density(t, u_x, u_star, a)
    lam1 = lambda1_density(t, u_x, u_star, a)
    assert abs(lam + lam1 - LAM) <= 1e-12 * LAM
    assert -1e-12 * LAM <= lam <= LAM * (1 + 1e-12)


@pytest.mark.parametrize("law", LAWS, ids=lambda law: law.variant)
def test_density_homogenises_at_large_time(law):
    ux = np.linspace(0.0, 5000.0, 101)
    lam = nonserving_density(1e6, ux, 500.0, inputs(1e6, law))
    assert np.max(np.abs(lam - LAM)) < 1e-3 * LAM


def test_density_beyond_reach_is_untouched():
    law = uniform_mean(12.5)
    ux = np.linspace(500.0 + 25.0 * 40.0 + 1.0, 4000.0, 50)
    assert np.all(nonserving_density(40.0, ux, 500.0, inputs(40.0, law)) == LAM)


def test_narrow_uniform_law_approaches_constant_speed():
    ux = np.linspace(10.0, 1200.0, 60)
    ref = nonserving_density(30.0, ux, 500.0, inputs(30.0, degenerate(12.5)))
    near = nonserving_density(30.0, ux, 500.0, inputs(30.0, uniform_mean(12.5, 12.5 - 1e-4, 12.5 + 1e-4)))
    assert np.max(np.abs(near - ref)) < 1e-3 * LAM


def test_density_rejects_nonpositive_time():
    with pytest.raises(ValueError):
        nonserving_density(0.0, 100.0, 500.0, inputs(0.0, rayleigh_mean(12.5)))


@pytest.mark.parametrize("law", LAWS, ids=lambda law: law.variant)
@pytest.mark.parametrize("radius", [200.0, 700.0, 2500.0])
def test_mass_two_routes_agree(law, radius):
    a = inputs(40.0, law)
    lens = nonserving_mass(40.0, radius, 500.0, a, method="lens")
    dens = nonserving_mass(40.0, radius, 500.0, a, method="density")
    assert lens == pytest.approx(dens, rel=1e-6, abs=1e-12)
    with pytest.raises(ValueError):
        nonserving_mass(40.0, radius, 500.0, a, method="nope")


# -- same-speed handover probability ----------------------------------------


@pytest.mark.parametrize("lam,v,t", [(1e-6, 12.5, 10), (1e-6, 12.5, 60), (1e-7, 1, 1), (1e-5, 30, 200),
                                     (1e-5, 5, 3)])
def test_lens_form_matches_scipy_reference(lam, v, t):
    assert handover_prob_ssm_thm2(lam, v, t) == pytest.approx(ssm_probability_scipy(lam, v, t), rel=1e-8)


def test_reference_curve_values():
    got = [handover_prob_ssm_thm2(LAM, 12.5, t) for t in (10, 20, 40, 60, 80, 100)]
    ref = [ssm_probability_scipy(LAM, 12.5, t) for t in (10, 20, 40, 60, 80, 100)]
    assert got == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("t", [5.0, 40.0, 150.0])
def test_lens_and_exclusion_zone_forms_agree(t):
    a = handover_prob_ssm_thm2(LAM, 12.5, t)
    b = handover_prob_ssm_cor1(LAM, 12.5, t)
    assert abs(a - b) <= 10 * 1e-7 * a


def test_error_estimates_are_returned():
    p, err = handover_prob_ssm_thm2(LAM, 12.5, 10.0, return_error=True)
    assert p == handover_prob_ssm_thm2(LAM, 12.5, 10.0)
    assert 0 < err < 1e-7 * p


def test_zero_motion_means_no_handover():
    assert handover_prob_ssm_thm2(LAM, 12.5, 0.0) == 0.0
    assert handover_prob_ssm_cor1(LAM, 0.0, 50.0) == 0.0
    for law in LAWS + [rayleigh_mean(0.0)]:
        assert handover_prob_dsm_lower_bound(inputs(0.0, law)) == 0.0
    assert handover_prob_dsm_lower_bound(inputs(50.0, rayleigh_mean(0.0))) == 0.0


@pytest.mark.parametrize("c", [2.0, 10.0])
def test_same_speed_scaling_laws(c):
    base = handover_prob_ssm_thm2(LAM, 12.5, 40.0)
    # Only v t sqrt(lambda0) matters.
    assert handover_prob_ssm_thm2(LAM * c * c, 12.5, 40.0 / c) == pytest.approx(base, rel=1e-9)
    assert handover_prob_ssm_thm2(LAM, 12.5 * c, 40.0 / c) == pytest.approx(base, rel=1e-9)


@pytest.mark.parametrize("c", [2.0, 10.0])
def test_bound_scaling_laws(c):
    base = handover_prob_dsm_lower_bound(AnalyticInputs(LAM, 40.0, rayleigh_mean(12.5), FAST))
    dense = handover_prob_dsm_lower_bound(AnalyticInputs(LAM * c * c, 40.0 / c, rayleigh_mean(12.5), FAST))
    fast = handover_prob_dsm_lower_bound(AnalyticInputs(LAM, 40.0 / c, rayleigh_mean(12.5 * c), FAST))
    assert dense == pytest.approx(base, rel=1e-9)
    assert fast == pytest.approx(base, rel=1e-9)


def test_same_speed_probability_increases_with_time():
    p = [handover_prob_ssm_thm2(LAM, 12.5, t) for t in np.linspace(0, 300, 31)]
    assert all(0.0 <= x <= 1.0 for x in p)
    assert np.all(np.diff(p) > 0)


@pytest.mark.parametrize("law", LAWS[1:], ids=lambda law: law.variant)
def test_bound_increases_with_time(law):
    p = [handover_prob_dsm_lower_bound(AnalyticInputs(LAM, t, law, FAST)) for t in (0, 5, 20, 50, 100, 200)]
    assert all(0.0 <= x <= 1.0 for x in p)
    assert np.all(np.diff(p) > 0)


def test_bound_equals_exclusion_zone_form_for_a_constant_speed():
    for t in (10.0, 100.0):
        a = handover_prob_dsm_lower_bound(inputs(t, degenerate(12.5)))
        assert a == handover_prob_ssm_cor1(LAM, 12.5, t)
    # zero-mean laws collapse onto the constant zero speed
    assert handover_prob_dsm_lower_bound(inputs(10.0, uniform_mean(0.0))) == 0.0


def test_curve_helper():
    grid = [0.0, 10.0, 40.0]
    exact = handover_curve(LAM, degenerate(12.5), grid)
    assert exact[0] == 0.0 and exact[1] == handover_prob_ssm_thm2(LAM, 12.5, 10.0)
    alt = handover_curve(LAM, degenerate(12.5), grid, exact_ssm=False)
    assert alt == pytest.approx(exact, rel=1e-6)


def test_invalid_arguments():
    with pytest.raises(ValueError):
        handover_prob_ssm_thm2(0.0, 12.5, 10.0)
    with pytest.raises(ValueError):
        handover_prob_ssm_cor1(LAM, -1.0, 10.0)
    with pytest.raises(ValueError):
        AnalyticInputs(LAM, -1.0, degenerate(1.0))
