import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from fastdiff.grid import Field, build_grid, l1_distance, mass
from fastdiff.params import ModelParams
from fastdiff.profiles import (ProfileError, beta_of_theta, mass_of_theta, rescale_rho_to_u, rescale_u_to_rho,
                               rho_profile, rho_values, s_of_t, solve_theta, t_of_s, u_profile)

P = ModelParams(2, 0.75, 2.0)


def test_closed_form_mass():
    # int_0^inf 2 pi r (6/(r^2+theta))^4 dr = 2 pi 6^4 / (6 theta^3)
    for theta in (0.3, 1.0, 7.0, 11.0):
        assert mass_of_theta(theta, P) == pytest.approx(432.0 * math.pi / theta**3, rel=1e-10)


def test_mass_matches_independent_quadrature_in_3d():
    params = ModelParams(3, 0.8, 2.0)
    k, gamma = 5.0, 8.0
    oracle = quad(lambda r: 4 * math.pi * r * r * (gamma / (r * r + 2.0)) ** k, 0.0, math.inf, limit=400)[0]
    assert mass_of_theta(2.0, params) == pytest.approx(oracle, rel=1e-9)


def test_solve_theta_oracles():
    assert solve_theta(1.0, P).theta == pytest.approx((432.0 * math.pi) ** (1.0 / 3.0), rel=1e-9)
    assert solve_theta(432.0 * math.pi, P).theta == pytest.approx(1.0, rel=1e-9)


def test_profile_value_at_origin_and_monotone():
    g = build_grid(2, 10.0, 100)
    f = rho_profile(1.0, P, g)
    assert rho_values(0.0, 1.0, P) == pytest.approx(6.0**4)
    assert rho_values(1.0, 1.0, P) == pytest.approx(81.0)
    assert np.all(np.diff(f.values) < 0.0)


def test_mass_decreasing_and_vanishing():
    thetas = np.geomspace(1e-2, 1e3, 15)
    masses = [mass_of_theta(t, P) for t in thetas]
    assert np.all(np.diff(masses) < 0.0)
    assert mass_of_theta(1e8, P) < 1e-20


@settings(max_examples=20, deadline=None)
@given(st.floats(1e-2, 1e2))
def test_solve_theta_round_trip(theta0):
    spec = solve_theta(mass_of_theta(theta0, P), P)
    assert spec.theta == pytest.approx(theta0, rel=1e-8)
    assert spec.beta / spec.theta == pytest.approx(1.5 ** (2.0 / 1.5), rel=1e-14)


def test_grid_matched_theta_hits_grid_mass():
    g = build_grid(2, 300.0, 2048, "geometric(1.003)")
    spec = solve_theta(1.0, P, grid=g)
    assert mass(spec.rho(g)) == pytest.approx(1.0, rel=1e-10)
    assert abs(mass(rho_profile(solve_theta(1.0, P).theta, P, g)) - 1.0) < 1e-6


def test_bad_inputs():
    with pytest.raises(ProfileError):
        solve_theta(-1.0, P)
    with pytest.raises(ProfileError):
        mass_of_theta(1.0, ModelParams(3, 0.2, 2.0))
    with pytest.raises(ProfileError):
        u_profile(1.0, P, 0.0, build_grid(2, 1.0, 4))


def test_u_profile_peak_and_mass_conservation():
    spec = solve_theta(1.0, P)
    g = build_grid(2, 2000.0, 4096, "geometric(1.003)")
    peak = (9.0 / spec.beta) ** 4
    for t in (1.0, 4.0):
        assert u_profile(spec.beta, P, t, g).values[0] == pytest.approx(peak * t ** (-2.0 / 1.5), rel=1e-4)
    assert mass(spec.u(1.0, g)) == pytest.approx(mass(spec.u(4.0, g)), rel=1e-6)


def test_time_shift_matches_rescaled_profile():
    spec = solve_theta(1.0, P)
    g = build_grid(2, 60.0, 1024, "geometric(1.003)")
    # U_M(x, t + 1/lam) in similarity variables is rho_M exactly
    for s in (0.5, 2.0):
        t = t_of_s(s, P.lam)
        R = math.exp(s)
        u = spec.u(t + 1.0 / P.lam, g.scaled(R))
        rho, s_back = rescale_u_to_rho(u, t, P)
        assert s_back == pytest.approx(s)
        np.testing.assert_allclose(rho.values, spec.rho(rho.grid).values, rtol=1e-12)


def test_time_maps():
    assert s_of_t(0.0, 1.5) == 0.0
    assert s_of_t(10.0, 1.5) == pytest.approx(math.log(16.0) / 1.5)
    t = np.geomspace(1e-6, 1e6, 13)
    np.testing.assert_allclose(t_of_s(s_of_t(t, 1.5), 1.5), t, rtol=1e-13)


def test_rescaling_round_trip_and_mass():
    g = build_grid(2, 10.0, 64)
    u = rho_profile(2.0, P, g)
    rho0, s0 = rescale_u_to_rho(u, 0.0, P)
    assert s0 == 0.0 and rho0.grid is g
    np.testing.assert_array_equal(rho0.values, u.values)
    rho, s = rescale_u_to_rho(u, 3.0, P)
    assert mass(rho) == pytest.approx(mass(u), rel=1e-14)
    back, t = rescale_rho_to_u(rho, s, P)
    assert t == pytest.approx(3.0)
    np.testing.assert_allclose(back.values, u.values, rtol=1e-14)
    np.testing.assert_allclose(back.grid.faces, g.faces, rtol=1e-14)
    assert l1_distance(Field(g, back.values), u) <= 1e-13 * mass(u)


def test_beta_theta_relation():
    assert beta_of_theta(2.0, P) == pytest.approx(2.0 * 1.5 ** (4.0 / 3.0))
