"""Tests for the spherical kite dynamics model.

Expected values are frozen from independent high-precision evaluation of the
closed-form expressions (mpmath, 30 digits), not from the implementation.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kitecycle import model
from kitecycle.errors import (
    DegenerateGeometryError,
    EquilibriumRangeError,
    UndefinedDirectionError,
    UnreachableDirectionError,
)
from kitecycle.model import (
    ControlInput,
    KiteParams,
    KiteState,
    WindCondition,
    air_path_speed,
    crossterm,
    derivatives,
    equilibrium_theta,
    flight_direction_kinematic,
    gamma_from_psi,
    integrate_step,
    min_winch_speed_bound,
    position,
    psi_from_gamma,
    tether_force,
)

PARAMS = KiteParams(glide_ratio=5.0, steering_gain=0.05, area=21.0)
WIND = WindCondition(v_w=10.0)


def make_state(phi=0.0, theta=1.0, psi=0.0, l=200.0):
    return KiteState(phi=phi, theta=theta, psi=psi, l=l)


class TestPosition:
    def test_on_wind_axis(self):
        r = position(make_state(phi=0.0, theta=0.0, l=300.0))
        np.testing.assert_allclose(r, [300.0, 0.0, 0.0], atol=1e-12)

    def test_zenith_plane(self):
        r = position(make_state(phi=0.0, theta=math.pi / 2, l=100.0))
        np.testing.assert_allclose(r, [0.0, 0.0, -100.0], atol=1e-12)

    def test_general_point(self):
        r = position(make_state(phi=0.4, theta=1.0, l=200.0))
        np.testing.assert_allclose(r, [108.060461174, 65.5368472009, -155.009220338], rtol=1e-11)

    def test_norm_equals_tether_length(self):
        r = position(make_state(phi=-0.7, theta=1.3, l=173.0))
        assert np.linalg.norm(r) == pytest.approx(173.0, rel=1e-12)


class TestAirPathSpeed:
    def test_zenith_no_winch(self):
        assert air_path_speed(make_state(theta=0.0), 0.0, WIND, PARAMS) == pytest.approx(50.0)

    def test_pure_reel_in_drives_flow(self):
        v = air_path_speed(make_state(theta=math.pi / 2), -1.0, WIND, PARAMS)
        assert v == pytest.approx(5.0, abs=1e-12)

    def test_reel_out_reduces_flow(self):
        v = air_path_speed(make_state(theta=1.05), 3.0, WIND, PARAMS)
        assert v == pytest.approx(9.87855239459, rel=1e-11)


class TestDerivatives:
    def test_theta_equilibrium_zero_winch(self):
        theta0 = math.atan(PARAMS.glide_ratio)
        st_ = make_state(theta=theta0, psi=0.0)
        v_a = air_path_speed(st_, 0.0, WIND, PARAMS)
        d = derivatives(st_, ControlInput(delta=0.0, v_winch=0.0), v_a, WIND, PARAMS)
        assert d.theta_dot == pytest.approx(0.0, abs=1e-12)

    def test_no_lateral_motion_at_psi_zero(self):
        st_ = make_state(theta=0.8, psi=0.0)
        v_a = air_path_speed(st_, 0.0, WIND, PARAMS)
        d = derivatives(st_, ControlInput(delta=0.0, v_winch=0.0), v_a, WIND, PARAMS)
        assert d.phi_dot == 0.0

    def test_general_point_frozen_values(self):
        st_ = make_state(phi=0.0, theta=1.0, psi=0.5, l=200.0)
        v_a = air_path_speed(st_, 0.0, WIND, PARAMS)
        assert v_a == pytest.approx(27.0151152934, rel=1e-11)
        d = derivatives(st_, ControlInput(delta=0.1, v_winch=0.0), v_a, WIND, PARAMS)
        assert d.phi_dot == pytest.approx(-0.076958899557, rel=1e-10)
        assert d.theta_dot == pytest.approx(0.0764664212044, rel=1e-10)
        assert d.psi_dot == pytest.approx(0.0934945055793, rel=1e-10)

    def test_degenerate_geometry_raises(self):
        with pytest.raises(DegenerateGeometryError):
            derivatives(
                make_state(theta=1e-9),
                ControlInput(delta=0.0, v_winch=0.0),
                10.0,
                WIND,
                PARAMS,
            )

    def test_matches_central_difference_of_trajectory(self):
        # derivatives() against (x(t+h) - x(t-h)) / 2h of the integrated flow
        control = ControlInput(delta=0.08, v_winch=1.2)
        st_ = make_state(phi=0.2, theta=0.9, psi=0.4, l=180.0)
        h = 1e-4
        fwd = integrate_step(st_, control, WIND, PARAMS, h).as_array()
        back = integrate_step(st_, ControlInput(control.delta, -control.v_winch), WIND, PARAMS, h)
        # backward step: integrate the time-reversed flow by negating dt via RK4 on -f
        x = st_.as_array()
        k1 = model._state_derivative_array(x, control, WIND, PARAMS)
        k2 = model._state_derivative_array(x - 0.5 * h * k1, control, WIND, PARAMS)
        k3 = model._state_derivative_array(x - 0.5 * h * k2, control, WIND, PARAMS)
        k4 = model._state_derivative_array(x - h * k3, control, WIND, PARAMS)
        back = x - (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        fd = (fwd - back) / (2.0 * h)
        v_a = air_path_speed(st_, control.v_winch, WIND, PARAMS)
        d = derivatives(st_, control, v_a, WIND, PARAMS).as_array()
        np.testing.assert_allclose(fd, d, rtol=1e-6, atol=1e-9)


class TestCrossterm:
    def test_zero_at_psi_zero(self):
        assert crossterm(make_state(psi=0.0), 20.0) == 0.0

    def test_zero_at_zenith(self):
        assert crossterm(make_state(theta=math.pi / 2, psi=0.7), 20.0) == pytest.approx(0.0, abs=1e-12)

    def test_frozen_value(self):
        c = crossterm(make_state(theta=1.0, psi=0.5, l=200.0), 27.0151152934)
        assert c == pytest.approx(-0.0415810708877, rel=1e-10)

    @given(
        theta=st.floats(0.2, 2.9),
        psi=st.floats(-3.0, 3.0),
        l=st.floats(50.0, 400.0),
        l_dot=st.floats(-4.0, 3.0),
    )
    @settings(max_examples=200)
    def test_identity_with_phi_dot(self, theta, psi, l, l_dot):
        # crossterm must equal phi_dot * cos(theta) when v_a is consistent
        st_ = make_state(theta=theta, psi=psi, l=l)
        v_a = air_path_speed(st_, l_dot, WIND, PARAMS)
        d = derivatives(st_, ControlInput(delta=0.0, v_winch=l_dot), v_a, WIND, PARAMS)
        assert crossterm(st_, v_a) == pytest.approx(d.phi_dot * math.cos(theta), abs=1e-12)


class TestFlightDirection:
    def test_meridian_climb(self):
        assert flight_direction_kinematic(0.0, 0.5, 1.0) == 0.0

    def test_quadrant(self):
        assert flight_direction_kinematic(-0.1, 0.0, 1.0) == pytest.approx(math.pi / 2)

    def test_frozen_value(self):
        g = flight_direction_kinematic(-0.077, 0.041, 1.0)
        assert g == pytest.approx(1.0066206644, rel=1e-10)

    def test_static_flight_raises(self):
        with pytest.raises(UndefinedDirectionError):
            flight_direction_kinematic(0.0, 0.0, 1.0)


class TestCourseOrientationMapping:
    def test_straight_flight(self):
        assert gamma_from_psi(0.0, 1.0, 0.0, WIND, PARAMS) == 0.0

    def test_frozen_value(self):
        g = gamma_from_psi(math.pi / 2, 1.0, 0.0, WIND, PARAMS)
        assert g == pytest.approx(1.87275308114, rel=1e-10)

    def test_inverse_of_frozen_value(self):
        psi = psi_from_gamma(1.87275308114, 1.0, 0.0, WIND, PARAMS)
        assert psi == pytest.approx(math.pi / 2, rel=1e-9)

    def test_gamma_zero_maps_to_psi_zero(self):
        assert psi_from_gamma(0.0, 1.0, 0.0, WIND, PARAMS) == pytest.approx(0.0, abs=1e-15)

    def test_crosswind_limit_identity(self):
        # c1 -> 0: orientation equals course
        weak = WindCondition(v_w=1e-7)
        for gamma in (-2.0, -0.3, 0.9, 2.5):
            psi = psi_from_gamma(gamma, 1.0, -1.0, weak, PARAMS)
            assert psi == pytest.approx(gamma, abs=1e-6)

    def test_unreachable_direction_raises(self):
        # deep windward, slow reel-in: c1 > 1, lateral courses unreachable
        with pytest.raises(UnreachableDirectionError):
            psi_from_gamma(math.pi / 2, 2.0, -4.5, WIND, PARAMS)

    @given(
        psi=st.floats(-3.1, 3.1),
        theta=st.floats(0.2, 2.9),
        l_dot=st.floats(-4.0, 2.5),
    )
    @settings(max_examples=300)
    def test_round_trip(self, psi, theta, l_dot):
        # bijective regime: |c1| < 1 (otherwise psi -> gamma is two-to-one)
        denom = WIND.v_w * math.cos(theta) - l_dot
        if abs(denom) < 0.2:
            return
        c1 = WIND.v_w * math.sin(theta) / (PARAMS.glide_ratio * denom)
        if abs(c1) >= 0.999:
            return
        gamma = gamma_from_psi(psi, theta, l_dot, WIND, PARAMS)
        back = psi_from_gamma(gamma, theta, l_dot, WIND, PARAMS)
        err = (back - psi + math.pi) % (2.0 * math.pi) - math.pi
        assert abs(err) < 1e-12

    def test_two_to_one_regime_rejected(self):
        # c1 > 1 here; upwind-fan courses have no orientation solution
        with pytest.raises(UnreachableDirectionError):
            psi_from_gamma(0.2, 1.5, 0.0, WIND, PARAMS)


class TestEquilibrium:
    def test_zero_winch_zenith(self):
        assert equilibrium_theta(0.0, 0.0, WIND, PARAMS) == pytest.approx(1.37340076695, rel=1e-11)

    def test_half_wind_reel_in(self):
        th = equilibrium_theta(0.0, -5.0, WIND, PARAMS)
        assert th == pytest.approx(1.88582361333, rel=1e-10)
        assert th < 1.9  # return-phase window stays under ~110 deg

    def test_zeroes_theta_dot_on_grid(self):
        for psi in np.linspace(0.0, 1.2, 7):
            for ratio in np.linspace(-0.5, 0.3, 9):
                l_dot = ratio * WIND.v_w
                th = equilibrium_theta(psi, l_dot, WIND, PARAMS)
                st_ = make_state(theta=th, psi=psi)
                v_a = air_path_speed(st_, l_dot, WIND, PARAMS)
                d = derivatives(st_, ControlInput(delta=0.0, v_winch=l_dot), v_a, WIND, PARAMS)
                assert abs(d.theta_dot) < 1e-9

    def test_strictly_decreasing_in_winch_speed(self):
        ratios = np.linspace(-0.9, 0.9, 37)
        thetas = [equilibrium_theta(0.0, r * WIND.v_w, WIND, PARAMS) for r in ratios]
        assert all(b < a for a, b in zip(thetas, thetas[1:]))

    def test_reel_in_reduces_force(self):
        # Along the psi=0 equilibrium line the air path speed crests at
        # exactly v_w when the kite sits at theta = pi/2 (l_dot = -v_w/E);
        # beyond that, faster reel-in strictly lowers the force.  Up to the
        # crest the force stays within a few percent of the static value, so
        # reeling in never builds up meaningful load.
        def eq_force(l_dot):
            th = equilibrium_theta(0.0, l_dot, WIND, PARAMS)
            v_a = air_path_speed(make_state(theta=th), l_dot, WIND, PARAMS)
            return tether_force(v_a, PARAMS)

        crest = -WIND.v_w / PARAMS.glide_ratio
        forces = [eq_force(l_dot) for l_dot in np.linspace(crest, -0.9 * WIND.v_w, 15)]
        assert all(b < a for a, b in zip(forces, forces[1:]))
        static = eq_force(0.0)
        assert max(eq_force(u) for u in np.linspace(crest, 0.0, 10)) < 1.05 * static

    def test_out_of_range_raises(self):
        with pytest.raises(EquilibriumRangeError):
            equilibrium_theta(0.0, -11.0, WindCondition(v_w=10.0), PARAMS)


class TestWinchBoundAndForce:
    def test_bound_at_zenith(self):
        assert min_winch_speed_bound(math.pi / 2, WIND, PARAMS) == pytest.approx(-1.0)

    def test_bound_on_axis_no_minimum(self):
        p = KiteParams(glide_ratio=5.0, steering_gain=0.05, area=21.0, v_a_min=0.0)
        assert min_winch_speed_bound(0.0, WIND, p) == pytest.approx(10.0)

    def test_bound_deep_window(self):
        assert min_winch_speed_bound(1.9, WIND, PARAMS) == pytest.approx(-4.23289566864, rel=1e-10)

    def test_force_zero(self):
        assert tether_force(0.0, PARAMS) == 0.0

    def test_force_loyd_point(self):
        assert tether_force(37.5, PARAMS) == pytest.approx(17718.75, rel=1e-12)

    def test_force_quadratic(self):
        assert tether_force(20.0, PARAMS) == pytest.approx(4.0 * tether_force(10.0, PARAMS))

    def test_negative_airspeed_clamped(self):
        assert tether_force(-12.0, PARAMS) == 0.0


class TestIntegrateStep:
    def test_fixed_point(self):
        theta0 = math.atan(PARAMS.glide_ratio)
        st_ = make_state(theta=theta0)
        nxt = integrate_step(st_, ControlInput(delta=0.0, v_winch=0.0), WIND, PARAMS, 0.02)
        np.testing.assert_allclose(nxt.as_array(), st_.as_array(), atol=1e-10)

    def test_tether_length_exactly_linear(self):
        st_ = make_state()
        for _ in range(50):
            st_ = integrate_step(st_, ControlInput(delta=0.05, v_winch=1.7), WIND, PARAMS, 0.02)
        assert st_.l == pytest.approx(200.0 + 50 * 0.02 * 1.7, rel=1e-14)

    def test_fourth_order_convergence(self):
        control = ControlInput(delta=0.1, v_winch=-1.0)
        st_ = make_state(phi=0.1, theta=1.1, psi=0.8, l=150.0)

        def final_state(dt, n):
            s = st_
            for _ in range(n):
                s = integrate_step(s, control, WIND, PARAMS, dt)
            return s.as_array()

        ref = final_state(0.4 / 100, 100)
        err_coarse = np.linalg.norm(final_state(0.4, 1) - ref)
        err_fine = np.linalg.norm(final_state(0.2, 2) - ref)
        # one halving of dt over the same horizon: error drops ~2^4
        assert err_coarse / err_fine > 12.0

    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError):
            integrate_step(make_state(), ControlInput(0.0, 0.0), WIND, PARAMS, 0.0)


class TestWrapAngle:
    def test_wraps_into_half_open_interval(self):
        assert model.wrap_angle(math.pi) == pytest.approx(math.pi)
        assert model.wrap_angle(-math.pi) == pytest.approx(math.pi)
        assert model.wrap_angle(2.5 * math.pi) == pytest.approx(0.5 * math.pi)
        assert model.wrap_angle(-7.0) == pytest.approx(-7.0 + 2 * math.pi)
