"""Tests for the reduced-cycle power optimization.

Full-resolution optimization runs live in the acceptance suite; here the
optimizer is exercised at coarse settings (16 nodes) that converge in about
a second each.
"""

import math

import numpy as np
import pytest

from kitecycle.errors import InsufficientSamplesError
from kitecycle.model import KiteParams, WindCondition
from kitecycle.optimizer import (
    CycleDecision,
    OptimizerConstraints,
    average_power,
    cycle_summary,
    default_seed,
    fit_winch_law,
    loyd_limit,
    optimize_cycle,
    read_cycle_columns,
    simulate_reduced_cycle,
    write_cycle_csv,
)

PARAMS = KiteParams(glide_ratio=5.0, steering_gain=0.05, area=21.0)
WIND = WindCondition(v_w=10.0)

COARSE = dict(n_nodes=16, substeps=6, max_iterations=200)


@pytest.fixture(scope="module")
def coarse_optimum():
    return optimize_cycle(OptimizerConstraints(), WIND, PARAMS, **COARSE)


class TestLoydLimit:
    def test_flight_test_value(self):
        wind = WindCondition(v_w=7.5)
        assert loyd_limit(wind, PARAMS) == pytest.approx(19687.5, rel=1e-12)

    def test_cubic_in_wind(self):
        assert loyd_limit(WindCondition(20.0), PARAMS) == pytest.approx(
            8.0 * loyd_limit(WindCondition(10.0), PARAMS)
        )

    def test_quadratic_in_glide_ratio(self):
        p2 = KiteParams(glide_ratio=10.0, steering_gain=0.05, area=21.0)
        assert loyd_limit(WIND, p2) == pytest.approx(4.0 * loyd_limit(WIND, PARAMS))


class TestAveragePower:
    def test_zero_winch_zero_power(self):
        t = np.linspace(0.0, 50.0, 200)
        assert average_power(t, np.zeros_like(t), np.full_like(t, 30.0), PARAMS) == 0.0

    def test_loyd_point_exact(self):
        # constant reel-out at v_w/3 in full crosswind hits the Loyd limit
        t = np.linspace(0.0, 60.0, 400)
        l_dot = np.full_like(t, WIND.v_w / 3.0)
        v_a = np.full_like(t, PARAMS.glide_ratio * (WIND.v_w - WIND.v_w / 3.0))
        assert average_power(t, l_dot, v_a, PARAMS) == pytest.approx(
            loyd_limit(WIND, PARAMS), rel=1e-12
        )

    def test_antisymmetric_profile_cancels(self):
        t = np.linspace(0.0, 2.0 * math.pi, 501)
        l_dot = np.sin(t)
        v_a = np.full_like(t, 20.0)
        assert average_power(t, l_dot, v_a, PARAMS) == pytest.approx(0.0, abs=1e-9)


class TestSimulateReducedCycle:
    def test_stationary_fixed_point(self):
        n = 12
        dec = CycleDecision(
            psi_nodes=np.zeros(n),
            l_dot_nodes=np.zeros(n),
            T=80.0,
            theta0=math.atan(PARAMS.glide_ratio),
        )
        cyc = simulate_reduced_cycle(dec, OptimizerConstraints(), WIND, PARAMS)
        assert cyc.p_bar == pytest.approx(0.0, abs=1e-9)
        assert abs(cyc.residual_theta) < 1e-9
        assert abs(cyc.residual_l) < 1e-9

    def test_tether_loop_invariant_under_speed_time_scaling(self):
        n = 12
        rng = np.random.default_rng(4)
        l_dot = rng.uniform(-2.0, 2.0, n)
        base = CycleDecision(np.full(n, 0.4), l_dot, 100.0, 1.0)
        fast = CycleDecision(np.full(n, 0.4), 2.0 * l_dot, 50.0, 1.0)
        c1 = simulate_reduced_cycle(base, OptimizerConstraints(), WIND, PARAMS)
        c2 = simulate_reduced_cycle(fast, OptimizerConstraints(), WIND, PARAMS)
        assert c2.residual_l == pytest.approx(c1.residual_l, abs=1e-9)

    def test_infeasible_decision_flagged_not_thrown(self):
        n = 10
        dec = CycleDecision(np.zeros(n), np.full(n, 2.0), 60.0, 0.9)
        cyc = simulate_reduced_cycle(dec, OptimizerConstraints(), WIND, PARAMS)
        assert abs(cyc.residual_l) > 1.0  # reports, does not raise


class TestOptimizeCycle:
    def test_converges_into_paper_band(self, coarse_optimum):
        opt = coarse_optimum
        assert opt.converged
        assert 0.18 <= opt.ratio <= 0.30
        assert abs(opt.residual_theta) < 1e-4
        assert abs(opt.residual_l) < 1e-6

    def test_below_loyd(self, coarse_optimum):
        assert coarse_optimum.p_bar <= loyd_limit(WIND, PARAMS)

    def test_deterministic_given_seed(self):
        a = optimize_cycle(OptimizerConstraints(), WIND, PARAMS, **COARSE)
        b = optimize_cycle(OptimizerConstraints(), WIND, PARAMS, **COARSE)
        np.testing.assert_array_equal(a.l_dot, b.l_dot)
        assert a.p_bar == b.p_bar

    def test_tighter_reel_in_limit_strictly_hurts(self):
        ratios = []
        for lim_in, sf, t_max in ((-0.5, 0.6, 250.0), (-0.3, 0.5, 350.0), (-0.1, 0.25, 900.0)):
            cons = OptimizerConstraints(alpha_limit_in=lim_in, t_max=t_max)
            opt = optimize_cycle(cons, WIND, PARAMS, switch_fraction=sf, **COARSE)
            assert opt.converged
            ratios.append(opt.ratio)
        assert ratios[0] > ratios[1] > ratios[2]

    def test_wind_scaling_law(self, coarse_optimum):
        wind2 = WindCondition(v_w=20.0)
        cons2 = OptimizerConstraints(t_min=20.0, t_max=125.0)
        opt2 = optimize_cycle(cons2, wind2, PARAMS, **COARSE)
        assert opt2.converged
        assert opt2.p_bar == pytest.approx(8.0 * coarse_optimum.p_bar, rel=0.05)
        assert np.max(opt2.l_dot) == pytest.approx(2.0 * np.max(coarse_optimum.l_dot), rel=0.05)

    def test_reel_out_near_one_over_a_rule(self, coarse_optimum):
        # at the most crosswind point the reel-out speed tracks v_w cos(theta)/a
        opt = coarse_optimum
        i = int(np.argmax(opt.l_dot))
        rule = WIND.v_w * math.cos(opt.theta[i]) / 3.5
        assert opt.l_dot[i] == pytest.approx(rule, rel=0.20)

    def test_quadrature_converges_with_node_doubling(self, coarse_optimum):
        # re-express the optimal controls on a doubled node grid: same
        # piecewise-linear functions, so P_bar must be stable
        opt = coarse_optimum
        n = len(opt.t)
        dec_fine = CycleDecision(
            psi_nodes=np.interp(np.linspace(0, 1, 31), np.linspace(0, 1, n), opt.psi),
            l_dot_nodes=np.interp(np.linspace(0, 1, 31), np.linspace(0, 1, n), opt.l_dot),
            T=float(opt.t[-1]),
            theta0=float(opt.theta[0]),
        )
        dec_coarse = CycleDecision(
            psi_nodes=np.interp(np.linspace(0, 1, 16), np.linspace(0, 1, n), opt.psi),
            l_dot_nodes=np.interp(np.linspace(0, 1, 16), np.linspace(0, 1, n), opt.l_dot),
            T=float(opt.t[-1]),
            theta0=float(opt.theta[0]),
        )
        c1 = simulate_reduced_cycle(dec_coarse, OptimizerConstraints(), WIND, PARAMS)
        c2 = simulate_reduced_cycle(dec_fine, OptimizerConstraints(), WIND, PARAMS)
        assert c2.p_bar == pytest.approx(c1.p_bar, rel=0.005)


class TestFitWinchLaw:
    def test_exact_linear_recovery(self):
        theta = np.linspace(1.06, 1.85, 300)
        alpha = -0.6 * (theta - 1.05)
        fit = fit_winch_law(theta, alpha * WIND.v_w, WIND.v_w)
        assert fit.theta0 == pytest.approx(1.05, abs=1e-9)
        assert fit.slope == pytest.approx(-0.6, abs=1e-9)

    def test_insufficient_samples(self):
        with pytest.raises(InsufficientSamplesError):
            fit_winch_law(np.array([1.0, 1.1]), np.array([-0.5, -1.0]), 10.0)

    def test_recovers_pivot_from_coarse_optimum(self, coarse_optimum):
        fit = fit_winch_law(coarse_optimum.theta, coarse_optimum.l_dot, WIND.v_w)
        assert 0.85 <= fit.theta0 <= 1.25
        assert -0.85 <= fit.slope <= -0.35


class TestCycleCsv:
    def test_round_trip(self, coarse_optimum, tmp_path):
        path = tmp_path / "cycle.csv"
        write_cycle_csv(coarse_optimum, path)
        cols = read_cycle_columns(path)
        assert list(cols) == ["t", "theta", "l", "psi", "l_dot", "v_a", "F", "P"]
        np.testing.assert_allclose(cols["theta"], coarse_optimum.theta, rtol=1e-8)
        np.testing.assert_allclose(cols["l_dot"], coarse_optimum.l_dot, rtol=1e-8, atol=1e-8)

    def test_summary_record(self, coarse_optimum):
        s = cycle_summary(coarse_optimum)
        assert set(s) >= {"P_bar", "ratio", "iterations", "converged"}
        assert s["ratio"] == pytest.approx(coarse_optimum.ratio)
