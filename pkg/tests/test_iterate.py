"""Tests for the operator, the exponential integrator and the monotone iteration."""

import math

import numpy as np
import pytest

from nicholson import MonotonicityBreach
from nicholson.bounds import check_gamma_membership, lower_from, upper_from
from nicholson.iterate import (
    apply_operator_H, convolve, fixed_point_residual, integrator_weights, iterate, tail_budget,
)
from nicholson.model import derive_constants
from nicholson.profile import GridSpec, Profile, constant_profile, sample, sup_diff


class TestOperatorH:
    def test_zero_profile(self, reference_params, reference_grid):
        out = apply_operator_H(constant_profile(0.0, reference_grid), reference_params, 6.7093)
        assert np.all(out == 0.0)

    def test_equilibrium_profile(self, reference_params, reference_grid):
        kappa = math.log(2)
        out = apply_operator_H(constant_profile(kappa, reference_grid), reference_params, 6.7093)
        assert np.allclose(out, 6.7093 * kappa, atol=1e-12)
        assert out[0] == pytest.approx(4.650, abs=1e-3)

    def test_direct_evaluation(self, reference_params, reference_grid, reference_consts):
        u = upper_from(reference_consts)
        p = sample(u, reference_grid, reference_consts.lam, reference_consts.kappa)
        out = apply_operator_H(p, reference_params, reference_consts.beta)
        i = int(round((-5.0 - reference_grid.t_min) / reference_grid.h))
        expected = ((reference_consts.beta - 1.0) * u(-5.0) - 2.0 * u(-5.15)
                    + 6.0 * u(-6.8) * math.exp(-u(-6.8)))
        assert out[i] == pytest.approx(expected, rel=1e-12)


class TestConvolve:
    def test_weights_integrate_constants(self):
        beta, h = 6.7093, 0.01
        a, w0, w1 = integrator_weights(beta, h)
        assert a + beta * (w0 + w1) == pytest.approx(1.0, abs=1e-15)
        assert w0 > 0 and w1 > 0

    def test_constant_input_steady_state(self, reference_grid):
        beta, lam, c = 6.7093, 0.342, 2.5
        x = convolve(np.full(reference_grid.n + 1, c), beta, reference_grid, lam)
        span = reference_grid.t_max - reference_grid.t_min
        assert abs(x.values[-1] - c / beta) <= c * math.exp(-beta * span) + 1e-12
        assert x.values[0] == pytest.approx(c / (beta + lam))

    def test_exponential_input(self, reference_grid):
        beta, lam = 6.7093, 0.342
        t = reference_grid.nodes
        x = convolve(np.exp(lam * t), beta, reference_grid, lam)
        exact = np.exp(lam * t) / (beta + lam)
        assert np.max(np.abs(x.values / exact - 1.0)) <= 1e-6

    def test_linear_input_is_exact(self):
        spec = GridSpec(-2.0, 3.0, 0.05)
        beta = 4.0
        t = spec.nodes
        # x(t) = int_{-inf}^t e^{-beta(t-s)} s ds = t/beta - 1/beta^2; seed with the true value
        x = convolve(t, beta, spec, left_rate=0.0)
        shift = (t[0] / beta - 1 / beta ** 2) - x.values[0]
        decay = shift * np.exp(-beta * (t - t[0]))
        assert np.allclose(x.values + decay, t / beta - 1 / beta ** 2, atol=1e-13)

    def test_first_iterate_sandwiched(self, reference_params, reference_grid, certified_consts):
        c = certified_consts
        upper = sample(upper_from(c), reference_grid, c.lam, c.kappa)
        lower = lower_from(c)(reference_grid.nodes)
        x1 = convolve(apply_operator_H(upper, reference_params, c.beta), c.beta, reference_grid, c.lam,
                      c.kappa)
        slack = 1e-10 * c.kappa
        assert np.all(x1.values <= upper.values + slack)
        assert np.all(x1.values >= lower - slack)


class TestIterate:
    def test_converges(self, converged):
        assert converged.converged
        assert converged.steps <= 500
        assert converged.gaps[-1] < 1e-8

    def test_gaps_nonincreasing(self, converged):
        assert converged.gaps_nonincreasing
        assert all(g > 0 for g in converged.gaps[:-1])

    def test_ordering_flags(self, converged):
        assert converged.all_ordered
        assert len(converged.p_checks) == converged.steps

    def test_exponential_weight_properties(self, converged):
        summary = converged.summary()
        assert summary["p3_failures"] == []
        assert summary["p4_failures"] == []

    def test_final_profile_limits(self, converged, certified_consts):
        kappa = certified_consts.kappa
        final = converged.final
        assert final.is_monotone(slack=1e-10 * kappa)
        assert abs(final.values[0]) <= 1e-3 * kappa
        assert abs(final.values[-1] - kappa) <= 1e-3 * kappa

    def test_saved_iterates_ordered(self, converged, certified_consts, reference_grid):
        saved = converged.saved
        assert len(saved) == 4
        slack = 1e-10 * certified_consts.kappa
        lower = lower_from(certified_consts)(reference_grid.nodes)
        upper = upper_from(certified_consts)(reference_grid.nodes)
        assert np.array_equal(saved[0].values, upper)
        for prev, nxt in zip(saved, saved[1:]):
            assert np.all(nxt.values <= prev.values + slack)
        assert np.all(saved[-1].values >= lower - slack)

    def test_fixed_point_residual(self, converged, reference_params, certified_consts):
        assert fixed_point_residual(converged.final, reference_params, certified_consts.beta) < 1e-7

    def test_tail_budget_reported(self, converged, certified_consts):
        assert 0 < converged.tail_budget < 1e-3 * certified_consts.kappa

    def test_left_tail_does_not_drift(self, converged, certified_consts, reference_grid):
        # a tail rebuilt from x_m(t_min) shrinks ~5e-6 per step and never settles
        u_min = upper_from(certified_consts)(reference_grid.t_min)
        assert converged.final.left_anchor == pytest.approx(u_min, rel=1e-15)
        assert converged.final.values[0] == pytest.approx(u_min, rel=1e-4)
        assert converged.gaps[-1] < 1e-3 * converged.gaps[0]

    def test_converges_with_pinned_beta(self, reference_params, reference_grid):
        consts = derive_constants(reference_params, beta=6.7093)
        result = iterate(reference_params, consts, reference_grid, tol=1e-8, max_iter=500)
        assert result.converged
        assert result.gaps[-1] < 1e-8

    def test_single_step_is_in_gamma(self, reference_params, certified_consts, reference_grid):
        c = certified_consts
        result = iterate(reference_params, c, reference_grid, tol=math.inf, max_iter=1)
        assert result.steps == 1 and result.converged
        report = check_gamma_membership(result.final, c.beta, c.kappa, reference_grid)
        assert report.all_passed, report.lines()

    def test_zero_steps_returns_upper_solution(self, reference_params, certified_consts, reference_grid):
        c = certified_consts
        result = iterate(reference_params, c, reference_grid, max_iter=0)
        assert result.steps == 0 and not result.converged
        assert np.array_equal(result.final.values, upper_from(c)(reference_grid.nodes))

    def test_equilibrium_is_fixed_point(self, reference_params, certified_consts, reference_grid):
        start = constant_profile(certified_consts.kappa, reference_grid)
        result = iterate(reference_params, certified_consts, reference_grid, max_iter=1, initial=start)
        assert sup_diff(result.final, start) <= 1e-12

    def test_breach_reports_step_and_node(self, reference_params, certified_consts, reference_grid):
        # a decreasing start cannot stay monotone
        values = np.linspace(1.0, 0.5, reference_grid.n + 1)
        start = Profile(reference_grid, values, certified_consts.lam, certified_consts.kappa)
        with pytest.raises(MonotonicityBreach) as info:
            iterate(reference_params, certified_consts, reference_grid, max_iter=3, initial=start)
        assert info.value.step == 1
        assert 0 <= info.value.node <= reference_grid.n


def test_tail_budget_formula():
    assert tail_budget(-2.0, 4.0, 1.0) == pytest.approx(2.0 * (1 / 4 - 1 / 5))
